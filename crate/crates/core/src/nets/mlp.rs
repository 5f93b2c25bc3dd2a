use lcp_autodiff::{Graph, Tensor, Value};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LcpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Elu,
}

/// Hidden layer widths and activation; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(hidden: Vec<usize>, activation: Activation) -> Self {
        Self { hidden, activation }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(LcpError::invalid(
                field,
                "at least one hidden layer is required",
            ));
        }
        if self.hidden.contains(&0) {
            return Err(LcpError::invalid(field, "layer widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `in × out`
    pub weight: Tensor,
    /// `1 × out`
    pub bias: Tensor,
}

impl Linear {
    /// Uniform `±1/√in` initialization scaled by `gain`, zero bias.
    pub fn init(input: usize, output: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let bound = gain / (input.max(1) as f64).sqrt();
        Self {
            weight: Tensor::from_fn(input, output, |_, _| rng.random_range(-bound..=bound)),
            bias: Tensor::zeros(1, output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    /// The last layer is initialized with `output_gain` (small gains keep
    /// initial policy means near zero).
    pub fn new(
        input: usize,
        output: usize,
        spec: &MlpSpec,
        output_gain: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        spec.validate("mlp")?;
        let mut widths = vec![input];
        widths.extend(&spec.hidden);
        widths.push(output);
        let n = widths.len() - 1;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i + 1 == n { output_gain } else { 1.0 };
                Linear::init(w[0], w[1], gain, rng)
            })
            .collect();
        Ok(Self {
            layers,
            activation: spec.activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// Registers the parameters as differentiable leaves of `graph`.
    pub fn bind(&self, graph: &Graph) -> BoundMlp {
        BoundMlp {
            layers: self
                .layers
                .iter()
                .map(|l| (graph.param(l.weight.clone()), graph.param(l.bias.clone())))
                .collect(),
            activation: self.activation,
        }
    }

    /// Forward pass outside any differentiation context.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let graph = Graph::new();
        graph.set_grad_enabled(false);
        let out = self.bind(&graph).forward(&graph.constant(x.clone()))?;
        Ok((*out.tensor()).clone())
    }
}

/// An [`Mlp`] whose parameters live on a graph.
#[derive(Debug, Clone)]
pub struct BoundMlp {
    pub layers: Vec<(Value, Value)>,
    pub activation: Activation,
}

impl BoundMlp {
    pub fn forward(&self, x: &Value) -> Result<Value> {
        let expected = self.layers[0].0.shape().rows;
        if x.shape().cols != expected {
            return Err(LcpError::Dimension {
                what: "mlp input",
                expected,
                got: x.shape().cols,
            });
        }
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, (w, b)) in self.layers.iter().enumerate() {
            h = h.affine(w, b)?;
            if i < last {
                h = match self.activation {
                    Activation::Tanh => h.tanh()?,
                    Activation::Elu => h.elu()?,
                };
            }
        }
        Ok(h)
    }

    /// Parameter leaves in the same order as [`Mlp::params`].
    pub fn params(&self) -> Vec<Value> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.clone(), b.clone()])
            .collect()
    }
}
