use std::f64::consts::PI;

use lcp_autodiff::{backward, Axis, Graph, Tensor, Value};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{BoundMlp, Mlp, MlpSpec};
use crate::error::{LcpError, Result};

/// Which slice of the policy input the gradient penalty differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpScope {
    /// Observation plus latent inputs.
    Whole,
    /// Observation only.
    Current,
}

/// Diagonal Gaussian policy with a state-independent log standard deviation.
/// The mean network sees `[normalized observation, latent]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    /// `1 × action_dim`
    pub log_std: Tensor,
    pub obs_dim: usize,
    pub latent_dim: usize,
}

fn check_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(LcpError::NonFinite(what.to_string()))
    }
}

fn check_cols(t: &Tensor, expected: usize, what: &'static str) -> Result<()> {
    if t.cols() != expected {
        return Err(LcpError::Dimension {
            what,
            expected,
            got: t.cols(),
        });
    }
    Ok(())
}

impl GaussianPolicy {
    pub fn new(
        obs_dim: usize,
        latent_dim: usize,
        action_dim: usize,
        spec: &MlpSpec,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self {
            mean: Mlp::new(obs_dim + latent_dim, action_dim, spec, 0.01, rng)?,
            log_std: Tensor::zeros(1, action_dim),
            obs_dim,
            latent_dim,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.obs_dim + self.latent_dim
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.mean.params();
        p.push(&self.log_std);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.mean.params_mut();
        p.push(&mut self.log_std);
        p
    }

    pub fn bind(&self, graph: &Graph) -> BoundPolicy {
        BoundPolicy {
            mean: self.mean.bind(graph),
            log_std: graph.param(self.log_std.clone()),
            obs_dim: self.obs_dim,
            latent_dim: self.latent_dim,
        }
    }

    /// Joins observation and latent rows into the network input.
    pub fn join_input(&self, obs: &Tensor, latent: Option<&Tensor>) -> Result<Tensor> {
        check_cols(obs, self.obs_dim, "policy observation")?;
        match latent {
            None if self.latent_dim == 0 => Ok(obs.clone()),
            None => Err(LcpError::Dimension {
                what: "policy latent",
                expected: self.latent_dim,
                got: 0,
            }),
            Some(z) => {
                check_cols(z, self.latent_dim, "policy latent")?;
                if z.rows() != obs.rows() {
                    return Err(LcpError::LengthMismatch(obs.rows(), z.rows()));
                }
                Ok(Tensor::from_fn(obs.rows(), self.input_dim(), |r, c| {
                    if c < self.obs_dim {
                        obs.get(r, c)
                    } else {
                        z.get(r, c - self.obs_dim)
                    }
                }))
            }
        }
    }

    /// Mean action for each row, without recording gradients.
    pub fn mean_action(&self, obs: &Tensor, latent: Option<&Tensor>) -> Result<Tensor> {
        self.mean.forward(&self.join_input(obs, latent)?)
    }

    /// Draws `mean + exp(log_std) ⊙ ε` per row and returns the actions with
    /// their log-densities.
    pub fn sample_action(
        &self,
        obs: &Tensor,
        latent: Option<&Tensor>,
        rng: &mut impl Rng,
    ) -> Result<(Tensor, Vec<f64>)> {
        let mean = self.mean_action(obs, latent)?;
        let d = self.action_dim();
        let std: Vec<f64> = self.log_std.data().iter().map(|l| l.exp()).collect();
        let norm_const = self.log_std.sum() + 0.5 * d as f64 * (2.0 * PI).ln();
        let mut actions = mean.clone();
        let mut log_probs = Vec::with_capacity(mean.rows());
        for r in 0..mean.rows() {
            let mut quad = 0.0;
            for (c, s) in std.iter().enumerate() {
                let eps: f64 = rng.sample(StandardNormal);
                actions.set(r, c, mean.get(r, c) + s * eps);
                quad += eps * eps;
            }
            log_probs.push(-0.5 * quad - norm_const);
        }
        Ok((actions, log_probs))
    }
}

/// A [`GaussianPolicy`] whose parameters are graph leaves.
#[derive(Debug, Clone)]
pub struct BoundPolicy {
    pub mean: BoundMlp,
    pub log_std: Value,
    pub obs_dim: usize,
    pub latent_dim: usize,
}

impl BoundPolicy {
    pub fn params(&self) -> Vec<Value> {
        let mut p = self.mean.params();
        p.push(self.log_std.clone());
        p
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.shape().cols
    }

    fn input(&self, obs: &Value, latent: Option<&Value>) -> Result<Value> {
        if obs.shape().cols != self.obs_dim {
            return Err(LcpError::Dimension {
                what: "policy observation",
                expected: self.obs_dim,
                got: obs.shape().cols,
            });
        }
        match latent {
            None if self.latent_dim == 0 => Ok(obs.clone()),
            None => Err(LcpError::Dimension {
                what: "policy latent",
                expected: self.latent_dim,
                got: 0,
            }),
            Some(z) => {
                if z.shape().cols != self.latent_dim {
                    return Err(LcpError::Dimension {
                        what: "policy latent",
                        expected: self.latent_dim,
                        got: z.shape().cols,
                    });
                }
                Ok(obs.graph().concat(&[obs, z], Axis::Col)?)
            }
        }
    }

    /// Mean action, differentiable w.r.t. inputs and parameters.
    pub fn forward(&self, obs: &Value, latent: Option<&Value>) -> Result<Value> {
        self.mean.forward(&self.input(obs, latent)?)
    }

    /// Per-row Gaussian log-density, shape `N × 1`.
    pub fn log_prob(&self, obs: &Value, latent: Option<&Value>, action: &Value) -> Result<Value> {
        for (t, what) in [(obs.tensor(), "observation"), (action.tensor(), "action")] {
            check_finite(&t, what)?;
        }
        if let Some(z) = latent {
            check_finite(&z.tensor(), "latent")?;
        }
        let d = self.action_dim();
        if action.shape().cols != d {
            return Err(LcpError::Dimension {
                what: "action",
                expected: d,
                got: action.shape().cols,
            });
        }
        let mean = self.forward(obs, latent)?;
        let inv_std = self.log_std.neg()?.exp()?;
        let z = action.sub(&mean)?.mul(&inv_std)?;
        let lp = z
            .square()?
            .sum_axis(Axis::Col)?
            .scale(-0.5)?
            .sub(&self.log_std.sum()?)?
            .add_scalar(-0.5 * d as f64 * (2.0 * PI).ln())?;
        Ok(lp)
    }

    /// Differential entropy of the action distribution (state independent).
    pub fn entropy(&self) -> Result<Value> {
        let d = self.action_dim() as f64;
        Ok(self
            .log_std
            .sum()?
            .add_scalar(0.5 * d * (1.0 + (2.0 * PI).ln()))?)
    }
}

/// `∇ₛ log π(a|s)` for every row, recorded so that its norm can be
/// differentiated w.r.t. the policy parameters.
///
/// `obs` and `latent` are fresh leaves created here, so the returned gradient
/// has one row per sample and `obs_dim` (+ `latent_dim` for
/// [`GpScope::Whole`]) columns.
pub fn input_gradient_of_log_prob(
    policy: &BoundPolicy,
    obs: &Tensor,
    latent: Option<&Tensor>,
    action: &Tensor,
    scope: GpScope,
) -> Result<Value> {
    let graph = policy.log_std.graph();
    let obs_v = graph.param(obs.clone());
    let latent_v = latent.map(|z| match scope {
        GpScope::Whole => graph.param(z.clone()),
        GpScope::Current => graph.constant(z.clone()),
    });
    let action_v = graph.constant(action.clone());
    let lp = policy
        .log_prob(&obs_v, latent_v.as_ref(), &action_v)?
        .sum()?;
    match (&latent_v, scope) {
        (Some(z), GpScope::Whole) => {
            let grads = backward(&lp, &[&obs_v, z], true)?;
            Ok(graph.concat(&[&grads.wrt(&obs_v), &grads.wrt(z)], Axis::Col)?)
        }
        _ => Ok(backward(&lp, &[&obs_v], true)?.wrt(&obs_v)),
    }
}
