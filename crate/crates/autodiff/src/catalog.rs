//! Finite-difference oracle suites: one probe per op kind for first-order
//! gradients, and random compositions for gradients of gradient norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backward::backward;
use crate::check::{check_gradient, relative_error};
use crate::error::Result;
use crate::graph::{Axis, Graph, Value};
use crate::tensor::{Shape, Tensor};

/// Result of running one oracle over many random points.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub name: String,
    pub trials: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl OracleOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// A scalar probe exercising one op kind.
pub struct OpProbe {
    pub name: &'static str,
    pub shape: Shape,
    /// Maps a uniform draw in [−2, 2] into the op's domain.
    pub domain: fn(f64) -> f64,
    pub f: fn(&Value) -> Result<Value>,
}

/// Contracts `v` against a fixed, irregular weight pattern so every output
/// element contributes with a distinct coefficient.
pub fn weigh(v: &Value) -> Result<Value> {
    let s = v.shape();
    let w = Tensor::from_fn(s.rows, s.cols, |r, c| {
        (1.7 * (r * s.cols + c) as f64 + 0.3).cos()
    });
    v.dot(&v.graph().constant(w))
}

fn rows(x: &Value, a: usize, b: usize) -> Result<Value> {
    x.slice(Axis::Row, a, b)
}

fn identity(x: f64) -> f64 {
    x
}

fn positive(x: f64) -> f64 {
    x.abs() + 0.1
}

fn away_from_zero(x: f64) -> f64 {
    x.signum() * (x.abs() + 0.5)
}

/// One probe per supported op kind.
pub fn op_probes() -> Vec<OpProbe> {
    fn p(
        name: &'static str,
        rows: usize,
        cols: usize,
        domain: fn(f64) -> f64,
        f: fn(&Value) -> Result<Value>,
    ) -> OpProbe {
        OpProbe {
            name,
            shape: Shape::new(rows, cols),
            domain,
            f,
        }
    }
    vec![
        p("add", 2, 3, identity, |x| {
            weigh(&rows(x, 0, 1)?.add(&rows(x, 1, 2)?)?)
        }),
        p("sub", 2, 3, identity, |x| {
            weigh(&rows(x, 0, 1)?.sub(&rows(x, 1, 2)?)?)
        }),
        p("mul", 2, 3, identity, |x| {
            weigh(&rows(x, 0, 1)?.mul(&rows(x, 1, 2)?)?)
        }),
        p("matmul", 5, 3, identity, |x| {
            weigh(&rows(x, 0, 2)?.matmul(&rows(x, 2, 5)?)?)
        }),
        p("affine", 6, 3, identity, |x| {
            weigh(&rows(x, 0, 2)?.affine(&rows(x, 2, 5)?, &rows(x, 5, 6)?)?)
        }),
        p("tanh", 2, 3, identity, |x| weigh(&x.tanh()?)),
        p("sin", 2, 3, identity, |x| weigh(&x.sin()?)),
        p("cos", 2, 3, identity, |x| weigh(&x.cos()?)),
        p("elu", 2, 3, identity, |x| weigh(&x.elu()?)),
        p("exp", 2, 3, identity, |x| weigh(&x.exp()?)),
        p("log", 2, 3, positive, |x| weigh(&x.ln()?)),
        p("square", 2, 3, identity, |x| weigh(&x.square()?)),
        p("sqrt", 2, 3, positive, |x| weigh(&x.sqrt()?)),
        p("sum", 2, 3, identity, |x| x.sum()),
        p("sum_rows", 3, 2, identity, |x| {
            weigh(&x.sum_axis(Axis::Row)?)
        }),
        p("sum_cols", 3, 2, identity, |x| {
            weigh(&x.sum_axis(Axis::Col)?)
        }),
        p("mean", 2, 3, identity, |x| x.mean()),
        p("mean_rows", 3, 2, identity, |x| {
            weigh(&x.mean_axis(Axis::Row)?)
        }),
        p("mean_cols", 3, 2, identity, |x| {
            weigh(&x.mean_axis(Axis::Col)?)
        }),
        p("dot", 2, 3, identity, |x| {
            rows(x, 0, 1)?.dot(&rows(x, 1, 2)?)
        }),
        p("concat_rows", 3, 2, identity, |x| {
            let g = x.graph();
            weigh(&g.concat(&[&rows(x, 2, 3)?, &rows(x, 0, 2)?], Axis::Row)?)
        }),
        p("concat_cols", 2, 3, identity, |x| {
            let g = x.graph();
            weigh(&g.concat(&[&x.cols(2, 3)?, &x.cols(0, 2)?, &x.cols(1, 2)?], Axis::Col)?)
        }),
        p("slice", 3, 4, identity, |x| weigh(&x.cols(1, 3)?)),
        p("pad", 2, 2, identity, |x| weigh(&x.pad(Axis::Col, 1, 4)?)),
        p("broadcast_row", 1, 3, identity, |x| {
            weigh(&x.broadcast_to(Shape::new(4, 3))?)
        }),
        p("broadcast_col", 2, 1, identity, |x| {
            weigh(&x.broadcast_to(Shape::new(2, 3))?)
        }),
        p("broadcast_scalar", 1, 1, identity, |x| {
            weigh(&x.broadcast_to(Shape::new(2, 2))?)
        }),
        p("negate", 2, 3, identity, |x| weigh(&x.neg()?)),
        p("reciprocal", 2, 3, away_from_zero, |x| weigh(&x.recip()?)),
        p("transpose", 2, 3, identity, |x| weigh(&x.t()?)),
        p("scale", 2, 3, identity, |x| weigh(&x.scale(-1.3)?)),
        p("add_scalar", 2, 3, identity, |x| {
            weigh(&x.add_scalar(0.7)?.square()?)
        }),
        p("clamp", 2, 3, identity, |x| weigh(&x.clamp(-1.0, 1.0)?)),
        p("minimum", 2, 3, identity, |x| {
            weigh(&rows(x, 0, 1)?.minimum(&rows(x, 1, 2)?)?)
        }),
    ]
}

fn sample_point(rng: &mut impl Rng, shape: Shape, domain: fn(f64) -> f64) -> Tensor {
    Tensor::from_fn(shape.rows, shape.cols, |_, _| {
        domain(rng.random_range(-2.0..2.0))
    })
}

/// Runs every op probe at `trials` random points with central differences.
pub fn first_order_suite(
    trials: usize,
    seed: u64,
    step: f64,
    tolerance: f64,
) -> Result<Vec<OracleOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for probe in op_probes() {
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let point = sample_point(&mut rng, probe.shape, probe.domain);
            let report = check_gradient(probe.f, &point, step, tolerance)?;
            worst = worst.max(report.max_rel_error);
        }
        out.push(OracleOutcome {
            name: probe.name.to_string(),
            trials,
            max_rel_error: worst,
            tolerance,
        });
    }
    Ok(out)
}

/// One stage of a random scalar composition.
#[derive(Debug, Clone)]
pub enum Stage {
    Tanh,
    Sin,
    Cos,
    Elu,
    Square,
    /// `exp(x / 2)`
    HalfExp,
    Affine {
        weight: Tensor,
        bias: Tensor,
    },
}

/// `x ↦ readout · stageₖ(…stage₁(x))` for a `1×dim` input.
#[derive(Debug, Clone)]
pub struct Composition {
    pub stages: Vec<Stage>,
    pub readout: Tensor,
}

impl Composition {
    pub fn random(rng: &mut impl Rng, dim: usize, depth: usize) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        let stages = (0..depth)
            .map(|_| match rng.random_range(0..7) {
                0 => Stage::Tanh,
                1 => Stage::Sin,
                2 => Stage::Cos,
                3 => Stage::Elu,
                4 => Stage::Square,
                5 => Stage::HalfExp,
                _ => Stage::Affine {
                    weight: Tensor::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0) * scale),
                    bias: Tensor::from_fn(1, dim, |_, _| rng.random_range(-0.5..0.5)),
                },
            })
            .collect();
        let readout = Tensor::from_fn(1, dim, |_, _| rng.random_range(-1.0..1.0));
        Self { stages, readout }
    }

    pub fn apply(&self, x: &Value) -> Result<Value> {
        let g = x.graph();
        let mut h = x.clone();
        for stage in &self.stages {
            h = match stage {
                Stage::Tanh => h.tanh()?,
                Stage::Sin => h.sin()?,
                Stage::Cos => h.cos()?,
                Stage::Elu => h.elu()?,
                Stage::Square => h.square()?,
                Stage::HalfExp => h.scale(0.5)?.exp()?,
                Stage::Affine { weight, bias } => {
                    h.affine(&g.constant(weight.clone()), &g.constant(bias.clone()))?
                }
            };
        }
        h.dot(&g.constant(self.readout.clone()))
    }
}

/// `‖∇ₓ f(x)‖²` evaluated with a first-order backward pass only.
pub fn grad_norm_sq<F>(f: &F, point: &Tensor) -> Result<f64>
where
    F: Fn(&Value) -> Result<Value>,
{
    let g = Graph::new();
    let x = g.param(point.clone());
    let y = f(&x)?;
    let grad = backward(&y, &[&x], false)?.tensor(&x);
    Ok(grad.data().iter().map(|v| v * v).sum())
}

/// Compares the double-backprop gradient of `‖∇ₓ f‖²` with central
/// differences of the first-order squared norm. Returns
/// `(analytic, numeric, max relative error)`.
pub fn second_order_check<F>(f: &F, point: &Tensor, step: f64) -> Result<(Tensor, Tensor, f64)>
where
    F: Fn(&Value) -> Result<Value>,
{
    let g = Graph::new();
    let x = g.param(point.clone());
    let y = f(&x)?;
    let grad = backward(&y, &[&x], true)?.wrt(&x);
    let norm_sq = grad.square()?.sum()?;
    let analytic = backward(&norm_sq, &[&x], false)?.tensor(&x);

    let mut numeric = Tensor::zeros(point.rows(), point.cols());
    let mut probe = point.clone();
    for i in 0..point.len() {
        let x0 = point.data()[i];
        probe.data_mut()[i] = x0 + step;
        let hi = grad_norm_sq(f, &probe)?;
        probe.data_mut()[i] = x0 - step;
        let lo = grad_norm_sq(f, &probe)?;
        probe.data_mut()[i] = x0;
        numeric.data_mut()[i] = (hi - lo) / (2.0 * step);
    }
    let err = relative_error(&analytic, &numeric);
    Ok((analytic, numeric, err))
}

/// Random compositions of depth 1..=`max_depth` checked with
/// [`second_order_check`].
pub fn second_order_suite(
    count: usize,
    max_depth: usize,
    seed: u64,
    step: f64,
    tolerance: f64,
) -> Result<OracleOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let dim = rng.random_range(1..=4);
        let depth = 1 + i % max_depth;
        let comp = Composition::random(&mut rng, dim, depth);
        let point = sample_point(&mut rng, Shape::new(1, dim), identity);
        let (_, _, err) = second_order_check(&|x: &Value| comp.apply(x), &point, step)?;
        worst = worst.max(err);
    }
    Ok(OracleOutcome {
        name: format!("grad of grad-norm, {count} compositions, depth <= {max_depth}"),
        trials: count,
        max_rel_error: worst,
        tolerance,
    })
}

/// `d/dx (d sin x / dx)² = −sin 2x` by double backprop at `x`.
pub fn sin_grad_norm_derivative(x: f64) -> Result<f64> {
    let g = Graph::new();
    let v = g.param(Tensor::scalar(x));
    let f = v.sin()?;
    let df = backward(&f, &[&v], true)?.wrt(&v);
    let h = df.square()?;
    Ok(backward(&h, &[&v], false)?.tensor(&v).item())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_have_unique_names() {
        let mut names: Vec<_> = op_probes().iter().map(|p| p.name).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }

    #[test]
    fn sin_case_matches_closed_form() {
        let got = sin_grad_norm_derivative(0.5).unwrap();
        assert!((got + 1.0f64.sin()).abs() < 1e-12);
    }
}
