//! Finite-difference and closed-form checks of the gradient penalty.

use lcp_autodiff::catalog::OracleOutcome;
use lcp_autodiff::{check_gradient, Graph, Tensor, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nets::{Activation, GaussianPolicy, GpScope, Linear, Mlp, MlpSpec};
use crate::trainer::lcp_penalty;

fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Penalty as a function of parameter tensor `k` of `policy`.
fn penalty_wrt_param<'a>(
    policy: &'a GaussianPolicy,
    k: usize,
    obs: &'a Tensor,
    latent: Option<&'a Tensor>,
    action: &'a Tensor,
    scope: GpScope,
) -> impl Fn(&Value) -> lcp_autodiff::Result<Value> + 'a {
    move |x: &Value| {
        let mut bound = policy.bind(x.graph());
        let n_mean = bound.mean.layers.len() * 2;
        if k == n_mean {
            bound.log_std = x.clone();
        } else if k.is_multiple_of(2) {
            bound.mean.layers[k / 2].0 = x.clone();
        } else {
            bound.mean.layers[k / 2].1 = x.clone();
        }
        lcp_penalty(&bound, obs, latent, action, scope).map_err(|e| match e {
            crate::LcpError::Autodiff(a) => a,
            other => lcp_autodiff::AutodiffError::InvalidInput {
                op: "lcp_penalty",
                reason: other.to_string(),
            },
        })
    }
}

/// `∂ penalty / ∂θ` against central differences for random tanh policies
/// with hidden `[16, 16]`, observation width ≤ 16 and random batches.
pub fn penalty_gradient_suite(
    trials: usize,
    seed: u64,
    step: f64,
    tolerance: f64,
) -> Result<OracleOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = MlpSpec::new(vec![16, 16], Activation::Tanh);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let obs_dim = rng.random_range(2..=16);
        let latent_dim = if trial % 2 == 0 {
            0
        } else {
            rng.random_range(1..=4)
        };
        let act_dim = rng.random_range(1..=4);
        let rows = rng.random_range(1..=6);
        let mut policy = GaussianPolicy::new(obs_dim, latent_dim, act_dim, &spec, &mut rng)?;
        // Output gain of 1 so the penalty is not vanishingly small.
        let last = policy.mean.layers.len() - 1;
        policy.mean.layers[last] = Linear::init(16, act_dim, 1.0, &mut rng);
        policy.log_std = random_tensor(&mut rng, 1, act_dim, 0.5);
        let obs = random_tensor(&mut rng, rows, obs_dim, 1.5);
        let latent = (latent_dim > 0).then(|| random_tensor(&mut rng, rows, latent_dim, 1.0));
        let action = random_tensor(&mut rng, rows, act_dim, 1.0);
        let scope = if trial % 4 == 3 {
            GpScope::Current
        } else {
            GpScope::Whole
        };
        for (k, p) in policy.params().into_iter().enumerate() {
            let f = penalty_wrt_param(&policy, k, &obs, latent.as_ref(), &action, scope);
            let report = check_gradient(f, p, step, tolerance)?;
            worst = worst.max(report.max_rel_error);
        }
    }
    Ok(OracleOutcome {
        name: format!("penalty parameter gradient, {trials} random policies"),
        trials,
        max_rel_error: worst,
        tolerance,
    })
}

/// For a linear mean `μ(s) = sW` the per-sample penalty is
/// `‖W diag(1/σ²)(a − sW)ᵀ‖²`; returns the worst absolute deviation.
pub fn linear_identity_suite(trials: usize, seed: u64, tolerance: f64) -> Result<OracleOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (n, d, rows) = (
            rng.random_range(1..=8),
            rng.random_range(1..=4),
            rng.random_range(1..=5),
        );
        let w = random_tensor(&mut rng, n, d, 1.0);
        let log_std = random_tensor(&mut rng, 1, d, 0.7);
        let obs = random_tensor(&mut rng, rows, n, 2.0);
        let action = random_tensor(&mut rng, rows, d, 2.0);
        let policy = linear_policy(&w, &log_std);

        let graph = Graph::new();
        let penalty =
            lcp_penalty(&policy.bind(&graph), &obs, None, &action, GpScope::Whole)?.item();

        let mut expected = 0.0;
        for r in 0..rows {
            let resid: Vec<f64> = (0..d)
                .map(|j| {
                    let mu: f64 = (0..n).map(|i| obs.get(r, i) * w.get(i, j)).sum();
                    (action.get(r, j) - mu) / (2.0 * log_std.get(0, j)).exp()
                })
                .collect();
            for i in 0..n {
                let g: f64 = (0..d).map(|j| w.get(i, j) * resid[j]).sum();
                expected += g * g;
            }
        }
        expected /= rows as f64;
        worst = worst.max((penalty - expected).abs() / expected.abs().max(1.0));
    }
    Ok(OracleOutcome {
        name: format!("linear-mean penalty identity, {trials} cases"),
        trials,
        max_rel_error: worst,
        tolerance,
    })
}

/// Policy whose mean is exactly `sW`: a single output layer, no hidden
/// activation.
fn linear_policy(w: &Tensor, log_std: &Tensor) -> GaussianPolicy {
    GaussianPolicy {
        mean: Mlp {
            layers: vec![Linear {
                weight: w.clone(),
                bias: Tensor::zeros(1, w.cols()),
            }],
            activation: Activation::Tanh,
        },
        log_std: log_std.clone(),
        obs_dim: w.rows(),
        latent_dim: 0,
    }
}
