use std::f64::consts::PI;

use lcp_autodiff::{backward, check_gradient, Graph, Tensor, Value};
use lcp_core::nets::{
    input_gradient_of_log_prob, Activation, GaussianPolicy, GpScope, Mlp, MlpSpec,
    RunningNormalizer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Straight-line forward pass with plain loops.
fn oracle_forward(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (i, layer) in mlp.layers.iter().enumerate() {
        let w = &layer.weight;
        let mut out = layer.bias.data().to_vec();
        for (j, o) in out.iter_mut().enumerate() {
            for (k, hk) in h.iter().enumerate() {
                *o += hk * w.get(k, j);
            }
        }
        if i + 1 < mlp.layers.len() {
            for o in out.iter_mut() {
                *o = match mlp.activation {
                    Activation::Tanh => o.tanh(),
                    Activation::Elu => {
                        if *o > 0.0 {
                            *o
                        } else {
                            o.exp() - 1.0
                        }
                    }
                };
            }
        }
        h = out;
    }
    h
}

/// Diagonal Gaussian log density written out directly.
fn oracle_log_density(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let s = ls.exp();
            -0.5 * ((a - m) / s).powi(2) - s.ln() - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

fn random_policy(
    seed: u64,
    obs: usize,
    latent: usize,
    act: usize,
    act_fn: Activation,
) -> GaussianPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = MlpSpec::new(vec![7, 5], act_fn);
    let mut p = GaussianPolicy::new(obs, latent, act, &spec, &mut rng).unwrap();
    // Larger output weights than the default init so the tests are not trivial.
    for layer in p.mean.layers.iter_mut() {
        layer.weight = random_tensor(&mut rng, layer.weight.rows(), layer.weight.cols(), 0.8);
        layer.bias = random_tensor(&mut rng, 1, layer.bias.cols(), 0.3);
    }
    p.log_std = random_tensor(&mut rng, 1, act, 0.5);
    p
}

fn linear_policy(w: &Tensor, log_std: Tensor) -> GaussianPolicy {
    // One hidden layer of width `obs` with identity-like behaviour is not
    // available, so build the linear mean by hand: a single affine layer.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let spec = MlpSpec::new(vec![1], Activation::Tanh);
    let mut p = GaussianPolicy::new(w.cols(), 0, w.rows(), &spec, &mut rng).unwrap();
    p.mean.layers = vec![lcp_core::nets::Linear {
        weight: w.transpose(),
        bias: Tensor::zeros(1, w.rows()),
    }];
    p.log_std = log_std;
    p
}

#[test]
fn zero_weights_give_bias_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = MlpSpec::new(vec![6, 6], Activation::Tanh);
    let mut p = GaussianPolicy::new(4, 0, 2, &spec, &mut rng).unwrap();
    for t in p.mean.params_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    p.mean.layers.last_mut().unwrap().bias = Tensor::row(vec![0.3, -0.9]);
    let obs = random_tensor(&mut rng, 5, 4, 3.0);
    let mean = p.mean_action(&obs, None).unwrap();
    for r in 0..5 {
        assert_eq!(mean.row_slice(r), &[0.3, -0.9]);
    }
}

#[test]
fn single_affine_layer_gives_wx() {
    let w = Tensor::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.25, 0.0, 3.0]]);
    let p = linear_policy(&w, Tensor::zeros(1, 2));
    let x = Tensor::row(vec![0.2, 0.4, -1.0]);
    let mean = p.mean_action(&x, None).unwrap();
    assert_eq!(
        mean.data(),
        &[1.0 * 0.2 - 2.0 * 0.4 - 0.5, 0.25 * 0.2 - 3.0]
    );
}

#[test]
fn forward_matches_straight_line_oracle() {
    for (seed, act) in [(1, Activation::Tanh), (2, Activation::Elu)] {
        let p = random_policy(seed, 5, 2, 3, act);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let obs = random_tensor(&mut rng, 4, 5, 2.0);
        let z = random_tensor(&mut rng, 4, 2, 1.0);
        let mean = p.mean_action(&obs, Some(&z)).unwrap();
        for r in 0..4 {
            let mut input = obs.row_slice(r).to_vec();
            input.extend_from_slice(z.row_slice(r));
            let expect = oracle_forward(&p.mean, &input);
            for (a, b) in mean.row_slice(r).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn latent_width_mismatch_is_an_error() {
    let p = random_policy(1, 5, 2, 3, Activation::Tanh);
    assert!(p.mean_action(&Tensor::zeros(1, 5), None).is_err());
    assert!(p
        .mean_action(&Tensor::zeros(1, 5), Some(&Tensor::zeros(1, 3)))
        .is_err());
    assert!(p
        .mean_action(&Tensor::zeros(1, 4), Some(&Tensor::zeros(1, 2)))
        .is_err());
}

fn graph_log_prob(
    p: &GaussianPolicy,
    obs: &Tensor,
    latent: Option<&Tensor>,
    action: &Tensor,
) -> Tensor {
    let g = Graph::new();
    let b = p.bind(&g);
    let z = latent.map(|z| g.constant(z.clone()));
    let lp = b
        .log_prob(
            &g.constant(obs.clone()),
            z.as_ref(),
            &g.constant(action.clone()),
        )
        .unwrap();
    (*lp.tensor()).clone()
}

#[test]
fn log_prob_at_mean_with_unit_std() {
    let d = 3;
    let mut p = random_policy(4, 2, 0, d, Activation::Tanh);
    p.log_std = Tensor::zeros(1, d);
    let obs = Tensor::row(vec![0.3, -0.1]);
    let mean = p.mean_action(&obs, None).unwrap();
    let lp = graph_log_prob(&p, &obs, None, &mean).item();
    assert!((lp + 0.5 * d as f64 * (2.0 * PI).ln()).abs() < 1e-12);
}

#[test]
fn log_prob_one_sigma_away() {
    let sigma: f64 = 0.6;
    let mut p = random_policy(5, 2, 0, 1, Activation::Tanh);
    p.log_std = Tensor::scalar(sigma.ln());
    let obs = Tensor::row(vec![0.7, 0.2]);
    let mut a = p.mean_action(&obs, None).unwrap();
    a.data_mut()[0] += sigma;
    let lp = graph_log_prob(&p, &obs, None, &a).item();
    let expect = -0.5 - 0.5 * (2.0 * PI * sigma * sigma).ln();
    assert!((lp - expect).abs() < 1e-12);
}

#[test]
fn log_prob_matches_closed_form_density() {
    let p = random_policy(6, 4, 2, 3, Activation::Elu);
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let obs = random_tensor(&mut rng, 6, 4, 2.0);
    let z = random_tensor(&mut rng, 6, 2, 1.0);
    let a = random_tensor(&mut rng, 6, 3, 2.0);
    let lp = graph_log_prob(&p, &obs, Some(&z), &a);
    let mean = p.mean_action(&obs, Some(&z)).unwrap();
    for r in 0..6 {
        let expect = oracle_log_density(mean.row_slice(r), p.log_std.data(), a.row_slice(r));
        assert!((lp.get(r, 0) - expect).abs() < 1e-12);
    }
}

#[test]
fn log_prob_rejects_non_finite_inputs() {
    let p = random_policy(6, 2, 0, 1, Activation::Tanh);
    let g = Graph::new();
    let b = p.bind(&g);
    let obs = g.constant(Tensor::row(vec![f64::NAN, 0.0]));
    assert!(b
        .log_prob(&obs, None, &g.constant(Tensor::scalar(0.0)))
        .is_err());
}

#[test]
fn mean_is_the_per_state_density_maximum() {
    let p = random_policy(7, 3, 0, 2, Activation::Tanh);
    let obs = Tensor::row(vec![0.1, -0.4, 0.9]);
    let mean = p.mean_action(&obs, None).unwrap();
    let best = graph_log_prob(&p, &obs, None, &mean).item();
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    for _ in 0..100 {
        let mut a = mean.clone();
        for v in a.data_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
        assert!(graph_log_prob(&p, &obs, None, &a).item() <= best);
    }
}

#[test]
fn linear_mean_input_gradient_identity() {
    // ∇ₛ log π(a|s) = Wᵀ diag(1/σ²)(a − Ws) for μ(s) = Ws.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (act, obs_dim) = (3, 5);
    let w = random_tensor(&mut rng, act, obs_dim, 1.5);
    let log_std = random_tensor(&mut rng, 1, act, 0.7);
    let p = linear_policy(&w, log_std.clone());
    let s = random_tensor(&mut rng, 4, obs_dim, 2.0);
    let a = random_tensor(&mut rng, 4, act, 2.0);
    let g = Graph::new();
    let b = p.bind(&g);
    let grad = input_gradient_of_log_prob(&b, &s, None, &a, GpScope::Whole).unwrap();
    let grad = grad.tensor();
    for r in 0..4 {
        let ws = w.matmul(&Tensor::column(s.row_slice(r).to_vec()));
        let scaled: Vec<f64> = (0..act)
            .map(|i| (a.get(r, i) - ws.data()[i]) / (2.0 * log_std.data()[i]).exp())
            .collect();
        let expect = w.transpose().matmul(&Tensor::column(scaled));
        for c in 0..obs_dim {
            let e = expect.data()[c];
            assert!((grad.get(r, c) - e).abs() / e.abs().max(1.0) < 1e-8);
        }
    }
}

#[test]
fn input_gradient_vanishes_at_the_mean() {
    let p = random_policy(9, 4, 2, 2, Activation::Tanh);
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let obs = random_tensor(&mut rng, 3, 4, 1.0);
    let z = random_tensor(&mut rng, 3, 2, 1.0);
    let mean = p.mean_action(&obs, Some(&z)).unwrap();
    let g = Graph::new();
    let b = p.bind(&g);
    let grad = input_gradient_of_log_prob(&b, &obs, Some(&z), &mean, GpScope::Whole).unwrap();
    assert_eq!(grad.tensor().max_abs(), 0.0);
}

#[test]
fn scope_selects_the_input_slice() {
    let p = random_policy(10, 4, 2, 2, Activation::Tanh);
    let obs = Tensor::full(3, 4, 0.1);
    let z = Tensor::full(3, 2, -0.3);
    let a = Tensor::full(3, 2, 0.5);
    let g = Graph::new();
    let b = p.bind(&g);
    let whole = input_gradient_of_log_prob(&b, &obs, Some(&z), &a, GpScope::Whole).unwrap();
    let current = input_gradient_of_log_prob(&b, &obs, Some(&z), &a, GpScope::Current).unwrap();
    assert_eq!(whole.shape().cols, 6);
    assert_eq!(current.shape().cols, 4);
    assert_eq!(whole.cols(0, 4).unwrap().tensor(), current.tensor());
}

#[test]
fn nonlinear_input_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let p = random_policy(20 + seed, 4, 2, 2, Activation::Tanh);
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let obs = random_tensor(&mut rng, 1, 4, 1.5);
        let z = random_tensor(&mut rng, 1, 2, 1.0);
        let a = random_tensor(&mut rng, 1, 2, 1.5);
        let g = Graph::new();
        let b = p.bind(&g);
        let grad = input_gradient_of_log_prob(&b, &obs, Some(&z), &a, GpScope::Whole).unwrap();
        let input = p.join_input(&obs, Some(&z)).unwrap();
        let report = check_gradient(
            |x: &Value| {
                let g = x.graph();
                let b = p.bind(g);
                let o = x.cols(0, 4)?;
                let l = x.cols(4, 6)?;
                Ok(b.log_prob(&o, Some(&l), &g.constant(a.clone())).unwrap())
            },
            &input,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
        for c in 0..6 {
            assert!((report.numeric.data()[c] - grad.tensor().get(0, c)).abs() < 1e-6);
        }
    }
}

#[test]
fn parameter_gradients_of_log_prob_match_finite_differences() {
    let p = random_policy(30, 3, 0, 2, Activation::Elu);
    let obs = Tensor::from_rows(&[vec![0.2, -0.5, 1.1], vec![-0.9, 0.4, 0.3]]);
    let a = Tensor::from_rows(&[vec![0.5, -0.2], vec![1.0, 0.7]]);
    let total = |pol: &GaussianPolicy| graph_log_prob(pol, &obs, None, &a).sum();

    let g = Graph::new();
    let b = p.bind(&g);
    let lp = b
        .log_prob(&g.constant(obs.clone()), None, &g.constant(a.clone()))
        .unwrap()
        .sum()
        .unwrap();
    let leaves = b.params();
    let refs: Vec<&Value> = leaves.iter().collect();
    let grads = backward(&lp, &refs, false).unwrap();

    let h = 1e-6;
    let n_params = p.params().len();
    for k in 0..n_params {
        let analytic = grads.tensor(&leaves[k]);
        for i in 0..analytic.len() {
            let mut hi = p.clone();
            hi.params_mut()[k].data_mut()[i] += h;
            let mut lo = p.clone();
            lo.params_mut()[k].data_mut()[i] -= h;
            let fd = (total(&hi) - total(&lo)) / (2.0 * h);
            let an = analytic.data()[i];
            assert!(
                (an - fd).abs() / an.abs().max(1.0) < 1e-6,
                "param {k}[{i}]: {an} vs {fd}"
            );
        }
    }
}

#[test]
fn sample_action_with_tiny_std_returns_the_mean() {
    let mut p = random_policy(11, 3, 0, 2, Activation::Tanh);
    p.log_std = Tensor::full(1, 2, (1e-8f64).ln());
    let obs = Tensor::row(vec![0.4, 0.1, -0.2]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (a, _) = p.sample_action(&obs, None, &mut rng).unwrap();
    let mean = p.mean_action(&obs, None).unwrap();
    for (x, m) in a.data().iter().zip(mean.data()) {
        assert!((x - m).abs() < 1e-6);
    }
}

#[test]
fn sample_action_is_seed_deterministic_and_consistent() {
    let p = random_policy(12, 3, 0, 2, Activation::Tanh);
    let obs = Tensor::from_rows(&[vec![0.4, 0.1, -0.2], vec![1.0, 0.0, 0.5]]);
    let draw = || {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        p.sample_action(&obs, None, &mut rng).unwrap()
    };
    let (a1, lp1) = draw();
    let (a2, lp2) = draw();
    assert_eq!(a1, a2);
    assert_eq!(lp1, lp2);
    let lp = graph_log_prob(&p, &obs, None, &a1);
    for (r, v) in lp1.iter().enumerate() {
        assert!((lp.get(r, 0) - v).abs() < 1e-12);
    }
}

#[test]
fn empirical_sample_mean_within_three_standard_errors() {
    let p = random_policy(13, 2, 0, 2, Activation::Tanh);
    let obs = Tensor::row(vec![0.3, -0.8]);
    let mean = p.mean_action(&obs, None).unwrap();
    let n = 100_000;
    let batch = Tensor::from_fn(n, 2, |_, c| obs.data()[c]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, _) = p.sample_action(&batch, None, &mut rng).unwrap();
    for c in 0..2 {
        let m = (0..n).map(|r| a.get(r, c)).sum::<f64>() / n as f64;
        let se = p.log_std.data()[c].exp() / (n as f64).sqrt();
        assert!((m - mean.data()[c]).abs() < 3.0 * se);
    }
}

#[test]
fn density_integrates_to_one() {
    let p = random_policy(14, 2, 0, 1, Activation::Tanh);
    let obs = Tensor::row(vec![0.5, 0.5]);
    let mean = p.mean_action(&obs, None).unwrap().item();
    let sigma = p.log_std.item().exp();
    let n = 20_001;
    let (lo, hi) = (mean - 10.0 * sigma, mean + 10.0 * sigma);
    let step = (hi - lo) / (n - 1) as f64;
    let grid = Tensor::column((0..n).map(|i| lo + i as f64 * step).collect());
    let obs_rep = Tensor::from_fn(n, 2, |_, c| obs.data()[c]);
    let lp = graph_log_prob(&p, &obs_rep, None, &grid);
    let integral: f64 = lp.data().iter().map(|l| l.exp() * step).sum();
    assert!((integral - 1.0).abs() < 1e-3, "{integral}");
}

#[test]
fn frozen_normalizer_centres_its_stream() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let sample = |rng: &mut ChaCha8Rng| {
        Tensor::from_fn(1000, 2, |_, c| {
            let e: f64 = rng.sample(StandardNormal);
            if c == 0 {
                3.0 + 2.0 * e
            } else {
                -1.0 + 0.1 * e
            }
        })
    };
    let mut norm = RunningNormalizer::new(2, 10.0);
    for _ in 0..20 {
        norm.update(&sample(&mut rng)).unwrap();
    }
    let n = 10_000;
    let mut sums = [0.0; 2];
    for _ in 0..10 {
        let out = norm.apply(&sample(&mut rng)).unwrap();
        for r in 0..out.rows() {
            sums[0] += out.get(r, 0);
            sums[1] += out.get(r, 1);
        }
    }
    for s in sums {
        assert!((s / n as f64).abs() < 3.0 / (n as f64).sqrt());
    }
}
