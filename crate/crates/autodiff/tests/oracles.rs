use lcp_autodiff::catalog::{first_order_suite, second_order_check, second_order_suite};
use lcp_autodiff::{backward, Graph, Tensor, Value};
use proptest::prelude::*;

#[test]
fn every_op_matches_central_differences() {
    let outcomes = first_order_suite(100, 7, 1e-5, 1e-6).unwrap();
    for o in &outcomes {
        assert!(
            o.passed(),
            "{}: max rel err {:.3e}",
            o.name,
            o.max_rel_error
        );
    }
    assert!(outcomes.len() >= 30);
}

#[test]
fn gradient_of_gradient_norm_matches_differences() {
    let outcome = second_order_suite(20, 5, 11, 1e-5, 1e-4).unwrap();
    assert!(outcome.passed(), "{outcome:?}");
}

#[test]
fn sin_gradient_norm_case() {
    // d/dx cos²x = −sin 2x; at 0.5 that is −sin 1.
    let f = |x: &Value| x.sin();
    let (analytic, numeric, err) = second_order_check(&f, &Tensor::scalar(0.5), 1e-5).unwrap();
    assert!((analytic.item() + 1.0f64.sin()).abs() < 1e-12);
    assert!((numeric.item() + 0.841_471).abs() < 1e-6);
    assert!(err < 1e-6);
}

#[test]
fn second_derivative_through_network_layers() {
    // f(x) = sum(tanh(x W + b)); checks that matmul/affine/tanh rules compose
    // under double differentiation.
    let w = Tensor::from_rows(&[vec![0.4, -1.1, 0.3], vec![0.9, 0.2, -0.6]]);
    let b = Tensor::row(vec![0.1, -0.2, 0.05]);
    let f = |x: &Value| {
        let g = x.graph();
        x.affine(&g.constant(w.clone()), &g.constant(b.clone()))?
            .tanh()?
            .sum()
    };
    let (_, _, err) = second_order_check(&f, &Tensor::row(vec![0.3, -0.7]), 1e-5).unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn second_order_wrt_parameters_not_inputs() {
    // ∂/∂W ‖∂f/∂x‖² for f = sum(tanh(x W)): the shape of the LCP penalty.
    let x0 = Tensor::row(vec![0.5, -0.25]);
    let penalty = |w: &Tensor| -> (f64, Tensor) {
        let g = Graph::new();
        let x = g.param(x0.clone());
        let wv = g.param(w.clone());
        let y = x.matmul(&wv).unwrap().tanh().unwrap().sum().unwrap();
        let gx = backward(&y, &[&x], true).unwrap().wrt(&x);
        let p = gx.square().unwrap().sum().unwrap();
        let gw = backward(&p, &[&wv], false).unwrap().tensor(&wv);
        (p.item(), gw)
    };
    let w = Tensor::from_rows(&[vec![0.3, -0.8], vec![1.2, 0.1]]);
    let (_, analytic) = penalty(&w);
    let h = 1e-6;
    for i in 0..w.len() {
        let mut hi = w.clone();
        hi.data_mut()[i] += h;
        let mut lo = w.clone();
        lo.data_mut()[i] -= h;
        let fd = (penalty(&hi).0 - penalty(&lo).0) / (2.0 * h);
        let a = analytic.data()[i];
        assert!((a - fd).abs() / a.abs().max(1.0) < 1e-6, "{i}: {a} vs {fd}");
    }
}

fn grad_of(f: impl Fn(&Value) -> Value, point: &Tensor) -> Tensor {
    let g = Graph::new();
    let x = g.param(point.clone());
    let y = f(&x);
    backward(&y, &[&x], false).unwrap().tensor(&x)
}

#[test]
fn identical_graphs_give_bit_identical_gradients() {
    let point = Tensor::from_fn(3, 4, |r, c| ((r * 4 + c) as f64 * 0.37).sin());
    let f = |x: &Value| {
        let h = x.tanh().unwrap().matmul(&x.t().unwrap()).unwrap();
        h.add(&h).unwrap().elu().unwrap().mean().unwrap()
    };
    let a = grad_of(f, &point);
    let b = grad_of(f, &point);
    assert_eq!(
        a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_is_linear(
        xs in prop::collection::vec(-2.0f64..2.0, 4),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let point = Tensor::row(xs);
        let f = |x: &Value| x.tanh().unwrap().square().unwrap().sum().unwrap();
        let h = |x: &Value| x.sin().unwrap().mul(x).unwrap().sum().unwrap();
        let combined = grad_of(
            |x| f(x).scale(a).unwrap().add(&h(x).scale(b).unwrap()).unwrap(),
            &point,
        );
        let gf = grad_of(f, &point);
        let gh = grad_of(h, &point);
        for i in 0..point.len() {
            let expect = a * gf.data()[i] + b * gh.data()[i];
            prop_assert!((combined.data()[i] - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_shapes_match_sources(rows in 1usize..5, cols in 1usize..5) {
        let g = Graph::new();
        let x = g.param(Tensor::full(rows, cols, 0.3));
        let w = g.param(Tensor::full(cols, 2, -0.2));
        let y = x.matmul(&w).unwrap().tanh().unwrap().sum().unwrap();
        let grads = backward(&y, &[&x, &w], false).unwrap();
        prop_assert_eq!(grads.wrt(&x).shape(), x.shape());
        prop_assert_eq!(grads.wrt(&w).shape(), w.shape());
    }
}
