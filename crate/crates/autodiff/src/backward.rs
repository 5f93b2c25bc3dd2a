//! Reverse sweep. Every vector-Jacobian product is itself expressed with
//! recorded graph operations, so with `create_graph` the returned gradients
//! can be differentiated again.

use std::collections::BTreeMap;

use crate::error::{AutodiffError, Result};
use crate::graph::{Axis, Graph, OpKind, Value};
use crate::tensor::{Shape, Tensor};

/// Gradients keyed by the identity of the differentiated value. Absent
/// entries are zero.
#[derive(Debug, Clone, Default)]
pub struct GradientMap {
    grads: BTreeMap<usize, Value>,
}

impl GradientMap {
    pub fn get(&self, v: &Value) -> Option<&Value> {
        self.grads.get(&v.id())
    }

    /// Gradient of `v`, or a zero constant of the same shape.
    pub fn wrt(&self, v: &Value) -> Value {
        match self.grads.get(&v.id()) {
            Some(g) => g.clone(),
            None => {
                let s = v.shape();
                v.graph().constant(Tensor::zeros(s.rows, s.cols))
            }
        }
    }

    /// Numeric gradient of `v` (zeros if absent).
    pub fn tensor(&self, v: &Value) -> Tensor {
        match self.grads.get(&v.id()) {
            Some(g) => (*g.tensor()).clone(),
            None => Tensor::zeros(v.shape().rows, v.shape().cols),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// Computes `∂root/∂wrt`.
///
/// With `create_graph` set, the gradients are recorded values whose
/// provenance reaches back to the inputs, so a further `backward` through a
/// function of them yields second derivatives. Without it, they are
/// constants.
pub fn backward(root: &Value, wrt: &[&Value], create_graph: bool) -> Result<GradientMap> {
    if !root.shape().is_scalar() {
        return Err(AutodiffError::NonScalarRoot(root.shape()));
    }
    let graph = root.graph().clone();
    for v in wrt {
        if !std::rc::Rc::ptr_eq(&v.graph().tape, &graph.tape) {
            return Err(AutodiffError::ForeignValue);
        }
        if !v.requires_grad() {
            return Err(AutodiffError::NotDifferentiable(v.id()));
        }
    }

    let prev = graph.set_grad_enabled(create_graph);
    let result = sweep(&graph, root, wrt);
    graph.set_grad_enabled(prev);
    result
}

fn sweep(graph: &Graph, root: &Value, wrt: &[&Value]) -> Result<GradientMap> {
    let mut grads = GradientMap::default();
    if !root.requires_grad() {
        return Ok(grads);
    }
    let lowest = wrt.iter().map(|v| v.id()).min().unwrap_or(root.id());
    let mut pending: Vec<Option<Value>> = vec![None; root.id() + 1];
    pending[root.id()] = Some(graph.constant(Tensor::scalar(1.0)));

    for id in (lowest..=root.id()).rev() {
        let Some(g) = pending[id].take() else {
            continue;
        };
        let (op, inputs, needs) = {
            let tape = graph.tape.borrow();
            let node = &tape.nodes[id];
            let needs: Vec<bool> = node
                .inputs
                .iter()
                .map(|&i| tape.nodes[i].requires_grad)
                .collect();
            (node.op.clone(), node.inputs.clone(), needs)
        };
        if wrt.iter().any(|v| v.id() == id) {
            grads.grads.insert(id, g.clone());
        }
        if matches!(op, OpKind::Leaf) {
            continue;
        }
        let input_values: Vec<Value> = inputs.iter().map(|&i| graph.value_of(i)).collect();
        let out = graph.value_of(id);
        let input_grads = vjp(&op, &input_values, &out, &g, &needs)?;
        for ((input, grad), need) in input_values.iter().zip(input_grads).zip(&needs) {
            let (Some(grad), true) = (grad, *need) else {
                continue;
            };
            if input.id() < lowest {
                continue;
            }
            let slot = &mut pending[input.id()];
            *slot = Some(match slot.take() {
                Some(acc) => acc.add(&grad)?,
                None => grad,
            });
        }
    }
    Ok(grads)
}

fn reduce_to(g: &Value, shape: Shape) -> Result<Value> {
    let gs = g.shape();
    let mut out = g.clone();
    if shape.rows == 1 && gs.rows != 1 {
        out = out.sum_axis(Axis::Row)?;
    }
    if shape.cols == 1 && gs.cols != 1 {
        out = out.sum_axis(Axis::Col)?;
    }
    Ok(out)
}

fn mask(graph: &Graph, like: &Tensor, pred: impl Fn(f64) -> bool) -> Value {
    graph.constant(like.map(|x| if pred(x) { 1.0 } else { 0.0 }))
}

fn vjp(
    op: &OpKind,
    inputs: &[Value],
    out: &Value,
    g: &Value,
    needs: &[bool],
) -> Result<Vec<Option<Value>>> {
    let graph = out.graph();
    let need = |i: usize| needs.get(i).copied().unwrap_or(false);
    let grads = match op {
        OpKind::Leaf => vec![],
        OpKind::Add => vec![Some(g.clone()), Some(g.clone())],
        OpKind::Sub => vec![Some(g.clone()), need(1).then(|| g.neg()).transpose()?],
        OpKind::Mul => vec![
            need(0).then(|| g.mul(&inputs[1])).transpose()?,
            need(1).then(|| g.mul(&inputs[0])).transpose()?,
        ],
        OpKind::MatMul => vec![
            need(0).then(|| g.matmul(&inputs[1].t()?)).transpose()?,
            need(1).then(|| inputs[0].t()?.matmul(g)).transpose()?,
        ],
        OpKind::Affine => vec![
            need(0).then(|| g.matmul(&inputs[1].t()?)).transpose()?,
            need(1).then(|| inputs[0].t()?.matmul(g)).transpose()?,
            need(2).then(|| g.sum_axis(Axis::Row)).transpose()?,
        ],
        OpKind::Tanh => {
            let d = out.square()?.neg()?.add_scalar(1.0)?;
            vec![Some(g.mul(&d)?)]
        }
        OpKind::Sin => vec![Some(g.mul(&inputs[0].cos()?)?)],
        OpKind::Cos => vec![Some(g.mul(&inputs[0].sin()?.neg()?)?)],
        OpKind::Elu => {
            // d/dx = 1 for x > 0, y + 1 = exp(x) otherwise.
            let x = inputs[0].tensor();
            let pos = mask(graph, &x, |v| v > 0.0);
            let neg = mask(graph, &x, |v| v <= 0.0);
            let d = out.add_scalar(1.0)?.mul(&neg)?.add(&pos)?;
            vec![Some(g.mul(&d)?)]
        }
        OpKind::Exp => vec![Some(g.mul(out)?)],
        OpKind::Log => vec![Some(g.mul(&inputs[0].recip()?)?)],
        OpKind::Square => vec![Some(g.mul(&inputs[0])?.scale(2.0)?)],
        OpKind::Sqrt => {
            let y = out.tensor();
            let nonzero = mask(graph, &y, |v| v > 0.0);
            let fill = mask(graph, &y, |v| v <= 0.0);
            let d = out.add(&fill)?.recip()?.mul(&nonzero)?.scale(0.5)?;
            vec![Some(g.mul(&d)?)]
        }
        OpKind::Sum(axis) | OpKind::Mean(axis) => {
            let s = inputs[0].shape();
            let n = match axis {
                None => s.len(),
                Some(Axis::Row) => s.rows,
                Some(Axis::Col) => s.cols,
            };
            let spread = g.broadcast_to(s)?;
            let grad = match op {
                OpKind::Mean(_) => spread.scale(1.0 / n as f64)?,
                _ => spread,
            };
            vec![Some(grad)]
        }
        OpKind::Dot => {
            let s = inputs[0].shape();
            let spread = g.broadcast_to(s)?;
            vec![
                need(0).then(|| spread.mul(&inputs[1])).transpose()?,
                need(1).then(|| spread.mul(&inputs[0])).transpose()?,
            ]
        }
        OpKind::Concat(axis) => {
            let mut offset = 0;
            let mut grads = Vec::with_capacity(inputs.len());
            for (i, input) in inputs.iter().enumerate() {
                let n = match axis {
                    Axis::Row => input.shape().rows,
                    Axis::Col => input.shape().cols,
                };
                grads.push(
                    need(i)
                        .then(|| g.slice(*axis, offset, offset + n))
                        .transpose()?,
                );
                offset += n;
            }
            grads
        }
        OpKind::Slice { axis, start, .. } => {
            let s = inputs[0].shape();
            let len = match axis {
                Axis::Row => s.rows,
                Axis::Col => s.cols,
            };
            vec![Some(g.pad(*axis, *start, len)?)]
        }
        OpKind::Pad { axis, start, .. } => {
            let s = inputs[0].shape();
            let n = match axis {
                Axis::Row => s.rows,
                Axis::Col => s.cols,
            };
            vec![Some(g.slice(*axis, *start, start + n)?)]
        }
        OpKind::Broadcast(_) => vec![Some(reduce_to(g, inputs[0].shape())?)],
        OpKind::Negate => vec![Some(g.neg()?)],
        OpKind::Reciprocal => vec![Some(g.mul(&out.square()?.neg()?)?)],
        OpKind::Transpose => vec![Some(g.t()?)],
        OpKind::Scale(c) => vec![Some(g.scale(*c)?)],
        OpKind::AddScalar(_) => vec![Some(g.clone())],
        OpKind::Clamp { lo, hi } => {
            let x = inputs[0].tensor();
            let inside = mask(graph, &x, |v| v >= *lo && v <= *hi);
            vec![Some(g.mul(&inside)?)]
        }
        OpKind::Minimum => {
            let a = inputs[0].tensor();
            let b = inputs[1].tensor();
            let first = graph.constant(a.zip_map(&b, |x, y| if x <= y { 1.0 } else { 0.0 }));
            let second = graph.constant(a.zip_map(&b, |x, y| if x <= y { 0.0 } else { 1.0 }));
            vec![
                need(0).then(|| g.mul(&first)).transpose()?,
                need(1).then(|| g.mul(&second)).transpose()?,
            ]
        }
        OpKind::Custom(c) => {
            let d = graph.constant(inputs[0].tensor().map(|x| (c.derivative)(x)));
            vec![Some(g.mul(&d)?)]
        }
    };
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(x: f64) -> (Graph, Value) {
        let g = Graph::new();
        let v = g.param(Tensor::scalar(x));
        (g, v)
    }

    #[test]
    fn derivative_of_square() {
        let (_, x) = scalar_param(3.0);
        let y = x.square().unwrap();
        let grads = backward(&y, &[&x], false).unwrap();
        assert_eq!(grads.tensor(&x).item(), 6.0);
        assert!(!grads.wrt(&x).requires_grad());
    }

    #[test]
    fn second_derivative_of_cube() {
        let (_, x) = scalar_param(2.0);
        let y = x.square().unwrap().mul(&x).unwrap();
        let first = backward(&y, &[&x], true).unwrap().wrt(&x);
        assert_eq!(first.item(), 12.0);
        let second = backward(&first, &[&x], false).unwrap();
        assert!((second.tensor(&x).item() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let g = Graph::new();
        let x = g.param(Tensor::ones(2, 1));
        assert_eq!(
            backward(&x, &[&x], false).unwrap_err(),
            AutodiffError::NonScalarRoot(Shape::new(2, 1))
        );
    }

    #[test]
    fn constant_target_is_rejected() {
        let g = Graph::new();
        let x = g.param(Tensor::scalar(1.0));
        let c = g.scalar(2.0);
        let y = x.mul(&c).unwrap();
        assert!(matches!(
            backward(&y, &[&c], false),
            Err(AutodiffError::NotDifferentiable(_))
        ));
    }

    #[test]
    fn unrelated_value_gets_zero_gradient() {
        let g = Graph::new();
        let x = g.param(Tensor::scalar(1.0));
        let z = g.param(Tensor::ones(1, 3));
        let y = x.exp().unwrap();
        let grads = backward(&y, &[&x, &z], false).unwrap();
        assert!(grads.get(&z).is_none());
        assert_eq!(grads.tensor(&z), Tensor::zeros(1, 3));
    }

    #[test]
    fn detach_blocks_flow() {
        let (_, x) = scalar_param(1.5);
        let y = x.detach().mul(&x).unwrap();
        let grads = backward(&y, &[&x], false).unwrap();
        assert_eq!(grads.tensor(&x).item(), 1.5);
    }

    #[test]
    fn sqrt_of_zero_has_zero_gradient() {
        let g = Graph::new();
        let x = g.param(Tensor::row(vec![0.0, 0.0]));
        let n = x.square().unwrap().sum().unwrap().sqrt().unwrap();
        let grads = backward(&n, &[&x], false).unwrap();
        assert_eq!(grads.tensor(&x).data(), &[0.0, 0.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        let (_, x) = scalar_param(0.7);
        let y = x.mul(&x).unwrap().add(&x).unwrap();
        let grads = backward(&y, &[&x], false).unwrap();
        assert!((grads.tensor(&x).item() - 2.4).abs() < 1e-15);
    }
}
