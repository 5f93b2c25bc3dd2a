//! The computation record: an append-only arena of nodes plus cheap handles
//! ([`Value`]) into it.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::error::{AutodiffError, Result};
use crate::tensor::{Shape, Tensor};

/// Axis selector. `Row` is axis 0 (reduce or stack across rows), `Col` is
/// axis 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Col,
}

/// Scalar function with a user-provided derivative, used for first-order
/// experiments and negative controls in gradient checks. Its backward pass
/// treats the derivative as a constant, so it does not support double
/// differentiation.
#[derive(Clone)]
pub struct CustomOp {
    pub name: &'static str,
    pub forward: Rc<dyn Fn(f64) -> f64>,
    pub derivative: Rc<dyn Fn(f64) -> f64>,
}

impl fmt::Debug for CustomOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomOp({})", self.name)
    }
}

/// Operation kinds together with their attributes.
#[derive(Debug, Clone)]
pub enum OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    MatMul,
    /// `x @ w + b` with `b` a `1×out` row.
    Affine,
    Tanh,
    Sin,
    Cos,
    Elu,
    Exp,
    Log,
    Square,
    Sqrt,
    /// Sum over everything (`None`) or over one axis.
    Sum(Option<Axis>),
    Mean(Option<Axis>),
    /// Full contraction of two equally shaped arrays.
    Dot,
    Concat(Axis),
    Slice {
        axis: Axis,
        start: usize,
        end: usize,
    },
    /// Zero-embedding of the input at `start` inside an axis of length `len`.
    Pad {
        axis: Axis,
        start: usize,
        len: usize,
    },
    Broadcast(Shape),
    Negate,
    Reciprocal,
    Transpose,
    Scale(f64),
    AddScalar(f64),
    Clamp {
        lo: f64,
        hi: f64,
    },
    Minimum,
    Custom(CustomOp),
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::MatMul => "matmul",
            OpKind::Affine => "affine",
            OpKind::Tanh => "tanh",
            OpKind::Sin => "sin",
            OpKind::Cos => "cos",
            OpKind::Elu => "elu",
            OpKind::Exp => "exp",
            OpKind::Log => "log",
            OpKind::Square => "square",
            OpKind::Sqrt => "sqrt",
            OpKind::Sum(_) => "sum",
            OpKind::Mean(_) => "mean",
            OpKind::Dot => "dot",
            OpKind::Concat(_) => "concat",
            OpKind::Slice { .. } => "slice",
            OpKind::Pad { .. } => "pad",
            OpKind::Broadcast(_) => "broadcast",
            OpKind::Negate => "negate",
            OpKind::Reciprocal => "reciprocal",
            OpKind::Transpose => "transpose",
            OpKind::Scale(_) => "scale",
            OpKind::AddScalar(_) => "add_scalar",
            OpKind::Clamp { .. } => "clamp",
            OpKind::Minimum => "minimum",
            OpKind::Custom(c) => c.name,
        }
    }
}

pub(crate) struct Node {
    pub(crate) value: Rc<Tensor>,
    pub(crate) op: OpKind,
    pub(crate) inputs: Vec<usize>,
    pub(crate) requires_grad: bool,
}

pub(crate) struct Tape {
    pub(crate) nodes: Vec<Node>,
    pub(crate) grad_enabled: bool,
}

/// A computation graph. Cloning yields another handle to the same graph.
#[derive(Clone)]
pub struct Graph {
    pub(crate) tape: Rc<RefCell<Tape>>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph").field("nodes", &self.len()).finish()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            tape: Rc::new(RefCell::new(Tape {
                nodes: Vec::new(),
                grad_enabled: true,
            })),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.tape.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grad_enabled(&self) -> bool {
        self.tape.borrow().grad_enabled
    }

    /// Turns provenance recording on or off and returns the previous setting.
    /// With recording off every new value is a constant.
    pub fn set_grad_enabled(&self, enabled: bool) -> bool {
        std::mem::replace(&mut self.tape.borrow_mut().grad_enabled, enabled)
    }

    /// Runs `f` with recording disabled.
    pub fn no_grad<T>(&self, f: impl FnOnce() -> T) -> T {
        let prev = self.set_grad_enabled(false);
        let out = f();
        self.set_grad_enabled(prev);
        out
    }

    /// A differentiable leaf.
    pub fn param(&self, t: Tensor) -> Value {
        self.push_leaf(Rc::new(t), true)
    }

    pub fn constant(&self, t: Tensor) -> Value {
        self.push_leaf(Rc::new(t), false)
    }

    pub fn scalar(&self, x: f64) -> Value {
        self.constant(Tensor::scalar(x))
    }

    fn push_leaf(&self, value: Rc<Tensor>, requires_grad: bool) -> Value {
        let shape = value.shape();
        let mut tape = self.tape.borrow_mut();
        tape.nodes.push(Node {
            value,
            op: OpKind::Leaf,
            inputs: Vec::new(),
            requires_grad,
        });
        Value {
            graph: self.clone(),
            id: tape.nodes.len() - 1,
            shape,
        }
    }

    /// Records one operation. Shape errors are raised here, never during
    /// backward.
    pub fn record(&self, op: OpKind, inputs: &[&Value]) -> Result<Value> {
        for v in inputs {
            if !Rc::ptr_eq(&v.graph.tape, &self.tape) {
                return Err(AutodiffError::ForeignValue);
            }
        }
        let (data, requires_grad, ids) = {
            let tape = self.tape.borrow();
            let tensors: Vec<&Tensor> = inputs
                .iter()
                .map(|v| tape.nodes[v.id].value.as_ref())
                .collect();
            let data = forward(&op, &tensors)?;
            let requires_grad =
                tape.grad_enabled && inputs.iter().any(|v| tape.nodes[v.id].requires_grad);
            (data, requires_grad, inputs.iter().map(|v| v.id).collect())
        };
        if !requires_grad {
            return Ok(self.constant(data));
        }
        let shape = data.shape();
        let mut tape = self.tape.borrow_mut();
        tape.nodes.push(Node {
            value: Rc::new(data),
            op,
            inputs: ids,
            requires_grad: true,
        });
        Ok(Value {
            graph: self.clone(),
            id: tape.nodes.len() - 1,
            shape,
        })
    }

    /// Concatenates along `axis` (rows stacked for `Axis::Row`).
    pub fn concat(&self, parts: &[&Value], axis: Axis) -> Result<Value> {
        self.record(OpKind::Concat(axis), parts)
    }

    pub(crate) fn value_of(&self, id: usize) -> Value {
        let shape = self.tape.borrow().nodes[id].value.shape();
        Value {
            graph: self.clone(),
            id,
            shape,
        }
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Clone)]
pub struct Value {
    pub(crate) graph: Graph,
    pub(crate) id: usize,
    shape: Shape,
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Value")
            .field("id", &self.id)
            .field("shape", &self.shape)
            .finish()
    }
}

impl Value {
    /// Creation index; also the node's position in topological order.
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn tensor(&self) -> Rc<Tensor> {
        self.graph.tape.borrow().nodes[self.id].value.clone()
    }

    /// Value of a scalar node.
    pub fn item(&self) -> f64 {
        self.tensor().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.tape.borrow().nodes[self.id].requires_grad
    }

    pub fn op(&self) -> OpKind {
        self.graph.tape.borrow().nodes[self.id].op.clone()
    }

    /// Ids of the recorded inputs (empty for leaves and constants).
    pub fn inputs(&self) -> Vec<usize> {
        self.graph.tape.borrow().nodes[self.id].inputs.clone()
    }

    fn unary(&self, op: OpKind) -> Result<Value> {
        self.graph.record(op, &[self])
    }

    /// Records a binary element-wise op, inserting an explicit broadcast
    /// node when one side has a unit dimension.
    fn binary(&self, other: &Value, op: OpKind) -> Result<Value> {
        let (a, b) = broadcast_pair(self, other, op.name())?;
        self.graph.record(op, &[&a, &b])
    }

    pub fn add(&self, other: &Value) -> Result<Value> {
        self.binary(other, OpKind::Add)
    }

    pub fn sub(&self, other: &Value) -> Result<Value> {
        self.binary(other, OpKind::Sub)
    }

    pub fn mul(&self, other: &Value) -> Result<Value> {
        self.binary(other, OpKind::Mul)
    }

    pub fn div(&self, other: &Value) -> Result<Value> {
        self.mul(&other.recip()?)
    }

    pub fn minimum(&self, other: &Value) -> Result<Value> {
        self.binary(other, OpKind::Minimum)
    }

    pub fn matmul(&self, other: &Value) -> Result<Value> {
        self.graph.record(OpKind::MatMul, &[self, other])
    }

    /// `self @ weight + bias`.
    pub fn affine(&self, weight: &Value, bias: &Value) -> Result<Value> {
        self.graph.record(OpKind::Affine, &[self, weight, bias])
    }

    pub fn tanh(&self) -> Result<Value> {
        self.unary(OpKind::Tanh)
    }

    pub fn sin(&self) -> Result<Value> {
        self.unary(OpKind::Sin)
    }

    pub fn cos(&self) -> Result<Value> {
        self.unary(OpKind::Cos)
    }

    pub fn elu(&self) -> Result<Value> {
        self.unary(OpKind::Elu)
    }

    pub fn exp(&self) -> Result<Value> {
        self.unary(OpKind::Exp)
    }

    pub fn ln(&self) -> Result<Value> {
        self.unary(OpKind::Log)
    }

    pub fn square(&self) -> Result<Value> {
        self.unary(OpKind::Square)
    }

    /// Square root whose derivative is taken as zero where the output is
    /// zero, so that norms of vanishing vectors have finite gradients.
    pub fn sqrt(&self) -> Result<Value> {
        self.unary(OpKind::Sqrt)
    }

    pub fn sum(&self) -> Result<Value> {
        self.unary(OpKind::Sum(None))
    }

    pub fn sum_axis(&self, axis: Axis) -> Result<Value> {
        self.unary(OpKind::Sum(Some(axis)))
    }

    pub fn mean(&self) -> Result<Value> {
        self.unary(OpKind::Mean(None))
    }

    pub fn mean_axis(&self, axis: Axis) -> Result<Value> {
        self.unary(OpKind::Mean(Some(axis)))
    }

    pub fn dot(&self, other: &Value) -> Result<Value> {
        self.graph.record(OpKind::Dot, &[self, other])
    }

    pub fn slice(&self, axis: Axis, start: usize, end: usize) -> Result<Value> {
        self.unary(OpKind::Slice { axis, start, end })
    }

    /// Column range `[start, end)`.
    pub fn cols(&self, start: usize, end: usize) -> Result<Value> {
        self.slice(Axis::Col, start, end)
    }

    pub fn pad(&self, axis: Axis, start: usize, len: usize) -> Result<Value> {
        self.unary(OpKind::Pad { axis, start, len })
    }

    pub fn broadcast_to(&self, shape: Shape) -> Result<Value> {
        if shape == self.shape {
            return Ok(self.clone());
        }
        self.unary(OpKind::Broadcast(shape))
    }

    pub fn neg(&self) -> Result<Value> {
        self.unary(OpKind::Negate)
    }

    pub fn recip(&self) -> Result<Value> {
        self.unary(OpKind::Reciprocal)
    }

    pub fn t(&self) -> Result<Value> {
        self.unary(OpKind::Transpose)
    }

    pub fn scale(&self, c: f64) -> Result<Value> {
        self.unary(OpKind::Scale(c))
    }

    pub fn add_scalar(&self, c: f64) -> Result<Value> {
        self.unary(OpKind::AddScalar(c))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Value> {
        self.unary(OpKind::Clamp { lo, hi })
    }

    pub fn custom(&self, op: CustomOp) -> Result<Value> {
        self.unary(OpKind::Custom(op))
    }

    /// Stop-gradient: same numbers, no provenance.
    pub fn detach(&self) -> Value {
        let value = self.tensor();
        self.graph.push_leaf(value, false)
    }
}

fn broadcast_target(a: Shape, b: Shape) -> Option<Shape> {
    let dim = |x: usize, y: usize| match (x, y) {
        _ if x == y => Some(x),
        (1, y) => Some(y),
        (x, 1) => Some(x),
        _ => None,
    };
    Some(Shape::new(dim(a.rows, b.rows)?, dim(a.cols, b.cols)?))
}

fn broadcast_pair(a: &Value, b: &Value, op: &'static str) -> Result<(Value, Value)> {
    if a.shape == b.shape {
        return Ok((a.clone(), b.clone()));
    }
    let target = broadcast_target(a.shape, b.shape).ok_or(AutodiffError::ShapeMismatch {
        op,
        lhs: a.shape,
        rhs: b.shape,
    })?;
    Ok((a.broadcast_to(target)?, b.broadcast_to(target)?))
}

fn expect_arity(op: &OpKind, inputs: &[&Tensor], n: usize) -> Result<()> {
    if inputs.len() != n {
        return Err(AutodiffError::Arity {
            op: op.name(),
            expected: n,
            got: inputs.len(),
        });
    }
    Ok(())
}

fn same_shape(op: &OpKind, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(AutodiffError::ShapeMismatch {
            op: op.name(),
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    Ok(())
}

fn axis_len(shape: Shape, axis: Axis) -> usize {
    match axis {
        Axis::Row => shape.rows,
        Axis::Col => shape.cols,
    }
}

pub(crate) fn forward(op: &OpKind, inputs: &[&Tensor]) -> Result<Tensor> {
    let arity = match op {
        OpKind::Leaf => 0,
        OpKind::Concat(_) => inputs.len().max(1),
        OpKind::Add
        | OpKind::Sub
        | OpKind::Mul
        | OpKind::MatMul
        | OpKind::Dot
        | OpKind::Minimum => 2,
        OpKind::Affine => 3,
        _ => 1,
    };
    expect_arity(op, inputs, arity)?;
    let out = match op {
        OpKind::Leaf => unreachable!("leaves are not recorded through forward"),
        OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Minimum => {
            let (a, b) = (inputs[0], inputs[1]);
            same_shape(op, a, b)?;
            match op {
                OpKind::Add => a.zip_map(b, |x, y| x + y),
                OpKind::Sub => a.zip_map(b, |x, y| x - y),
                OpKind::Mul => a.zip_map(b, |x, y| x * y),
                _ => a.zip_map(b, f64::min),
            }
        }
        OpKind::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.cols() != b.rows() {
                return Err(AutodiffError::ShapeMismatch {
                    op: op.name(),
                    lhs: a.shape(),
                    rhs: b.shape(),
                });
            }
            a.matmul(b)
        }
        OpKind::Affine => {
            let (x, w, b) = (inputs[0], inputs[1], inputs[2]);
            if x.cols() != w.rows() {
                return Err(AutodiffError::ShapeMismatch {
                    op: op.name(),
                    lhs: x.shape(),
                    rhs: w.shape(),
                });
            }
            if b.shape() != Shape::new(1, w.cols()) {
                return Err(AutodiffError::ShapeMismatch {
                    op: op.name(),
                    lhs: w.shape(),
                    rhs: b.shape(),
                });
            }
            let mut y = x.matmul(w);
            let cols = y.cols();
            for (i, v) in y.data_mut().iter_mut().enumerate() {
                *v += b.data()[i % cols];
            }
            y
        }
        OpKind::Tanh => inputs[0].map(f64::tanh),
        OpKind::Sin => inputs[0].map(f64::sin),
        OpKind::Cos => inputs[0].map(f64::cos),
        OpKind::Elu => inputs[0].map(|x| if x > 0.0 { x } else { x.exp_m1() }),
        OpKind::Exp => inputs[0].map(f64::exp),
        OpKind::Log => inputs[0].map(f64::ln),
        OpKind::Square => inputs[0].map(|x| x * x),
        OpKind::Sqrt => inputs[0].map(f64::sqrt),
        OpKind::Sum(axis) | OpKind::Mean(axis) => {
            let x = inputs[0];
            let divisor = |n: usize| match op {
                OpKind::Mean(_) => n as f64,
                _ => 1.0,
            };
            match axis {
                None => Tensor::scalar(x.sum() / divisor(x.len())),
                Some(Axis::Row) => {
                    let d = divisor(x.rows());
                    Tensor::from_fn(1, x.cols(), |_, c| {
                        (0..x.rows()).map(|r| x.get(r, c)).sum::<f64>() / d
                    })
                }
                Some(Axis::Col) => {
                    let d = divisor(x.cols());
                    Tensor::from_fn(x.rows(), 1, |r, _| x.row_slice(r).iter().sum::<f64>() / d)
                }
            }
        }
        OpKind::Dot => {
            let (a, b) = (inputs[0], inputs[1]);
            same_shape(op, a, b)?;
            Tensor::scalar(a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum())
        }
        OpKind::Concat(axis) => {
            let first = inputs[0].shape();
            for t in &inputs[1..] {
                let ok = match axis {
                    Axis::Row => t.cols() == first.cols,
                    Axis::Col => t.rows() == first.rows,
                };
                if !ok {
                    return Err(AutodiffError::ShapeMismatch {
                        op: op.name(),
                        lhs: first,
                        rhs: t.shape(),
                    });
                }
            }
            match axis {
                Axis::Row => {
                    let rows = inputs.iter().map(|t| t.rows()).sum();
                    let data = inputs
                        .iter()
                        .flat_map(|t| t.data().iter().copied())
                        .collect();
                    Tensor::new(rows, first.cols, data)
                }
                Axis::Col => {
                    let cols = inputs.iter().map(|t| t.cols()).sum();
                    let mut data = Vec::with_capacity(first.rows * cols);
                    for r in 0..first.rows {
                        for t in inputs {
                            data.extend_from_slice(t.row_slice(r));
                        }
                    }
                    Tensor::new(first.rows, cols, data)
                }
            }
        }
        OpKind::Slice { axis, start, end } => {
            let x = inputs[0];
            if start > end || *end > axis_len(x.shape(), *axis) {
                return Err(AutodiffError::InvalidInput {
                    op: op.name(),
                    reason: format!("range {start}..{end} out of bounds for {}", x.shape()),
                });
            }
            match axis {
                Axis::Row => Tensor::from_fn(end - start, x.cols(), |r, c| x.get(start + r, c)),
                Axis::Col => Tensor::from_fn(x.rows(), end - start, |r, c| x.get(r, start + c)),
            }
        }
        OpKind::Pad { axis, start, len } => {
            let x = inputs[0];
            let n = axis_len(x.shape(), *axis);
            if start + n > *len {
                return Err(AutodiffError::InvalidInput {
                    op: op.name(),
                    reason: format!("{} does not fit at {start} within {len}", x.shape()),
                });
            }
            match axis {
                Axis::Row => Tensor::from_fn(*len, x.cols(), |r, c| {
                    if r >= *start && r < start + n {
                        x.get(r - start, c)
                    } else {
                        0.0
                    }
                }),
                Axis::Col => Tensor::from_fn(x.rows(), *len, |r, c| {
                    if c >= *start && c < start + n {
                        x.get(r, c - start)
                    } else {
                        0.0
                    }
                }),
            }
        }
        OpKind::Broadcast(target) => {
            let x = inputs[0];
            let s = x.shape();
            let ok =
                (s.rows == target.rows || s.rows == 1) && (s.cols == target.cols || s.cols == 1);
            if !ok {
                return Err(AutodiffError::ShapeMismatch {
                    op: op.name(),
                    lhs: s,
                    rhs: *target,
                });
            }
            Tensor::from_fn(target.rows, target.cols, |r, c| {
                x.get(
                    if s.rows == 1 { 0 } else { r },
                    if s.cols == 1 { 0 } else { c },
                )
            })
        }
        OpKind::Negate => inputs[0].map(|x| -x),
        OpKind::Reciprocal => inputs[0].map(|x| 1.0 / x),
        OpKind::Transpose => inputs[0].transpose(),
        OpKind::Scale(c) => inputs[0].map(|x| c * x),
        OpKind::AddScalar(c) => inputs[0].map(|x| x + c),
        OpKind::Clamp { lo, hi } => {
            if lo > hi {
                return Err(AutodiffError::InvalidInput {
                    op: op.name(),
                    reason: format!("lower bound {lo} above upper bound {hi}"),
                });
            }
            inputs[0].map(|x| x.clamp(*lo, *hi))
        }
        OpKind::Custom(c) => inputs[0].map(|x| (c.forward)(x)),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_of_scalars() {
        let g = Graph::new();
        let x = g.scalar(2.0);
        let y = g.scalar(3.0);
        assert_eq!(x.add(&y).unwrap().item(), 5.0);
    }

    #[test]
    fn matmul_shape_rule() {
        let g = Graph::new();
        let a = g.constant(Tensor::ones(2, 3));
        let b = g.constant(Tensor::ones(3, 1));
        assert_eq!(a.matmul(&b).unwrap().shape(), Shape::new(2, 1));
    }

    #[test]
    fn matmul_mismatch_names_op_and_dims() {
        let g = Graph::new();
        let a = g.constant(Tensor::ones(2, 3));
        let b = g.constant(Tensor::ones(2, 3));
        let err = a.matmul(&b).unwrap_err();
        assert_eq!(
            err,
            AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: Shape::new(2, 3),
                rhs: Shape::new(2, 3)
            }
        );
        assert!(err.to_string().contains("matmul"));
    }

    #[test]
    fn incompatible_broadcast_fails_at_record_time() {
        let g = Graph::new();
        let a = g.param(Tensor::ones(2, 3));
        let b = g.param(Tensor::ones(3, 2));
        assert!(matches!(
            a.add(&b),
            Err(AutodiffError::ShapeMismatch { op: "add", .. })
        ));
    }

    #[test]
    fn row_broadcast_in_add() {
        let g = Graph::new();
        let a = g.constant(Tensor::zeros(3, 2));
        let b = g.constant(Tensor::row(vec![1.0, 2.0]));
        let c = a.add(&b).unwrap();
        assert_eq!(c.tensor().data(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn constants_carry_no_provenance() {
        let g = Graph::new();
        let a = g.constant(Tensor::ones(2, 2));
        let b = a.tanh().unwrap();
        assert!(!b.requires_grad());
        assert!(b.inputs().is_empty());
    }

    #[test]
    fn no_grad_suppresses_recording() {
        let g = Graph::new();
        let x = g.param(Tensor::scalar(1.0));
        let y = g.no_grad(|| x.exp().unwrap());
        assert!(!y.requires_grad());
        assert!(x.exp().unwrap().requires_grad());
    }

    #[test]
    fn concat_and_slice_invert() {
        let g = Graph::new();
        let a = g.constant(Tensor::from_fn(2, 2, |r, c| (r * 2 + c) as f64));
        let b = g.constant(Tensor::from_fn(2, 1, |r, _| 10.0 + r as f64));
        let ab = g.concat(&[&a, &b], Axis::Col).unwrap();
        assert_eq!(ab.tensor().data(), &[0.0, 1.0, 10.0, 2.0, 3.0, 11.0]);
        assert_eq!(*ab.cols(2, 3).unwrap().tensor(), *b.tensor());
    }
}
