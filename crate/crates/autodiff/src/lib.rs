//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! The backward sweep records its own operations, so gradients can be
//! differentiated again (double backprop). That is what makes penalties on
//! input gradients trainable:
//!
//! ```
//! use lcp_autodiff::{backward, Graph, Tensor};
//!
//! let g = Graph::new();
//! let x = g.param(Tensor::scalar(0.5));
//! let f = x.tanh().unwrap();
//! let df = backward(&f, &[&x], true).unwrap().wrt(&x);
//! let penalty = df.square().unwrap();
//! let d_penalty = backward(&penalty, &[&x], false).unwrap();
//! assert!(d_penalty.tensor(&x).item() < 0.0);
//! ```

mod backward;
pub mod catalog;
mod check;
mod error;
mod graph;
mod tensor;

pub use backward::{backward, GradientMap};
pub use check::{check_gradient, numeric_gradient, relative_error, GradCheckReport};
pub use error::{AutodiffError, Result};
pub use graph::{Axis, CustomOp, Graph, OpKind, Value};
pub use tensor::{Shape, Tensor};
