//! Policy, value, and adaptation networks plus observation normalization.

mod mlp;
mod normalizer;
mod policy;
mod roa;

pub use mlp::{Activation, BoundMlp, Linear, Mlp, MlpSpec};
pub use normalizer::RunningNormalizer;
pub use policy::{input_gradient_of_log_prob, BoundPolicy, GaussianPolicy, GpScope};
pub use roa::{BoundRoa, RoaHeads};
