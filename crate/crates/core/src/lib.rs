pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nets;
pub mod trainer;

pub use config::ExperimentConfig;
pub use error::{LcpError, Result};
