use lcp_autodiff::{Graph, Tensor, Value};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{BoundMlp, Mlp, MlpSpec};
use crate::error::{LcpError, Result};

/// Privileged encoder μ (privileged info → latent) and adaptation module φ
/// (stacked observation history → latent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoaHeads {
    pub encoder: Mlp,
    pub adapter: Mlp,
    pub history_len: usize,
}

impl RoaHeads {
    pub fn new(
        privileged_dim: usize,
        obs_dim: usize,
        history_len: usize,
        latent_dim: usize,
        encoder_spec: &MlpSpec,
        adapter_spec: &MlpSpec,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let encoder = Mlp::new(privileged_dim, latent_dim, encoder_spec, 1.0, rng)?;
        let adapter = Mlp::new(obs_dim * history_len, latent_dim, adapter_spec, 1.0, rng)?;
        Self::from_parts(encoder, adapter, history_len)
    }

    /// Rejects heads whose latent widths disagree.
    pub fn from_parts(encoder: Mlp, adapter: Mlp, history_len: usize) -> Result<Self> {
        if encoder.output_dim() != adapter.output_dim() {
            return Err(LcpError::Dimension {
                what: "adaptation module latent",
                expected: encoder.output_dim(),
                got: adapter.output_dim(),
            });
        }
        if history_len == 0 || !adapter.input_dim().is_multiple_of(history_len) {
            return Err(LcpError::invalid(
                "history_len",
                format!(
                    "adapter input {} is not a multiple of {history_len}",
                    adapter.input_dim()
                ),
            ));
        }
        Ok(Self {
            encoder,
            adapter,
            history_len,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        p.extend(self.adapter.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        p.extend(self.adapter.params_mut());
        p
    }

    /// z^μ without gradient recording.
    pub fn encode_privileged(&self, privileged: &Tensor) -> Result<Tensor> {
        self.encoder.forward(privileged)
    }

    /// z^φ without gradient recording.
    pub fn encode_history(&self, history: &Tensor) -> Result<Tensor> {
        self.adapter.forward(history)
    }

    pub fn bind(&self, graph: &Graph) -> BoundRoa {
        BoundRoa {
            encoder: self.encoder.bind(graph),
            adapter: self.adapter.bind(graph),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundRoa {
    pub encoder: BoundMlp,
    pub adapter: BoundMlp,
}

impl BoundRoa {
    pub fn encode_privileged(&self, privileged: &Value) -> Result<Value> {
        self.encoder.forward(privileged)
    }

    pub fn encode_history(&self, history: &Value) -> Result<Value> {
        self.adapter.forward(history)
    }

    pub fn params(&self) -> Vec<Value> {
        let mut p = self.encoder.params();
        p.extend(self.adapter.params());
        p
    }
}
