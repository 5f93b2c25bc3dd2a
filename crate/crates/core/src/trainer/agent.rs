use lcp_autodiff::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, LatentSource};
use crate::error::{LcpError, Result};
use crate::nets::{GaussianPolicy, Mlp, RoaHeads, RunningNormalizer};

/// Every learned component of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub policy: GaussianPolicy,
    /// Critic over `[normalized observation, privileged info]`.
    pub value: Mlp,
    pub roa: Option<RoaHeads>,
    pub normalizer: RunningNormalizer,
}

impl Agent {
    pub fn new(cfg: &ExperimentConfig, rng: &mut impl Rng) -> Result<Self> {
        let obs = cfg.env.obs_dim();
        let privileged = cfg.env.privileged_dim();
        let act = cfg.env.num_joints();
        let roa = if cfg.roa.enabled {
            Some(RoaHeads::new(
                privileged,
                obs,
                cfg.roa.history_len,
                cfg.roa.latent_dim,
                &cfg.roa.encoder,
                &cfg.roa.adapter,
                rng,
            )?)
        } else {
            None
        };
        let latent = roa.as_ref().map_or(0, RoaHeads::latent_dim);
        Ok(Self {
            policy: GaussianPolicy::new(obs, latent, act, &cfg.networks.policy, rng)?,
            value: Mlp::new(obs + privileged, 1, &cfg.networks.value, 1.0, rng)?,
            roa,
            normalizer: RunningNormalizer::new(obs, cfg.networks.obs_clip),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.obs_dim
    }

    pub fn history_len(&self) -> usize {
        self.roa.as_ref().map_or(0, |r| r.history_len)
    }

    /// All trainable tensors: policy, then value, then ROA heads.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.policy.params();
        p.extend(self.value.params());
        if let Some(r) = &self.roa {
            p.extend(r.params());
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.policy.params_mut();
        p.extend(self.value.params_mut());
        if let Some(r) = &mut self.roa {
            p.extend(r.params_mut());
        }
        p
    }

    /// Policy latent for a batch, from the chosen source.
    pub fn latent(
        &self,
        source: LatentSource,
        privileged: &Tensor,
        history: &Tensor,
    ) -> Result<Option<Tensor>> {
        match (&self.roa, source) {
            (None, _) => Ok(None),
            (Some(r), LatentSource::Privileged) => r.encode_privileged(privileged).map(Some),
            (Some(r), LatentSource::History) => r.encode_history(history).map(Some),
        }
    }

    pub fn value_of(&self, obs_norm: &Tensor, privileged: &Tensor) -> Result<Vec<f64>> {
        let input = hstack(obs_norm, privileged)?;
        Ok(self.value.forward(&input)?.data().to_vec())
    }
}

/// Column-wise concatenation of two row-aligned tensors.
pub fn hstack(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rows() != b.rows() {
        return Err(LcpError::LengthMismatch(a.rows(), b.rows()));
    }
    let ac = a.cols();
    Ok(Tensor::from_fn(a.rows(), ac + b.cols(), |r, c| {
        if c < ac {
            a.get(r, c)
        } else {
            b.get(r, c - ac)
        }
    }))
}

/// Stacks per-row vectors into a tensor.
pub fn stack_rows(rows: &[Vec<f64>]) -> Tensor {
    let cols = rows.first().map_or(0, Vec::len);
    Tensor::from_fn(rows.len(), cols, |r, c| rows[r][c])
}
