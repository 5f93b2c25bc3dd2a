use lcp_autodiff::{backward, Axis, Graph, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_grad_norm, Adam};
use super::agent::Agent;
use super::gae::{compute_gae, normalize_advantages};
use super::losses::{clipped_surrogate, lcp_penalty, roa_loss_from_latents};
use super::rollout::RolloutBatch;
use crate::config::{ExperimentConfig, SmoothingMode};
use crate::error::{LcpError, Result};

/// Minibatch-averaged diagnostics of one PPO update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub penalty: f64,
    pub roa_loss: f64,
    pub total_loss: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Flattened, row-aligned view of a rollout with fresh advantages.
#[derive(Debug, Clone)]
pub struct FlatBatch {
    pub obs_norm: Tensor,
    pub privileged: Tensor,
    pub history: Tensor,
    pub latent: Option<Tensor>,
    pub actions: Tensor,
    pub old_log_probs: Tensor,
    pub advantages: Tensor,
    pub returns: Tensor,
}

fn vstack(parts: &[Tensor]) -> Tensor {
    let cols = parts.first().map_or(0, Tensor::cols);
    let mut data = Vec::with_capacity(parts.iter().map(|p| p.data().len()).sum());
    for p in parts {
        data.extend_from_slice(p.data());
    }
    let rows = parts.iter().map(Tensor::rows).sum();
    Tensor::new(rows, cols, data)
}

fn gather(t: &Tensor, idx: &[usize]) -> Tensor {
    Tensor::from_fn(idx.len(), t.cols(), |r, c| t.get(idx[r], c))
}

impl FlatBatch {
    pub fn from_rollout(batch: &RolloutBatch, gamma: f64, gae_lambda: f64) -> Result<Self> {
        if batch.is_empty() {
            return Err(LcpError::invalid("rollout", "empty batch"));
        }
        let (adv, ret) = compute_gae(
            &batch.rewards,
            &batch.values,
            &batch.dones,
            &batch.last_values,
            gamma,
            gae_lambda,
        );
        let adv = normalize_advantages(&adv.concat());
        let ret = ret.concat();
        let latent = if batch.latent.iter().all(Option::is_some) {
            Some(vstack(
                &batch.latent.iter().flatten().cloned().collect::<Vec<_>>(),
            ))
        } else {
            None
        };
        Ok(Self {
            obs_norm: vstack(&batch.obs_norm),
            privileged: vstack(&batch.privileged),
            history: vstack(&batch.history),
            latent,
            actions: vstack(&batch.actions),
            old_log_probs: Tensor::column(batch.log_probs.concat()),
            advantages: Tensor::column(adv),
            returns: Tensor::column(ret),
        })
    }

    pub fn len(&self) -> usize {
        self.obs_norm.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            obs_norm: gather(&self.obs_norm, idx),
            privileged: gather(&self.privileged, idx),
            history: gather(&self.history, idx),
            latent: self.latent.as_ref().map(|z| gather(z, idx)),
            actions: gather(&self.actions, idx),
            old_log_probs: gather(&self.old_log_probs, idx),
            advantages: gather(&self.advantages, idx),
            returns: gather(&self.returns, idx),
        }
    }
}

/// Per-term losses of one minibatch, recorded on `graph`.
pub struct MinibatchLoss {
    pub graph: Graph,
    pub total: lcp_autodiff::Value,
    pub params: Vec<lcp_autodiff::Value>,
    pub stats: UpdateStats,
}

/// Builds the combined PPO objective for a minibatch.
pub fn minibatch_loss(
    agent: &Agent,
    mb: &FlatBatch,
    cfg: &ExperimentConfig,
) -> Result<MinibatchLoss> {
    let g = Graph::new();
    let policy = agent.policy.bind(&g);
    let value = agent.value.bind(&g);
    let roa = agent.roa.as_ref().map(|r| r.bind(&g));

    let obs = g.constant(mb.obs_norm.clone());
    let privileged = g.constant(mb.privileged.clone());
    let actions = g.constant(mb.actions.clone());
    let latent = roa
        .as_ref()
        .map(|r| r.encode_privileged(&privileged))
        .transpose()?;

    let log_prob = policy.log_prob(&obs, latent.as_ref(), &actions)?;
    let old = g.constant(mb.old_log_probs.clone());
    let adv = g.constant(mb.advantages.clone());
    let surrogate = clipped_surrogate(&log_prob, &old, &adv, cfg.ppo.clip)?;

    let v = value.forward(&g.concat(&[&obs, &privileged], Axis::Col)?)?;
    let value_loss = v.sub(&g.constant(mb.returns.clone()))?.square()?.mean()?;
    let entropy = policy.entropy()?;

    let mut total = surrogate
        .neg()?
        .add(&value_loss.scale(cfg.ppo.value_coef)?)?
        .sub(&entropy.scale(cfg.ppo.entropy_coef)?)?;

    let mut stats = UpdateStats::default();
    if cfg.smoothing.mode == SmoothingMode::Lcp && cfg.lcp.lambda_gp > 0.0 {
        let penalty = lcp_penalty(
            &policy,
            &mb.obs_norm,
            mb.latent.as_ref(),
            &mb.actions,
            cfg.lcp.scope,
        )?;
        stats.penalty = penalty.item();
        total = total.add(&penalty.scale(cfg.lcp.lambda_gp)?)?;
    }
    if let (Some(r), Some(z_mu)) = (&roa, &latent) {
        let z_phi = r.encode_history(&g.constant(mb.history.clone()))?;
        let loss = roa_loss_from_latents(z_mu, &z_phi, cfg.roa.lambda)?;
        stats.roa_loss = loss.item();
        total = total.add(&loss)?;
    }

    let lp = log_prob.tensor();
    let n = lp.rows() as f64;
    let mut clipped = 0usize;
    let mut kl = 0.0;
    for r in 0..lp.rows() {
        let d = lp.get(r, 0) - mb.old_log_probs.get(r, 0);
        kl -= d;
        if (d.exp() - 1.0).abs() > cfg.ppo.clip {
            clipped += 1;
        }
    }
    stats.policy_loss = -surrogate.item();
    stats.value_loss = value_loss.item();
    stats.entropy = entropy.item();
    stats.total_loss = total.item();
    stats.clip_fraction = clipped as f64 / n;
    stats.approx_kl = kl / n;

    let mut params = policy.params();
    params.extend(value.params());
    if let Some(r) = &roa {
        params.extend(r.params());
    }
    Ok(MinibatchLoss {
        graph: g,
        total,
        params,
        stats,
    })
}

/// Epochs of shuffled minibatch descent on the combined objective.
pub fn ppo_update(
    agent: &mut Agent,
    optimizer: &mut Adam,
    batch: &RolloutBatch,
    cfg: &ExperimentConfig,
    rng: &mut impl Rng,
) -> Result<UpdateStats> {
    let flat = FlatBatch::from_rollout(batch, cfg.ppo.gamma, cfg.ppo.gae_lambda)?;
    let mut order: Vec<usize> = (0..flat.len()).collect();
    let mut acc = UpdateStats::default();
    for _ in 0..cfg.ppo.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.ppo.minibatch) {
            let mb = flat.select(chunk);
            let loss = minibatch_loss(agent, &mb, cfg)?;
            if !loss.total.item().is_finite() {
                return Err(LcpError::NonFinite(format!(
                    "loss (policy {}, value {}, penalty {})",
                    loss.stats.policy_loss, loss.stats.value_loss, loss.stats.penalty
                )));
            }
            let refs: Vec<&lcp_autodiff::Value> = loss.params.iter().collect();
            let grads = backward(&loss.total, &refs, false)?;
            let mut grads: Vec<Tensor> = loss.params.iter().map(|p| grads.tensor(p)).collect();
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(LcpError::NonFinite("gradient".into()));
            }
            let norm = clip_grad_norm(&mut grads, cfg.ppo.max_grad_norm);
            if !norm.is_finite() {
                return Err(LcpError::NonFinite("gradient norm".into()));
            }
            optimizer.update(agent.params_mut(), &grads);

            let s = loss.stats;
            acc.policy_loss += s.policy_loss;
            acc.value_loss += s.value_loss;
            acc.entropy += s.entropy;
            acc.penalty += s.penalty;
            acc.roa_loss += s.roa_loss;
            acc.total_loss += s.total_loss;
            acc.clip_fraction += s.clip_fraction;
            acc.approx_kl += s.approx_kl;
            acc.grad_norm += norm;
            acc.minibatches += 1;
        }
    }
    let k = acc.minibatches.max(1) as f64;
    for v in [
        &mut acc.policy_loss,
        &mut acc.value_loss,
        &mut acc.entropy,
        &mut acc.penalty,
        &mut acc.roa_loss,
        &mut acc.total_loss,
        &mut acc.clip_fraction,
        &mut acc.approx_kl,
        &mut acc.grad_norm,
    ] {
        *v /= k;
    }
    Ok(acc)
}
