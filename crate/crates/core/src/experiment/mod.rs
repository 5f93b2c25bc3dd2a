//! Pure train/evaluate/ablate drivers. Callers own all file I/O.

mod ablation;
mod oracles;

pub use ablation::{
    aggregate_seeds, curve_means, run_cell, AblationAxis, CellResult, SeedResult, CURVE_COLUMNS,
};
pub use oracles::{linear_identity_suite, penalty_gradient_suite};

use std::collections::VecDeque;

use lcp_autodiff::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SmoothingMode};
use crate::env::{trajectory_row, TrackerEnv};
use crate::error::{LcpError, Result};
use crate::metrics::{
    action_rate, base_acc, dof_velocity_mean, empirical_lipschitz, energy_mean, jitter,
    policy_input_gradient_norm, task_return, MetricsReport, TrialMetrics,
};
use crate::trainer::{stack_rows, Agent, LowPassFilter, Trainer, UpdateRecord};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to evaluate or resume inspection of a trained run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub env_hash: String,
    pub seed: u64,
    pub updates: usize,
    pub config: ExperimentConfig,
    pub agent: Agent,
}

impl Checkpoint {
    pub fn new(cfg: &ExperimentConfig, seed: u64, updates: usize, agent: Agent) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config_hash: cfg.hash(),
            env_hash: cfg.env_hash(),
            seed,
            updates,
            config: cfg.clone(),
            agent,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoints always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Self = serde_json::from_str(text)
            .map_err(|e| LcpError::invalid("checkpoint", e.to_string()))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(LcpError::invalid(
                "checkpoint.version",
                format!("unsupported version {}", ckpt.version),
            ));
        }
        if ckpt.config.hash() != ckpt.config_hash {
            return Err(LcpError::invalid(
                "checkpoint.config_hash",
                "does not match the embedded config",
            ));
        }
        Ok(ckpt)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn digest(&self) -> String {
        crate::config::sha256_json(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<UpdateRecord>,
}

/// Trains for `cfg.ppo.updates` updates. `on_update` sees each record and
/// the trainer (for intermediate checkpoints).
pub fn train(
    cfg: &ExperimentConfig,
    seed: u64,
    mut on_update: impl FnMut(&UpdateRecord, &Trainer) -> Result<()>,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg, seed)?;
    let mut log = Vec::with_capacity(cfg.ppo.updates);
    for _ in 0..cfg.ppo.updates {
        let record = trainer.step()?;
        on_update(&record, &trainer)?;
        log.push(record);
    }
    let updates = trainer.updates_done();
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(cfg, seed, updates, trainer.into_agent()),
        log,
    })
}

/// Per-state sensitivity of the trained mean network on visited states.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyStats {
    pub input_grad_norm_mean: f64,
    pub input_grad_norm_max: f64,
    pub lipschitz: f64,
    pub states: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub trials: Vec<TrialMetrics>,
    pub report: MetricsReport,
    pub policy: PolicyStats,
    /// `(trial, row)` pairs matching `env::trajectory_header`.
    pub trajectory: Vec<(usize, Vec<f64>)>,
}

/// Label used in metric tables.
pub fn method_label(cfg: &ExperimentConfig) -> String {
    match cfg.smoothing.mode {
        SmoothingMode::Lcp => format!(
            "lcp lambda_gp={} scope={}",
            cfg.lcp.lambda_gp,
            match cfg.lcp.scope {
                crate::nets::GpScope::Whole => "whole",
                crate::nets::GpScope::Current => "current",
            }
        ),
        m => m.name().to_string(),
    }
}

/// Deterministic evaluation: mean actions, frozen normalizer, one fresh
/// episode per trial on `env_cfg`'s plant.
pub fn evaluate(
    ckpt: &Checkpoint,
    env_cfg: &ExperimentConfig,
    trials: usize,
    seed: u64,
) -> Result<Evaluation> {
    if env_cfg.env_hash() != ckpt.env_hash {
        return Err(LcpError::EnvMismatch {
            expected: ckpt.env_hash.clone(),
            got: env_cfg.env_hash(),
        });
    }
    if trials == 0 {
        return Err(LcpError::invalid("trials", "must be at least 1"));
    }
    let cfg = &ckpt.config;
    let agent = &ckpt.agent;
    let dt = cfg.env.dt;
    let w = cfg.env.rewards;
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(trials);
    let mut trajectory = Vec::new();
    let mut inputs: Vec<Vec<f64>> = Vec::new();

    for trial in 0..trials {
        let mut env = TrackerEnv::new(cfg.env.clone(), seeder.random())?;
        let (mut obs, mut privileged) = env.reset();
        let h = agent.history_len();
        let mut history: VecDeque<Vec<f64>> = std::iter::repeat_n(obs.0.clone(), h).collect();
        let mut filter = (cfg.smoothing.mode == SmoothingMode::LowpassFilter)
            .then(|| LowPassFilter::new(cfg.smoothing.lowpass_alpha));
        let (mut actions, mut qs, mut qds, mut taus, mut vs, mut tracking) =
            (vec![], vec![], vec![], vec![], vec![], vec![]);
        for t in 0..cfg.env.episode_length {
            let raw = Tensor::row(obs.0.clone());
            let obs_norm = agent.normalizer.apply(&raw)?;
            let hist = Tensor::row(history.iter().flatten().copied().collect());
            let latent = agent.latent(cfg.eval.latent, &Tensor::row(privileged.to_vec()), &hist)?;
            let mean = agent.policy.mean_action(&obs_norm, latent.as_ref())?;
            inputs.push(
                agent
                    .policy
                    .join_input(&obs_norm, latent.as_ref())?
                    .data()
                    .to_vec(),
            );
            let mut a = mean.data().to_vec();
            if let Some(f) = &mut filter {
                a = f.apply(&a);
            }
            let out = env.step(&a)?;
            trajectory.push((trial, trajectory_row(t, &a, &out)));
            actions.push(a);
            qs.push(out.info.q.clone());
            qds.push(out.info.qd.clone());
            taus.push(out.info.torque.clone());
            vs.push(out.info.base_velocity);
            tracking.push([out.terms.tracking_lin, out.terms.tracking_yaw]);
            if !history.is_empty() {
                history.pop_front();
                history.push_back(out.obs.0.clone());
            }
            obs = out.obs;
            privileged = env.privileged().clone();
            if out.done {
                break;
            }
        }
        results.push(TrialMetrics {
            action_jitter: jitter(&actions, dt)?,
            dof_pos_jitter: jitter(&qs, dt)?,
            dof_velocity: dof_velocity_mean(&qds)?,
            energy: energy_mean(&taus, &qds)?,
            base_acc: base_acc(&vs, dt)?,
            action_rate: action_rate(&actions, dt)?,
            task_return: task_return(&[tracking], [w.tracking_lin, w.tracking_yaw])?,
        });
    }

    let policy = policy_stats(agent, &inputs, cfg, &mut seeder)?;
    Ok(Evaluation {
        report: MetricsReport::aggregate(&results),
        trials: results,
        policy,
        trajectory,
    })
}

fn policy_stats(
    agent: &Agent,
    inputs: &[Vec<f64>],
    cfg: &ExperimentConfig,
    rng: &mut impl Rng,
) -> Result<PolicyStats> {
    let want = cfg.eval.gradient_states.max(2).min(inputs.len());
    let stride = (inputs.len() / want).max(1);
    let picked: Vec<Vec<f64>> = inputs.iter().step_by(stride).take(want).cloned().collect();
    let states = stack_rows(&picked);
    let grads = policy_input_gradient_norm(&agent.policy.mean, &states)?;
    let lipschitz =
        empirical_lipschitz(&agent.policy.mean, &states, cfg.eval.lipschitz_pairs, rng)?;
    Ok(PolicyStats {
        input_grad_norm_mean: grads.mean,
        input_grad_norm_max: grads.max,
        lipschitz,
        states: picked.len(),
    })
}
