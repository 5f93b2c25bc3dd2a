use std::collections::VecDeque;

use lcp_autodiff::Tensor;
use rand::Rng;

use super::agent::{stack_rows, Agent};
use super::curriculum::apply_curriculum;
use super::smoothing::{smoothness_reward, LowPassFilter, SmoothnessTerms};
use crate::config::{ExperimentConfig, LatentSource, SmoothingMode};
use crate::env::{Observation, PrivilegedInfo, RewardTerms, VecEnv};
use crate::error::{LcpError, Result};

/// Length and weighted tracking return of a finished training episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStat {
    pub length: usize,
    pub task_return: f64,
}

/// Time-major transitions: index `[t]` holds one row per environment.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub obs_raw: Vec<Tensor>,
    pub obs_norm: Vec<Tensor>,
    /// Stacked raw observation history, oldest first (zero columns without
    /// ROA).
    pub history: Vec<Tensor>,
    pub privileged: Vec<Tensor>,
    pub latent: Vec<Option<Tensor>>,
    /// Sampled (unfiltered) policy actions.
    pub actions: Vec<Tensor>,
    /// Actions that reached the environment.
    pub applied: Vec<Vec<Vec<f64>>>,
    pub log_probs: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub rewards: Vec<Vec<f64>>,
    pub terms: Vec<Vec<RewardTerms>>,
    pub smoothness: Vec<Vec<SmoothnessTerms>>,
    pub dones: Vec<Vec<bool>>,
    pub last_values: Vec<f64>,
    pub episodes: Vec<EpisodeStat>,
    /// Mean action jitter over steps with three predecessors in the same
    /// episode.
    pub action_jitter: Option<f64>,
    pub curriculum_scale: f64,
}

impl RolloutBatch {
    pub fn horizon(&self) -> usize {
        self.obs_raw.len()
    }

    pub fn num_envs(&self) -> usize {
        self.last_values.len()
    }

    pub fn len(&self) -> usize {
        self.horizon() * self.num_envs()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Live state of the training environments between rollouts.
#[derive(Debug, Clone)]
pub struct EnvRunner {
    pub envs: VecEnv,
    obs: Vec<Observation>,
    privileged: Vec<PrivilegedInfo>,
    history: Vec<VecDeque<Vec<f64>>>,
    filters: Option<Vec<LowPassFilter>>,
    recent: Vec<VecDeque<Vec<f64>>>,
    ep_len: Vec<usize>,
    ep_task: Vec<f64>,
}

impl EnvRunner {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let mut envs = VecEnv::new(&cfg.env, cfg.ppo.num_envs, seed)?;
        let n = envs.len();
        let start = envs.reset_all();
        let h = if cfg.roa.enabled {
            cfg.roa.history_len
        } else {
            0
        };
        let history = start
            .iter()
            .map(|(o, _)| std::iter::repeat_n(o.0.clone(), h).collect())
            .collect();
        let (obs, privileged) = start.into_iter().unzip();
        let filters = (cfg.smoothing.mode == SmoothingMode::LowpassFilter)
            .then(|| vec![LowPassFilter::new(cfg.smoothing.lowpass_alpha); n]);
        Ok(Self {
            envs,
            obs,
            privileged,
            history,
            filters,
            recent: vec![VecDeque::new(); n],
            ep_len: vec![0; n],
            ep_task: vec![0.0; n],
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    fn raw_obs(&self) -> Tensor {
        stack_rows(&self.obs.iter().map(|o| o.0.clone()).collect::<Vec<_>>())
    }

    fn privileged_rows(&self) -> Tensor {
        stack_rows(
            &self
                .privileged
                .iter()
                .map(|p| p.to_vec())
                .collect::<Vec<_>>(),
        )
    }

    fn history_rows(&self) -> Tensor {
        let rows: Vec<Vec<f64>> = self
            .history
            .iter()
            .map(|h| h.iter().flatten().copied().collect())
            .collect();
        let cols = rows.first().map_or(0, Vec::len);
        Tensor::from_fn(rows.len(), cols, |r, c| rows[r][c])
    }
}

fn third_difference(w: &VecDeque<Vec<f64>>, a: &[f64], dt: f64) -> f64 {
    let n = a.len().max(1) as f64;
    a.iter()
        .enumerate()
        .map(|(c, x)| (x - 3.0 * w[2][c] + 3.0 * w[1][c] - w[0][c]).abs())
        .sum::<f64>()
        / (n * dt * dt * dt)
}

/// Runs `horizon` vectorized steps with sampled actions. The normalizer is
/// updated with each step's raw observations before they are normalized.
pub fn collect_rollout(
    agent: &mut Agent,
    runner: &mut EnvRunner,
    cfg: &ExperimentConfig,
    curriculum_scale: f64,
    rng: &mut impl Rng,
) -> Result<RolloutBatch> {
    let horizon = cfg.ppo.horizon;
    if horizon == 0 {
        return Err(LcpError::invalid("ppo.horizon", "must be at least 1"));
    }
    let n = runner.envs.len();
    let dt = cfg.env.dt;
    let weights = cfg.env.rewards;
    let mut batch = RolloutBatch {
        obs_raw: Vec::with_capacity(horizon),
        obs_norm: Vec::with_capacity(horizon),
        history: Vec::with_capacity(horizon),
        privileged: Vec::with_capacity(horizon),
        latent: Vec::with_capacity(horizon),
        actions: Vec::with_capacity(horizon),
        applied: Vec::with_capacity(horizon),
        log_probs: Vec::with_capacity(horizon),
        values: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        terms: Vec::with_capacity(horizon),
        smoothness: Vec::with_capacity(horizon),
        dones: Vec::with_capacity(horizon),
        last_values: Vec::new(),
        episodes: Vec::new(),
        action_jitter: None,
        curriculum_scale,
    };
    let (mut jitter_sum, mut jitter_count) = (0.0, 0usize);

    for _ in 0..horizon {
        let raw = runner.raw_obs();
        agent.normalizer.update(&raw)?;
        let obs_norm = agent.normalizer.apply(&raw)?;
        let privileged = runner.privileged_rows();
        let history = runner.history_rows();
        let latent = agent.latent(LatentSource::Privileged, &privileged, &history)?;
        let (actions, log_probs) = agent
            .policy
            .sample_action(&obs_norm, latent.as_ref(), rng)?;
        let values = agent.value_of(&obs_norm, &privileged)?;

        let mut applied: Vec<Vec<f64>> = (0..n).map(|e| actions.row_slice(e).to_vec()).collect();
        if let Some(filters) = &mut runner.filters {
            for (a, f) in applied.iter_mut().zip(filters.iter_mut()) {
                *a = f.apply(a);
            }
        }
        let prev_actions: Vec<Vec<f64>> = runner
            .obs
            .iter()
            .map(|o| o.prev_action().to_vec())
            .collect();
        let outcomes = runner.envs.step(&applied)?;

        let mut rewards = Vec::with_capacity(n);
        let mut terms = Vec::with_capacity(n);
        let mut smooth = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for (e, out) in outcomes.into_iter().enumerate() {
            let s = if cfg.smoothing.mode == SmoothingMode::SmoothnessReward {
                smoothness_reward(
                    &applied[e],
                    &prev_actions[e],
                    &out.info.qd,
                    &out.info.qd_prev,
                    &out.info.torque,
                    dt,
                    &cfg.smoothing.weights,
                )
            } else {
                SmoothnessTerms::default()
            };
            let mut contributions: Vec<f64> = out
                .terms
                .weighted(&weights)
                .iter()
                .map(|(_, v)| *v)
                .collect();
            contributions.extend(s.as_array());
            let r = apply_curriculum(&contributions, curriculum_scale);
            if !r.is_finite() {
                return Err(LcpError::NonFinite("reward".into()));
            }

            let recent = &mut runner.recent[e];
            if recent.len() == 3 {
                jitter_sum += third_difference(recent, &applied[e], dt);
                jitter_count += 1;
                recent.pop_front();
            }
            recent.push_back(applied[e].clone());

            runner.ep_len[e] += 1;
            runner.ep_task[e] += out.terms.task_reward(&weights);
            if out.done {
                batch.episodes.push(EpisodeStat {
                    length: runner.ep_len[e],
                    task_return: runner.ep_task[e],
                });
                runner.ep_len[e] = 0;
                runner.ep_task[e] = 0.0;
                recent.clear();
                if let Some(f) = &mut runner.filters {
                    f[e].reset();
                }
                let env = &mut runner.envs.envs_mut()[e];
                let (o, p) = env.reset();
                for h in runner.history[e].iter_mut() {
                    h.clone_from(&o.0);
                }
                runner.obs[e] = o;
                runner.privileged[e] = p;
            } else {
                if !runner.history[e].is_empty() {
                    runner.history[e].pop_front();
                    runner.history[e].push_back(out.obs.0.clone());
                }
                runner.obs[e] = out.obs;
                runner.privileged[e] = runner.envs.envs()[e].privileged().clone();
            }
            rewards.push(r);
            terms.push(out.terms);
            smooth.push(s);
            dones.push(out.done);
        }

        batch.obs_raw.push(raw);
        batch.obs_norm.push(obs_norm);
        batch.history.push(history);
        batch.privileged.push(privileged);
        batch.latent.push(latent);
        batch.actions.push(actions);
        batch.applied.push(applied);
        batch.log_probs.push(log_probs);
        batch.values.push(values);
        batch.rewards.push(rewards);
        batch.terms.push(terms);
        batch.smoothness.push(smooth);
        batch.dones.push(dones);
    }

    let raw = runner.raw_obs();
    let obs_norm = agent.normalizer.apply(&raw)?;
    batch.last_values = agent.value_of(&obs_norm, &runner.privileged_rows())?;
    batch.action_jitter = (jitter_count > 0).then(|| jitter_sum / jitter_count as f64);
    Ok(batch)
}
