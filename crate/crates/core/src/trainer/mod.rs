mod adam;
mod agent;
mod curriculum;
mod gae;
mod losses;
mod ppo;
mod rollout;
mod smoothing;

pub use adam::{clip_grad_norm, Adam};
pub use agent::{hstack, stack_rows, Agent};
pub use curriculum::{apply_curriculum, curriculum_step, CurriculumState};
pub use gae::{compute_gae, normalize_advantages};
pub use losses::{clipped_surrogate, lcp_penalty, roa_loss, roa_loss_from_latents};
pub use ppo::{minibatch_loss, ppo_update, FlatBatch, MinibatchLoss, UpdateStats};
pub use rollout::{collect_rollout, EnvRunner, EpisodeStat, RolloutBatch};
pub use smoothing::{smoothness_reward, LowPassFilter, SmoothnessTerms};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::metrics::policy_input_gradient_norm;

/// One training-log record, emitted after every update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub env_steps: usize,
    pub mean_reward: f64,
    pub episodes: usize,
    pub mean_episode_length: Option<f64>,
    pub mean_task_return: Option<f64>,
    pub action_jitter: Option<f64>,
    /// Mean `‖∂μ/∂input‖_F` over the first rollout step's states.
    pub input_grad_norm: f64,
    pub curriculum_scale: f64,
    #[serde(flatten)]
    pub stats: UpdateStats,
}

/// Seeded PPO loop with all of its mutable state.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: ExperimentConfig,
    agent: Agent,
    optimizer: Adam,
    runner: EnvRunner,
    curriculum: CurriculumState,
    rng: ChaCha8Rng,
    updates: usize,
}

impl Trainer {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut init_rng = ChaCha8Rng::seed_from_u64(master.random());
        let env_seed: u64 = master.random();
        let rng = ChaCha8Rng::seed_from_u64(master.random());
        let agent = Agent::new(cfg, &mut init_rng)?;
        let optimizer = Adam::new(cfg.ppo.learning_rate, &agent.params());
        Ok(Self {
            runner: EnvRunner::new(cfg, env_seed)?,
            curriculum: CurriculumState::new(cfg.curriculum),
            cfg: cfg.clone(),
            agent,
            optimizer,
            rng,
            updates: 0,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn into_agent(self) -> Agent {
        self.agent
    }

    pub fn curriculum(&self) -> CurriculumState {
        self.curriculum
    }

    pub fn updates_done(&self) -> usize {
        self.updates
    }

    /// Collects one rollout and runs one PPO update on it.
    pub fn step(&mut self) -> Result<UpdateRecord> {
        let scale = self.curriculum.scale();
        let batch = collect_rollout(
            &mut self.agent,
            &mut self.runner,
            &self.cfg,
            scale,
            &mut self.rng,
        )?;
        let probe_rows = batch.obs_norm[0].rows().min(64);
        let probe_idx: Vec<usize> = (0..probe_rows).collect();
        let probe = FlatBatch::from_rollout(&batch, self.cfg.ppo.gamma, self.cfg.ppo.gae_lambda)?
            .select(&probe_idx);
        let probe_input = self
            .agent
            .policy
            .join_input(&probe.obs_norm, probe.latent.as_ref())?;
        let input_grad_norm =
            policy_input_gradient_norm(&self.agent.policy.mean, &probe_input)?.mean;

        let stats = ppo_update(
            &mut self.agent,
            &mut self.optimizer,
            &batch,
            &self.cfg,
            &mut self.rng,
        )?;

        let episodes = batch.episodes.len();
        let mean_len = (episodes > 0)
            .then(|| batch.episodes.iter().map(|e| e.length as f64).sum::<f64>() / episodes as f64);
        let mean_task = (episodes > 0)
            .then(|| batch.episodes.iter().map(|e| e.task_return).sum::<f64>() / episodes as f64);
        if let Some(len) = mean_len {
            self.curriculum = curriculum_step(self.curriculum, len);
        }
        self.updates += 1;
        let rewards: Vec<f64> = batch.rewards.concat();
        Ok(UpdateRecord {
            update: self.updates,
            env_steps: self.updates * batch.len(),
            mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            episodes,
            mean_episode_length: mean_len,
            mean_task_return: mean_task,
            action_jitter: batch.action_jitter,
            input_grad_norm,
            curriculum_scale: scale,
            stats,
        })
    }
}
