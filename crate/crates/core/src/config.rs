//! Experiment configuration. Every section has defaults so partial config
//! files only need to state what they change.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::TrackerConfig;
use crate::error::{LcpError, Result};
use crate::nets::{Activation, GpScope, MlpSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMode {
    None,
    Lcp,
    SmoothnessReward,
    LowpassFilter,
}

impl SmoothingMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Lcp => "lcp",
            Self::SmoothnessReward => "smoothness_reward",
            Self::LowpassFilter => "lowpass_filter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::None,
            Self::Lcp,
            Self::SmoothnessReward,
            Self::LowpassFilter,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothnessWeights {
    pub action_rate: f64,
    pub dof_velocity: f64,
    pub dof_acceleration: f64,
    pub torques: f64,
}

impl Default for SmoothnessWeights {
    fn default() -> Self {
        Self {
            action_rate: 0.01,
            dof_velocity: 0.001,
            dof_acceleration: 2e-6,
            torques: 6e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub mode: SmoothingMode,
    pub weights: SmoothnessWeights,
    pub lowpass_alpha: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            mode: SmoothingMode::Lcp,
            weights: SmoothnessWeights::default(),
            lowpass_alpha: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcpConfig {
    pub lambda_gp: f64,
    pub scope: GpScope,
}

impl Default for LcpConfig {
    fn default() -> Self {
        Self {
            lambda_gp: 0.002,
            scope: GpScope::Whole,
        }
    }
}

/// Which latent the policy sees at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSource {
    /// Adaptation module over the observation history (deployment).
    History,
    /// Privileged encoder (training-time view).
    Privileged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoaConfig {
    pub enabled: bool,
    pub lambda: f64,
    pub history_len: usize,
    pub latent_dim: usize,
    pub encoder: MlpSpec,
    pub adapter: MlpSpec,
}

impl Default for RoaConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            lambda: 0.1,
            history_len: 5,
            latent_dim: 8,
            encoder: MlpSpec::new(vec![32], Activation::Tanh),
            adapter: MlpSpec::new(vec![64], Activation::Tanh),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub enabled: bool,
    pub init: f64,
    pub low_threshold: f64,
    pub high_threshold: f64,
    pub down: f64,
    pub up: f64,
    pub cap: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            init: 0.8,
            low_threshold: 50.0,
            high_threshold: 400.0,
            down: 0.9999,
            up: 1.0001,
            cap: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub num_envs: usize,
    pub horizon: usize,
    pub updates: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 1024,
            learning_rate: 3e-4,
            entropy_coef: 0.005,
            value_coef: 0.5,
            max_grad_norm: 1.0,
            num_envs: 64,
            horizon: 50,
            updates: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub policy: MlpSpec,
    pub value: MlpSpec,
    pub obs_clip: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            policy: MlpSpec::new(vec![64, 64], Activation::Tanh),
            value: MlpSpec::new(vec![64, 64], Activation::Tanh),
            obs_clip: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Independent 500-step evaluation episodes.
    pub trials: usize,
    pub latent: LatentSource,
    /// Pairs sampled for the empirical Lipschitz estimate.
    pub lipschitz_pairs: usize,
    /// Visited states used for the input-gradient statistics.
    pub gradient_states: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trials: 64,
            latent: LatentSource::History,
            lipschitz_pairs: 2000,
            gradient_states: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub env: TrackerConfig,
    pub networks: NetworkConfig,
    pub ppo: PpoConfig,
    pub smoothing: SmoothingConfig,
    pub lcp: LcpConfig,
    pub roa: RoaConfig,
    pub curriculum: CurriculumConfig,
    pub eval: EvalConfig,
    /// Write an intermediate checkpoint every this many updates (0 = only
    /// the final one).
    pub checkpoint_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "lcp".into(),
            seeds: vec![1, 2, 3],
            env: TrackerConfig::default(),
            networks: NetworkConfig::default(),
            ppo: PpoConfig::default(),
            smoothing: SmoothingConfig::default(),
            lcp: LcpConfig::default(),
            roa: RoaConfig::default(),
            curriculum: CurriculumConfig::default(),
            eval: EvalConfig::default(),
            checkpoint_every: 0,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LcpError::invalid(
            field,
            format!("must be positive, got {v}"),
        ))
    }
}

fn unit_interval(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(LcpError::invalid(
            field,
            format!("must lie in [0, 1], got {v}"),
        ))
    }
}

fn at_least_one(field: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(LcpError::invalid(field, "must be at least 1"))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.networks.policy.validate("networks.policy")?;
        self.networks.value.validate("networks.value")?;
        positive("networks.obs_clip", self.networks.obs_clip)?;

        let p = &self.ppo;
        unit_interval("ppo.gamma", p.gamma)?;
        unit_interval("ppo.gae_lambda", p.gae_lambda)?;
        positive("ppo.clip", p.clip)?;
        positive("ppo.learning_rate", p.learning_rate)?;
        positive("ppo.max_grad_norm", p.max_grad_norm)?;
        if p.entropy_coef < 0.0 || p.value_coef < 0.0 {
            return Err(LcpError::invalid(
                "ppo",
                "loss coefficients must be nonnegative",
            ));
        }
        at_least_one("ppo.epochs", p.epochs)?;
        at_least_one("ppo.minibatch", p.minibatch)?;
        at_least_one("ppo.num_envs", p.num_envs)?;
        at_least_one("ppo.horizon", p.horizon)?;

        let s = &self.smoothing;
        if !(s.lowpass_alpha > 0.0 && s.lowpass_alpha <= 1.0) {
            return Err(LcpError::invalid(
                "smoothing.lowpass_alpha",
                format!("must lie in (0, 1], got {}", s.lowpass_alpha),
            ));
        }
        let w = &s.weights;
        if [w.action_rate, w.dof_velocity, w.dof_acceleration, w.torques]
            .iter()
            .any(|v| *v < 0.0)
        {
            return Err(LcpError::invalid(
                "smoothing.weights",
                "weights must be nonnegative",
            ));
        }
        if !(self.lcp.lambda_gp >= 0.0 && self.lcp.lambda_gp.is_finite()) {
            return Err(LcpError::invalid("lcp.lambda_gp", "must be nonnegative"));
        }

        let r = &self.roa;
        if r.enabled {
            if r.lambda < 0.0 {
                return Err(LcpError::invalid("roa.lambda", "must be nonnegative"));
            }
            at_least_one("roa.history_len", r.history_len)?;
            at_least_one("roa.latent_dim", r.latent_dim)?;
            r.encoder.validate("roa.encoder")?;
            r.adapter.validate("roa.adapter")?;
        }

        let c = &self.curriculum;
        if !(c.init > 0.0 && c.init <= c.cap) {
            return Err(LcpError::invalid("curriculum.init", "must lie in (0, cap]"));
        }
        positive("curriculum.down", c.down)?;
        positive("curriculum.up", c.up)?;
        if c.low_threshold > c.high_threshold {
            return Err(LcpError::invalid(
                "curriculum",
                "low_threshold exceeds high_threshold",
            ));
        }

        at_least_one("eval.trials", self.eval.trials)?;
        if self.seeds.is_empty() {
            return Err(LcpError::invalid("seeds", "at least one seed is required"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_json(self)
    }

    /// Hash of the environment section alone; evaluation refuses a
    /// checkpoint trained on a different plant.
    pub fn env_hash(&self) -> String {
        sha256_json(&self.env)
    }
}

pub(crate) fn sha256_json<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config types always serialize");
    hex::encode(Sha256::digest(&json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.lcp.lambda_gp = 0.01;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.env_hash(), b.env_hash());
    }

    #[test]
    fn bad_alpha_names_the_field() {
        let mut c = ExperimentConfig::default();
        c.smoothing.lowpass_alpha = 0.0;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("smoothing.lowpass_alpha"), "{err}");
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [
            SmoothingMode::None,
            SmoothingMode::Lcp,
            SmoothingMode::SmoothnessReward,
            SmoothingMode::LowpassFilter,
        ] {
            assert_eq!(SmoothingMode::parse(m.name()), Some(m));
        }
        assert_eq!(SmoothingMode::parse("bogus"), None);
    }
}
