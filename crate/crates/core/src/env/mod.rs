mod tracker;

pub use tracker::{
    pd_torque, reward_terms, Command, CommandRanges, EnvKind, Observation, PlantState,
    PrivilegedInfo, RandomizationRanges, RewardTerms, RewardWeights, StepInfo, StepOutcome,
    TrackerConfig, TrackerEnv,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LcpError, Result};

/// A fixed-order batch of independent environments, each with its own
/// random stream derived from a base seed.
#[derive(Debug, Clone)]
pub struct VecEnv {
    envs: Vec<TrackerEnv>,
}

impl VecEnv {
    pub fn new(cfg: &TrackerConfig, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(LcpError::invalid("num_envs", "must be at least 1"));
        }
        let mut seeder = ChaCha8Rng::seed_from_u64(seed);
        let envs = (0..count)
            .map(|_| TrackerEnv::new(cfg.clone(), seeder.random()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { envs })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn config(&self) -> &TrackerConfig {
        self.envs[0].config()
    }

    pub fn envs(&self) -> &[TrackerEnv] {
        &self.envs
    }

    pub fn envs_mut(&mut self) -> &mut [TrackerEnv] {
        &mut self.envs
    }

    pub fn reset_all(&mut self) -> Vec<(Observation, PrivilegedInfo)> {
        self.envs.iter_mut().map(TrackerEnv::reset).collect()
    }

    /// Steps every environment with its row of `actions`.
    pub fn step(&mut self, actions: &[Vec<f64>]) -> Result<Vec<StepOutcome>> {
        if actions.len() != self.envs.len() {
            return Err(LcpError::LengthMismatch(self.envs.len(), actions.len()));
        }
        self.envs
            .iter_mut()
            .zip(actions)
            .map(|(env, a)| env.step(a))
            .collect()
    }
}

/// Column names of a trajectory dump for an `n`-joint plant.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["q", "qd", "a", "tau"] {
        h.extend((0..n).map(|i| format!("{prefix}{i}")));
    }
    h.extend(
        [
            "v_x",
            "v_y",
            "v_yaw",
            "c_x",
            "c_y",
            "c_yaw",
            "tracking_lin",
            "tracking_yaw",
            "gait_style",
            "torque_sq",
            "dof_limit_excess",
        ]
        .map(String::from),
    );
    h
}

/// One trajectory row matching [`trajectory_header`]. `action` is the
/// action sent to the environment at this step.
pub fn trajectory_row(t: usize, action: &[f64], out: &StepOutcome) -> Vec<f64> {
    let i = &out.info;
    let mut row = vec![t as f64];
    row.extend(&i.q);
    row.extend(&i.qd);
    row.extend(action);
    row.extend(&i.torque);
    row.extend(i.base_velocity);
    row.extend(i.command.as_array());
    let r = &out.terms;
    row.extend([
        r.tracking_lin,
        r.tracking_yaw,
        r.gait_style,
        r.torque_sq,
        r.dof_limit_excess,
    ]);
    row
}
