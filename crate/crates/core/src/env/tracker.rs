//! Velocity-tracking plants with PD-actuated joints.
//!
//! Each joint is a unit point inertia driven by a PD controller toward the
//! commanded target position. The base velocity is a fixed linear mix of the
//! joint velocities, so tracking a nonzero velocity command forces the
//! joints to keep moving inside their limits.

use std::f64::consts::PI;

use lcp_autodiff::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LcpError, Result};

/// Named environment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    /// One joint, `B = [1, 0, 0]ᵀ`.
    Tracker1d,
    /// `joints` joints, `B` drawn from `mixing_seed`.
    TrackerNd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandRanges {
    pub vx: [f64; 2],
    pub vy: [f64; 2],
    pub vyaw: [f64; 2],
    /// Steps between resamples.
    pub resample_period: usize,
}

impl Default for CommandRanges {
    fn default() -> Self {
        Self {
            vx: [0.0, 0.8],
            vy: [-0.4, 0.4],
            vyaw: [-0.6, 0.6],
            resample_period: 150,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizationRanges {
    pub inertia_scale: [f64; 2],
    pub strength_scale: [f64; 2],
    pub max_latency: usize,
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        Self {
            inertia_scale: [0.8, 1.2],
            strength_scale: [0.8, 1.2],
            max_latency: 2,
        }
    }
}

/// Signed reward weights. Penalty weights are negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub tracking_lin: f64,
    pub tracking_yaw: f64,
    pub gait_style: f64,
    pub torques: f64,
    pub dof_pos_limits: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            tracking_lin: 1.0,
            tracking_yaw: 0.5,
            gait_style: 0.3,
            torques: -6e-7,
            dof_pos_limits: -10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub kind: EnvKind,
    /// Joint count for `tracker_nd` (ignored for `tracker1d`).
    pub joints: usize,
    pub mixing_seed: u64,
    pub dt: f64,
    pub gait_period: f64,
    pub kp: f64,
    pub kd: f64,
    pub torque_limit: f64,
    pub velocity_limit: f64,
    pub inertia: f64,
    /// Episodes end when any `|q|` exceeds this.
    pub joint_limit: f64,
    /// Fraction of `joint_limit` beyond which the position-limit penalty
    /// accrues.
    pub soft_limit_ratio: f64,
    pub episode_length: usize,
    pub init_noise: f64,
    pub tracking_sigma: f64,
    pub gait_amplitude: f64,
    pub commands: CommandRanges,
    pub randomization: RandomizationRanges,
    pub rewards: RewardWeights,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            kind: EnvKind::Tracker1d,
            joints: 6,
            mixing_seed: 0,
            dt: 0.02,
            gait_period: 0.8,
            kp: 20.0,
            kd: 0.5,
            torque_limit: 10.0,
            velocity_limit: 20.0,
            inertia: 1.0,
            joint_limit: 2.0,
            soft_limit_ratio: 0.9,
            episode_length: 500,
            init_noise: 0.1,
            tracking_sigma: 0.25,
            gait_amplitude: 0.3,
            commands: CommandRanges::default(),
            randomization: RandomizationRanges::default(),
            rewards: RewardWeights::default(),
        }
    }
}

impl TrackerConfig {
    pub fn tracker1d() -> Self {
        Self::default()
    }

    pub fn tracker_nd(joints: usize, mixing_seed: u64) -> Self {
        Self {
            kind: EnvKind::TrackerNd,
            joints,
            mixing_seed,
            ..Self::default()
        }
    }

    pub fn num_joints(&self) -> usize {
        match self.kind {
            EnvKind::Tracker1d => 1,
            EnvKind::TrackerNd => self.joints,
        }
    }

    /// Observation width: phase (2) + command (3) + q, q̇, previous action.
    pub fn obs_dim(&self) -> usize {
        5 + 3 * self.num_joints()
    }

    /// Privileged width: inertia and strength scales, latency, base velocity.
    pub fn privileged_dim(&self) -> usize {
        2 * self.num_joints() + 4
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.dt", self.dt),
            ("env.gait_period", self.gait_period),
            ("env.torque_limit", self.torque_limit),
            ("env.velocity_limit", self.velocity_limit),
            ("env.inertia", self.inertia),
            ("env.joint_limit", self.joint_limit),
            ("env.tracking_sigma", self.tracking_sigma),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LcpError::invalid(
                    field,
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if self.num_joints() == 0 {
            return Err(LcpError::invalid("env.joints", "must be at least 1"));
        }
        if self.episode_length == 0 {
            return Err(LcpError::invalid(
                "env.episode_length",
                "must be at least 1",
            ));
        }
        if self.commands.resample_period == 0 {
            return Err(LcpError::invalid(
                "env.commands.resample_period",
                "must be at least 1",
            ));
        }
        for (field, [lo, hi]) in [
            ("env.commands.vx", self.commands.vx),
            ("env.commands.vy", self.commands.vy),
            ("env.commands.vyaw", self.commands.vyaw),
            (
                "env.randomization.inertia_scale",
                self.randomization.inertia_scale,
            ),
            (
                "env.randomization.strength_scale",
                self.randomization.strength_scale,
            ),
        ] {
            if lo > hi {
                return Err(LcpError::invalid(
                    field,
                    format!("empty range [{lo}, {hi}]"),
                ));
            }
        }
        if self.randomization.inertia_scale[0] <= 0.0 || self.randomization.strength_scale[0] <= 0.0
        {
            return Err(LcpError::invalid(
                "env.randomization",
                "scales must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.soft_limit_ratio) {
            return Err(LcpError::invalid(
                "env.soft_limit_ratio",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }

    /// Base-velocity mixing map `B` (3 × n).
    pub fn mixing(&self) -> Tensor {
        match self.kind {
            EnvKind::Tracker1d => Tensor::column(vec![1.0, 0.0, 0.0]),
            EnvKind::TrackerNd => {
                let n = self.joints;
                let mut rng = ChaCha8Rng::seed_from_u64(self.mixing_seed);
                let mut b = Tensor::from_fn(3, n, |_, _| rng.random_range(-1.0..1.0));
                // Diagonal dominance keeps B full rank for n ≥ 3.
                for i in 0..3.min(n) {
                    let v = b.get(i, i);
                    b.set(i, i, v + 2.0 * if v >= 0.0 { 1.0 } else { -1.0 });
                }
                let scale = 1.0 / (n as f64).sqrt();
                b.map(|v| v * scale)
            }
        }
    }

    /// Gait reference phase offsets, evenly spread over the joints.
    pub fn gait_offsets(&self) -> Vec<f64> {
        let n = self.num_joints();
        (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub vx: f64,
    pub vy: f64,
    pub vyaw: f64,
}

impl Command {
    pub fn as_array(&self) -> [f64; 3] {
        [self.vx, self.vy, self.vyaw]
    }
}

/// Fixed-layout policy observation:
/// `[sin θ, cos θ, c_x, c_y, c_yaw, q₁…qₙ, q̇₁…q̇ₙ, a₁…aₙ (previous)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn phase(&self) -> [f64; 2] {
        [self.0[0], self.0[1]]
    }

    pub fn command(&self) -> [f64; 3] {
        [self.0[2], self.0[3], self.0[4]]
    }

    fn n(&self) -> usize {
        (self.0.len() - 5) / 3
    }

    pub fn q(&self) -> &[f64] {
        &self.0[5..5 + self.n()]
    }

    pub fn qd(&self) -> &[f64] {
        let n = self.n();
        &self.0[5 + n..5 + 2 * n]
    }

    pub fn prev_action(&self) -> &[f64] {
        let n = self.n();
        &self.0[5 + 2 * n..]
    }
}

/// Per-episode plant perturbations plus the current base velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivilegedInfo {
    pub inertia_scale: Vec<f64>,
    pub strength_scale: Vec<f64>,
    pub latency: usize,
    pub base_velocity: [f64; 3],
}

impl PrivilegedInfo {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.inertia_scale.clone();
        v.extend(&self.strength_scale);
        v.push(self.latency as f64);
        v.extend(self.base_velocity);
        v
    }
}

/// Raw, unweighted reward quantities for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardTerms {
    pub tracking_lin: f64,
    pub tracking_yaw: f64,
    pub gait_style: f64,
    /// `Σ τᵢ²`
    pub torque_sq: f64,
    /// `Σ max(|qᵢ| − soft limit, 0)`
    pub dof_limit_excess: f64,
}

impl RewardTerms {
    /// Signed contributions `(name, weight × term)`.
    pub fn weighted(&self, w: &RewardWeights) -> [(&'static str, f64); 5] {
        [
            ("tracking_lin", w.tracking_lin * self.tracking_lin),
            ("tracking_yaw", w.tracking_yaw * self.tracking_yaw),
            ("gait_style", w.gait_style * self.gait_style),
            ("torques", w.torques * self.torque_sq),
            ("dof_pos_limits", w.dof_pos_limits * self.dof_limit_excess),
        ]
    }

    /// Weighted velocity-tracking reward, the per-step task return.
    pub fn task_reward(&self, w: &RewardWeights) -> f64 {
        w.tracking_lin * self.tracking_lin + w.tracking_yaw * self.tracking_yaw
    }
}

/// `τ = s ⊙ clip(k_p (a − q) − k_d q̇, ±τ_max)`.
pub fn pd_torque(
    target: &[f64],
    q: &[f64],
    qd: &[f64],
    kp: f64,
    kd: f64,
    torque_limit: f64,
    strength_scale: &[f64],
) -> Vec<f64> {
    target
        .iter()
        .zip(q)
        .zip(qd)
        .zip(strength_scale)
        .map(|(((a, q), qd), s)| s * (kp * (a - q) - kd * qd).clamp(-torque_limit, torque_limit))
        .collect()
}

/// Reward kernels for a plant state.
pub fn reward_terms(
    cfg: &TrackerConfig,
    q: &[f64],
    base_velocity: [f64; 3],
    command: Command,
    clock: f64,
    torque: &[f64],
) -> RewardTerms {
    let sigma = cfg.tracking_sigma;
    let lin_err = (base_velocity[0] - command.vx).powi(2) + (base_velocity[1] - command.vy).powi(2);
    let yaw_err = (base_velocity[2] - command.vyaw).powi(2);
    let gait_err: f64 = q
        .iter()
        .zip(cfg.gait_offsets())
        .map(|(qi, d)| (qi - cfg.gait_amplitude * (clock + d).sin()).powi(2))
        .sum();
    let soft = cfg.soft_limit_ratio * cfg.joint_limit;
    RewardTerms {
        tracking_lin: (-lin_err / sigma).exp(),
        tracking_yaw: (-yaw_err / sigma).exp(),
        gait_style: (-gait_err / sigma).exp(),
        torque_sq: torque.iter().map(|t| t * t).sum(),
        dof_limit_excess: q.iter().map(|qi| (qi.abs() - soft).max(0.0)).sum(),
    }
}

/// Mutable plant state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub base_velocity: [f64; 3],
    /// Most recent action first; length `max_latency + 1`.
    pub action_queue: Vec<Vec<f64>>,
    pub prev_action: Vec<f64>,
    pub step: usize,
    pub clock: f64,
}

/// Everything the step produced besides the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub torque: Vec<f64>,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub qd_prev: Vec<f64>,
    pub base_velocity: [f64; 3],
    pub command: Command,
    /// Action that reached the PD controller after latency.
    pub delayed_action: Vec<f64>,
    pub timeout: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub terms: RewardTerms,
    pub done: bool,
    pub info: StepInfo,
}

/// One seedable environment instance with its own random stream.
#[derive(Debug, Clone)]
pub struct TrackerEnv {
    cfg: TrackerConfig,
    mixing: Tensor,
    rng: ChaCha8Rng,
    state: PlantState,
    privileged: PrivilegedInfo,
    command: Command,
    done: bool,
}

impl TrackerEnv {
    pub fn new(cfg: TrackerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.num_joints();
        let mixing = cfg.mixing();
        let queue_len = cfg.randomization.max_latency + 1;
        Ok(Self {
            mixing,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: PlantState {
                q: vec![0.0; n],
                qd: vec![0.0; n],
                base_velocity: [0.0; 3],
                action_queue: vec![vec![0.0; n]; queue_len],
                prev_action: vec![0.0; n],
                step: 0,
                clock: 0.0,
            },
            privileged: PrivilegedInfo {
                inertia_scale: vec![1.0; n],
                strength_scale: vec![1.0; n],
                latency: 0,
                base_velocity: [0.0; 3],
            },
            command: Command {
                vx: 0.0,
                vy: 0.0,
                vyaw: 0.0,
            },
            done: true,
            cfg,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn command(&self) -> Command {
        self.command
    }

    pub fn privileged(&self) -> &PrivilegedInfo {
        &self.privileged
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn num_joints(&self) -> usize {
        self.cfg.num_joints()
    }

    /// Overrides the episode's plant perturbations (tests and evaluation of
    /// nominal plants).
    pub fn set_privileged(&mut self, inertia: Vec<f64>, strength: Vec<f64>, latency: usize) {
        self.privileged.inertia_scale = inertia;
        self.privileged.strength_scale = strength;
        self.privileged.latency = latency.min(self.cfg.randomization.max_latency);
    }

    pub fn set_command(&mut self, command: Command) {
        self.command = command;
    }

    /// Overrides joint state (tests).
    pub fn set_joint_state(&mut self, q: Vec<f64>, qd: Vec<f64>) {
        self.state.base_velocity = self.mix(&qd);
        self.privileged.base_velocity = self.state.base_velocity;
        self.state.q = q;
        self.state.qd = qd;
    }

    fn sample_command(&mut self) {
        let r = self.cfg.commands;
        let mut draw = |[lo, hi]: [f64; 2]| {
            if lo == hi {
                lo
            } else {
                self.rng.random_range(lo..=hi)
            }
        };
        self.command = Command {
            vx: draw(r.vx),
            vy: draw(r.vy),
            vyaw: draw(r.vyaw),
        };
    }

    fn mix(&self, qd: &[f64]) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = qd
                .iter()
                .enumerate()
                .map(|(j, x)| self.mixing.get(i, j) * x)
                .sum();
        }
        v
    }

    pub fn reset(&mut self) -> (Observation, PrivilegedInfo) {
        let n = self.num_joints();
        let noise = self.cfg.init_noise;
        let rand = &mut self.rng;
        let q: Vec<f64> = (0..n).map(|_| rand.random_range(-noise..=noise)).collect();
        let qd: Vec<f64> = (0..n).map(|_| rand.random_range(-noise..=noise)).collect();
        let dr = self.cfg.randomization;
        let inertia = (0..n)
            .map(|_| rand.random_range(dr.inertia_scale[0]..=dr.inertia_scale[1]))
            .collect();
        let strength = (0..n)
            .map(|_| rand.random_range(dr.strength_scale[0]..=dr.strength_scale[1]))
            .collect();
        let latency = rand.random_range(0..=dr.max_latency);
        self.privileged = PrivilegedInfo {
            inertia_scale: inertia,
            strength_scale: strength,
            latency,
            base_velocity: [0.0; 3],
        };
        self.state.action_queue = vec![vec![0.0; n]; dr.max_latency + 1];
        self.state.prev_action = vec![0.0; n];
        self.state.step = 0;
        self.state.clock = 0.0;
        self.set_joint_state(q, qd);
        self.sample_command();
        self.done = false;
        (self.observe(), self.privileged.clone())
    }

    pub fn observe(&self) -> Observation {
        let s = &self.state;
        let mut v = vec![s.clock.sin(), s.clock.cos()];
        v.extend(self.command.as_array());
        v.extend(&s.q);
        v.extend(&s.qd);
        v.extend(&s.prev_action);
        Observation(v)
    }

    /// Advances the plant by one `dt` with the given target joint positions.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.done {
            return Err(LcpError::EpisodeDone);
        }
        let n = self.num_joints();
        if action.len() != n {
            return Err(LcpError::Dimension {
                what: "action",
                expected: n,
                got: action.len(),
            });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(LcpError::NonFinite("action".into()));
        }
        let cfg = &self.cfg;
        let dt = cfg.dt;

        self.state.action_queue.rotate_right(1);
        self.state.action_queue[0] = action.to_vec();
        let delayed = self.state.action_queue[self.privileged.latency].clone();

        let torque = pd_torque(
            &delayed,
            &self.state.q,
            &self.state.qd,
            cfg.kp,
            cfg.kd,
            cfg.torque_limit,
            &self.privileged.strength_scale,
        );
        let qd_prev = self.state.qd.clone();
        for (i, tau) in torque.iter().enumerate() {
            let acc = tau / (cfg.inertia * self.privileged.inertia_scale[i]);
            let qd = (self.state.qd[i] + acc * dt).clamp(-cfg.velocity_limit, cfg.velocity_limit);
            self.state.qd[i] = qd;
            self.state.q[i] += qd * dt;
        }
        let v = self.mix(&self.state.qd);
        self.state.base_velocity = v;
        self.privileged.base_velocity = v;
        self.state.clock =
            (self.state.clock + 2.0 * PI * dt / cfg.gait_period).rem_euclid(2.0 * PI);
        self.state.step += 1;
        self.state.prev_action = action.to_vec();

        let command = self.command;
        let terms = reward_terms(cfg, &self.state.q, v, command, self.state.clock, &torque);
        let timeout = self.state.step >= cfg.episode_length;
        let out_of_bounds = self.state.q.iter().any(|q| q.abs() > cfg.joint_limit);
        self.done = timeout || out_of_bounds;
        if !self.done && self.state.step.is_multiple_of(cfg.commands.resample_period) {
            self.sample_command();
        }
        Ok(StepOutcome {
            obs: self.observe(),
            terms,
            done: self.done,
            info: StepInfo {
                torque,
                q: self.state.q.clone(),
                qd: self.state.qd.clone(),
                qd_prev,
                base_velocity: v,
                command,
                delayed_action: delayed,
                timeout,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_torque_examples() {
        assert_eq!(
            pd_torque(&[0.3], &[0.3], &[0.0], 20.0, 0.5, 10.0, &[1.0]),
            vec![0.0]
        );
        assert_eq!(
            pd_torque(&[1.0], &[0.0], &[0.0], 20.0, 0.5, 10.0, &[1.0]),
            vec![10.0]
        );
        let full = pd_torque(&[0.2], &[0.0], &[0.4], 20.0, 0.5, 10.0, &[1.0])[0];
        let half = pd_torque(&[0.2], &[0.0], &[0.4], 20.0, 0.5, 10.0, &[0.5])[0];
        assert_eq!(half, 0.5 * full);
    }

    #[test]
    fn reward_terms_at_exact_tracking() {
        let cfg = TrackerConfig::tracker1d();
        let c = Command {
            vx: 0.4,
            vy: -0.1,
            vyaw: 0.2,
        };
        let t = reward_terms(&cfg, &[0.0], [0.4, -0.1, 0.2], c, 0.0, &[0.0]);
        assert_eq!(t.tracking_lin, 1.0);
        assert_eq!(t.tracking_yaw, 1.0);
        assert_eq!(t.torque_sq, 0.0);
    }

    #[test]
    fn half_metre_error_gives_exp_minus_one() {
        let cfg = TrackerConfig::tracker1d();
        let c = Command {
            vx: 0.5,
            vy: 0.0,
            vyaw: 0.0,
        };
        let t = reward_terms(&cfg, &[0.0], [0.2, 0.4, 0.0], c, 0.0, &[0.0]);
        assert!((t.tracking_lin - (-1.0f64).exp()).abs() < 1e-15);
        assert!((t.tracking_lin - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn stepping_a_finished_episode_is_an_error() {
        let mut env = TrackerEnv::new(TrackerConfig::tracker1d(), 0).unwrap();
        assert_eq!(env.step(&[0.0]).unwrap_err(), LcpError::EpisodeDone);
    }

    #[test]
    fn nd_mixing_is_full_rank() {
        let b = TrackerConfig::tracker_nd(6, 3).mixing();
        // Rank via the 3×3 Gram determinant.
        let g = b.matmul(&b.transpose());
        let det = g.get(0, 0) * (g.get(1, 1) * g.get(2, 2) - g.get(1, 2) * g.get(2, 1))
            - g.get(0, 1) * (g.get(1, 0) * g.get(2, 2) - g.get(1, 2) * g.get(2, 0))
            + g.get(0, 2) * (g.get(1, 0) * g.get(2, 1) - g.get(1, 1) * g.get(2, 0));
        assert!(det.abs() > 1e-3);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = TrackerConfig {
            dt: 0.0,
            ..TrackerConfig::default()
        };
        assert!(matches!(
            TrackerEnv::new(cfg, 0),
            Err(LcpError::Invalid { .. })
        ));
    }
}
