use serde::{Deserialize, Serialize};

use crate::config::SmoothnessWeights;

/// Signed smoothness-reward terms for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SmoothnessTerms {
    pub action_rate: f64,
    pub dof_velocity: f64,
    pub dof_acceleration: f64,
    pub torques: f64,
}

impl SmoothnessTerms {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.action_rate,
            self.dof_velocity,
            self.dof_acceleration,
            self.torques,
        ]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// `−w_ar‖a_t − a_{t−1}‖² − w_dv‖q̇‖² − w_da‖(q̇ − q̇_prev)/dt‖² − w_τ‖τ‖²`.
pub fn smoothness_reward(
    action: &[f64],
    prev_action: &[f64],
    qd: &[f64],
    qd_prev: &[f64],
    torque: &[f64],
    dt: f64,
    w: &SmoothnessWeights,
) -> SmoothnessTerms {
    let zero = vec![0.0; qd.len()];
    SmoothnessTerms {
        action_rate: -w.action_rate * sq_dist(action, prev_action),
        dof_velocity: -w.dof_velocity * sq_dist(qd, &zero),
        dof_acceleration: -w.dof_acceleration * sq_dist(qd, qd_prev) / (dt * dt),
        torques: -w.torques * torque.iter().map(|t| t * t).sum::<f64>(),
    }
}

/// First-order exponential smoother on the action stream. It sits between
/// the policy and the plant and is never differentiated through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowPassFilter {
    pub alpha: f64,
    state: Option<Vec<f64>>,
}

impl LowPassFilter {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, state: None }
    }

    pub fn reset(&mut self) {
        self.state = None;
    }

    /// `a'_t = α a_t + (1 − α) a'_{t−1}`, seeded with the first action.
    pub fn apply(&mut self, action: &[f64]) -> Vec<f64> {
        let out: Vec<f64> = match &self.state {
            None => action.to_vec(),
            Some(prev) => action
                .iter()
                .zip(prev)
                .map(|(a, p)| self.alpha * a + (1.0 - self.alpha) * p)
                .collect(),
        };
        self.state = Some(out.clone());
        out
    }
}
