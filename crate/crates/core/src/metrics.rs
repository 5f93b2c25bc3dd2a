//! Smoothness metrics over trajectories and local-sensitivity estimates of
//! a policy's mean network.

use std::collections::BTreeSet;

use lcp_autodiff::{backward, Graph, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LcpError, Result};
use crate::nets::Mlp;

/// Snake-case metric columns, in report order.
pub const METRIC_COLUMNS: [&str; 6] = [
    "action_jitter",
    "dof_pos_jitter",
    "dof_velocity",
    "energy",
    "base_acc",
    "task_return",
];

/// Display headers for the aligned-text table, same order as
/// [`METRIC_COLUMNS`].
pub const METRIC_HEADERS: [&str; 6] = [
    "Action Jitter",
    "DoF Pos Jitter",
    "DoF Velocity",
    "Energy",
    "Base Acc",
    "Task Return",
];

fn need(series_len: usize, needed: usize) -> Result<()> {
    if series_len < needed {
        Err(LcpError::ShortSeries {
            needed,
            got: series_len,
        })
    } else {
        Ok(())
    }
}

fn channels(series: &[Vec<f64>]) -> Result<usize> {
    let n = series.first().map_or(0, Vec::len);
    if let Some(bad) = series.iter().find(|s| s.len() != n) {
        return Err(LcpError::LengthMismatch(n, bad.len()));
    }
    Ok(n)
}

/// Mean over time and channels of `|x_t − 3x_{t−1} + 3x_{t−2} − x_{t−3}| / dt³`.
pub fn jitter(series: &[Vec<f64>], dt: f64) -> Result<f64> {
    need(series.len(), 4)?;
    let n = channels(series)?;
    let dt3 = dt * dt * dt;
    let mut total = 0.0;
    for w in series.windows(4) {
        for (c, x) in w[3].iter().enumerate() {
            total += (x - 3.0 * w[2][c] + 3.0 * w[1][c] - w[0][c]).abs() / dt3;
        }
    }
    Ok(total / ((series.len() - 3) * n.max(1)) as f64)
}

/// Mean over time and channels of `|a_t − a_{t−1}| / dt`.
pub fn action_rate(series: &[Vec<f64>], dt: f64) -> Result<f64> {
    need(series.len(), 2)?;
    let n = channels(series)?;
    let total: f64 = series
        .windows(2)
        .flat_map(|w| (0..n).map(move |c| (w[1][c] - w[0][c]).abs()))
        .sum();
    Ok(total / (dt * ((series.len() - 1) * n.max(1)) as f64))
}

/// Mean `|q̇|` over time and joints.
pub fn dof_velocity_mean(qd: &[Vec<f64>]) -> Result<f64> {
    need(qd.len(), 1)?;
    let n = channels(qd)?;
    let total: f64 = qd.iter().flatten().map(|v| v.abs()).sum();
    Ok(total / (qd.len() * n.max(1)) as f64)
}

/// Mean over time of `Σᵢ |τᵢ q̇ᵢ|`.
pub fn energy_mean(torque: &[Vec<f64>], qd: &[Vec<f64>]) -> Result<f64> {
    if torque.len() != qd.len() {
        return Err(LcpError::LengthMismatch(torque.len(), qd.len()));
    }
    need(qd.len(), 1)?;
    let mut total = 0.0;
    for (t, v) in torque.iter().zip(qd) {
        if t.len() != v.len() {
            return Err(LcpError::LengthMismatch(t.len(), v.len()));
        }
        total += t.iter().zip(v).map(|(a, b)| (a * b).abs()).sum::<f64>();
    }
    Ok(total / qd.len() as f64)
}

/// Mean `‖v_t − v_{t−1}‖ / dt`.
pub fn base_acc(v: &[[f64; 3]], dt: f64) -> Result<f64> {
    need(v.len(), 2)?;
    let total: f64 = v
        .windows(2)
        .map(|w| {
            (0..3)
                .map(|k| (w[1][k] - w[0][k]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / (dt * (v.len() - 1) as f64))
}

/// Undiscounted weighted sum of `(tracking_lin, tracking_yaw)` per episode,
/// averaged over episodes.
pub fn task_return(episodes: &[Vec<[f64; 2]>], weights: [f64; 2]) -> Result<f64> {
    need(episodes.len(), 1)?;
    let total: f64 = episodes
        .iter()
        .map(|ep| {
            ep.iter()
                .map(|[lin, yaw]| weights[0] * lin + weights[1] * yaw)
                .sum::<f64>()
        })
        .sum();
    Ok(total / episodes.len() as f64)
}

/// Per-state input-Jacobian norms of a mean network and their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientNormSummary {
    pub norms: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

/// `‖∂μ(x)/∂x‖_F` for every row of `inputs`.
pub fn policy_input_gradient_norm(mean: &Mlp, inputs: &Tensor) -> Result<GradientNormSummary> {
    need(inputs.rows(), 1)?;
    let graph = Graph::new();
    let net = mean.bind(&graph);
    let x = graph.param(inputs.clone());
    let y = net.forward(&x)?;
    let mut sq = vec![0.0; inputs.rows()];
    for k in 0..mean.output_dim() {
        // Rows are independent, so one sweep yields every row's Jacobian row k.
        let g = backward(&y.cols(k, k + 1)?.sum()?, &[&x], false)?.tensor(&x);
        for (r, acc) in sq.iter_mut().enumerate() {
            *acc += g.row_slice(r).iter().map(|v| v * v).sum::<f64>();
        }
    }
    let norms: Vec<f64> = sq.into_iter().map(f64::sqrt).collect();
    let mean_norm = norms.iter().sum::<f64>() / norms.len() as f64;
    let max = norms.iter().cloned().fold(0.0, f64::max);
    Ok(GradientNormSummary {
        norms,
        mean: mean_norm,
        max,
    })
}

/// Largest `‖μ(x₁) − μ(x₂)‖ / ‖x₁ − x₂‖` over distinct sampled row pairs.
pub fn empirical_lipschitz(
    mean: &Mlp,
    inputs: &Tensor,
    pair_count: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let n = inputs.rows();
    need(n, 2)?;
    let out = mean.forward(inputs)?;
    let available = n * (n - 1) / 2;
    let pairs: Vec<(usize, usize)> = if pair_count >= available {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect()
    } else {
        let mut seen = BTreeSet::new();
        let mut order = Vec::with_capacity(pair_count);
        while order.len() < pair_count {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if seen.insert(key) {
                order.push(key);
            }
        }
        order
    };
    let dist = |t: &Tensor, i: usize, j: usize| {
        t.row_slice(i)
            .iter()
            .zip(t.row_slice(j))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut best: Option<f64> = None;
    for (i, j) in pairs {
        let dx = dist(inputs, i, j);
        if dx == 0.0 {
            continue;
        }
        let k = dist(&out, i, j) / dx;
        best = Some(best.map_or(k, |b: f64| b.max(k)));
    }
    best.ok_or(LcpError::DegeneratePairs)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// The std uses the `n − 1` denominator and is 0 for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

/// Metrics of one evaluation episode (or one seed, after averaging).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub action_jitter: f64,
    pub dof_pos_jitter: f64,
    pub dof_velocity: f64,
    pub energy: f64,
    pub base_acc: f64,
    pub action_rate: f64,
    pub task_return: f64,
}

impl TrialMetrics {
    /// Values in [`METRIC_COLUMNS`] order.
    pub fn columns(&self) -> [f64; 6] {
        [
            self.action_jitter,
            self.dof_pos_jitter,
            self.dof_velocity,
            self.energy,
            self.base_acc,
            self.task_return,
        ]
    }

    pub fn from_columns(c: [f64; 6], action_rate: f64) -> Self {
        Self {
            action_jitter: c[0],
            dof_pos_jitter: c[1],
            dof_velocity: c[2],
            energy: c[3],
            base_acc: c[4],
            action_rate,
            task_return: c[5],
        }
    }

    /// Field-wise mean of several trials.
    pub fn mean_of(trials: &[TrialMetrics]) -> Self {
        let report = MetricsReport::aggregate(trials);
        Self::from_columns(report.means(), report.action_rate.mean)
    }
}

/// Mean ± std of each metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub action_jitter: Stat,
    pub dof_pos_jitter: Stat,
    pub dof_velocity: Stat,
    pub energy: Stat,
    pub base_acc: Stat,
    pub action_rate: Stat,
    pub task_return: Stat,
}

impl MetricsReport {
    pub fn aggregate(trials: &[TrialMetrics]) -> Self {
        let stat =
            |f: fn(&TrialMetrics) -> f64| Stat::of(&trials.iter().map(f).collect::<Vec<_>>());
        Self {
            action_jitter: stat(|t| t.action_jitter),
            dof_pos_jitter: stat(|t| t.dof_pos_jitter),
            dof_velocity: stat(|t| t.dof_velocity),
            energy: stat(|t| t.energy),
            base_acc: stat(|t| t.base_acc),
            action_rate: stat(|t| t.action_rate),
            task_return: stat(|t| t.task_return),
        }
    }

    pub fn stats(&self) -> [Stat; 6] {
        [
            self.action_jitter,
            self.dof_pos_jitter,
            self.dof_velocity,
            self.energy,
            self.base_acc,
            self.task_return,
        ]
    }

    pub fn means(&self) -> [f64; 6] {
        self.stats().map(|s| s.mean)
    }

    /// `method, <metric>…, <metric>_std…`
    pub fn csv_header() -> Vec<String> {
        let mut h = vec!["method".to_string()];
        h.extend(METRIC_COLUMNS.iter().map(|c| c.to_string()));
        h.extend(METRIC_COLUMNS.iter().map(|c| format!("{c}_std")));
        h
    }

    pub fn csv_values(&self) -> Vec<f64> {
        let s = self.stats();
        s.iter()
            .map(|x| x.mean)
            .chain(s.iter().map(|x| x.std))
            .collect()
    }

    /// Whether every metric is finite and every smoothness metric is
    /// nonnegative.
    pub fn is_valid(&self) -> bool {
        let s = self.stats();
        s.iter().all(|x| x.mean.is_finite() && x.std.is_finite())
            && s[..5].iter().all(|x| x.mean >= 0.0)
            && self.action_rate.mean >= 0.0
    }
}
