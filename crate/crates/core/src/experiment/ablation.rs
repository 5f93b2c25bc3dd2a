use serde::{Deserialize, Serialize};

use super::{evaluate, train, PolicyStats};
use crate::config::{ExperimentConfig, SmoothingMode};
use crate::error::{LcpError, Result};
use crate::metrics::{MetricsReport, Stat, TrialMetrics};
use crate::nets::GpScope;
use crate::trainer::UpdateRecord;

/// The three ablation panels: smoothing method, penalty weight, penalty
/// input scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    SmoothingMode,
    LambdaGp,
    GpScope,
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::SmoothingMode => "smoothing_mode",
            Self::LambdaGp => "lambda_gp",
            Self::GpScope => "gp_scope",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [Self::SmoothingMode, Self::LambdaGp, Self::GpScope]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                LcpError::invalid(
                    "grid-axis",
                    format!("unknown axis `{s}` (expected smoothing_mode, lambda_gp or gp_scope)"),
                )
            })
    }

    /// `base` with this axis set to `value`. Penalty axes force LCP mode.
    pub fn apply(self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            Self::SmoothingMode => {
                cfg.smoothing.mode = SmoothingMode::parse(value).ok_or_else(|| {
                    LcpError::invalid("grid-values", format!("unknown smoothing mode `{value}`"))
                })?;
            }
            Self::LambdaGp => {
                let lambda: f64 = value.parse().map_err(|_| {
                    LcpError::invalid("grid-values", format!("`{value}` is not a number"))
                })?;
                cfg.smoothing.mode = SmoothingMode::Lcp;
                cfg.lcp.lambda_gp = lambda;
            }
            Self::GpScope => {
                cfg.smoothing.mode = SmoothingMode::Lcp;
                cfg.lcp.scope = match value {
                    "whole" => GpScope::Whole,
                    "current" => GpScope::Current,
                    _ => {
                        return Err(LcpError::invalid(
                            "grid-values",
                            format!("unknown scope `{value}` (expected whole or current)"),
                        ))
                    }
                };
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    /// Trial-averaged metrics of this seed's policy.
    pub metrics: TrialMetrics,
    pub policy: PolicyStats,
    pub log: Vec<UpdateRecord>,
    pub checkpoint_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub label: String,
    pub seeds: Vec<SeedResult>,
    /// Mean ± std across seeds.
    pub report: MetricsReport,
}

/// Mean ± std across per-seed metric rows.
pub fn aggregate_seeds(per_seed: &[TrialMetrics]) -> MetricsReport {
    MetricsReport::aggregate(per_seed)
}

/// Trains and evaluates one configuration over each of its seeds.
pub fn run_cell(cfg: &ExperimentConfig, label: &str) -> Result<CellResult> {
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let outcome = train(cfg, seed, |_, _| Ok(()))?;
        let eval = evaluate(&outcome.checkpoint, cfg, cfg.eval.trials, seed)?;
        seeds.push(SeedResult {
            seed,
            metrics: TrialMetrics::mean_of(&eval.trials),
            policy: eval.policy,
            log: outcome.log,
            checkpoint_digest: outcome.checkpoint.digest(),
        });
    }
    let per_seed: Vec<TrialMetrics> = seeds.iter().map(|s| s.metrics).collect();
    Ok(CellResult {
        label: label.to_string(),
        report: aggregate_seeds(&per_seed),
        seeds,
    })
}

/// Columns of the training-curve data files.
pub const CURVE_COLUMNS: [&str; 5] = [
    "update",
    "action_jitter",
    "task_return",
    "input_grad_norm",
    "mean_reward",
];

/// Per-update means over seeds, in [`CURVE_COLUMNS`] order. Entries with no
/// observation at an update (for example no finished episode) are NaN.
pub fn curve_means(logs: &[Vec<UpdateRecord>]) -> Vec<[f64; 5]> {
    let len = logs.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|u| {
            let mean_of = |f: &dyn Fn(&UpdateRecord) -> Option<f64>| {
                let vals: Vec<f64> = logs.iter().filter_map(|l| f(&l[u])).collect();
                if vals.is_empty() {
                    f64::NAN
                } else {
                    Stat::of(&vals).mean
                }
            };
            [
                logs[0][u].update as f64,
                mean_of(&|r| r.action_jitter),
                mean_of(&|r| r.mean_task_return),
                mean_of(&|r| Some(r.input_grad_norm)),
                mean_of(&|r| Some(r.mean_reward)),
            ]
        })
        .collect()
}
