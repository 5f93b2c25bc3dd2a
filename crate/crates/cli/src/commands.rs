use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lcp_autodiff::catalog::{
    first_order_suite, second_order_suite, sin_grad_norm_derivative, OracleOutcome,
};
use lcp_core::env::trajectory_header;
use lcp_core::experiment::{
    curve_means, evaluate, linear_identity_suite, method_label, penalty_gradient_suite, run_cell,
    train, AblationAxis, CellResult, Checkpoint,
};
use lcp_core::metrics::{MetricsReport, TrialMetrics, METRIC_COLUMNS};
use lcp_core::ExperimentConfig;

use crate::config_file::{config_copy, load_config, AblationGrid};
use crate::error::{CliError, CliResult};
use crate::output::{
    aligned_table, curve_dat, json_lines, json_pretty, metrics_csv, read_csv, seeds_csv,
    trajectory_csv, trials_csv, write_file,
};

#[derive(Debug, Parser)]
#[command(
    name = "lcp",
    version,
    about = "Train and evaluate Lipschitz-constrained locomotion policies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one policy and write its checkpoint, log and config copy.
    Train(TrainArgs),
    /// Evaluate a checkpoint with deterministic actions.
    Eval(EvalArgs),
    /// Train and evaluate every value of one ablation axis over the seed list.
    Ablate(AblateArgs),
    /// Re-aggregate per-seed ablation results into tables.
    Report(ReportArgs),
    /// Run the gradient oracle suites.
    CheckGrad(CheckGradArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Defaults to the first seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to runs/<name>.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Environment to evaluate on; defaults to the checkpoint's own.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Defaults to the training seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to the checkpoint's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// smoothing_mode, lambda_gp or gp_scope; overrides the config's [grid].
    #[arg(long)]
    pub grid_axis: Option<String>,
    /// Comma-separated values for the axis.
    #[arg(long, value_delimiter = ',')]
    pub grid_values: Option<Vec<String>>,
    /// Run a single seed instead of the config's seed list.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding seeds_<axis>.csv files from `ablate`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random points per first-order probe.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Ablate(a) => cmd_ablate(&a),
        Command::Report(a) => cmd_report(&a),
        Command::CheckGrad(a) => cmd_check_grad(&a),
    }
}

fn default_out(cfg: &ExperimentConfig) -> PathBuf {
    Path::new("runs").join(&cfg.name)
}

fn progress_every(updates: usize) -> usize {
    (updates / 10).max(1)
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?.config;
    let seed = a.seed.unwrap_or(cfg.seeds[0]);
    let out = a.out.clone().unwrap_or_else(|| default_out(&cfg));
    let hash = cfg.hash();
    write_file(&out.join("config.toml"), &config_copy(&cfg))?;

    let every = progress_every(cfg.ppo.updates);
    let mut snapshots = vec![];
    let outcome = train(&cfg, seed, |rec, trainer| {
        if rec.update % every == 0 {
            eprintln!(
                "update {:>5}/{}  reward {:.4}  return {}  jitter {}",
                rec.update,
                cfg.ppo.updates,
                rec.mean_reward,
                rec.mean_task_return
                    .map_or("-".into(), |v| format!("{v:.2}")),
                rec.action_jitter.map_or("-".into(), |v| format!("{v:.1}")),
            );
        }
        if cfg.checkpoint_every > 0
            && rec.update % cfg.checkpoint_every == 0
            && rec.update < cfg.ppo.updates
        {
            snapshots.push(Checkpoint::new(
                &cfg,
                seed,
                rec.update,
                trainer.agent().clone(),
            ));
        }
        Ok(())
    })?;
    for ck in &snapshots {
        let path = out
            .join("checkpoints")
            .join(format!("update_{:06}.json", ck.updates));
        write_file(&path, &ck.to_json())?;
    }
    write_file(&out.join("checkpoint.json"), &outcome.checkpoint.to_json())?;
    write_file(
        &out.join("train_log.jsonl"),
        &json_lines(&hash, &outcome.log),
    )?;
    println!("checkpoint {}", out.join("checkpoint.json").display());
    println!("config_hash {hash}");
    println!("checkpoint_sha256 {}", outcome.checkpoint.digest());
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Checkpoint::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let env_cfg = match &a.config {
        Some(p) => load_config(p)?.config,
        None => ckpt.config.clone(),
    };
    let trials = a.trials.unwrap_or(ckpt.config.eval.trials);
    let seed = a.seed.unwrap_or(ckpt.seed);
    let out = a.out.clone().unwrap_or_else(|| {
        a.checkpoint
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    let ev = evaluate(&ckpt, &env_cfg, trials, seed)?;
    let hash = &ckpt.config_hash;
    let label = method_label(&ckpt.config);
    write_file(
        &out.join("metrics.csv"),
        &metrics_csv(hash, &[(label, ev.report)])?,
    )?;
    write_file(&out.join("trials.csv"), &trials_csv(hash, &ev.trials)?)?;
    let header = trajectory_header(ckpt.config.env.num_joints());
    write_file(
        &out.join("trajectory.csv"),
        &trajectory_csv(hash, &header, &ev.trajectory)?,
    )?;
    write_file(
        &out.join("policy_stats.json"),
        &json_pretty(hash, &ev.policy),
    )?;
    let m = ev.report;
    println!(
        "action_jitter {:.4} ± {:.4}  task_return {:.3} ± {:.3}  grad_norm {:.4}  lipschitz {:.4}",
        m.action_jitter.mean,
        m.action_jitter.std,
        m.task_return.mean,
        m.task_return.std,
        ev.policy.input_grad_norm_mean,
        ev.policy.lipschitz
    );
    Ok(())
}

fn resolve_grid(a: &AblateArgs, from_file: Option<AblationGrid>) -> CliResult<AblationGrid> {
    let axis = match &a.grid_axis {
        Some(s) => Some(AblationAxis::parse(s)?),
        None => from_file.as_ref().map(|g| g.axis),
    };
    let values = a
        .grid_values
        .clone()
        .or_else(|| from_file.map(|g| g.values));
    match (axis, values) {
        (Some(axis), Some(values)) if !values.is_empty() => Ok(AblationGrid { axis, values }),
        (None, _) => Err(CliError::Config(
            "missing grid axis (--grid-axis or [grid].axis)".into(),
        )),
        _ => Err(CliError::Config(
            "missing grid values (--grid-values or [grid].values)".into(),
        )),
    }
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_ablate(a: &AblateArgs) -> CliResult<()> {
    let loaded = load_config(&a.config)?;
    let grid = resolve_grid(a, loaded.grid.map(|g| g.resolve()).transpose()?)?;
    let mut base = loaded.config;
    if let Some(s) = a.seed {
        base.seeds = vec![s];
    }
    if let Some(t) = a.trials {
        base.eval.trials = t;
    }
    base.validate()?;
    let cells: Vec<ExperimentConfig> = grid
        .values
        .iter()
        .map(|v| grid.axis.apply(&base, v))
        .collect::<Result<_, _>>()?;

    let out = a.out.clone().unwrap_or_else(|| default_out(&base));
    let hash = base.hash();
    let axis = grid.axis.name();
    write_file(&out.join("config.toml"), &config_copy(&base))?;

    let mut done: Vec<CellResult> = vec![];
    let mut rows: Vec<(String, Result<MetricsReport, String>)> = vec![];
    let mut first_error: Option<CliError> = None;
    for (value, cfg) in grid.values.iter().zip(&cells) {
        let label = format!("{axis}={value}");
        eprintln!("cell {label}: {} seed(s)", cfg.seeds.len());
        match run_cell(cfg, &label) {
            Ok(cell) => {
                let logs: Vec<_> = cell.seeds.iter().map(|s| s.log.clone()).collect();
                let dat = curve_dat(&cfg.hash(), &label, &curve_means(&logs));
                write_file(
                    &out.join("curves")
                        .join(format!("{axis}_{}.dat", file_safe(value))),
                    &dat,
                )?;
                rows.push((label, Ok(cell.report)));
                done.push(cell);
            }
            Err(e) => {
                eprintln!("cell {label} failed: {e}");
                rows.push((label, Err(e.to_string())));
                first_error.get_or_insert(e.into());
            }
        }
    }
    let ok_rows: Vec<(String, MetricsReport)> =
        done.iter().map(|c| (c.label.clone(), c.report)).collect();
    write_file(
        &out.join(format!("ablation_{axis}.csv")),
        &metrics_csv(&hash, &ok_rows)?,
    )?;
    write_file(
        &out.join(format!("seeds_{axis}.csv")),
        &seeds_csv(&hash, &done)?,
    )?;
    let table = aligned_table(&hash, &format!("Ablation over {axis}"), &rows);
    write_file(&out.join(format!("ablation_{axis}.txt")), &table)?;
    print!(
        "{}",
        table.lines().skip(1).collect::<Vec<_>>().join("\n") + "\n"
    );
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Mean ± sample std per method over the rows of a per-seed CSV.
pub fn reaggregate(
    header: &[String],
    rows: &[Vec<String>],
) -> CliResult<Vec<(String, MetricsReport)>> {
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Failed(format!("per-seed table has no `{name}` column")))
    };
    let method = col("method")?;
    let idx: Vec<usize> = METRIC_COLUMNS
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let rate = col("action_rate")?;
    let mut order: Vec<String> = vec![];
    let mut groups: BTreeMap<String, Vec<TrialMetrics>> = BTreeMap::new();
    for r in rows {
        let parse = |i: usize| {
            r.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| CliError::Failed(format!("bad number in row {r:?}")))
        };
        let mut vals = [0.0; 6];
        for (v, &i) in vals.iter_mut().zip(&idx) {
            *v = parse(i)?;
        }
        let m = r[method].clone();
        if !groups.contains_key(&m) {
            order.push(m.clone());
        }
        groups
            .entry(m)
            .or_default()
            .push(TrialMetrics::from_columns(vals, parse(rate)?));
    }
    Ok(order
        .into_iter()
        .map(|m| {
            let report = MetricsReport::aggregate(&groups[&m]);
            (m, report)
        })
        .collect())
}

pub fn cmd_report(a: &ReportArgs) -> CliResult<()> {
    let dir = std::fs::read_dir(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let mut files: Vec<PathBuf> = dir
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("seeds_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no seeds_<axis>.csv files",
            a.out.display()
        )));
    }
    for f in files {
        let (hash, header, rows) = read_csv(&f)?;
        let hash = hash.unwrap_or_default();
        let axis = f
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("")
            .trim_start_matches("seeds_")
            .to_string();
        let agg = reaggregate(&header, &rows)?;
        write_file(
            &a.out.join(format!("report_{axis}.csv")),
            &metrics_csv(&hash, &agg)?,
        )?;
        let table_rows: Vec<_> = agg.iter().map(|(m, r)| (m.clone(), Ok(*r))).collect();
        let table = aligned_table(&hash, &format!("Ablation over {axis}"), &table_rows);
        write_file(&a.out.join(format!("report_{axis}.txt")), &table)?;
        print!(
            "{}",
            table.lines().skip(1).collect::<Vec<_>>().join("\n") + "\n"
        );
    }
    Ok(())
}

fn print_outcome(o: &OracleOutcome) -> bool {
    let ok = o.passed();
    println!(
        "{} {}  max_rel_error {:.3e}  tolerance {:.0e}  trials {}",
        if ok { "PASS" } else { "FAIL" },
        o.name,
        o.max_rel_error,
        o.tolerance,
        o.trials
    );
    ok
}

pub fn cmd_check_grad(a: &CheckGradArgs) -> CliResult<()> {
    let mut outcomes =
        first_order_suite(a.trials, a.seed, 1e-5, 1e-6).map_err(lcp_core::LcpError::from)?;
    outcomes.push(second_order_suite(20, 5, a.seed, 1e-5, 1e-4).map_err(lcp_core::LcpError::from)?);
    let mut sin_err: f64 = 0.0;
    for x in [-2.0, -0.7, 0.0, 0.5, 1.3, 3.0] {
        let got = sin_grad_norm_derivative(x).map_err(lcp_core::LcpError::from)?;
        let want = -(2.0 * x).sin();
        sin_err = sin_err.max((got - want).abs() / want.abs().max(1.0));
    }
    outcomes.push(OracleOutcome {
        name: "d/dx (sin' x)^2 = -sin 2x".into(),
        trials: 6,
        max_rel_error: sin_err,
        tolerance: 1e-12,
    });
    outcomes.push(penalty_gradient_suite(10, a.seed, 1e-5, 1e-4)?);
    outcomes.push(linear_identity_suite(50, a.seed, 1e-8)?);
    let failed = outcomes.iter().filter(|o| !print_outcome(o)).count();
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} oracle(s) exceeded tolerance"
        )));
    }
    Ok(())
}
