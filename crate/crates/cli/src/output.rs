//! Artifact writers. Every file starts with a `# config_hash` comment line.

use std::fs;
use std::path::Path;

use lcp_core::experiment::{CellResult, CURVE_COLUMNS};
use lcp_core::metrics::{MetricsReport, Stat, TrialMetrics, METRIC_COLUMNS, METRIC_HEADERS};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn hash_comment(hash: &str) -> String {
    format!("# config_hash: {hash}\n")
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// CSV text: hash comment, header, rows.
pub fn csv_text<S: AsRef<str>>(
    hash: &str,
    header: &[S],
    rows: &[Vec<String>],
) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Failed(format!("csv: {e}"));
    w.write_record(header.iter().map(AsRef::as_ref))
        .map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Failed(format!("csv: {e}")))?;
    Ok(hash_comment(hash) + &String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Config hash (if present), header and records of a CSV.
pub type CsvTable = (Option<String>, Vec<String>, Vec<Vec<String>>);

/// Reads a CSV written by [`csv_text`].
pub fn read_csv(path: &Path) -> CliResult<CsvTable> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let hash = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_hash: "))
        .map(str::to_string);
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::io(path, e))?;
    Ok((hash, header, rows))
}

pub fn metrics_row(method: &str, report: &MetricsReport) -> Vec<String> {
    std::iter::once(method.to_string())
        .chain(report.csv_values().into_iter().map(num))
        .collect()
}

pub fn metrics_csv(hash: &str, rows: &[(String, MetricsReport)]) -> CliResult<String> {
    let rows: Vec<Vec<String>> = rows.iter().map(|(m, r)| metrics_row(m, r)).collect();
    csv_text(hash, &MetricsReport::csv_header(), &rows)
}

pub fn trials_csv(hash: &str, trials: &[TrialMetrics]) -> CliResult<String> {
    let mut header = vec!["trial".to_string()];
    header.extend(METRIC_COLUMNS.iter().map(|c| c.to_string()));
    header.push("action_rate".into());
    let rows: Vec<Vec<String>> = trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut r = vec![i.to_string()];
            r.extend(t.columns().into_iter().map(num));
            r.push(num(t.action_rate));
            r
        })
        .collect();
    csv_text(hash, &header, &rows)
}

pub fn trajectory_csv(
    hash: &str,
    header: &[String],
    rows: &[(usize, Vec<f64>)],
) -> CliResult<String> {
    let mut h = vec!["trial".to_string()];
    h.extend(header.iter().cloned());
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(trial, r)| {
            std::iter::once(trial.to_string())
                .chain(r.iter().copied().map(num))
                .collect()
        })
        .collect();
    csv_text(hash, &h, &rows)
}

/// Per-seed rows of an ablation, the input of `report`.
pub const SEED_EXTRA_COLUMNS: [&str; 4] = [
    "input_grad_norm",
    "lipschitz",
    "action_rate",
    "checkpoint_sha256",
];

pub fn seeds_csv(hash: &str, cells: &[CellResult]) -> CliResult<String> {
    let mut header = vec!["method".to_string(), "seed".to_string()];
    header.extend(METRIC_COLUMNS.iter().map(|c| c.to_string()));
    header.extend(SEED_EXTRA_COLUMNS.iter().map(|c| c.to_string()));
    let mut rows = vec![];
    for cell in cells {
        for s in &cell.seeds {
            let mut r = vec![cell.label.clone(), s.seed.to_string()];
            r.extend(s.metrics.columns().into_iter().map(num));
            r.push(num(s.policy.input_grad_norm_mean));
            r.push(num(s.policy.lipschitz));
            r.push(num(s.metrics.action_rate));
            r.push(s.checkpoint_digest.clone());
            rows.push(r);
        }
    }
    csv_text(hash, &header, &rows)
}

fn cell_text(s: Stat) -> String {
    let prec = if s.mean.abs() >= 1000.0 { 1 } else { 3 };
    format!("{:.*} ± {:.*}", prec, s.mean, prec, s.std)
}

/// Aligned text table with display headers; failed cells show their error.
pub fn aligned_table(
    hash: &str,
    title: &str,
    rows: &[(String, Result<MetricsReport, String>)],
) -> String {
    let mut header = vec!["Method".to_string()];
    header.extend(METRIC_HEADERS.iter().map(|h| h.to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, r)| {
            let mut line = vec![label.clone()];
            match r {
                Ok(rep) => line.extend(rep.stats().into_iter().map(cell_text)),
                Err(e) => line.push(format!("failed: {e}")),
            }
            line
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for line in body.iter().filter(|l| l.len() == header.len()) {
        for (w, c) in widths.iter_mut().zip(line) {
            *w = (*w).max(c.chars().count());
        }
    }
    let fmt = |cells: &[String]| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let pad = widths
                    .get(i)
                    .copied()
                    .unwrap_or(0)
                    .saturating_sub(c.chars().count());
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = hash_comment(hash);
    out += &format!("{title}\n");
    let head = fmt(&header);
    out += &format!("{head}\n{}\n", "-".repeat(head.chars().count()));
    for line in &body {
        out += &fmt(line);
        out.push('\n');
    }
    out
}

/// Whitespace-separated columns with a commented header, for gnuplot.
pub fn curve_dat(hash: &str, label: &str, curve: &[[f64; 5]]) -> String {
    let mut out = hash_comment(hash);
    out += &format!("# {label}\n# {}\n", CURVE_COLUMNS.join(" "));
    for row in curve {
        out += &row.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ");
        out.push('\n');
    }
    out
}

/// One JSON object per line, each tagged with the config hash.
pub fn json_lines<T: Serialize>(hash: &str, records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        let mut v = serde_json::to_value(r).expect("records serialize");
        if let serde_json::Value::Object(m) = &mut v {
            m.insert("config_hash".into(), hash.into());
        }
        out += &v.to_string();
        out.push('\n');
    }
    out
}

pub fn json_pretty<T: Serialize>(hash: &str, value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("values serialize");
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("config_hash".into(), hash.into());
    }
    serde_json::to_string_pretty(&v).expect("json serializes") + "\n"
}
