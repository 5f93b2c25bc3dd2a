//! Loading experiment configs from TOML with line-anchored diagnostics.

use std::path::Path;

use lcp_core::experiment::AblationAxis;
use lcp_core::{ExperimentConfig, LcpError};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Optional `[grid]` table of an ablation config.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axis: String,
    pub values: Vec<toml::Value>,
}

/// An ablation axis and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationGrid {
    pub axis: AblationAxis,
    pub values: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub grid: Option<GridSpec>,
    pub text: String,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line of `key = …` inside the table named by the dotted prefix of
/// `field`, if the file sets it.
pub fn locate_field(text: &str, field: &str) -> Option<usize> {
    let (table, key) = match field.rsplit_once('.') {
        Some((t, k)) => (t, k),
        None => ("", field),
    };
    let mut current = String::new();
    let mut table_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == table {
                table_line = Some(i + 1);
            }
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        let k = k.trim();
        let full = if current.is_empty() {
            k.to_string()
        } else {
            format!("{current}.{k}")
        };
        if full == field || (current == table && k == key) {
            return Some(i + 1);
        }
    }
    table_line
}

fn anchored(path: &Path, text: &str, err: LcpError) -> CliError {
    match &err {
        LcpError::Invalid { field, .. } => match locate_field(text, field) {
            Some(line) => CliError::Config(format!("{}:{line}: {err}", path.display())),
            None => CliError::Config(format!("{}: {err}", path.display())),
        },
        _ => CliError::Config(format!("{}: {err}", path.display())),
    }
}

/// Parses and validates a config file's text.
pub fn parse_config(path: &Path, text: &str) -> CliResult<LoadedConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let at = e
            .span()
            .map(|s| format!(":{}", line_of(text, s.start)))
            .unwrap_or_default();
        CliError::Config(format!("{}{at}: {}", path.display(), e.message()))
    })?;
    let has_kind = table
        .get("env")
        .and_then(toml::Value::as_table)
        .is_some_and(|env| env.contains_key("kind"));
    if !has_kind {
        let at = locate_field(text, "env.kind")
            .map(|l| format!(":{l}"))
            .unwrap_or_default();
        return Err(CliError::Config(format!(
            "{}{at}: missing required field `env.kind` (tracker1d or tracker_nd)",
            path.display()
        )));
    }
    let grid = match table.remove("grid") {
        Some(v) => Some(GridSpec::deserialize(v).map_err(|e| {
            let at = locate_field(text, "grid")
                .map(|l| format!(":{l}"))
                .unwrap_or_default();
            CliError::Config(format!(
                "{}{at}: invalid grid: {}",
                path.display(),
                e.message()
            ))
        })?),
        None => None,
    };
    // Re-deserialize from the original text so errors carry spans.
    let config: ExperimentConfig = if grid.is_some() {
        ExperimentConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?
    } else {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let at = e
                .span()
                .map(|s| format!(":{}", line_of(text, s.start)))
                .unwrap_or_default();
            CliError::Config(format!("{}{at}: {}", path.display(), e.message()))
        })?
    };
    config.validate().map_err(|e| anchored(path, text, e))?;
    Ok(LoadedConfig {
        config,
        grid,
        text: text.to_string(),
    })
}

pub fn load_config(path: &Path) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(path, &text)
}

impl GridSpec {
    pub fn resolve(&self) -> CliResult<AblationGrid> {
        let axis = AblationAxis::parse(&self.axis)?;
        let values = self
            .values
            .iter()
            .map(|v| match v {
                toml::Value::String(s) => s.clone(),
                toml::Value::Float(x) => format!("{x:?}"),
                other => other.to_string(),
            })
            .collect();
        Ok(AblationGrid { axis, values })
    }
}

/// Serialized config with its hash as a leading comment.
pub fn config_copy(cfg: &ExperimentConfig) -> String {
    let body = toml::to_string(cfg).expect("configs always serialize to TOML");
    format!("# config_hash = \"{}\"\n{body}", cfg.hash())
}
