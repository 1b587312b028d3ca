//! Versioned JSON configuration file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use xref_core::netsim::SimConfig;
use xref_core::tamper_mc::FailureMode;

pub const SCHEMA_VERSION: u32 = 1;
pub const CONFIG_DIR_ENV: &str = "XREF_CONFIG_DIR";
pub const DEFAULT_CONFIG_NAME: &str = "xref.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub simulation: Option<SimConfig>,
    #[serde(default)]
    pub capacity: Option<CapacitySection>,
    #[serde(default)]
    pub monte_carlo: Option<McSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    #[serde(default = "default_c")]
    pub c_txs: f64,
    #[serde(default = "default_tau_fork")]
    pub tau_fork: f64,
    /// `lo:hi:step` in seconds.
    #[serde(default = "default_sweep")]
    pub tau_sweep: String,
}

impl Default for CapacitySection {
    fn default() -> Self {
        Self { c_txs: default_c(), tau_fork: default_tau_fork(), tau_sweep: default_sweep() }
    }
}

fn default_c() -> f64 {
    4286.0
}
fn default_tau_fork() -> f64 {
    12.0
}
fn default_sweep() -> String {
    "12:1200:12".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_n")]
    pub n_nodes: usize,
    #[serde(default = "default_m_values")]
    pub m_values: Vec<usize>,
    #[serde(default = "default_alpha_values")]
    pub alpha_values: Vec<f64>,
    #[serde(default = "default_top_x_values")]
    pub top_x_values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default)]
    pub failure_mode: FailureMode,
    /// Domain counts for the failure sweep.
    #[serde(default = "default_failure_m_values")]
    pub failure_m_values: Vec<usize>,
    #[serde(default = "default_f_values")]
    pub f_values: Vec<usize>,
    #[serde(default = "default_failure_alpha")]
    pub failure_alpha: f64,
    #[serde(default = "default_failure_top_x")]
    pub failure_top_x: f64,
}

impl Default for McSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn default_n() -> usize {
    10_000
}
fn default_m_values() -> Vec<usize> {
    vec![10, 100, 1000]
}
fn default_alpha_values() -> Vec<f64> {
    vec![2.0, 3.0]
}
fn default_top_x_values() -> Vec<f64> {
    vec![10.0, 30.0]
}
fn default_trials() -> usize {
    1000
}
fn default_bin_width() -> f64 {
    0.1
}
fn default_failure_m_values() -> Vec<usize> {
    vec![10, 100]
}
fn default_f_values() -> Vec<usize> {
    vec![1, 3, 5]
}
fn default_failure_alpha() -> f64 {
    2.0
}
fn default_failure_top_x() -> f64 {
    10.0
}

impl FileConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: FileConfig = serde_json::from_str(text).context("invalid configuration file")?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {} (expected {SCHEMA_VERSION})", cfg.schema_version);
        }
        if let Some(sim) = &cfg.simulation {
            sim.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }
}

/// `--config` if given, else `$XREF_CONFIG_DIR/xref.json` when that exists.
pub fn resolve_path(explicit: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    let dir = std::env::var_os(CONFIG_DIR_ENV)?;
    let p = Path::new(&dir).join(DEFAULT_CONFIG_NAME);
    p.exists().then_some(p)
}

pub fn load_optional(explicit: Option<&Path>) -> anyhow::Result<Option<FileConfig>> {
    resolve_path(explicit).map(|p| FileConfig::load(&p)).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_parses() {
        let cfg = FileConfig::parse(r#"{"schema_version":1,"simulation":{"m":3}}"#).unwrap();
        assert_eq!(cfg.simulation.unwrap().l, 6);
        assert_eq!(McSection::default().trials, 1000);
    }

    #[test]
    fn bad_files_rejected() {
        assert!(FileConfig::parse(r#"{"schema_version":2}"#).is_err());
        assert!(FileConfig::parse(r#"{"schema_version":1,"extra":0}"#).is_err());
        assert!(FileConfig::parse(r#"{"schema_version":1,"simulation":{"m":3,"q":1}}"#).is_err());
        assert!(FileConfig::parse(r#"{"schema_version":1,"simulation":{"m":0}}"#).is_err());
        assert!(FileConfig::parse(r#"{"simulation":{"m":3}}"#).is_err());
    }
}
