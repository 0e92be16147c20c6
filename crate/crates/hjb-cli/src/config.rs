//! Experiment configuration: preset selection, numeric overrides, suite
//! flags, grid shape, output directory and the seed that makes a run
//! byte-for-byte reproducible.

use anyhow::{bail, Context, Result};
use hjb_core::problem::{PresetParams, ProblemSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "HJB_OUT_DIR";

pub const SUITE_ORDER: [&str; 6] = [
    "validate",
    "barriers",
    "oracles",
    "solve",
    "comparison",
    "convergence",
];

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct GridConfig {
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_extent() -> f64 {
    2.0
}

fn default_nodes() -> usize {
    201
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            extent: default_extent(),
            nodes: default_nodes(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ExperimentConfig {
    pub preset: String,
    #[serde(default)]
    pub overrides: PresetParams,
    /// Subset of [`SUITE_ORDER`]; executed in the fixed order regardless of
    /// the order given here. Empty means no suites.
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default)]
    pub grid: GridConfig,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Envelope level of the exponential subsolution.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_pairs")]
    pub comparison_pairs: usize,
    #[serde(default = "default_steps")]
    pub comparison_steps: usize,
}

fn default_eps() -> f64 {
    0.1
}

fn default_pairs() -> usize {
    20
}

fn default_steps() -> usize {
    200
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&raw).context("parsing config document")?;
        config.validate()?;
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            config.out_dir = PathBuf::from(dir);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        // preset and overrides must build (rejects unknown names and
        // out-of-domain numbers with the library's diagnostics)
        self.build_spec()?;
        for suite in &self.suites {
            if !SUITE_ORDER.contains(&suite.as_str()) {
                bail!("unknown suite {suite:?}; valid suites are {SUITE_ORDER:?}");
            }
        }
        if self.grid.nodes < 3 {
            bail!("grid needs at least 3 nodes");
        }
        if !(self.grid.extent > 0.0) {
            bail!("grid extent must be positive");
        }
        if !(self.eps > 0.0) {
            bail!("eps must be positive");
        }
        Ok(())
    }

    pub fn build_spec(&self) -> Result<ProblemSpec> {
        ProblemSpec::from_preset(&self.preset, &self.overrides)
            .map_err(|e| anyhow::anyhow!("{e}"))
    }

    /// Suites to run, in the fixed execution order.
    pub fn selected_suites(&self) -> Vec<&'static str> {
        SUITE_ORDER
            .iter()
            .copied()
            .filter(|name| self.suites.iter().any(|s| s == name))
            .collect()
    }
}
