//! Long-format plot data derived from a run's persisted artifacts.

use anyhow::{bail, Context, Result};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// Solution profiles over x with the time column.
    Profiles,
    /// Separated-coefficient trajectory with the blow-up marker sidecar.
    Blowup,
    /// Numerical solution between the evaluated barriers.
    Envelopes,
    /// Mesh-halving error table with the observed-order column.
    Convergence,
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if !path.exists() {
        bail!("missing artifact {name} in {}", dir.display());
    }
    Ok(path)
}

/// Writes the plot files for `kind` next to the record and returns their
/// paths. The record path is the `summary.json` of a finished run.
pub fn emit_plot_data(record: &Path, kind: PlotKind) -> Result<Vec<PathBuf>> {
    let dir = record
        .parent()
        .context("record path has no parent directory")?;
    let mut written = Vec::new();
    match kind {
        PlotKind::Blowup => {
            let trajectory = require(dir, "trajectory.csv")?;
            let meta = require(dir, "blowup.json")?;
            let out = dir.join("plot_blowup.csv");
            std::fs::copy(&trajectory, &out)?;
            let report: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(meta)?)?;
            let sidecar = serde_json::json!({
                "tau": report.get("tau"),
                "tau_quadrature": report.get("tau_from_quadrature"),
            });
            let side_path = dir.join("plot_blowup_meta.json");
            std::fs::write(&side_path, serde_json::to_string_pretty(&sidecar)?)?;
            written.push(out);
            written.push(side_path);
        }
        PlotKind::Convergence => {
            let table = require(dir, "convergence.csv")?;
            let out = dir.join("plot_convergence.csv");
            std::fs::copy(&table, &out)?;
            written.push(out);
        }
        PlotKind::Envelopes => {
            let envelope = require(dir, "envelope.csv")?;
            let out = dir.join("plot_envelopes.csv");
            std::fs::copy(&envelope, &out)?;
            written.push(out);
        }
        PlotKind::Profiles => {
            let initial = require(dir, "solution_initial.csv")?;
            let final_ = require(dir, "solution_final.csv")?;
            let mut combined = std::fs::read_to_string(&initial)?;
            let tail = std::fs::read_to_string(&final_)?;
            for line in tail.lines().skip(1) {
                combined.push_str(line);
                combined.push('\n');
            }
            let out = dir.join("plot_profiles.csv");
            std::fs::write(&out, combined)?;
            written.push(out);
        }
    }
    Ok(written)
}
