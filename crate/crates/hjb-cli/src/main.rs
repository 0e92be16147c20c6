use anyhow::Result;
use clap::{Parser, Subcommand};
use hjb_cli::config::ExperimentConfig;
use hjb_cli::plots::{emit_plot_data, PlotKind};
use hjb_cli::suites::run_experiment;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hjb",
    about = "Solver and verification suite for degenerate parabolic equations \
             with convex superlinear gradient nonlinearities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites selected in a JSON experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the built-in problem presets.
    Presets {
        /// Print the registry as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Emit plot-ready CSV series from a finished run.
    Plot {
        /// Path to the run's summary.json.
        #[arg(long)]
        record: PathBuf,
        #[arg(long, value_enum)]
        what: PlotKind,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let config = ExperimentConfig::from_file(&config)?;
            let record = run_experiment(&config)?;
            for suite in &record.suites {
                let mark = if suite.passed { "pass" } else { "FAIL" };
                println!("{mark}  {}  ({:.0} ms)", suite.name, suite.wall_ms);
                for detail in &suite.details {
                    println!("      {detail}");
                }
            }
            println!(
                "summary: {}",
                config.out_dir.join("summary.json").display()
            );
            Ok(if record.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Presets { json } => {
            let registry = hjb_core::problem::preset_registry();
            if json {
                println!("{}", serde_json::to_string_pretty(&registry)?);
            } else {
                for d in registry {
                    println!("{:<18} [{}] {}", d.name, d.equation_form, d.summary);
                    println!(
                        "{:<18} suites: {}; hamiltonian_may_diverge: {}, blow_up: {}, \
                         diffusion_zero: {}",
                        "",
                        d.suites.join(", "),
                        d.hamiltonian_may_diverge,
                        d.blow_up_applicable,
                        d.diffusion_identically_zero
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { record, what } => {
            let written = emit_plot_data(&record, what)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
