//! Command-line experiments for content-based wake-up.

pub mod commands;
pub mod error;
pub mod output;
pub mod spec;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{default_p_grid, default_q_grid, DEFAULT_Q_HATS, REFERENCE_COWU_MJ};
use crate::error::CliError;
use crate::spec::{CommonArgs, ExperimentKind, ExperimentSpec};

#[derive(Debug, Parser)]
#[command(name = "cowu", version, about = "Accuracy and energy experiments for content-based wake-up")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Accuracy against the timing offset, analytical and simulated.
    ZetaSweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Skip the Monte Carlo columns.
        #[arg(long)]
        no_sim: bool,
    },
    /// Optimal accuracy against the true step probability, with and without
    /// knowledge of it.
    QSweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        q_values: Option<Vec<f64>>,
        /// Assumed step probabilities, one block of rows each.
        #[arg(long, value_delimiter = ',')]
        q_hat_values: Option<Vec<f64>>,
    },
    /// Mean energy per round for round-robin and CoWu.
    Energy {
        #[command(flatten)]
        common: CommonArgs,
        /// Per-round CoWu records as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Internal consistency and oracle checks.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// CoWu energy over a grid of persistence probabilities.
    CalibrateP {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        p_values: Option<Vec<f64>>,
        #[arg(long, default_value_t = REFERENCE_COWU_MJ)]
        target_mj: f64,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ZetaSweep { common, no_sim } => {
            let spec = ExperimentSpec::resolve(ExperimentKind::ZetaSweep, &common)?;
            let rows = commands::cmd_zeta_sweep(&spec, !no_sim)?;
            output::write_rows(&rows, spec.format, spec.out.as_deref())
        }
        Command::QSweep { common, q_values, q_hat_values } => {
            let spec = ExperimentSpec::resolve(ExperimentKind::QSweep, &common)?;
            let qs = q_values.unwrap_or_else(default_q_grid);
            let hats = q_hat_values.unwrap_or_else(|| DEFAULT_Q_HATS.to_vec());
            let rows = commands::cmd_q_sweep(&spec, &qs, &hats)?;
            output::write_rows(&rows, spec.format, spec.out.as_deref())
        }
        Command::Energy { common, trace } => {
            let spec = ExperimentSpec::resolve(ExperimentKind::Energy, &common)?;
            let (rows, traces) = commands::cmd_energy(&spec)?;
            if let Some(path) = trace.as_deref() {
                output::write_rows(&traces, spec::Format::Csv, Some(path))?;
            }
            output::write_rows(&rows, spec.format, spec.out.as_deref())
        }
        Command::Validate { common } => {
            let spec = ExperimentSpec::resolve(ExperimentKind::Validate, &common)?;
            let report = commands::cmd_validate(&spec);
            for check in &report.checks {
                let tag = if check.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}::{} [{}] {}", check.module, check.name, check.inputs, check.detail);
            }
            let failed = report.failures().count();
            println!("{} checks, {} failed", report.checks.len(), failed);
            if failed > 0 {
                return Err(CliError::Validation(failed));
            }
            Ok(())
        }
        Command::CalibrateP { common, p_values, target_mj } => {
            let spec = ExperimentSpec::resolve(ExperimentKind::CalibrateP, &common)?;
            if !(target_mj > 0.0 && target_mj.is_finite()) {
                return Err(CliError::Config(format!("invalid parameter `target-mj`: got {target_mj}")));
            }
            let ps = p_values.unwrap_or_else(default_p_grid);
            for &p in &ps {
                cowu_core::ScenarioConfig { p, ..spec.scenario }.validate()?;
            }
            let rows = commands::cmd_calibrate_p(&spec, &ps, target_mj)?;
            output::write_rows(&rows, spec.format, spec.out.as_deref())
        }
    }
}
