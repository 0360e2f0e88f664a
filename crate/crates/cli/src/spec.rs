//! Experiment definition: a config file plus command-line overrides.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use cowu_core::{EnergyModel, RangeQuery, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_ROUNDS: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ZetaSweep,
    QSweep,
    Energy,
    Validate,
    CalibrateP,
}

/// Contents of a `--config` TOML file. Every key is optional.
///
/// ```toml
/// rounds = 10000
/// seed = 7
///
/// [scenario]
/// N = 100
/// M = 100
/// q = 0.0002
/// range = [94, 98]
/// L = 10
/// p = 0.1
/// zeta_max = 2000
///
/// [energy]
/// tx_power_w = 0.055
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: ScenarioConfig,
    pub energy: EnergyModel,
    pub rounds: Option<u64>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn parse_range(s: &str) -> Result<RangeQuery, String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("range lower bound: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("range upper bound: {e}"))?;
    RangeQuery::new(lo, hi).map_err(|e| e.to_string())
}

/// Flags shared by every subcommand. Flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML experiment file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo rounds.
    #[arg(long)]
    pub rounds: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Number of nodes.
    #[arg(long = "N")]
    pub nodes: Option<usize>,
    /// Number of process states.
    #[arg(long = "M")]
    pub states: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long = "q-hat")]
    pub q_hat: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Slots per transmission.
    #[arg(long = "L")]
    pub slots_per_tx: Option<u32>,
    /// Query range as LO:HI.
    #[arg(long, value_parser = parse_range)]
    pub range: Option<RangeQuery>,
    #[arg(long = "zeta-max")]
    pub zeta_max: Option<u64>,
}

/// A fully resolved, validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario: ScenarioConfig,
    pub energy: EnergyModel,
    pub rounds: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl ExperimentSpec {
    pub fn resolve(kind: ExperimentKind, args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let mut scenario = file.scenario;
        if let Some(v) = args.nodes {
            scenario.nodes = v;
        }
        if let Some(v) = args.states {
            scenario.states = v;
        }
        if let Some(v) = args.q {
            scenario.q = v;
        }
        if let Some(v) = args.q_hat {
            scenario.q_hat = Some(v);
        }
        if let Some(v) = args.p {
            scenario.p = v;
        }
        if let Some(v) = args.slots_per_tx {
            scenario.slots_per_tx = v;
        }
        if let Some(v) = args.range {
            scenario.range = v;
        }
        if let Some(v) = args.zeta_max {
            scenario.zeta_max = v;
        }
        let format = args
            .format
            .or(file.format)
            .or_else(|| args.out.as_deref().and_then(format_from_extension))
            .unwrap_or_default();
        let spec = ExperimentSpec {
            kind,
            scenario,
            energy: file.energy,
            rounds: args.rounds.or(file.rounds).unwrap_or(DEFAULT_ROUNDS),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            out: args.out.clone(),
            format,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario.validate()?;
        self.energy.validate()?;
        if self.rounds < 1 {
            return Err(CliError::Config("invalid parameter `rounds`: must be at least 1".into()));
        }
        if let Some(dir) = self.out.as_deref().and_then(Path::parent) {
            if !dir.as_os_str().is_empty() && !dir.is_dir() {
                return Err(CliError::io(
                    dir,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
                ));
            }
        }
        Ok(())
    }
}

fn format_from_extension(path: &Path) -> Option<Format> {
    match path.extension()?.to_str()? {
        "json" => Some(Format::Json),
        "csv" => Some(Format::Csv),
        _ => None,
    }
}
