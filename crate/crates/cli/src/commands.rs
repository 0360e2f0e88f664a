//! The experiment commands. Each returns its table; `main` writes it.

use cowu_core::accuracy::{cowu_curve, gamma_round_robin, mismatch_curve};
use cowu_core::sim::{campaign_traces, cowu_sweep_campaign, run_campaign, summarize, RoundTrace, Schedule};
use cowu_core::validate::{run_validation, ValidationReport};
use cowu_core::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::spec::ExperimentSpec;

/// True step probabilities for the q sweep: 0.2e-3 to 4.2e-3 in 0.5e-3 steps.
pub fn default_q_grid() -> Vec<f64> {
    (0..9).map(|k| (2 + 5 * k) as f64 / 1e4).collect()
}

pub const DEFAULT_Q_HATS: [f64; 2] = [0.2e-3, 4.2e-3];

/// Persistence values tried by `calibrate-p`: 0.01 to 0.30. Larger values
/// make collisions among a dozen contenders dominate the round.
pub fn default_p_grid() -> Vec<f64> {
    (1..=30).map(|k| k as f64 / 100.0).collect()
}

/// Default calibration target for CoWu energy per round, in mJ.
pub const REFERENCE_COWU_MJ: f64 = 4.50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub zeta: u64,
    pub gamma_analytical: f64,
    pub gamma_upper: f64,
    pub gamma_simulated: Option<f64>,
    pub ci: Option<f64>,
    pub std_error: Option<f64>,
    pub gamma_round_robin: f64,
}

/// One row per `zeta` in `1..=zeta_max`.
pub fn cmd_zeta_sweep(spec: &ExperimentSpec, simulate: bool) -> Result<Vec<ZetaRow>, CliError> {
    let cfg = spec.scenario;
    let curve = cowu_curve(&cfg)?;
    let rr = gamma_round_robin(&cfg)?.gamma;
    let sim = if simulate {
        Some(cowu_sweep_campaign(&cfg, &spec.energy, cfg.zeta_max, spec.rounds, spec.seed)?)
    } else {
        None
    };
    Ok(curve[1..]
        .iter()
        .map(|pt| {
            let est = sim.as_ref().map(|s| s.gamma(pt.zeta));
            ZetaRow {
                zeta: pt.zeta,
                gamma_analytical: pt.gamma,
                gamma_upper: pt.upper,
                gamma_simulated: est.map(|e| e.mean),
                ci: est.map(|e| e.ci_halfwidth),
                std_error: est.map(|e| e.std_error),
                gamma_round_robin: rr,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Knowledge {
    Perfect,
    Assumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    pub knowledge: Knowledge,
    pub q: f64,
    pub q_hat: f64,
    pub zeta_opt: u64,
    pub gamma_cowu: f64,
    pub gamma_round_robin: f64,
}

/// Perfect-knowledge rows first (ascending `q`), then one block per fixed
/// `q_hat` in the given order.
pub fn cmd_q_sweep(spec: &ExperimentSpec, q_values: &[f64], q_hats: &[f64]) -> Result<Vec<QRow>, CliError> {
    if q_values.is_empty() {
        return Err(CliError::Config("invalid parameter `q-values`: empty list".into()));
    }
    for &q in q_values.iter().chain(q_hats) {
        spec.scenario.with_q(q).validate()?;
    }
    let cfg = ScenarioConfig { q_hat: None, ..spec.scenario };

    // Every point carries the perfect-knowledge optimum for its q; with no
    // assumed values, sweep one anyway to get them.
    let hats = if q_hats.is_empty() { &q_values[..1] } else { q_hats };
    let points = mismatch_curve(&cfg, q_values, hats)?;
    let mut rows: Vec<QRow> = points[..q_values.len()]
        .iter()
        .map(|pt| QRow {
            knowledge: Knowledge::Perfect,
            q: pt.q,
            q_hat: pt.q,
            zeta_opt: pt.zeta_opt_perfect,
            gamma_cowu: pt.gamma_perfect,
            gamma_round_robin: pt.gamma_round_robin,
        })
        .collect();
    if !q_hats.is_empty() {
        rows.extend(points.iter().map(|pt| QRow {
            knowledge: Knowledge::Assumed,
            q: pt.q,
            q_hat: pt.q_hat,
            zeta_opt: pt.zeta_opt,
            gamma_cowu: pt.gamma,
            gamma_round_robin: pt.gamma_round_robin,
        }));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub scheme: String,
    pub p: Option<f64>,
    pub rounds: u64,
    pub mean_energy_mj: f64,
    pub ci_mj: f64,
    pub incomplete_rounds: u64,
}

/// Mean total energy per round for round-robin and CoWu. Returns the table
/// and the CoWu per-round traces.
pub fn cmd_energy(spec: &ExperimentSpec) -> Result<(Vec<EnergyRow>, Vec<RoundTrace>), CliError> {
    let cfg = spec.scenario;
    let rr = run_campaign(&cfg, &spec.energy, Schedule::RoundRobin, spec.rounds, spec.seed)?;
    // CoWu energy does not depend on the deadline; any zeta gives the same rounds.
    let traces = campaign_traces(&cfg, &spec.energy, Schedule::Cowu { zeta: cfg.zeta_max }, spec.rounds, spec.seed)?;
    let cowu = summarize(&traces);
    let rows = vec![
        EnergyRow {
            scheme: "round-robin".into(),
            p: None,
            rounds: rr.rounds,
            mean_energy_mj: rr.energy_j.mean * 1e3,
            ci_mj: rr.energy_j.ci_halfwidth * 1e3,
            incomplete_rounds: 0,
        },
        EnergyRow {
            scheme: "cowu".into(),
            p: Some(cfg.p),
            rounds: cowu.rounds,
            mean_energy_mj: cowu.energy_j.mean * 1e3,
            ci_mj: cowu.energy_j.ci_halfwidth * 1e3,
            incomplete_rounds: cowu.incomplete_rounds,
        },
    ];
    Ok((rows, traces))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub p: f64,
    pub mean_energy_mj: f64,
    pub ci_mj: f64,
    pub target_mj: f64,
    pub selected: bool,
}

/// CoWu mean energy for each `p`; the row closest to `target_mj` is selected.
pub fn cmd_calibrate_p(
    spec: &ExperimentSpec,
    p_values: &[f64],
    target_mj: f64,
) -> Result<Vec<CalibrationRow>, CliError> {
    if p_values.is_empty() {
        return Err(CliError::Config("invalid parameter `p-values`: empty list".into()));
    }
    let mut rows: Vec<CalibrationRow> = p_values
        .iter()
        .map(|&p| {
            let cfg = ScenarioConfig { p, ..spec.scenario };
            let s = run_campaign(&cfg, &spec.energy, Schedule::Cowu { zeta: 1 }, spec.rounds, spec.seed)?;
            Ok(CalibrationRow {
                p,
                mean_energy_mj: s.energy_j.mean * 1e3,
                ci_mj: s.energy_j.ci_halfwidth * 1e3,
                target_mj,
                selected: false,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (a.1.mean_energy_mj - target_mj).abs();
            let db = (b.1.mean_energy_mj - target_mj).abs();
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)
        .expect("non-empty grid");
    rows[best].selected = true;
    Ok(rows)
}

/// Runs the full check suite.
pub fn cmd_validate(spec: &ExperimentSpec) -> ValidationReport {
    run_validation(spec.seed)
}
