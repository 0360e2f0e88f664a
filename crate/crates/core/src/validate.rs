//! Invariant and oracle-equivalence checks on small instances.

use serde::Serialize;

use crate::accuracy::{cowu_curve, wake_count_distribution, CowuSweep};
use crate::csma::{success_distribution, CsmaChain, CsmaParams};
use crate::oracle::{self, MacModel};
use crate::process::{build_birth_death, ProcessModel, RangeQuery};
use crate::scenario::ScenarioConfig;
use crate::sim::{cowu_sweep_campaign, run_campaign, simulate_cowu_round, EnergyModel, Schedule};
use crate::wake_probability;

/// Oracle agreement tolerance.
/// Lag at which the default process is mixed to within 1e-3.
pub const MIXING_LAG: u64 = 1_000_000_000;

/// Slack for inequalities between quantities that can coincide exactly.
pub const ROUNDOFF_TOL: f64 = 1e-12;

pub const ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub inputs: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Tracks the worst deviation seen over a grid of inputs.
struct Worst {
    error: f64,
    inputs: String,
    observed: f64,
    expected: f64,
}

impl Worst {
    fn new() -> Self {
        Worst { error: 0.0, inputs: String::new(), observed: f64::NAN, expected: f64::NAN }
    }

    fn record(&mut self, observed: f64, expected: f64, inputs: impl FnOnce() -> String) {
        let error = (observed - expected).abs();
        if error > self.error || error.is_nan() || self.inputs.is_empty() {
            self.error = if error.is_nan() { f64::INFINITY } else { error };
            self.inputs = inputs();
            self.observed = observed;
            self.expected = expected;
        }
    }

    fn into_check(self, module: &'static str, name: &str, grid: &str, tol: f64) -> Check {
        Check {
            module,
            name: name.to_string(),
            inputs: format!("{grid}; worst at {}", self.inputs),
            passed: self.error <= tol,
            detail: format!(
                "max |observed - expected| = {:e} (tol {tol:e}); observed {}, expected {}",
                self.error, self.observed, self.expected
            ),
        }
    }
}

fn check(module: &'static str, name: &str, inputs: String, passed: bool, detail: String) -> Check {
    Check { module, name: name.to_string(), inputs, passed, detail }
}

/// Every check, in a fixed order.
pub fn run_validation(seed: u64) -> ValidationReport {
    let mut checks = Vec::new();
    checks.extend(process_checks());
    checks.extend(csma_checks());
    checks.push(mutation_check());
    checks.extend(accuracy_checks());
    checks.extend(accuracy_oracle_checks());
    checks.extend(simulator_checks(seed));
    ValidationReport { checks }
}

pub fn process_checks() -> Vec<Check> {
    let mut out = Vec::new();

    let mut drift = Worst::new();
    for &(m, q) in &[(2usize, 0.5), (3, 0.1), (10, 0.25), (100, 0.0002), (100, 0.0042)] {
        let z = build_birth_death(m, q).expect("valid grid");
        for zeta in [0u64, 1, 2, 10, 100, 1000, 10_000] {
            drift.record(z.power(zeta).stochastic_drift(), 0.0, || format!("M={m} q={q} zeta={zeta}"));
        }
    }
    out.push(drift.into_check("process-model", "row-stochasticity under matrix power", "M x q x zeta<=1e4", 1e-9));

    let z = build_birth_death(3, 0.1).expect("valid");
    let rows = z.to_rows();
    let naive = oracle::schoolbook_multiply(&rows, &rows);
    let fast = z.power(2);
    let mut sq = Worst::new();
    for (i, row) in naive.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            sq.record(fast.get(i, j), v, || format!("entry ({i},{j})"));
        }
    }
    out.push(sq.into_check("process-model", "Z^2 equals schoolbook product", "M=3 q=0.1", 1e-12));

    let mut stat = Worst::new();
    for &(m, q) in &[(2usize, 0.3), (3, 0.1), (10, 0.25), (100, 0.0002)] {
        let model = ProcessModel::birth_death(m, q).expect("valid grid");
        let pi = model.stationary();
        stat.record(pi.residual(model.matrix()), 0.0, || format!("M={m} q={q} residual"));
        stat.record(pi.probs().iter().sum::<f64>(), 1.0, || format!("M={m} q={q} sum"));
    }
    out.push(stat.into_check("process-model", "stationary distribution solves pi Z = pi", "birth-death grid", 1e-10));

    let mut sums = Worst::new();
    let mut bounds_failure: Option<String> = None;
    for &(m, q) in &[(3usize, 0.1), (6, 0.2), (20, 0.05)] {
        let model = ProcessModel::birth_death(m, q).expect("valid grid");
        for lo in 1..=m {
            for hi in lo..=m {
                let r = RangeQuery::new(lo, hi).expect("valid range");
                let (mass_in, mass_out) = (model.stationary().mass_in(&r), model.stationary().mass_out(&r));
                for zeta in [0u64, 1, 3, 17, 250] {
                    let s = model.survival(&r, zeta);
                    let tag = || format!("M={m} q={q} range=[{lo},{hi}] zeta={zeta}");
                    sums.record(s.stay_in + s.leave, 1.0, tag);
                    sums.record(s.joint_in, s.stay_in * mass_in, tag);
                    sums.record(s.joint_out, s.stay_out * mass_out, tag);
                    let ok = [s.stay_in, s.leave, s.stay_out, s.joint_in, s.joint_out]
                        .iter()
                        .all(|v| (0.0..=1.0).contains(v))
                        && s.joint_in <= mass_in + 1e-15
                        && s.joint_out <= mass_out + 1e-15;
                    if !ok && bounds_failure.is_none() {
                        bounds_failure = Some(format!("{} {s:?} mass_in={mass_in} mass_out={mass_out}", tag()));
                    }
                }
            }
        }
    }
    out.push(sums.into_check(
        "process-model",
        "P_A + P_B = 1, P_D = P_A P_w, P_E = P_C (1 - P_w)",
        "all ranges",
        1e-12,
    ));
    out.push(check(
        "process-model",
        "survival probabilities within [0, 1] and below range mass",
        "all ranges".into(),
        bounds_failure.is_none(),
        bounds_failure.unwrap_or_else(|| "ok".into()),
    ));

    let cfg = ScenarioConfig::default();
    let model = cfg.process().expect("default scenario");
    // Relaxation time of the default chain is about 1e7 slots.
    let s = model.survival(&cfg.range, MIXING_LAG);
    let mass = model.stationary().mass_in(&cfg.range);
    out.push(check(
        "process-model",
        "P_A mixes to the range mass",
        format!("default scenario, zeta={MIXING_LAG}"),
        (s.stay_in - mass).abs() <= 1e-3,
        format!("P_A = {}, range mass = {mass}", s.stay_in),
    ));
    out
}

pub fn csma_checks() -> Vec<Check> {
    let mut out = Vec::new();

    let mut norm = Worst::new();
    let mut non_negative = true;
    for w in [0usize, 1, 3, 7] {
        for l in [1u32, 2, 5] {
            for p in [0.05, 0.5, 1.0] {
                let params = CsmaParams::new(p, l).expect("valid grid");
                let chain = CsmaChain::new(w, params);
                let mut state = chain.initial_state();
                for t in 0..200u64 {
                    norm.record(state.phi().iter().sum(), 1.0, || format!("w={w} L={l} p={p} t={t}"));
                    non_negative &= state.phi().iter().all(|&v| v >= 0.0);
                    state.evolve(&chain, 1).expect("own chain");
                }
            }
        }
    }
    out.push(norm.into_check("csma-chain", "Phi(t) sums to 1", "w x L x p x t<200", 1e-12));
    out.push(check(
        "csma-chain",
        "Phi(t) entries non-negative",
        "w x L x p x t<200".into(),
        non_negative,
        if non_negative { "ok".into() } else { "negative probability mass".into() },
    ));

    let mut closed = Worst::new();
    for &(p, l) in &[(0.1, 1u32), (0.4, 2), (0.35, 3), (0.9, 10)] {
        for zeta in 0..=100u64 {
            let d = success_distribution(1, CsmaParams::new(p, l).expect("valid"), zeta);
            let starts = (zeta + 1).saturating_sub(l as u64) as i32;
            closed.record(d.get(1), 1.0 - (1.0 - p).powi(starts), || format!("p={p} L={l} zeta={zeta}"));
        }
    }
    out.push(closed.into_check("csma-chain", "single node matches 1 - (1-p)^(zeta-L+1)", "zeta<=100", 1e-12));

    out.extend(csma_oracle_checks());
    out
}

/// Chain output against the exhaustive per-node channel-history tree.
pub fn csma_oracle_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let mut grid = Worst::new();
    for w in 0..=3usize {
        for l in 1..=2u32 {
            for p in [0.25, 0.5, 1.0] {
                let params = CsmaParams::new(p, l).expect("valid grid");
                for zeta in 0..=6u64 {
                    let chain = success_distribution(w, params, zeta);
                    let tree = oracle::delivered_counts(w, p, l, zeta);
                    for (ws, &expected) in tree.iter().enumerate() {
                        grid.record(chain.get(ws), expected, || format!("w={w} L={l} p={p} zeta={zeta} w_s={ws}"));
                    }
                }
            }
        }
    }
    out.push(grid.into_check(
        "csma-chain",
        "success distribution equals exhaustive CSMA tree",
        "w<=3, L<=2, zeta<=6, p in {0.25,0.5,1}",
        ORACLE_TOL,
    ));

    let params = CsmaParams::new(0.5, 1).expect("valid");
    let chain = success_distribution(2, params, 3);
    let tree = oracle::delivered_counts(2, 0.5, 1, 3);
    let mut named = Worst::new();
    for (ws, &expected) in tree.iter().enumerate() {
        named.record(chain.get(ws), expected, || format!("w_s={ws}"));
    }
    let mut c = named.into_check("csma-chain", "two contenders, one-slot frames", "w=2 L=1 p=0.5 zeta=3", ORACLE_TOL);
    c.detail = format!("chain {:?} vs tree {:?}; {}", chain.probs(), tree, c.detail);
    out.push(c);
    out
}

/// A chain built with a deliberately wrong collision-free probability must
/// be caught by the tree comparison.
pub fn mutation_check() -> Check {
    let perturbed = |n: usize, p: f64| {
        let idle = (1.0 - p).powi(n as i32);
        n as f64 * p * (1.0 - p).powi(n as i32) / (1.0 - idle)
    };
    let mut worst = 0.0f64;
    for w in 1..=3usize {
        for p in [0.25, 0.5] {
            let params = CsmaParams::new(p, 1).expect("valid");
            let chain = CsmaChain::with_success_model(w, params, perturbed);
            let mut state = chain.initial_state();
            state.evolve(&chain, 4).expect("own chain");
            let mutated = state.successes(1);
            let tree = oracle::delivered_counts(w, p, 1, 4);
            for (ws, &expected) in tree.iter().enumerate() {
                worst = worst.max((mutated.get(ws) - expected).abs());
            }
        }
    }
    check(
        "csma-chain",
        "perturbed S_n is detected by the tree oracle",
        "S_n with (1-p)^n in the numerator, w<=3, L=1, zeta=4".into(),
        worst > 1e-6,
        format!("max deviation of mutated chain = {worst:e}"),
    )
}

pub fn accuracy_checks() -> Vec<Check> {
    let mut out = Vec::new();

    let mut binom = Worst::new();
    for n in [1usize, 2, 10, 100] {
        for pw in [0.0, 0.05, 0.5, 0.93, 1.0] {
            binom.record(wake_count_distribution(n, pw).iter().sum(), 1.0, || format!("N={n} P_w={pw}"));
        }
    }
    out.push(binom.into_check("accuracy-engine", "binomial wake counts sum to 1", "N<=100", 1e-12));

    let cfg = ScenarioConfig::default();
    let curve = cowu_curve(&cfg).expect("default scenario");
    let in_unit = curve.iter().all(|pt| (0.0..=1.0).contains(&pt.gamma) && (0.0..=1.0).contains(&pt.upper));
    out.push(check(
        "accuracy-engine",
        "gamma within [0, 1]",
        format!("default scenario, zeta 0..={}", cfg.zeta_max),
        in_unit,
        if in_unit { "ok".into() } else { "gamma outside [0, 1]".into() },
    ));
    let violation = curve.iter().find(|pt| pt.upper < pt.gamma - ROUNDOFF_TOL);
    out.push(check(
        "accuracy-engine",
        "upper bound dominates gamma_cowu",
        format!("default scenario, zeta 0..={}", cfg.zeta_max),
        violation.is_none(),
        match violation {
            None => "ok".into(),
            Some(pt) => format!("zeta={} upper={} gamma={}", pt.zeta, pt.upper, pt.gamma),
        },
    ));

    let frozen = ScenarioConfig { zeta_max: 300, ..cfg.with_q(0.0) };
    let frozen_curve = cowu_curve(&frozen).expect("frozen scenario");
    let monotone = frozen_curve.windows(2).all(|w| w[1].gamma >= w[0].gamma);
    out.push(check(
        "accuracy-engine",
        "frozen process: gamma_cowu non-decreasing in zeta",
        "default scenario with q=0, zeta<=300".into(),
        monotone,
        if monotone { "ok".into() } else { "gamma decreased".into() },
    ));
    out
}

/// Analytical accuracy against exhaustive joint enumeration.
pub fn accuracy_oracle_checks() -> Vec<Check> {
    let mut cowu = Worst::new();
    let mut upper = Worst::new();
    let mut rr = Worst::new();
    for nodes in 1..=2usize {
        for states in 2..=3usize {
            for q in [0.1, 0.35] {
                let model = ProcessModel::birth_death(states, q).expect("valid grid");
                for lo in 1..=states {
                    for hi in lo..=states {
                        let range = RangeQuery::new(lo, hi).expect("valid range");
                        let wake = wake_count_distribution(nodes, wake_probability(model.stationary(), &range));
                        for l in 1..=2u32 {
                            let rr_analytic = crate::accuracy::gamma_round_robin(&ScenarioConfig {
                                nodes,
                                states,
                                q,
                                q_hat: None,
                                range,
                                slots_per_tx: l,
                                p: 0.5,
                                zeta_max: 1,
                            })
                            .expect("valid grid")
                            .gamma;
                            let rr_oracle = oracle::gamma_round_robin_enumeration(&model, &range, nodes, l);
                            rr.record(rr_analytic, rr_oracle, || {
                                format!("N={nodes} M={states} q={q} range=[{lo},{hi}] L={l}")
                            });
                            for p in [0.25, 0.5, 1.0] {
                                let params = CsmaParams::new(p, l).expect("valid grid");
                                let curve = CowuSweep::new(&model, range, wake.clone(), params).run_to(6);
                                for pt in curve {
                                    let tag = || {
                                        format!(
                                            "N={nodes} M={states} q={q} range=[{lo},{hi}] L={l} p={p} zeta={}",
                                            pt.zeta
                                        )
                                    };
                                    let csma = MacModel::Csma { p, slots_per_tx: l };
                                    cowu.record(
                                        pt.gamma,
                                        oracle::gamma_cowu_enumeration(&model, &range, nodes, csma, pt.zeta),
                                        tag,
                                    );
                                    upper.record(
                                        pt.upper,
                                        oracle::gamma_cowu_enumeration(&model, &range, nodes, MacModel::Ideal, pt.zeta),
                                        tag,
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let grid = "N<=2, M<=3, L<=2, zeta<=6, p in {0.25,0.5,1}, q in {0.1,0.35}, all ranges";
    vec![
        cowu.into_check("accuracy-engine", "gamma_cowu equals joint enumeration", grid, ORACLE_TOL),
        upper.into_check("accuracy-engine", "upper bound equals ideal-MAC enumeration", grid, ORACLE_TOL),
        rr.into_check(
            "accuracy-engine",
            "gamma_round_robin equals enumeration",
            "N<=2, M<=3, L<=2, all ranges",
            ORACLE_TOL,
        ),
    ]
}

pub fn simulator_checks(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let energy = EnergyModel::default();
    let small = ScenarioConfig {
        nodes: 8,
        states: 10,
        q: 0.01,
        q_hat: None,
        range: RangeQuery::new(6, 8).expect("valid"),
        slots_per_tx: 3,
        p: 0.3,
        zeta_max: 120,
    };

    let a = run_campaign(&small, &energy, Schedule::Cowu { zeta: 40 }, 2000, seed).expect("valid");
    let b = run_campaign(&small, &energy, Schedule::Cowu { zeta: 40 }, 2000, seed).expect("valid");
    let sa = cowu_sweep_campaign(&small, &energy, small.zeta_max, 500, seed).expect("valid");
    let sb = cowu_sweep_campaign(&small, &energy, small.zeta_max, 500, seed).expect("valid");
    out.push(check(
        "simulator",
        "campaigns are deterministic under a fixed seed",
        format!("small scenario, seed={seed}"),
        a == b && sa == sb,
        format!("gamma {} vs {}, energy {} vs {}", a.gamma.mean, b.gamma.mean, a.energy_j.mean, b.energy_j.mean),
    ));

    let in_unit =
        (0.0..=1.0).contains(&a.gamma.mean) && (0..=small.zeta_max).all(|z| (0.0..=1.0).contains(&sa.gamma(z).mean));
    out.push(check(
        "simulator",
        "simulated gamma within [0, 1]",
        "small scenario".into(),
        in_unit,
        format!("gamma at zeta=40: {}", a.gamma.mean),
    ));

    let early = run_campaign(&small, &energy, Schedule::Cowu { zeta: 5 }, 2000, seed).expect("valid");
    let late = run_campaign(&small, &energy, Schedule::Cowu { zeta: 500 }, 2000, seed).expect("valid");
    out.push(check(
        "simulator",
        "CoWu energy independent of zeta",
        format!("zeta in {{5, 500}}, seed={seed}"),
        early.energy_j == late.energy_j,
        format!("{} J vs {} J", early.energy_j.mean, late.energy_j.mean),
    ));

    let cfg = ScenarioConfig::default();
    let rr = run_campaign(&cfg, &energy, Schedule::RoundRobin, 100, seed).expect("valid");
    let expected = cfg.nodes as f64 * cfg.slots_per_tx as f64 * energy.tx_slot_j();
    out.push(check(
        "simulator",
        "round-robin energy is exactly N L slot P_tx",
        "default scenario, 100 rounds".into(),
        (rr.energy_j.mean - expected).abs() <= 1e-12 && rr.energy_j.ci_halfwidth == 0.0,
        format!("mean {} J, expected {expected} J, ci {}", rr.energy_j.mean, rr.energy_j.ci_halfwidth),
    ));

    let mut worst_rel = 0.0f64;
    for k in 0..200 {
        let r = simulate_cowu_round(&small, &energy, 40, seed.wrapping_add(k)).expect("valid");
        let sum: f64 = r.node_energy_j.iter().sum();
        if r.total_energy_j > 0.0 {
            worst_rel = worst_rel.max((sum - r.total_energy_j).abs() / r.total_energy_j);
        }
    }
    out.push(check(
        "simulator",
        "per-node energies sum to the total",
        "small scenario, 200 rounds".into(),
        worst_rel <= 1e-12,
        format!("max relative gap {worst_rel:e}"),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutation_is_caught() {
        assert!(mutation_check().passed);
    }

    #[test]
    fn csma_grid_agrees_with_tree() {
        for c in csma_oracle_checks() {
            assert!(c.passed, "{c:?}");
        }
    }
}
