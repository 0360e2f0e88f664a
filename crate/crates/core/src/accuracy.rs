//! Accuracy of content-based wake-up and of the round-robin baseline.
//!
//! Accuracy is the probability that the set of nodes the sink heard from by
//! the deadline equals the set of nodes whose value lies in the queried range
//! at the deadline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csma::{success_distribution, ChainState, CsmaChain, CsmaParams, SuccessDistribution};
use crate::error::Result;
use crate::process::{wake_probability, ProcessModel, RangeQuery, SurvivalProbs, SurvivalTracker};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CowuAnalytical,
    CowuUpperBound,
    RoundRobin,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub method: Method,
    pub zeta: Option<u64>,
    pub gamma: f64,
    pub ci_halfwidth: Option<f64>,
}

/// Binomial distribution of the number of nodes that wake up, `P_d(w)` for
/// `w = 0..=nodes`, evaluated in log space.
pub fn wake_count_distribution(nodes: usize, p_wake: f64) -> Vec<f64> {
    let mut out = vec![0.0; nodes + 1];
    if p_wake <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p_wake >= 1.0 {
        out[nodes] = 1.0;
        return out;
    }
    let (ln_p, ln_q) = (p_wake.ln(), (-p_wake).ln_1p());
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=nodes).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    for (w, slot) in out.iter_mut().enumerate() {
        let ln_choose = ln_fact[nodes] - ln_fact[w] - ln_fact[nodes - w];
        *slot = (ln_choose + w as f64 * ln_p + (nodes - w) as f64 * ln_q).exp();
    }
    out
}

/// Combines the per-node survival probabilities with the wake-count and
/// success distributions. `successes(w)` must return `P_s(., zeta)` for `w`
/// active nodes.
fn combine<'a>(
    nodes: usize,
    survival: &SurvivalProbs,
    wake_counts: &[f64],
    successes: impl Fn(usize) -> Option<&'a SuccessDistribution>,
) -> f64 {
    let stay_in = powers(survival.stay_in, nodes);
    let leave = powers(survival.leave, nodes);
    let stay_out = powers(survival.stay_out, nodes);
    let mut gamma = 0.0;
    for (w, &pd) in wake_counts.iter().enumerate() {
        if pd == 0.0 {
            continue;
        }
        let Some(ps) = successes(w) else { continue };
        let inner: f64 = (0..=w).map(|ws| stay_in[ws] * leave[w - ws] * ps.get(ws)).sum();
        gamma += inner * stay_out[nodes - w] * pd;
    }
    gamma.clamp(0.0, 1.0)
}

fn ideal_gamma(nodes: usize, survival: &SurvivalProbs, wake_counts: &[f64]) -> f64 {
    let stay_in = powers(survival.stay_in, nodes);
    let stay_out = powers(survival.stay_out, nodes);
    wake_counts.iter().enumerate().map(|(w, &pd)| stay_in[w] * stay_out[nodes - w] * pd).sum::<f64>().clamp(0.0, 1.0)
}

/// `[1, x, x^2, ..., x^n]`, with `0^0 = 1`.
fn powers(x: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 1.0;
    for _ in 0..=n {
        out.push(acc);
        acc *= x;
    }
    out
}

/// Accuracy of CoWu at a single timing offset, under the true process.
pub fn gamma_cowu(cfg: &ScenarioConfig, zeta: u64) -> Result<AccuracyResult> {
    cfg.validate()?;
    let model = cfg.process()?;
    let params = cfg.csma()?;
    let wake_counts = wake_count_distribution(cfg.nodes, wake_probability(model.stationary(), &cfg.range));
    let survival = model.survival(&cfg.range, zeta);
    let dists: Vec<Option<SuccessDistribution>> = wake_counts
        .par_iter()
        .enumerate()
        .map(|(w, &pd)| (pd > 0.0).then(|| success_distribution(w, params, zeta)))
        .collect();
    let gamma = combine(cfg.nodes, &survival, &wake_counts, |w| dists[w].as_ref());
    Ok(AccuracyResult { method: Method::CowuAnalytical, zeta: Some(zeta), gamma, ci_halfwidth: None })
}

/// CoWu accuracy with an ideal MAC in which every awake node delivers.
pub fn gamma_cowu_upper_bound(cfg: &ScenarioConfig, zeta: u64) -> Result<AccuracyResult> {
    cfg.validate()?;
    let model = cfg.process()?;
    let wake_counts = wake_count_distribution(cfg.nodes, wake_probability(model.stationary(), &cfg.range));
    let survival = model.survival(&cfg.range, zeta);
    Ok(AccuracyResult {
        method: Method::CowuUpperBound,
        zeta: Some(zeta),
        gamma: ideal_gamma(cfg.nodes, &survival, &wake_counts),
        ci_halfwidth: None,
    })
}

/// Round-robin accuracy: node `i` (1-based) reports a sample that is
/// `(N - i + 1) L` slots old at the deadline, and every node must be
/// individually consistent.
pub fn gamma_round_robin(cfg: &ScenarioConfig) -> Result<AccuracyResult> {
    cfg.validate()?;
    let model = cfg.process()?;
    Ok(AccuracyResult {
        method: Method::RoundRobin,
        zeta: None,
        gamma: round_robin_with(&model, cfg.range, cfg.nodes, cfg.slots_per_tx as u64),
        ci_halfwidth: None,
    })
}

fn round_robin_with(model: &ProcessModel, range: RangeQuery, nodes: usize, slots: u64) -> f64 {
    let mut tracker = SurvivalTracker::new(model, range);
    let mut gamma = 1.0;
    for k in 1..=nodes as u64 {
        tracker.advance_to(k * slots);
        let s = tracker.probs();
        gamma *= s.joint_in + s.joint_out;
    }
    gamma.clamp(0.0, 1.0)
}

/// One point of a timing sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CowuPoint {
    pub zeta: u64,
    pub gamma: f64,
    pub upper: f64,
}

/// Evaluates CoWu accuracy for `zeta = 0, 1, 2, ...`, advancing the process
/// lag and all CSMA chains by one slot per step.
///
/// Several processes can share one sweep: the CSMA chains do not depend on
/// the process, so each extra process only adds a survival tracker.
#[derive(Debug, Clone)]
pub struct CowuSweep {
    nodes: usize,
    slots_per_tx: usize,
    targets: Vec<(SurvivalTracker, Vec<f64>)>,
    chains: Vec<Option<(CsmaChain, ChainState)>>,
    successes: Vec<Option<SuccessDistribution>>,
}

impl CowuSweep {
    /// `survival_model` drives the range-survival terms; `wake_counts` is the
    /// wake-count distribution at sampling time.
    pub fn new(survival_model: &ProcessModel, range: RangeQuery, wake_counts: Vec<f64>, params: CsmaParams) -> Self {
        Self::multi(range, params, vec![(survival_model, wake_counts)])
    }

    /// One sweep over several `(survival model, wake counts)` targets. All
    /// wake-count vectors must have the same length.
    pub fn multi(range: RangeQuery, params: CsmaParams, targets: Vec<(&ProcessModel, Vec<f64>)>) -> Self {
        assert!(!targets.is_empty(), "at least one target");
        let nodes = targets[0].1.len() - 1;
        assert!(targets.iter().all(|(_, pd)| pd.len() == nodes + 1), "wake-count lengths differ");
        let chains: Vec<Option<(CsmaChain, ChainState)>> = (0..=nodes)
            .map(|w| {
                targets.iter().any(|(_, pd)| pd[w] > 0.0).then(|| {
                    let chain = CsmaChain::new(w, params);
                    let state = chain.initial_state();
                    (chain, state)
                })
            })
            .collect();
        let slots_per_tx = params.slots_per_tx() as usize;
        let successes = chains.iter().map(|c| c.as_ref().map(|(_, s)| s.successes(slots_per_tx))).collect();
        CowuSweep {
            nodes,
            slots_per_tx,
            targets: targets.into_iter().map(|(model, pd)| (SurvivalTracker::new(model, range), pd)).collect(),
            chains,
            successes,
        }
    }

    /// Sweep for a scenario, using the assumed process (`q_hat`) for the
    /// survival terms and the true stationary distribution for wake counts.
    pub fn for_scenario(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let truth = cfg.process()?;
        let assumed = cfg.assumed_process()?;
        let wake_counts = wake_count_distribution(cfg.nodes, wake_probability(truth.stationary(), &cfg.range));
        Ok(CowuSweep::new(&assumed, cfg.range, wake_counts, cfg.csma()?))
    }

    pub fn zeta(&self) -> u64 {
        self.targets[0].0.lag()
    }

    /// Point for the first target.
    pub fn current(&self) -> CowuPoint {
        self.point(0)
    }

    /// Points for every target, in construction order.
    pub fn current_all(&self) -> Vec<CowuPoint> {
        (0..self.targets.len()).map(|i| self.point(i)).collect()
    }

    fn point(&self, target: usize) -> CowuPoint {
        let (tracker, wake_counts) = &self.targets[target];
        let survival = tracker.probs();
        CowuPoint {
            zeta: self.zeta(),
            gamma: combine(self.nodes, &survival, wake_counts, |w| self.successes[w].as_ref()),
            upper: ideal_gamma(self.nodes, &survival, wake_counts),
        }
    }

    pub fn advance(&mut self) {
        for (tracker, _) in &mut self.targets {
            tracker.advance();
        }
        let slots = self.slots_per_tx;
        self.chains.par_iter_mut().zip(self.successes.par_iter_mut()).for_each(|(entry, out)| {
            if let Some((chain, state)) = entry {
                state.evolve(chain, 1).expect("state built from its own chain");
                *out = Some(state.successes(slots));
            }
        });
    }

    /// Points for `zeta = current..=zeta_max`, first target only.
    pub fn run_to(self, zeta_max: u64) -> Vec<CowuPoint> {
        self.run_all_to(zeta_max).swap_remove(0)
    }

    /// One curve per target for `zeta = current..=zeta_max`.
    pub fn run_all_to(mut self, zeta_max: u64) -> Vec<Vec<CowuPoint>> {
        let len = (zeta_max.saturating_sub(self.zeta()) + 1) as usize;
        let mut out = vec![Vec::with_capacity(len); self.targets.len()];
        loop {
            for (curve, pt) in out.iter_mut().zip(self.current_all()) {
                curve.push(pt);
            }
            if self.zeta() >= zeta_max {
                break;
            }
            self.advance();
        }
        out
    }
}

/// `gamma_cowu` and its upper bound for every `zeta` in `0..=zeta_max`, under
/// the true process.
pub fn cowu_curve(cfg: &ScenarioConfig) -> Result<Vec<CowuPoint>> {
    let truth = ScenarioConfig { q_hat: None, ..*cfg };
    Ok(CowuSweep::for_scenario(&truth)?.run_to(cfg.zeta_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaOptimum {
    pub zeta: u64,
    /// Accuracy predicted under the assumed process.
    pub gamma: f64,
}

/// Exhaustive scan of `zeta` in `1..=zeta_max` under the assumed process;
/// ties go to the smaller `zeta`.
pub fn optimize_zeta(cfg: &ScenarioConfig) -> Result<ZetaOptimum> {
    let points = CowuSweep::for_scenario(cfg)?.run_to(cfg.zeta_max);
    Ok(argmax_zeta(&points[1..]))
}

/// Largest `gamma` among `points`; ties go to the earliest point.
pub fn argmax_zeta(points: &[CowuPoint]) -> ZetaOptimum {
    let mut best = ZetaOptimum { zeta: points[0].zeta, gamma: points[0].gamma };
    for pt in &points[1..] {
        if pt.gamma > best.gamma {
            best = ZetaOptimum { zeta: pt.zeta, gamma: pt.gamma };
        }
    }
    best
}

/// Accuracy achieved at one true `q` when the timing was tuned for `q_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MismatchPoint {
    pub q: f64,
    pub q_hat: f64,
    /// Timing chosen under `q_hat`.
    pub zeta_opt: u64,
    /// Accuracy under the true `q` at that timing.
    pub gamma: f64,
    /// Timing and accuracy with perfect knowledge of `q`.
    pub zeta_opt_perfect: u64,
    pub gamma_perfect: f64,
    pub gamma_round_robin: f64,
}

/// For each `q_hat` and each true `q`: tune `zeta` under `q_hat`, then
/// evaluate under `q`. Returns one block per `q_hat`, each in `q` order.
///
/// All curves come from one shared sweep to `zeta_max`.
pub fn mismatch_curve(cfg: &ScenarioConfig, q_true_values: &[f64], q_hats: &[f64]) -> Result<Vec<MismatchPoint>> {
    let base = ScenarioConfig { q_hat: None, ..*cfg };
    base.validate()?;
    let truths: Vec<ProcessModel> = q_true_values
        .iter()
        .map(|&q| {
            base.with_q(q).validate()?;
            ProcessModel::birth_death(base.states, q)
        })
        .collect::<Result<_>>()?;
    let assumed: Vec<ProcessModel> = q_hats
        .iter()
        .map(|&q_hat| {
            base.with_q(q_hat).validate()?;
            ProcessModel::birth_death(base.states, q_hat)
        })
        .collect::<Result<_>>()?;
    let wake: Vec<Vec<f64>> = truths
        .iter()
        .map(|m| wake_count_distribution(base.nodes, wake_probability(m.stationary(), &base.range)))
        .collect();

    // Targets: every true process, then every (q_hat, q) pair.
    let mut targets: Vec<(&ProcessModel, Vec<f64>)> = truths.iter().zip(&wake).map(|(m, pd)| (m, pd.clone())).collect();
    for model in &assumed {
        targets.extend(wake.iter().map(|pd| (model, pd.clone())));
    }
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let curves = CowuSweep::multi(base.range, base.csma()?, targets).run_all_to(base.zeta_max);
    let (true_curves, assumed_curves) = curves.split_at(truths.len());

    let mut out = Vec::with_capacity(q_hats.len() * truths.len());
    for (h, &q_hat) in q_hats.iter().enumerate() {
        for (i, &q) in q_true_values.iter().enumerate() {
            let truth_curve = &true_curves[i];
            let chosen = argmax_zeta(&assumed_curves[h * truths.len() + i][1..]);
            let perfect = argmax_zeta(&truth_curve[1..]);
            out.push(MismatchPoint {
                q,
                q_hat,
                zeta_opt: chosen.zeta,
                gamma: truth_curve[chosen.zeta as usize].gamma,
                zeta_opt_perfect: perfect.zeta,
                gamma_perfect: perfect.gamma,
                gamma_round_robin: round_robin_with(&truths[i], base.range, base.nodes, base.slots_per_tx as u64),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(q: f64) -> ScenarioConfig {
        ScenarioConfig {
            nodes: 2,
            states: 3,
            q,
            q_hat: None,
            range: RangeQuery::new(3, 3).unwrap(),
            slots_per_tx: 1,
            p: 0.5,
            zeta_max: 20,
        }
    }

    #[test]
    fn binomial_edge_cases() {
        let d = wake_count_distribution(100, 0.0);
        assert_eq!(d[0], 1.0);
        assert_eq!(d.iter().sum::<f64>(), 1.0);
        let d = wake_count_distribution(4, 1.0);
        assert_eq!(d, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let d = wake_count_distribution(2, 0.5);
        for (a, b) in d.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn binomial_all_asleep_matches_direct_power() {
        let d = wake_count_distribution(100, 0.05);
        let direct = 0.95f64.powi(100);
        assert!((d[0] - direct).abs() < 1e-15);
        assert!((d[0] - 5.92e-3).abs() < 1e-5);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vacuous_range_is_always_exact() {
        let cfg = ScenarioConfig {
            nodes: 1,
            states: 2,
            q: 0.3,
            range: RangeQuery::new(1, 2).unwrap(),
            slots_per_tx: 3,
            p: 1.0,
            ..small(0.1)
        };
        for zeta in 3..10 {
            assert!((gamma_cowu(&cfg, zeta).unwrap().gamma - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_offset_only_all_asleep_is_correct() {
        let cfg = ScenarioConfig::default();
        let g = gamma_cowu(&cfg, 0).unwrap().gamma;
        assert!((g - 0.95f64.powi(100)).abs() < 1e-14);
        let ub = gamma_cowu_upper_bound(&cfg, 0).unwrap().gamma;
        assert!((ub - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_robin_single_node() {
        let cfg = ScenarioConfig { nodes: 1, ..small(0.1) };
        let third = 1.0 / 3.0;
        let expected = third * 0.9 + third * 1.0 + third * 0.9;
        let g = gamma_round_robin(&cfg).unwrap().gamma;
        assert!((g - expected).abs() < 1e-12);
    }

    #[test]
    fn frozen_process_round_robin_is_exact() {
        let cfg = ScenarioConfig::default().with_q(0.0);
        assert_eq!(gamma_round_robin(&cfg).unwrap().gamma, 1.0);
    }

    #[test]
    fn frozen_process_cowu_is_non_decreasing() {
        let cfg = ScenarioConfig { zeta_max: 60, ..small(0.0) };
        let curve = cowu_curve(&cfg).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].gamma >= pair[0].gamma - 1e-15);
        }
        let opt = optimize_zeta(&ScenarioConfig { q_hat: Some(0.0), ..small(0.2) }).unwrap();
        assert_eq!(opt.zeta, 20);
    }

    #[test]
    fn sweep_matches_pointwise_evaluation() {
        let cfg = ScenarioConfig {
            nodes: 6,
            states: 8,
            q: 0.03,
            range: RangeQuery::new(5, 7).unwrap(),
            slots_per_tx: 3,
            p: 0.3,
            zeta_max: 40,
            q_hat: None,
        };
        let curve = cowu_curve(&cfg).unwrap();
        for zeta in [0u64, 1, 5, 17, 40] {
            let direct = gamma_cowu(&cfg, zeta).unwrap().gamma;
            let ub = gamma_cowu_upper_bound(&cfg, zeta).unwrap().gamma;
            assert!((curve[zeta as usize].gamma - direct).abs() < 1e-12);
            assert!((curve[zeta as usize].upper - ub).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_bound_dominates() {
        let cfg = ScenarioConfig { zeta_max: 300, ..ScenarioConfig::default() };
        for pt in cowu_curve(&cfg).unwrap() {
            assert!(pt.upper >= pt.gamma - 1e-15, "zeta {}", pt.zeta);
        }
    }

    #[test]
    fn upper_bound_needs_staying_in_more_likely_than_leaving() {
        // The ideal MAC can do worse than CSMA once leaving the range is
        // likelier than staying: a lost report from a node that left is correct.
        let cfg = ScenarioConfig::default();
        let s = cfg.process().unwrap().survival(&cfg.range, cfg.zeta_max);
        assert!(s.stay_in >= s.leave, "P_A = {}", s.stay_in);

        let drifting = ScenarioConfig {
            nodes: 1,
            states: 3,
            q: 0.5,
            range: RangeQuery::new(2, 2).unwrap(),
            slots_per_tx: 1,
            p: 0.5,
            ..small(0.5)
        };
        let s = drifting.process().unwrap().survival(&drifting.range, 1);
        assert!(s.stay_in < s.leave);
        let g = gamma_cowu(&drifting, 1).unwrap().gamma;
        let ub = gamma_cowu_upper_bound(&drifting, 1).unwrap().gamma;
        assert!(g > ub, "gamma {g} upper {ub}");
    }

    #[test]
    fn mismatch_with_exact_knowledge_is_perfect_curve() {
        let cfg = small(0.05);
        let pts = mismatch_curve(&cfg, &[0.05], &[0.05]).unwrap();
        assert_eq!(pts[0].gamma, pts[0].gamma_perfect);
        assert_eq!(pts[0].zeta_opt, pts[0].zeta_opt_perfect);
    }

    #[test]
    fn shared_sweep_matches_separate_sweeps() {
        let cfg = ScenarioConfig { zeta_max: 40, ..small(0.05) };
        let pts = mismatch_curve(&cfg, &[0.02, 0.2], &[0.01, 0.3]).unwrap();
        assert_eq!(pts.len(), 4);
        for pt in &pts {
            let truth = cfg.with_q(pt.q);
            let curve = cowu_curve(&truth).unwrap();
            let chosen = optimize_zeta(&ScenarioConfig { q_hat: Some(pt.q_hat), ..truth }).unwrap();
            assert_eq!(pt.zeta_opt, chosen.zeta);
            assert!((pt.gamma - curve[chosen.zeta as usize].gamma).abs() < 1e-14);
            assert!((pt.gamma_perfect - argmax_zeta(&curve[1..]).gamma).abs() < 1e-14);
            assert!((pt.gamma_round_robin - gamma_round_robin(&truth).unwrap().gamma).abs() < 1e-14);
        }
    }
}
