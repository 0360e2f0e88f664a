//! Slot-level Monte Carlo simulation of CoWu and round-robin data collection.
//!
//! The simulator shares no code with the analytical path beyond the process
//! definition: initial values are drawn from the stationary distribution,
//! every contender flips its own coin in each idle slot, and process values
//! follow sampled trajectories. Trajectories are drawn as geometric holding
//! times followed by a jump, which has the same law as stepping the chain
//! once per slot.
//!
//! Within a round the random draws are ordered: initial values in node order,
//! then MAC decisions slot by slot in node order, then one trajectory per
//! node in node order.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::process::{ProcessModel, RangeQuery};
use crate::scenario::ScenarioConfig;

/// Slots simulated before a CoWu round is declared stuck (e.g. `p = 1` with
/// two or more contenders collides forever).
pub const MAC_SLOT_CAP: u64 = 1_000_000;

/// z value of a two-sided 95% normal interval.
const Z95: f64 = 1.959963984540054;

/// Main-radio power draw per state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    pub tx_power_w: f64,
    pub rx_power_w: f64,
    pub slot_duration_s: f64,
    pub sleep_power_w: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel { tx_power_w: 0.055, rx_power_w: 0.050, slot_duration_s: 320e-6, sleep_power_w: 0.0 }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tx_power_w", self.tx_power_w),
            ("rx_power_w", self.rx_power_w),
            ("slot_duration_s", self.slot_duration_s),
            ("sleep_power_w", self.sleep_power_w),
        ];
        for (field, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::invalid(field, format!("must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }

    pub fn tx_slot_j(&self) -> f64 {
        self.tx_power_w * self.slot_duration_s
    }

    pub fn rx_slot_j(&self) -> f64 {
        self.rx_power_w * self.slot_duration_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacStatus {
    Asleep,
    Contending,
    Transmitting { remaining: u32 },
    Done,
}

/// Per-node bookkeeping during a round.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    /// Current process value, 1-based.
    pub process_value: usize,
    pub mac_status: MacStatus,
    /// Value captured at sampling time, 1-based.
    pub sampled_value: usize,
    pub energy_j: f64,
}

/// Outcome of one simulated round at a given deadline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundResult {
    /// Nodes whose value is in range at the deadline (0-based ids).
    pub true_set: Vec<usize>,
    /// Nodes the sink heard from by the deadline.
    pub received_set: Vec<usize>,
    pub exact_match: bool,
    pub total_energy_j: f64,
    /// Slot at which the last awakened node delivered; `None` if the MAC
    /// did not finish within [`MAC_SLOT_CAP`].
    pub completion_slot: Option<u64>,
    pub awake: usize,
    pub node_energy_j: Vec<f64>,
}

/// Samples values and trajectories of one node's process.
#[derive(Debug, Clone)]
struct ProcessSampler {
    initial: WeightedIndex<f64>,
    hold: Vec<Option<Geometric>>,
    jump: Vec<Option<(Vec<usize>, WeightedIndex<f64>)>>,
}

impl ProcessSampler {
    fn new(model: &ProcessModel) -> Result<Self> {
        let m = model.states();
        let initial = WeightedIndex::new(model.stationary().probs().iter().copied())
            .map_err(|e| ModelError::invalid("stationary", e.to_string()))?;
        let mut hold = Vec::with_capacity(m);
        let mut jump = Vec::with_capacity(m);
        for i in 0..m {
            let targets: Vec<usize> = (0..m).filter(|&j| j != i && model.matrix().get(i, j) > 0.0).collect();
            let leave: f64 = targets.iter().map(|&j| model.matrix().get(i, j)).sum();
            if targets.is_empty() || leave <= 0.0 {
                hold.push(None);
                jump.push(None);
                continue;
            }
            let geo = Geometric::new(leave.min(1.0)).map_err(|e| ModelError::invalid("q", e.to_string()))?;
            let weights = WeightedIndex::new(targets.iter().map(|&j| model.matrix().get(i, j)))
                .map_err(|e| ModelError::invalid("q", e.to_string()))?;
            hold.push(Some(geo));
            jump.push(Some((targets, weights)));
        }
        Ok(ProcessSampler { initial, hold, jump })
    }

    fn initial_value<R: Rng>(&self, rng: &mut R) -> usize {
        self.initial.sample(rng)
    }

    /// Appends the jumps of a path over slot boundaries `0..=horizon`
    /// starting from `start`, beginning with `(0, start)`.
    fn trajectory_into<R: Rng>(&self, start: usize, horizon: u64, rng: &mut R, out: &mut Vec<(u64, usize)>) {
        out.push((0, start));
        self.walk(start, horizon, rng, |t, state| out.push((t, state)));
    }

    /// Value after `steps` slots, same draws as a stored path.
    fn value_after<R: Rng>(&self, start: usize, steps: u64, rng: &mut R) -> usize {
        let mut last = start;
        self.walk(start, steps, rng, |_, state| last = state);
        last
    }

    fn walk<R: Rng>(&self, start: usize, horizon: u64, rng: &mut R, mut on_jump: impl FnMut(u64, usize)) {
        let (mut t, mut state) = (0u64, start);
        while let Some(geo) = &self.hold[state] {
            // `stays` failed slots, then a move during the next one.
            let stays = geo.sample(rng);
            t = t.saturating_add(stays).saturating_add(1);
            if t > horizon {
                break;
            }
            let (targets, weights) = self.jump[state].as_ref().expect("paired with hold");
            state = targets[weights.sample(rng)];
            on_jump(t, state);
        }
    }
}

/// Piecewise-constant paths of all nodes in one buffer. Node `i` owns
/// `jumps[offsets[i]..offsets[i + 1]]`, a list of `(time, value)`.
#[derive(Debug, Clone, PartialEq)]
struct Paths {
    jumps: Vec<(u64, usize)>,
    offsets: Vec<usize>,
}

impl Paths {
    fn path(&self, node: usize) -> &[(u64, usize)] {
        &self.jumps[self.offsets[node]..self.offsets[node + 1]]
    }

    fn value_at(&self, node: usize, t: u64) -> usize {
        let path = self.path(node);
        let idx = path.partition_point(|&(time, _)| time <= t);
        path[idx - 1].1
    }
}

/// A fully simulated CoWu round: sampling, MAC until every awakened node has
/// delivered, and process paths up to a horizon. Can be evaluated at any
/// deadline up to that horizon.
#[derive(Debug, Clone)]
pub struct CowuRound {
    range: RangeQuery,
    nodes: Vec<NodeState>,
    delivered_at: Vec<Option<u64>>,
    paths: Paths,
    completion_slot: Option<u64>,
    horizon: u64,
}

impl CowuRound {
    pub fn simulate(cfg: &ScenarioConfig, energy: &EnergyModel, horizon: u64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let model = cfg.process()?;
        let sampler = ProcessSampler::new(&model)?;
        Ok(Self::simulate_with(cfg, &sampler, energy, horizon, rng))
    }

    fn simulate_with(
        cfg: &ScenarioConfig,
        sampler: &ProcessSampler,
        energy: &EnergyModel,
        horizon: u64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let range = cfg.range;
        let mut nodes: Vec<NodeState> = (0..cfg.nodes)
            .map(|_| {
                let v = sampler.initial_value(rng) + 1;
                NodeState {
                    process_value: v,
                    sampled_value: v,
                    mac_status: if range.contains_value(v) { MacStatus::Contending } else { MacStatus::Asleep },
                    energy_j: 0.0,
                }
            })
            .collect();

        let (delivered_at, completion_slot) = run_csma(&mut nodes, cfg.p, cfg.slots_per_tx, energy, rng);

        let mut paths =
            Paths { jumps: Vec::with_capacity(nodes.len() + 8), offsets: Vec::with_capacity(nodes.len() + 1) };
        for node in &nodes {
            paths.offsets.push(paths.jumps.len());
            sampler.trajectory_into(node.sampled_value - 1, horizon, rng, &mut paths.jumps);
        }
        paths.offsets.push(paths.jumps.len());
        for (i, node) in nodes.iter_mut().enumerate() {
            node.process_value = paths.value_at(i, horizon) + 1;
        }
        CowuRound { range, nodes, delivered_at, paths, completion_slot, horizon }
    }

    pub fn awake(&self) -> usize {
        self.nodes.iter().filter(|n| self.range.contains_value(n.sampled_value)).count()
    }

    pub fn delivered_by(&self, zeta: u64) -> usize {
        self.delivered_at.iter().filter(|d| matches!(d, Some(t) if *t <= zeta)).count()
    }

    pub fn node_energy_j(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.energy_j).collect()
    }

    pub fn total_energy_j(&self) -> f64 {
        self.nodes.iter().map(|n| n.energy_j).sum()
    }

    pub fn completion_slot(&self) -> Option<u64> {
        self.completion_slot
    }

    fn consistent(&self, node: usize, t: u64) -> bool {
        let in_range = self.range.contains_index(self.paths.value_at(node, t));
        let delivered = matches!(self.delivered_at[node], Some(d) if d <= t);
        in_range == delivered
    }

    /// Sets `T` and `S` at deadline `zeta` (must not exceed the horizon).
    pub fn evaluate(&self, zeta: u64) -> RoundResult {
        assert!(zeta <= self.horizon, "deadline {zeta} beyond simulated horizon {}", self.horizon);
        let true_set: Vec<usize> =
            (0..self.nodes.len()).filter(|&i| self.range.contains_index(self.paths.value_at(i, zeta))).collect();
        let received_set: Vec<usize> =
            (0..self.nodes.len()).filter(|&i| matches!(self.delivered_at[i], Some(d) if d <= zeta)).collect();
        RoundResult {
            exact_match: true_set == received_set,
            true_set,
            received_set,
            total_energy_j: self.total_energy_j(),
            completion_slot: self.completion_slot,
            awake: self.awake(),
            node_energy_j: self.node_energy_j(),
        }
    }

    /// Half-open intervals of deadlines in `0..=horizon` at which `T = S`.
    pub fn matching_deadlines(&self) -> Vec<(u64, u64)> {
        let n = self.nodes.len();
        let mut events: Vec<(u64, usize)> = Vec::new();
        for i in 0..n {
            events.extend(self.paths.path(i).iter().skip(1).map(|&(t, _)| (t, i)));
            if let Some(d) = self.delivered_at[i] {
                if d <= self.horizon {
                    events.push((d, i));
                }
            }
        }
        events.sort_unstable();

        let mut ok: Vec<bool> = (0..n).map(|i| self.consistent(i, 0)).collect();
        let mut bad = ok.iter().filter(|c| !**c).count();
        let mut intervals = Vec::new();
        let mut open = (bad == 0).then_some(0u64);
        let mut k = 0;
        while k < events.len() {
            let t = events[k].0;
            while k < events.len() && events[k].0 == t {
                let i = events[k].1;
                let now = self.consistent(i, t);
                if now != ok[i] {
                    if now {
                        bad -= 1;
                    } else {
                        bad += 1;
                    }
                    ok[i] = now;
                }
                k += 1;
            }
            match (open, bad == 0) {
                (Some(start), false) => {
                    intervals.push((start, t));
                    open = None;
                }
                (None, true) => open = Some(t),
                _ => {}
            }
        }
        if let Some(start) = open {
            intervals.push((start, self.horizon + 1));
        }
        intervals
    }
}

/// p-persistent CSMA among the contending nodes until all have delivered.
/// Returns per-node delivery slots and the completion slot.
fn run_csma(
    nodes: &mut [NodeState],
    p: f64,
    slots_per_tx: u32,
    energy: &EnergyModel,
    rng: &mut ChaCha8Rng,
) -> (Vec<Option<u64>>, Option<u64>) {
    let mut delivered_at = vec![None; nodes.len()];
    let mut active: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].mac_status == MacStatus::Contending).collect();
    let (tx_j, rx_j) = (energy.tx_slot_j(), energy.rx_slot_j());
    let mut t = 0u64;
    let mut senders: Vec<usize> = Vec::new();

    while !active.is_empty() {
        if t >= MAC_SLOT_CAP {
            return (delivered_at, None);
        }
        if senders.is_empty() {
            for &i in &active {
                if rng.random_bool(p) {
                    nodes[i].mac_status = MacStatus::Transmitting { remaining: slots_per_tx };
                    senders.push(i);
                }
            }
        }
        for &i in &active {
            nodes[i].energy_j += match nodes[i].mac_status {
                MacStatus::Transmitting { .. } => tx_j,
                _ => rx_j,
            };
        }
        t += 1;
        if senders.is_empty() {
            continue;
        }
        let mut finished = false;
        for &i in &senders {
            if let MacStatus::Transmitting { remaining } = &mut nodes[i].mac_status {
                *remaining -= 1;
                finished = *remaining == 0;
            }
        }
        if finished {
            if let [only] = senders[..] {
                nodes[only].mac_status = MacStatus::Done;
                delivered_at[only] = Some(t);
                active.retain(|&i| i != only);
            } else {
                for &i in &senders {
                    nodes[i].mac_status = MacStatus::Contending;
                }
            }
            senders.clear();
        }
    }
    (delivered_at, Some(t))
}

/// Deterministic per-round generator: stream `round` of the base seed.
pub fn round_rng(base_seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(round);
    rng
}

/// One CoWu round evaluated at deadline `zeta`.
pub fn simulate_cowu_round(cfg: &ScenarioConfig, energy: &EnergyModel, zeta: u64, seed: u64) -> Result<RoundResult> {
    cfg.validate()?;
    energy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(CowuRound::simulate(cfg, energy, zeta, &mut rng)?.evaluate(zeta))
}

/// One round-robin round: node `j` (0-based) samples `(N - j) L` slots before
/// the deadline and transmits in its own collision-free window.
pub fn simulate_round_robin_round(cfg: &ScenarioConfig, energy: &EnergyModel, seed: u64) -> Result<RoundResult> {
    cfg.validate()?;
    energy.validate()?;
    let sampler = ProcessSampler::new(&cfg.process()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(round_robin_with(cfg, &sampler, energy, &mut rng))
}

fn round_robin_with(
    cfg: &ScenarioConfig,
    sampler: &ProcessSampler,
    energy: &EnergyModel,
    rng: &mut ChaCha8Rng,
) -> RoundResult {
    let n = cfg.nodes;
    let window_j = cfg.slots_per_tx as f64 * energy.tx_slot_j();
    let sampled: Vec<usize> = (0..n).map(|_| sampler.initial_value(rng)).collect();
    let finals: Vec<usize> = sampled
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let lag = (n - j) as u64 * cfg.slots_per_tx as u64;
            sampler.value_after(s, lag, rng)
        })
        .collect();
    let true_set: Vec<usize> = (0..n).filter(|&j| cfg.range.contains_index(finals[j])).collect();
    let received_set: Vec<usize> = (0..n).filter(|&j| cfg.range.contains_index(sampled[j])).collect();
    let node_energy_j = vec![window_j; n];
    RoundResult {
        exact_match: true_set == received_set,
        awake: n,
        total_energy_j: node_energy_j.iter().sum(),
        node_energy_j,
        completion_slot: Some(n as u64 * cfg.slots_per_tx as u64),
        true_set,
        received_set,
    }
}

/// Sample mean with a 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_halfwidth: f64,
}

impl Estimate {
    /// Shifted two-pass moments, so identical samples give exactly zero spread.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let shift = xs[0];
        let mean_shift = xs.iter().map(|x| x - shift).sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - shift - mean_shift).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_error = (var / n).sqrt();
        Estimate { mean: shift + mean_shift, std_error, ci_halfwidth: Z95 * std_error }
    }

    /// Binomial proportion from `hits` out of `trials`.
    pub fn proportion(hits: u64, trials: u64) -> Self {
        let mean = hits as f64 / trials as f64;
        let std_error = (mean * (1.0 - mean) / trials as f64).sqrt();
        Estimate { mean, std_error, ci_halfwidth: Z95 * std_error }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    Cowu { zeta: u64 },
    RoundRobin,
}

/// Aggregate of a Monte Carlo campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub rounds: u64,
    pub gamma: Estimate,
    pub energy_j: Estimate,
    /// Set when the interval is meaningless (a single round).
    pub ci_degenerate: bool,
    /// CoWu rounds whose MAC hit [`MAC_SLOT_CAP`].
    pub incomplete_rounds: u64,
}

/// Per-round debugging record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTrace {
    pub round: u64,
    pub w: usize,
    pub w_s: usize,
    pub exact_match: bool,
    pub energy_j: f64,
    pub completion_slot: Option<u64>,
}

fn check_rounds(rounds: u64) -> Result<()> {
    if rounds < 1 {
        return Err(ModelError::invalid("rounds", "must be at least 1"));
    }
    Ok(())
}

/// Runs `rounds` independent rounds; round `k` uses [`round_rng`]`(base_seed, k)`.
pub fn run_campaign(
    cfg: &ScenarioConfig,
    energy: &EnergyModel,
    schedule: Schedule,
    rounds: u64,
    base_seed: u64,
) -> Result<CampaignSummary> {
    let traces = campaign_traces(cfg, energy, schedule, rounds, base_seed)?;
    Ok(summarize(&traces))
}

/// Aggregates per-round records in round order.
pub fn summarize(traces: &[RoundTrace]) -> CampaignSummary {
    let rounds = traces.len() as u64;
    let hits = traces.iter().filter(|t| t.exact_match).count() as u64;
    let energies: Vec<f64> = traces.iter().map(|t| t.energy_j).collect();
    CampaignSummary {
        rounds,
        gamma: Estimate::proportion(hits, rounds),
        energy_j: Estimate::from_samples(&energies),
        ci_degenerate: rounds < 2,
        incomplete_rounds: traces.iter().filter(|t| t.completion_slot.is_none()).count() as u64,
    }
}

/// Per-round records of a campaign, in round order.
pub fn campaign_traces(
    cfg: &ScenarioConfig,
    energy: &EnergyModel,
    schedule: Schedule,
    rounds: u64,
    base_seed: u64,
) -> Result<Vec<RoundTrace>> {
    cfg.validate()?;
    energy.validate()?;
    check_rounds(rounds)?;
    let sampler = ProcessSampler::new(&cfg.process()?)?;
    Ok((0..rounds)
        .into_par_iter()
        .map(|k| {
            let mut rng = round_rng(base_seed, k);
            match schedule {
                Schedule::Cowu { zeta } => {
                    let round = CowuRound::simulate_with(cfg, &sampler, energy, zeta, &mut rng);
                    let result = round.evaluate(zeta);
                    RoundTrace {
                        round: k,
                        w: result.awake,
                        w_s: result.received_set.len(),
                        exact_match: result.exact_match,
                        energy_j: result.total_energy_j,
                        completion_slot: result.completion_slot,
                    }
                }
                Schedule::RoundRobin => {
                    let result = round_robin_with(cfg, &sampler, energy, &mut rng);
                    RoundTrace {
                        round: k,
                        w: result.awake,
                        w_s: result.received_set.len(),
                        exact_match: result.exact_match,
                        energy_j: result.total_energy_j,
                        completion_slot: result.completion_slot,
                    }
                }
            }
        })
        .collect())
}

/// CoWu campaign evaluated at every deadline `0..=zeta_max` from the same
/// set of rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCampaign {
    pub rounds: u64,
    /// `matches[zeta]`: rounds with `T = S` at deadline `zeta`.
    pub matches: Vec<u64>,
    pub energy_j: Estimate,
    pub incomplete_rounds: u64,
}

impl SweepCampaign {
    pub fn gamma(&self, zeta: u64) -> Estimate {
        Estimate::proportion(self.matches[zeta as usize], self.rounds)
    }
}

type RoundSpans = (Vec<(u64, u64)>, f64, bool);

pub fn cowu_sweep_campaign(
    cfg: &ScenarioConfig,
    energy: &EnergyModel,
    zeta_max: u64,
    rounds: u64,
    base_seed: u64,
) -> Result<SweepCampaign> {
    cfg.validate()?;
    energy.validate()?;
    check_rounds(rounds)?;
    let sampler = ProcessSampler::new(&cfg.process()?)?;
    // (matching deadline intervals, energy, stuck)
    let per_round: Vec<RoundSpans> = (0..rounds)
        .into_par_iter()
        .map(|k| {
            let mut rng = round_rng(base_seed, k);
            let round = CowuRound::simulate_with(cfg, &sampler, energy, zeta_max, &mut rng);
            (round.matching_deadlines(), round.total_energy_j(), round.completion_slot.is_none())
        })
        .collect();

    let mut diff = vec![0i64; zeta_max as usize + 2];
    for (intervals, _, _) in &per_round {
        for &(a, b) in intervals {
            diff[a as usize] += 1;
            diff[b as usize] -= 1;
        }
    }
    let mut matches = Vec::with_capacity(zeta_max as usize + 1);
    let mut running = 0i64;
    for d in &diff[..=zeta_max as usize] {
        running += d;
        matches.push(running as u64);
    }
    let energies: Vec<f64> = per_round.iter().map(|r| r.1).collect();
    Ok(SweepCampaign {
        rounds,
        matches,
        energy_j: Estimate::from_samples(&energies),
        incomplete_rounds: per_round.iter().filter(|r| r.2).count() as u64,
    })
}

/// Conditional histogram of delivered counts: `counts[w][w_s]` over rounds.
pub fn success_count_histogram(
    cfg: &ScenarioConfig,
    energy: &EnergyModel,
    zeta: u64,
    rounds: u64,
    base_seed: u64,
) -> Result<Vec<Vec<u64>>> {
    let traces = campaign_traces(cfg, energy, Schedule::Cowu { zeta }, rounds, base_seed)?;
    let mut counts = vec![vec![0u64; cfg.nodes + 1]; cfg.nodes + 1];
    for t in traces {
        counts[t.w][t.w_s] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            nodes: 4,
            states: 6,
            q: 0.05,
            q_hat: None,
            range: RangeQuery::new(2, 4).unwrap(),
            slots_per_tx: 3,
            p: 0.4,
            zeta_max: 80,
        }
    }

    #[test]
    fn single_node_deterministic_transmission() {
        let cfg = ScenarioConfig {
            nodes: 1,
            states: 2,
            q: 0.0,
            range: RangeQuery::new(1, 2).unwrap(),
            slots_per_tx: 10,
            p: 1.0,
            ..tiny()
        };
        let r = simulate_cowu_round(&cfg, &EnergyModel::default(), 10, 3).unwrap();
        assert_eq!(r.received_set, vec![0]);
        assert!(r.exact_match);
        assert!((r.total_energy_j - 176e-6).abs() < 1e-15);
        assert_eq!(r.completion_slot, Some(10));
        let early = simulate_cowu_round(&cfg, &EnergyModel::default(), 9, 3).unwrap();
        assert!(early.received_set.is_empty());
        assert!(!early.exact_match);
    }

    #[test]
    fn nobody_awake_costs_nothing() {
        let cfg = ScenarioConfig { q: 0.0, range: RangeQuery::new(6, 6).unwrap(), ..tiny() };
        let cfg = ScenarioConfig { states: 6, ..cfg };
        for seed in 0..200 {
            let r = simulate_cowu_round(&cfg, &EnergyModel::default(), 20, seed).unwrap();
            if r.awake == 0 {
                assert!(r.received_set.is_empty());
                assert_eq!(r.total_energy_j, 0.0);
                assert_eq!(r.exact_match, r.true_set.is_empty());
            }
        }
    }

    #[test]
    fn round_robin_energy_is_exact() {
        let cfg = ScenarioConfig::default();
        let r = simulate_round_robin_round(&cfg, &EnergyModel::default(), 11).unwrap();
        assert!((r.total_energy_j * 1e3 - 17.6).abs() < 1e-9);
        let frozen = cfg.with_q(0.0);
        for seed in 0..20 {
            assert!(simulate_round_robin_round(&frozen, &EnergyModel::default(), seed).unwrap().exact_match);
        }
    }

    #[test]
    fn node_energies_sum_to_total() {
        let cfg = tiny();
        for seed in 0..50 {
            let r = simulate_cowu_round(&cfg, &EnergyModel::default(), 40, seed).unwrap();
            let sum: f64 = r.node_energy_j.iter().sum();
            assert!((sum - r.total_energy_j).abs() <= 1e-12 * r.total_energy_j.max(1e-300));
        }
    }

    #[test]
    fn matching_intervals_agree_with_pointwise_evaluation() {
        let cfg = tiny();
        let energy = EnergyModel::default();
        for k in 0..100 {
            let mut rng = round_rng(9, k);
            let round = CowuRound::simulate(&cfg, &energy, 80, &mut rng).unwrap();
            let intervals = round.matching_deadlines();
            for zeta in 0..=80u64 {
                let inside = intervals.iter().any(|&(a, b)| a <= zeta && zeta < b);
                assert_eq!(inside, round.evaluate(zeta).exact_match, "round {k} zeta {zeta}");
            }
        }
    }

    #[test]
    fn stuck_mac_is_reported() {
        let cfg = ScenarioConfig {
            nodes: 2,
            states: 2,
            q: 0.0,
            range: RangeQuery::new(1, 2).unwrap(),
            slots_per_tx: 1000,
            p: 1.0,
            ..tiny()
        };
        let r = simulate_cowu_round(&cfg, &EnergyModel::default(), 5, 1).unwrap();
        assert_eq!(r.completion_slot, None);
        assert!(r.received_set.is_empty());
    }

    #[test]
    fn campaigns_are_reproducible() {
        let cfg = tiny();
        let e = EnergyModel::default();
        let a = run_campaign(&cfg, &e, Schedule::Cowu { zeta: 30 }, 300, 42).unwrap();
        let b = run_campaign(&cfg, &e, Schedule::Cowu { zeta: 30 }, 300, 42).unwrap();
        assert_eq!(a, b);
        let c = run_campaign(&cfg, &e, Schedule::Cowu { zeta: 30 }, 300, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_round_campaign_is_degenerate() {
        let s = run_campaign(&tiny(), &EnergyModel::default(), Schedule::RoundRobin, 1, 0).unwrap();
        assert!(s.ci_degenerate);
        assert!(s.gamma.mean == 0.0 || s.gamma.mean == 1.0);
        assert!(run_campaign(&tiny(), &EnergyModel::default(), Schedule::RoundRobin, 0, 0).is_err());
    }

    #[test]
    fn identical_samples_have_zero_spread() {
        let e = Estimate::from_samples(&[0.0176; 1000]);
        assert_eq!(e.mean, 0.0176);
        assert_eq!(e.ci_halfwidth, 0.0);
    }

    #[test]
    fn energy_model_validation() {
        let bad = EnergyModel { rx_power_w: -1.0, ..EnergyModel::default() };
        assert!(matches!(bad.validate(), Err(ModelError::InvalidParameter { field: "rx_power_w", .. })));
    }
}
