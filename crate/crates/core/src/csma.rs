//! Absorbing Markov chain for p-persistent CSMA with `L`-slot transmissions.
//!
//! For `w` initially active nodes the chain has `w * L + 1` states ordered
//! `(w,0), (w,1), ..., (w,L-1), (w-1,0), ..., (1,L-1), (0,0)`. State `(n, l)`
//! means `n` nodes are still pending and the ongoing transmission has
//! occupied `l` slots; `(0,0)` is absorbing.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Channel-access parameters shared by every active node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsmaParams {
    p: f64,
    slots_per_tx: u32,
}

impl CsmaParams {
    pub fn new(p: f64, slots_per_tx: u32) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(ModelError::invalid("p", format!("must lie in (0, 1], got {p}")));
        }
        if slots_per_tx == 0 {
            return Err(ModelError::invalid("L", "must be at least 1"));
        }
        Ok(CsmaParams { p, slots_per_tx })
    }

    /// Per-slot transmission probability.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Transmission duration `L` in slots.
    pub fn slots_per_tx(&self) -> u32 {
        self.slots_per_tx
    }
}

/// Probability that exactly one of `n` contenders transmits, given that at
/// least one does.
pub fn single_sender_probability(n: usize, p: f64) -> f64 {
    let n_i = n as i32;
    let idle = (1.0 - p).powi(n_i);
    n as f64 * p * (1.0 - p).powi(n_i - 1) / (1.0 - idle)
}

/// Sparse transition matrix `R`; every row has at most two nonzeros.
#[derive(Debug, Clone)]
pub struct CsmaChain {
    active: usize,
    slots_per_tx: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl CsmaChain {
    /// Builds `R` for `active` initially contending nodes.
    pub fn new(active: usize, params: CsmaParams) -> Self {
        Self::with_success_model(active, params, single_sender_probability)
    }

    /// Builds `R` with a caller-supplied collision-free probability in place
    /// of `S_n`. Used to check that the validation suite detects a wrong model.
    pub fn with_success_model(active: usize, params: CsmaParams, success: impl Fn(usize, f64) -> f64) -> Self {
        let big_l = params.slots_per_tx as usize;
        let p = params.p;
        let dim = active * big_l + 1;
        let index = |n: usize, l: usize| if n == 0 { dim - 1 } else { (active - n) * big_l + l };
        let mut rows = vec![Vec::with_capacity(2); dim];

        for n in 1..=active {
            let idle = (1.0 - p).powi(n as i32);
            let single = success(n, p);
            if big_l == 1 {
                // Start and resolution happen in the same slot.
                let done = (1.0 - idle) * single;
                rows[index(n, 0)] = vec![(index(n, 0), 1.0 - done), (index(n - 1, 0), done)];
                continue;
            }
            rows[index(n, 0)] = vec![(index(n, 0), idle), (index(n, 1), 1.0 - idle)];
            for l in 1..big_l - 1 {
                rows[index(n, l)] = vec![(index(n, l + 1), 1.0)];
            }
            rows[index(n, big_l - 1)] = vec![(index(n - 1, 0), single), (index(n, 0), 1.0 - single)];
        }
        rows[dim - 1] = vec![(dim - 1, 1.0)];
        CsmaChain { active, slots_per_tx: big_l, rows }
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Position of state `(n, l)` in the state vector.
    pub fn state_index(&self, pending: usize, elapsed: usize) -> usize {
        if pending == 0 {
            self.dim() - 1
        } else {
            (self.active - pending) * self.slots_per_tx + elapsed
        }
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; dim];
                for &(j, v) in row {
                    dense[j] += v;
                }
                dense
            })
            .collect()
    }

    pub fn initial_state(&self) -> ChainState {
        let mut phi = vec![0.0; self.dim()];
        phi[0] = 1.0;
        ChainState { active: self.active, phi, elapsed: 0 }
    }
}

/// The distribution `Phi(t)` over chain states after `t` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    active: usize,
    phi: Vec<f64>,
    elapsed: u64,
}

impl ChainState {
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn elapsed(&self) -> u64 {
        self.elapsed
    }

    pub fn active(&self) -> usize {
        self.active
    }

    /// Advances the state by `steps` slots: `Phi(t+1) = Phi(t) R`.
    pub fn evolve(&mut self, chain: &CsmaChain, steps: u64) -> Result<()> {
        if chain.dim() != self.phi.len() {
            return Err(ModelError::DimensionMismatch { expected: chain.dim(), actual: self.phi.len() });
        }
        let mut next = vec![0.0; self.phi.len()];
        for _ in 0..steps {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (i, row) in chain.rows.iter().enumerate() {
                let mass = self.phi[i];
                if mass == 0.0 {
                    continue;
                }
                for &(j, r) in row {
                    next[j] += mass * r;
                }
            }
            std::mem::swap(&mut self.phi, &mut next);
        }
        self.elapsed += steps;
        Ok(())
    }

    /// Distribution of the number of delivered nodes at the current slot.
    pub fn successes(&self, slots_per_tx: usize) -> SuccessDistribution {
        let w = self.active;
        let mut probs = vec![0.0; w + 1];
        for (ws, slot) in probs.iter_mut().enumerate().take(w) {
            let start = ws * slots_per_tx;
            *slot = self.phi[start..start + slots_per_tx].iter().sum();
        }
        probs[w] = self.phi[self.phi.len() - 1];
        SuccessDistribution { probs }
    }
}

/// `P_s(w_s, zeta)` for `w_s = 0..=w`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SuccessDistribution {
    probs: Vec<f64>,
}

impl SuccessDistribution {
    /// Ideal MAC: every active node delivers with certainty.
    pub fn all_succeed(active: usize) -> Self {
        let mut probs = vec![0.0; active + 1];
        probs[active] = 1.0;
        SuccessDistribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, delivered: usize) -> f64 {
        self.probs.get(delivered).copied().unwrap_or(0.0)
    }
}

/// Distribution of delivered nodes out of `active` by horizon `zeta`.
pub fn success_distribution(active: usize, params: CsmaParams, zeta: u64) -> SuccessDistribution {
    let chain = CsmaChain::new(active, params);
    let mut state = chain.initial_state();
    state.evolve(&chain, zeta).expect("state built from the same chain");
    state.successes(params.slots_per_tx as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, l: u32) -> CsmaParams {
        CsmaParams::new(p, l).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(CsmaParams::new(0.0, 1).is_err());
        assert!(CsmaParams::new(1.2, 1).is_err());
        assert!(CsmaParams::new(f64::NAN, 1).is_err());
        assert!(CsmaParams::new(0.5, 0).is_err());
        assert!(CsmaParams::new(1.0, 3).is_ok());
    }

    #[test]
    fn empty_chain_is_absorbing_singleton() {
        let chain = CsmaChain::new(0, params(0.3, 4));
        assert_eq!(chain.to_dense(), vec![vec![1.0]]);
    }

    #[test]
    fn single_node_two_slot_chain() {
        let chain = CsmaChain::new(1, params(0.4, 2));
        let r = chain.to_dense();
        assert!((r[0][0] - 0.6).abs() < 1e-15);
        assert!((r[0][1] - 0.4).abs() < 1e-15);
        assert_eq!(r[1][2], 1.0);
        assert_eq!(r[2][2], 1.0);
    }

    #[test]
    fn two_node_single_sender_probability() {
        assert!((single_sender_probability(2, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(single_sender_probability(1, 0.37), 1.0);
        assert_eq!(single_sender_probability(3, 1.0), 0.0);
    }

    #[test]
    fn rows_are_stochastic() {
        for w in 0..6 {
            for l in 1..4 {
                let chain = CsmaChain::new(w, params(0.3, l));
                for row in chain.to_dense() {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn evolve_zero_steps_is_identity() {
        let chain = CsmaChain::new(3, params(0.2, 2));
        let mut state = chain.initial_state();
        let before = state.clone();
        state.evolve(&chain, 0).unwrap();
        assert_eq!(state, before);
    }

    #[test]
    fn deterministic_single_success() {
        let chain = CsmaChain::new(1, params(1.0, 1));
        let mut state = chain.initial_state();
        state.evolve(&chain, 1).unwrap();
        assert_eq!(state.phi(), &[0.0, 1.0]);
    }

    #[test]
    fn evolve_rejects_dimension_mismatch() {
        let small = CsmaChain::new(1, params(0.5, 2));
        let big = CsmaChain::new(2, params(0.5, 2));
        let mut state = small.initial_state();
        assert_eq!(state.evolve(&big, 1), Err(ModelError::DimensionMismatch { expected: 5, actual: 3 }));
    }

    #[test]
    fn single_node_two_slots_delivery() {
        // Start slots 0 and 1 complete by slot 3; slot 2 as well by slot 4.
        let d3 = success_distribution(1, params(0.4, 2), 3);
        assert!((d3.get(1) - 0.64).abs() < 1e-12);
        let d4 = success_distribution(1, params(0.4, 2), 4);
        assert!((d4.get(1) - 0.784).abs() < 1e-12);
        assert!((d4.get(0) - 0.216).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_nobody_delivered() {
        let d = success_distribution(3, params(0.7, 2), 0);
        assert_eq!(d.probs(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_node_closed_form() {
        for &(p, l) in &[(0.1, 1u32), (0.35, 3), (0.9, 10)] {
            for zeta in 0..=100u64 {
                let d = success_distribution(1, params(p, l), zeta);
                let starts = (zeta + 1).saturating_sub(l as u64) as i32;
                let expected = 1.0 - (1.0 - p).powi(starts);
                assert!((d.get(1) - expected).abs() < 1e-12, "p={p} L={l} zeta={zeta}");
            }
        }
    }

    #[test]
    fn absorption_is_certain_eventually() {
        for w in 1..=10 {
            let d = success_distribution(w, params(0.2, 3), 100_000);
            assert!((d.get(w) - 1.0).abs() < 1e-6, "w={w}");
        }
    }

    #[test]
    fn all_succeed_ideal() {
        assert_eq!(SuccessDistribution::all_succeed(2).probs(), &[0.0, 0.0, 1.0]);
    }
}
