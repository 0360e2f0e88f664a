//! Brute-force reference computations for small instances.
//!
//! Nothing here goes through the closed-form formulas: the MAC is enumerated
//! node by node over every channel history, process values are propagated
//! with explicit per-slot sums, and accuracy is summed over every joint
//! assignment of initial values and delivered sets. Cost is exponential in
//! the node count, so keep `N` and `w` at 3 or below.

use std::collections::BTreeMap;

use crate::process::{ProcessModel, RangeQuery, TransitionMatrix};

/// Textbook triple-loop product of two square row-major matrices.
pub fn schoolbook_multiply(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Channel status at a slot boundary: who is pending, and the ongoing
/// transmission (sender mask and the boundary at which it ends).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct MacState {
    pending: u32,
    senders: u32,
    ends_at: u64,
}

/// Probability of each delivered set (bit mask over `active` nodes) by slot
/// boundary `horizon`, enumerating every per-node transmit/defer decision.
pub fn delivered_sets(active: usize, p: f64, slots_per_tx: u32, horizon: u64) -> Vec<f64> {
    assert!(active <= 16, "enumeration is exponential in the node count");
    let all = (1u32 << active) - 1;
    let mut frontier: BTreeMap<MacState, f64> = BTreeMap::new();
    frontier.insert(MacState { pending: all, senders: 0, ends_at: 0 }, 1.0);

    for t in 0..=horizon {
        let mut next: BTreeMap<MacState, f64> = BTreeMap::new();
        for (&state, &prob) in &frontier {
            let mut s = state;
            if s.senders != 0 && s.ends_at == t {
                if s.senders.count_ones() == 1 {
                    s.pending &= !s.senders;
                }
                s.senders = 0;
            }
            if t == horizon {
                *next.entry(s).or_default() += prob;
                continue;
            }
            if s.senders != 0 || s.pending == 0 {
                *next.entry(s).or_default() += prob;
                continue;
            }
            // Idle channel: every subset of pending nodes may start.
            let contenders = s.pending.count_ones() as i32;
            let mut subset = s.pending;
            loop {
                let k = subset.count_ones() as i32;
                let weight = p.powi(k) * (1.0 - p).powi(contenders - k);
                if weight > 0.0 {
                    let started = if subset == 0 {
                        s
                    } else {
                        MacState { pending: s.pending, senders: subset, ends_at: t + slots_per_tx as u64 }
                    };
                    *next.entry(started).or_default() += prob * weight;
                }
                if subset == 0 {
                    break;
                }
                subset = (subset - 1) & s.pending;
            }
        }
        frontier = next;
    }

    let mut out = vec![0.0; 1 << active];
    for (s, prob) in frontier {
        out[(all & !s.pending) as usize] += prob;
    }
    out
}

/// Distribution of the number of delivered nodes, aggregated from
/// [`delivered_sets`].
pub fn delivered_counts(active: usize, p: f64, slots_per_tx: u32, horizon: u64) -> Vec<f64> {
    let mut out = vec![0.0; active + 1];
    for (mask, prob) in delivered_sets(active, p, slots_per_tx, horizon).into_iter().enumerate() {
        out[(mask as u32).count_ones() as usize] += prob;
    }
    out
}

/// Distribution of the value `steps` slots after starting in `start`, by
/// explicit slot-by-slot summation over successor states.
pub fn value_after(z: &TransitionMatrix, start: usize, steps: u64) -> Vec<f64> {
    let n = z.size();
    let mut dist = vec![0.0; n];
    dist[start] = 1.0;
    for _ in 0..steps {
        let mut next = vec![0.0; n];
        for from in 0..n {
            for (to, slot) in next.iter_mut().enumerate() {
                *slot += dist[from] * z.get(from, to);
            }
        }
        dist = next;
    }
    dist
}

fn in_range_after(z: &TransitionMatrix, range: &RangeQuery, steps: u64) -> Vec<f64> {
    (0..z.size())
        .map(|s| {
            value_after(z, s, steps).iter().enumerate().filter(|(j, _)| range.contains_index(*j)).map(|(_, p)| p).sum()
        })
        .collect()
}

/// Which MAC model the joint enumeration uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MacModel {
    /// p-persistent CSMA with the given persistence and duration.
    Csma { p: f64, slots_per_tx: u32 },
    /// Every awake node delivers.
    Ideal,
}

/// Probability that the delivered set equals the in-range set at the
/// deadline, summed over every joint assignment of initial values.
pub fn gamma_cowu_enumeration(model: &ProcessModel, range: &RangeQuery, nodes: usize, mac: MacModel, zeta: u64) -> f64 {
    let m = model.states();
    let pi = model.stationary().probs();
    let reach_in = in_range_after(model.matrix(), range, zeta);
    let mut mac_cache: BTreeMap<usize, Vec<f64>> = BTreeMap::new();

    let mut gamma = 0.0;
    let mut values = vec![0usize; nodes];
    loop {
        let prior: f64 = values.iter().map(|&v| pi[v]).product();
        let awake: Vec<usize> = (0..nodes).filter(|&i| range.contains_index(values[i])).collect();
        let sets = mac_cache.entry(awake.len()).or_insert_with(|| match mac {
            MacModel::Csma { p, slots_per_tx } => delivered_sets(awake.len(), p, slots_per_tx, zeta),
            MacModel::Ideal => {
                let mut v = vec![0.0; 1 << awake.len()];
                v[(1 << awake.len()) - 1] = 1.0;
                v
            }
        });
        for (local_mask, &p_set) in sets.iter().enumerate() {
            if p_set == 0.0 {
                continue;
            }
            let mut delivered = vec![false; nodes];
            for (bit, &node) in awake.iter().enumerate() {
                delivered[node] = local_mask >> bit & 1 == 1;
            }
            let consistent: f64 = (0..nodes)
                .map(|i| {
                    let r = reach_in[values[i]];
                    if delivered[i] {
                        r
                    } else {
                        1.0 - r
                    }
                })
                .product();
            gamma += prior * p_set * consistent;
        }

        // Next joint assignment, odometer style.
        let mut k = 0;
        while k < nodes {
            values[k] += 1;
            if values[k] < m {
                break;
            }
            values[k] = 0;
            k += 1;
        }
        if k == nodes {
            break;
        }
    }
    gamma
}

/// Round-robin accuracy by enumeration: node `j` (0-based) samples
/// `(N - j) L` slots before the deadline.
pub fn gamma_round_robin_enumeration(model: &ProcessModel, range: &RangeQuery, nodes: usize, slots_per_tx: u32) -> f64 {
    let pi = model.stationary().probs();
    (0..nodes)
        .map(|j| {
            let lag = (nodes - j) as u64 * slots_per_tx as u64;
            let reach_in = in_range_after(model.matrix(), range, lag);
            (0..model.states())
                .map(|s| {
                    let keep = if range.contains_index(s) { reach_in[s] } else { 1.0 - reach_in[s] };
                    pi[s] * keep
                })
                .sum::<f64>()
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_single_node_two_slots() {
        let d = delivered_counts(1, 0.4, 2, 3);
        assert!((d[1] - 0.64).abs() < 1e-15);
        let d = delivered_counts(1, 0.4, 2, 4);
        assert!((d[1] - 0.784).abs() < 1e-15);
    }

    #[test]
    fn tree_two_nodes_one_slot_by_hand() {
        // Slot 0: single sender w.p. 1/2, collision 1/4, idle 1/4.
        let d = delivered_counts(2, 0.5, 1, 1);
        assert!((d[0] - 0.5).abs() < 1e-15);
        assert!((d[1] - 0.5).abs() < 1e-15);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn tree_is_normalized() {
        for w in 0..=3 {
            let d = delivered_sets(w, 0.3, 2, 7);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn schoolbook_identity() {
        let a = vec![vec![0.2, 0.8], vec![0.6, 0.4]];
        let i = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(schoolbook_multiply(&a, &i), a);
    }
}
