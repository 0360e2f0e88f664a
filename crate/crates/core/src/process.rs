//! Per-node physical process: a finite Markov chain over the values `1..=M`.
//!
//! States are 1-indexed at the API boundary ([`RangeQuery`], JSON matrices are
//! plain row arrays) and 0-indexed everywhere inside this crate.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Row sums must match 1 within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

const POWER_ITER_TOL: f64 = 1e-13;
const POWER_ITER_CAP: u64 = 10_000_000;
const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// Row-stochastic transition matrix of the observed process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    inner: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from rows, checking stochasticity and irreducibility.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self::stochastic_from_rows(rows)?;
        if !m.is_irreducible() {
            return Err(ModelError::Reducible);
        }
        Ok(m)
    }

    /// Like [`from_rows`](Self::from_rows) but accepts reducible chains.
    pub(crate) fn stochastic_from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 || rows.iter().any(|r| r.len() != size) {
            return Err(ModelError::NotSquare);
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(ModelError::InvalidEntry { row: i, col: j, value: v });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(ModelError::NotStochastic { row: i, sum });
            }
        }
        let inner = DMatrix::from_fn(size, size, |i, j| rows[i][j]);
        Ok(TransitionMatrix { inner })
    }

    pub fn identity(size: usize) -> Self {
        TransitionMatrix { inner: DMatrix::identity(size, size) }
    }

    /// Number of states `M`.
    pub fn size(&self) -> usize {
        self.inner.nrows()
    }

    /// Zero-based entry access.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size()).map(|i| self.inner.row(i).iter().copied().collect()).collect()
    }

    /// Largest deviation of any row sum from 1.
    pub fn stochastic_drift(&self) -> f64 {
        (0..self.size()).map(|i| (self.inner.row(i).sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Strong connectivity of the graph of positive entries.
    pub fn is_irreducible(&self) -> bool {
        let n = self.size();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    let e = if forward { self.inner[(u, v)] } else { self.inner[(v, u)] };
                    if e > 0.0 && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// `Z^zeta` by repeated squaring. `Z^0` is the identity.
    pub fn power(&self, zeta: u64) -> TransitionMatrix {
        let n = self.size();
        let mut result = DMatrix::<f64>::identity(n, n);
        let mut base = self.inner.clone();
        let mut e = zeta;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        TransitionMatrix { inner: result }
    }

    /// Nonzero entries of each row, for sparse vector products.
    pub(crate) fn sparse_rows(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.size())
            .map(|i| {
                (0..self.size())
                    .filter_map(|j| {
                        let v = self.inner[(i, j)];
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = ModelError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        TransitionMatrix::from_rows(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(m: TransitionMatrix) -> Self {
        m.to_rows()
    }
}

/// Truncated birth-death chain: move up or down with probability `q` each
/// slot, holding at the boundaries with probability `1 - q`.
///
/// `q = 0` yields the identity (a frozen process), which is accepted even
/// though it is reducible.
pub fn build_birth_death(states: usize, q: f64) -> Result<TransitionMatrix> {
    if states < 2 {
        return Err(ModelError::invalid("M", format!("need at least 2 states, got {states}")));
    }
    if !(0.0..=0.5).contains(&q) {
        return Err(ModelError::invalid("q", format!("must lie in [0, 0.5], got {q}")));
    }
    if q == 0.5 && states > 2 {
        log::warn!("birth-death chain with q = 0.5 has no interior self-loops and is periodic");
    }
    let mut inner = DMatrix::<f64>::zeros(states, states);
    for i in 0..states {
        if i > 0 {
            inner[(i, i - 1)] = q;
        }
        if i + 1 < states {
            inner[(i, i + 1)] = q;
        }
        let boundary = i == 0 || i + 1 == states;
        inner[(i, i)] = if boundary { 1.0 - q } else { 1.0 - 2.0 * q };
    }
    Ok(TransitionMatrix { inner })
}

/// Steady-state distribution `pi` of an irreducible chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
}

impl StationaryDistribution {
    pub fn uniform(states: usize) -> Self {
        StationaryDistribution { probs: vec![1.0 / states as f64; states] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Total mass inside the query range.
    pub fn mass_in(&self, range: &RangeQuery) -> f64 {
        self.probs[range.indices()].iter().sum::<f64>().clamp(0.0, 1.0)
    }

    /// Total mass outside the query range.
    pub fn mass_out(&self, range: &RangeQuery) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(i, _)| !range.contains_index(*i))
            .map(|(_, p)| p)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Max-norm of `pi Z - pi`.
    pub fn residual(&self, z: &TransitionMatrix) -> f64 {
        let n = self.probs.len();
        (0..n)
            .map(|j| {
                let mixed: f64 = (0..n).map(|i| self.probs[i] * z.get(i, j)).sum();
                (mixed - self.probs[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `pi Z = pi`, `sum(pi) = 1` for an irreducible `Z`.
///
/// Uses Grassmann-Taksar-Heyman state reduction, which involves no
/// subtractions and stays accurate for nearly decomposable chains such as a
/// slow birth-death process. Power iteration is the fallback when the result
/// fails the residual check.
pub fn stationary(z: &TransitionMatrix) -> Result<StationaryDistribution> {
    if !z.is_irreducible() {
        return Err(ModelError::Reducible);
    }
    let dist = state_reduction(z);
    if dist.residual(z) <= STATIONARY_RESIDUAL_TOL {
        return Ok(dist);
    }
    power_iteration(z)
}

fn state_reduction(z: &TransitionMatrix) -> StationaryDistribution {
    let n = z.size();
    let mut a = z.to_rows();
    for k in (1..n).rev() {
        let s: f64 = a[k][..k].iter().sum();
        for row in a.iter_mut().take(k) {
            row[k] /= s;
        }
        for i in 0..k {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                a[i][j] += aik * a[k][j];
            }
        }
    }
    let mut probs = vec![0.0; n];
    probs[0] = 1.0;
    for k in 1..n {
        probs[k] = (0..k).map(|i| probs[i] * a[i][k]).sum();
    }
    normalized(probs)
}

fn normalized(mut probs: Vec<f64>) -> StationaryDistribution {
    for p in probs.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    StationaryDistribution { probs }
}

fn power_iteration(z: &TransitionMatrix) -> Result<StationaryDistribution> {
    let n = z.size();
    let rows = z.sparse_rows();
    let mut cur = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for _ in 0..POWER_ITER_CAP {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in rows.iter().enumerate() {
            for &(j, zij) in row {
                next[j] += cur[i] * zij;
            }
        }
        delta = cur.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut cur, &mut next);
        if delta < POWER_ITER_TOL {
            return Ok(normalized(cur));
        }
    }
    Err(ModelError::NonConvergence { residual: delta })
}

/// `Z^zeta`.
pub fn matrix_power(z: &TransitionMatrix, zeta: u64) -> TransitionMatrix {
    z.power(zeta)
}

/// The value interval `[lower, upper]` of a range query, 1-indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct RangeQuery {
    lower: usize,
    upper: usize,
}

impl RangeQuery {
    pub fn new(lower: usize, upper: usize) -> Result<Self> {
        if lower < 1 || lower > upper {
            return Err(ModelError::invalid("range", format!("need 1 <= lower <= upper, got [{lower}, {upper}]")));
        }
        Ok(RangeQuery { lower, upper })
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    /// Rejects ranges that reach past the last state.
    pub fn check_within(&self, states: usize) -> Result<()> {
        if self.upper > states {
            return Err(ModelError::invalid("range", format!("upper bound {} exceeds M = {states}", self.upper)));
        }
        Ok(())
    }

    /// Zero-based state indices inside the range.
    pub fn indices(&self) -> Range<usize> {
        self.lower - 1..self.upper
    }

    pub fn contains_index(&self, index: usize) -> bool {
        index + 1 >= self.lower && index < self.upper
    }

    /// 1-based membership test.
    pub fn contains_value(&self, value: usize) -> bool {
        (self.lower..=self.upper).contains(&value)
    }

    pub fn width(&self) -> usize {
        self.upper - self.lower + 1
    }

    pub fn covers_all(&self, states: usize) -> bool {
        self.lower == 1 && self.upper >= states
    }
}

impl TryFrom<[usize; 2]> for RangeQuery {
    type Error = ModelError;

    fn try_from([lo, hi]: [usize; 2]) -> Result<Self> {
        RangeQuery::new(lo, hi)
    }
}

impl From<RangeQuery> for [usize; 2] {
    fn from(r: RangeQuery) -> Self {
        [r.lower, r.upper]
    }
}

/// `P_w`: probability that a node samples a value inside the range.
pub fn wake_probability(pi: &StationaryDistribution, range: &RangeQuery) -> f64 {
    pi.mass_in(range).min(1.0)
}

/// Range-survival probabilities over a lag of `zeta` slots.
///
/// `stay_in`, `leave` and `stay_out` are conditioned on the value at sampling
/// time (conditions A, B, C); `joint_in` and `joint_out` are the unconditional
/// joint probabilities used by round-robin (conditions D, E).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalProbs {
    pub stay_in: f64,
    pub leave: f64,
    pub stay_out: f64,
    pub joint_in: f64,
    pub joint_out: f64,
}

impl SurvivalProbs {
    fn from_joint(joint_in: f64, joint_out: f64, mass_in: f64, mass_out: f64) -> Self {
        // An empty side makes its condition vacuous.
        let stay_in = if mass_in > 0.0 { (joint_in / mass_in).clamp(0.0, 1.0) } else { 1.0 };
        let stay_out = if mass_out > 0.0 { (joint_out / mass_out).clamp(0.0, 1.0) } else { 1.0 };
        SurvivalProbs {
            stay_in,
            leave: 1.0 - stay_in,
            stay_out,
            joint_in: joint_in.clamp(0.0, mass_in),
            joint_out: joint_out.clamp(0.0, mass_out),
        }
    }
}

/// Range-survival probabilities computed from an explicit `Z^zeta`.
pub fn range_survival_probs(
    z: &TransitionMatrix,
    pi: &StationaryDistribution,
    range: &RangeQuery,
    zeta: u64,
) -> SurvivalProbs {
    let zp = z.power(zeta);
    let n = z.size();
    let (mut joint_in, mut joint_out) = (0.0, 0.0);
    for i in 0..n {
        let inside = range.contains_index(i);
        let reach: f64 = (0..n).filter(|&j| range.contains_index(j) == inside).map(|j| zp.get(i, j)).sum();
        if inside {
            joint_in += pi.probs[i] * reach;
        } else {
            joint_out += pi.probs[i] * reach;
        }
    }
    SurvivalProbs::from_joint(joint_in, joint_out, pi.mass_in(range), pi.mass_out(range))
}

/// A transition matrix together with the stationary distribution used for
/// sampling-time values.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessModel {
    matrix: TransitionMatrix,
    stationary: StationaryDistribution,
}

impl ProcessModel {
    /// Custom irreducible process.
    pub fn new(matrix: TransitionMatrix) -> Result<Self> {
        let stationary = stationary(&matrix)?;
        Ok(ProcessModel { matrix, stationary })
    }

    /// Birth-death process. For `q = 0` the stationary distribution is taken
    /// as the `q -> 0+` limit of the family, which is uniform.
    pub fn birth_death(states: usize, q: f64) -> Result<Self> {
        let matrix = build_birth_death(states, q)?;
        let stationary = if q == 0.0 { StationaryDistribution::uniform(states) } else { stationary(&matrix)? };
        Ok(ProcessModel { matrix, stationary })
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn stationary(&self) -> &StationaryDistribution {
        &self.stationary
    }

    pub fn states(&self) -> usize {
        self.matrix.size()
    }

    pub fn survival(&self, range: &RangeQuery, zeta: u64) -> SurvivalProbs {
        range_survival_probs(&self.matrix, &self.stationary, range, zeta)
    }
}

/// Evaluates range-survival probabilities for consecutive lags by evolving the
/// in-range and out-of-range parts of `pi` one slot at a time.
#[derive(Debug, Clone)]
pub struct SurvivalTracker {
    rows: Vec<Vec<(usize, f64)>>,
    range: RangeQuery,
    inside: Vec<f64>,
    outside: Vec<f64>,
    scratch: Vec<f64>,
    mass_in: f64,
    mass_out: f64,
    lag: u64,
}

impl SurvivalTracker {
    pub fn new(model: &ProcessModel, range: RangeQuery) -> Self {
        let pi = model.stationary.probs();
        let inside: Vec<f64> = (0..pi.len()).map(|i| if range.contains_index(i) { pi[i] } else { 0.0 }).collect();
        let outside: Vec<f64> = (0..pi.len()).map(|i| if range.contains_index(i) { 0.0 } else { pi[i] }).collect();
        SurvivalTracker {
            rows: model.matrix.sparse_rows(),
            range,
            scratch: vec![0.0; pi.len()],
            mass_in: model.stationary.mass_in(&range),
            mass_out: model.stationary.mass_out(&range),
            inside,
            outside,
            lag: 0,
        }
    }

    pub fn lag(&self) -> u64 {
        self.lag
    }

    pub fn probs(&self) -> SurvivalProbs {
        let joint_in: f64 = self.inside[self.range.indices()].iter().sum();
        let joint_out: f64 =
            self.outside.iter().enumerate().filter(|(j, _)| !self.range.contains_index(*j)).map(|(_, v)| v).sum();
        SurvivalProbs::from_joint(joint_in, joint_out, self.mass_in, self.mass_out)
    }

    pub fn advance(&mut self) {
        step(&self.rows, &mut self.inside, &mut self.scratch);
        step(&self.rows, &mut self.outside, &mut self.scratch);
        self.lag += 1;
    }

    pub fn advance_to(&mut self, lag: u64) {
        while self.lag < lag {
            self.advance();
        }
    }
}

fn step(rows: &[Vec<(usize, f64)>], v: &mut Vec<f64>, scratch: &mut Vec<f64>) {
    scratch.iter_mut().for_each(|x| *x = 0.0);
    for (i, row) in rows.iter().enumerate() {
        let vi = v[i];
        if vi == 0.0 {
            continue;
        }
        for &(j, zij) in row {
            scratch[j] += vi * zij;
        }
    }
    std::mem::swap(v, scratch);
}
