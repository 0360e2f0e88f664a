//! Timing analysis for content-based wake-up (CoWu) range queries.
//!
//! A sink collects, before a deadline, the readings of exactly those sensors
//! whose value lies in a queried range. With CoWu only matching sensors wake
//! up and contend with p-persistent CSMA; the baseline polls every sensor in
//! round-robin TDMA slots ending at the deadline. This crate provides
//!
//! - [`process`]: the per-node Markov process and range-survival terms,
//! - [`csma`]: the absorbing chain giving the delivered-count distribution,
//! - [`accuracy`]: closed-form accuracy, the timing optimizer and mismatch curves,
//! - [`sim`]: an independent slot-level Monte Carlo simulator with energy accounting,
//! - [`oracle`]: brute-force enumerations for small instances,
//! - [`validate`]: the invariant and oracle-equivalence check suite.

pub mod accuracy;
pub mod csma;
pub mod error;
pub mod oracle;
pub mod process;
pub mod scenario;
pub mod sim;
pub mod validate;

pub use accuracy::{
    cowu_curve, gamma_cowu, gamma_cowu_upper_bound, gamma_round_robin, mismatch_curve, optimize_zeta,
    wake_count_distribution, AccuracyResult, CowuPoint, CowuSweep, Method, MismatchPoint, ZetaOptimum,
};
pub use csma::{success_distribution, ChainState, CsmaChain, CsmaParams, SuccessDistribution};
pub use error::{ModelError, Result};
pub use process::{
    build_birth_death, matrix_power, range_survival_probs, stationary, wake_probability, ProcessModel, RangeQuery,
    StationaryDistribution, SurvivalProbs, SurvivalTracker, TransitionMatrix,
};
pub use scenario::ScenarioConfig;
pub use sim::{EnergyModel, RoundResult};
