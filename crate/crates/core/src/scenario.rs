use serde::{Deserialize, Serialize};

use crate::csma::CsmaParams;
use crate::error::{ModelError, Result};
use crate::process::{ProcessModel, RangeQuery};

/// All parameters of one data-collection experiment.
///
/// Defaults reproduce the reference setting: 100 nodes, 100 states, range
/// `[94, 98]`, 10-slot transmissions and `q = 0.0002`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of sensor nodes.
    #[serde(rename = "N")]
    pub nodes: usize,
    /// Number of process states.
    #[serde(rename = "M")]
    pub states: usize,
    /// True step probability of the birth-death process.
    pub q: f64,
    /// Step probability assumed by the sink when choosing the timing.
    pub q_hat: Option<f64>,
    pub range: RangeQuery,
    /// Slots per transmission.
    #[serde(rename = "L")]
    pub slots_per_tx: u32,
    /// CSMA persistence probability.
    pub p: f64,
    /// Largest timing offset considered, in slots.
    pub zeta_max: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            nodes: 100,
            states: 100,
            q: 0.0002,
            q_hat: None,
            range: RangeQuery::new(94, 98).expect("static range"),
            slots_per_tx: 10,
            p: 0.1,
            zeta_max: 2000,
        }
    }
}

impl ScenarioConfig {
    /// Checks every constraint, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 1 {
            return Err(ModelError::invalid("N", "must be at least 1"));
        }
        if self.states < 2 {
            return Err(ModelError::invalid("M", format!("need at least 2 states, got {}", self.states)));
        }
        check_step_probability("q", self.q)?;
        if let Some(q_hat) = self.q_hat {
            check_step_probability("q_hat", q_hat)?;
        }
        self.range.check_within(self.states)?;
        CsmaParams::new(self.p, self.slots_per_tx)?;
        if self.zeta_max < 1 {
            return Err(ModelError::invalid("zeta_max", "must be at least 1"));
        }
        Ok(())
    }

    /// The step probability the sink assumes; `q` when unset.
    pub fn assumed_q(&self) -> f64 {
        self.q_hat.unwrap_or(self.q)
    }

    pub fn csma(&self) -> Result<CsmaParams> {
        CsmaParams::new(self.p, self.slots_per_tx)
    }

    /// The true process.
    pub fn process(&self) -> Result<ProcessModel> {
        ProcessModel::birth_death(self.states, self.q)
    }

    /// The process the sink believes in.
    pub fn assumed_process(&self) -> Result<ProcessModel> {
        ProcessModel::birth_death(self.states, self.assumed_q())
    }

    pub fn with_q(self, q: f64) -> Self {
        ScenarioConfig { q, ..self }
    }
}

fn check_step_probability(field: &'static str, q: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&q) {
        return Err(ModelError::invalid(field, format!("must lie in [0, 0.5], got {q}")));
    }
    Ok(())
}
