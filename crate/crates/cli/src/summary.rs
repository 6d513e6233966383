use pmc_core::geometry::BarrierReport;
use serde::{Deserialize, Serialize};

/// Wall-clock milliseconds per phase. The only nondeterministic part of a
/// summary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_ms: f64,
    pub solve_ms: f64,
    pub output_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltySource {
    Scenario,
    Config,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyReport {
    pub gamma: f64,
    pub mu: f64,
    pub eps0_floor: f64,
    pub gamma_source: PenaltySource,
    pub mu_source: PenaltySource,
    /// min of ∂L/∂φ at Dφ = 0 over the barrier slab, for the parameters used.
    pub realized_eps0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub scenario: String,
    pub dim: usize,
    pub resolution: Vec<usize>,
    pub converged: bool,
    pub outer_steps: usize,
    pub newton_iters_total: usize,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub curvature_tol: f64,
    pub penalty: PenaltyReport,
    /// max of v over all iterates.
    pub sup_v: f64,
    pub worst_monotonicity: f64,
    pub worst_supersolution_margin: f64,
    pub exact_error_sup: Option<f64>,
    pub barrier: BarrierReport,
    pub timings: Timings,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// The summary with timings zeroed, for comparisons across runs.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}
