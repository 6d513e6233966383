//! Grid refinement studies against a scenario's exact solution.

use serde::{Deserialize, Serialize};

use crate::error::{PmcError, Result};
use crate::exec;
use crate::iteration::{run, IterationConfig};
use crate::scenarios::Scenario;
use crate::sphere::{build_grid, integrate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub resolution: Vec<usize>,
    pub spacing: f64,
    pub sup_error: f64,
    /// ∫|u - u_e| / |S^n|
    pub mean_error: f64,
    pub curvature_residual: f64,
    pub outer_steps: usize,
    pub sup_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub scenario: String,
    pub levels: Vec<LevelResult>,
    /// log2 of successive sup-error ratios.
    pub sup_orders: Vec<f64>,
    pub mean_orders: Vec<f64>,
}

/// `count` dyadic resolutions starting at `base`.
pub fn dyadic_levels(base: &[usize], count: usize) -> Vec<Vec<usize>> {
    (0..count)
        .map(|k| base.iter().map(|n| n << k).collect())
        .collect()
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Solve the scenario on every level (levels run concurrently) and measure the
/// error against its exact solution.
pub fn convergence_study(
    scenario: &Scenario,
    levels: &[Vec<usize>],
    config: &IterationConfig,
) -> Result<StudyReport> {
    if scenario.exact.is_none() {
        return Err(PmcError::InvalidParameter(format!(
            "scenario {} has no exact solution",
            scenario.name
        )));
    }
    let results = exec::map_jobs(levels.len(), |k| -> Result<LevelResult> {
        let grid = build_grid(scenario.dim, &levels[k])?;
        let inst = scenario.instantiate(&grid)?;
        let out = run(&inst.problem(), config, &grid)?;
        let exact = inst.exact.as_ref().expect("checked above");
        let diff: Vec<f64> = out
            .u_final
            .u()
            .iter()
            .zip(exact.u().iter())
            .map(|(a, b)| (a - b).abs())
            .collect();
        let area = integrate(&vec![1.0; grid.len()], &grid)?;
        Ok(LevelResult {
            resolution: levels[k].clone(),
            spacing: grid.spacing(),
            sup_error: diff.iter().fold(0.0, |m: f64, x| m.max(*x)),
            mean_error: integrate(&diff, &grid)? / area,
            curvature_residual: out.residual.sup,
            outer_steps: out.trace.steps.len(),
            sup_v: out.trace.sup_v(),
        })
    });
    let levels: Vec<LevelResult> = results.into_iter().collect::<Result<_>>()?;
    let sup: Vec<f64> = levels.iter().map(|l| l.sup_error).collect();
    let mean: Vec<f64> = levels.iter().map(|l| l.mean_error).collect();
    Ok(StudyReport {
        scenario: scenario.name.clone(),
        sup_orders: orders(&sup),
        mean_orders: orders(&mean),
        levels,
    })
}
