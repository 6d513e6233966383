//! Monotone outer iteration: starting from the upper barrier, each step solves
//! the penalized problem with the previous iterate as supersolution. The
//! iterates decrease pointwise and their curvature approaches f.
//!
//! Also the functional `J(η) = ∫√(1+|Dη|²) + ∫[a(η - φ) + ½ε₀(η - φ)²]` with the
//! lower-order term `a(x)` frozen at a computed solution, and a randomized probe
//! checking that the solution minimizes it over the barrier interval.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ambient::{ConformalFactor, PrescribedCurvature};
use crate::error::{PmcError, Result};
use crate::exec;
use crate::geometry::{
    barrier_check, curvature_gap, norms, supersolution_check, tilt_v, BarrierPair,
    BarrierReport, Norms, RadialGraph,
};
use crate::penalized::{
    continuation_solve, frozen_lower_order, solve_aux, AuxProblem, AuxResult, NewtonConfig,
    PenaltyParams,
};
use crate::sphere::{gradient, integrate, norm_sq_at, Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub outer_tol: f64,
    pub curvature_tol: f64,
    pub max_outer: usize,
    pub newton: NewtonConfig,
    /// Solve each step along a continuation path with this many legs.
    pub continuation_steps: Option<usize>,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-8,
            curvature_tol: 1e-4,
            max_outer: 200,
            newton: NewtonConfig::default(),
            continuation_steps: None,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(PmcError::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        positive("outer_tol", self.outer_tol)?;
        positive("curvature_tol", self.curvature_tol)?;
        positive("newton.tol", self.newton.tol)?;
        if self.max_outer == 0 || self.newton.max_iter == 0 {
            return Err(PmcError::InvalidParameter(
                "max_outer and newton.max_iter must be at least 1".into(),
            ));
        }
        if !(self.newton.damping > 0.0 && self.newton.damping < 1.0) {
            return Err(PmcError::InvalidParameter(format!(
                "newton.damping must lie in (0, 1), got {}",
                self.newton.damping
            )));
        }
        Ok(())
    }
}

/// Everything the outer iteration needs besides the grid.
#[derive(Debug, Clone, Copy)]
pub struct IterationProblem<'a> {
    pub f: &'a dyn PrescribedCurvature,
    pub psi: &'a dyn ConformalFactor,
    pub barriers: &'a BarrierPair,
    pub params: PenaltyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterStep {
    pub k: usize,
    pub sup_decrement: f64,
    /// min of u_{k-1} - u_k; negative values are monotonicity violations.
    pub min_decrement: f64,
    pub h_residual_sup: f64,
    pub h_residual_l2: f64,
    pub j_value: f64,
    pub penalty_sup: f64,
    pub newton_iters: usize,
    pub sup_v: f64,
    /// min of H - f on the new iterate.
    pub supersolution_margin: f64,
    pub min_zero_order: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub steps: Vec<OuterStep>,
}

impl IterationTrace {
    pub fn sup_v(&self) -> f64 {
        self.steps.iter().fold(1.0, |m, s| m.max(s.sup_v))
    }

    pub fn worst_monotonicity(&self) -> f64 {
        self.steps
            .iter()
            .fold(f64::INFINITY, |m, s| m.min(s.min_decrement))
    }

    pub fn worst_supersolution_margin(&self) -> f64 {
        self.steps
            .iter()
            .fold(f64::INFINITY, |m, s| m.min(s.supersolution_margin))
    }
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub u_final: RadialGraph,
    /// Supersolution of the last auxiliary problem.
    pub previous: RadialGraph,
    /// u₂, u₁, u₂, ... in order; the first entry is the upper barrier.
    pub iterates: Vec<ScalarField>,
    pub last_aux: AuxResult,
    pub trace: IterationTrace,
    pub barrier_report: BarrierReport,
    pub residual: Norms,
    pub converged: bool,
}

/// Run the iteration and fail with [`PmcError::Stagnation`] when it does not
/// reach the curvature tolerance.
pub fn run(
    problem: &IterationProblem<'_>,
    config: &IterationConfig,
    grid: &Grid,
) -> Result<IterationOutcome> {
    let out = run_traced(problem, config, grid)?;
    if !out.converged {
        return Err(PmcError::Stagnation {
            steps: out.trace.steps.len(),
            residual: out.residual.sup,
            tolerance: config.curvature_tol,
        });
    }
    Ok(out)
}

/// Like [`run`] but returns the outcome with `converged == false` instead of an
/// error when the tolerances are not met.
pub fn run_traced(
    problem: &IterationProblem<'_>,
    config: &IterationConfig,
    grid: &Grid,
) -> Result<IterationOutcome> {
    config.validate()?;
    let report = barrier_check(problem.barriers, problem.f, problem.psi, grid)?;
    if !report.pass {
        return Err(PmcError::BarrierCheckFailed(Box::new(report)));
    }
    let upper = problem.barriers.upper();
    let sup = supersolution_check(upper, problem.f, problem.psi, grid)?;
    if !sup.pass {
        return Err(PmcError::NotSupersolution(sup.margin));
    }

    let mut current = upper.clone();
    let mut iterates = vec![current.u().clone()];
    let mut trace = IterationTrace::default();
    let mut converged = false;
    let mut finish = None;
    for k in 1..=config.max_outer {
        let aux = AuxProblem::new(
            problem.f,
            problem.psi,
            &current,
            problem.barriers.lower(),
            problem.params,
        )?;
        let res = match config.continuation_steps {
            Some(steps) => continuation_solve(&aux, problem.f, steps, &config.newton, grid)?,
            None => solve_aux(&aux, &config.newton, grid)?,
        };
        let next = res.graph()?;
        let gap = curvature_gap(&next, problem.f, problem.psi, grid)?;
        let gap_norms = norms(&gap, grid)?;
        let (mut sup_dec, mut min_dec, mut pen) = (0.0f64, f64::INFINITY, 0.0f64);
        for (a, b) in current.u().iter().zip(next.u().iter()) {
            sup_dec = sup_dec.max((a - b).abs());
            min_dec = min_dec.min(a - b);
            pen = pen.max(problem.params.penalty(*b, *a).abs());
        }
        trace.steps.push(OuterStep {
            k,
            sup_decrement: sup_dec,
            min_decrement: min_dec,
            h_residual_sup: gap_norms.sup,
            h_residual_l2: gap_norms.l2,
            j_value: area_functional(next.phi(), next.phi(), &vec![0.0; grid.len()], 0.0, grid)?,
            penalty_sup: pen,
            newton_iters: res.newton_iters,
            sup_v: tilt_v(&next, grid)?.max(),
            supersolution_margin: gap.min(),
            min_zero_order: res.min_zero_order,
        });
        iterates.push(next.u().clone());
        let previous = std::mem::replace(&mut current, next);
        let stalled = sup_dec <= f64::EPSILON * current.u().max();
        if sup_dec <= config.outer_tol && gap_norms.sup <= config.curvature_tol {
            converged = true;
        }
        if converged || stalled || k == config.max_outer {
            finish = Some((previous, res, gap_norms));
            break;
        }
    }
    let (previous, last_aux, residual) = finish.expect("at least one outer step");
    Ok(IterationOutcome {
        u_final: current,
        previous,
        iterates,
        last_aux,
        trace,
        barrier_report: report,
        residual,
        converged,
    })
}

/// Norms of `H(graph) - f(·, u)`.
pub fn curvature_residual(
    graph: &RadialGraph,
    f: &dyn PrescribedCurvature,
    psi: &dyn ConformalFactor,
    grid: &Grid,
) -> Result<Norms> {
    norms(&curvature_gap(graph, f, psi, grid)?, grid)
}

pub fn area_functional(
    eta: &[f64],
    baseline: &[f64],
    a_field: &[f64],
    eps0: f64,
    grid: &Grid,
) -> Result<f64> {
    grid.check_len(baseline.len())?;
    grid.check_len(a_field.len())?;
    let p = gradient(eta, grid)?;
    let density: Vec<f64> = (0..grid.len())
        .map(|i| {
            let d = eta[i] - baseline[i];
            (1.0 + norm_sq_at(grid, i, &p.0[i])).sqrt() + a_field[i] * d + 0.5 * eps0 * d * d
        })
        .collect();
    integrate(&density, grid)
}

/// Frozen functional around a converged solution, with the barrier interval as
/// the feasible set.
#[derive(Debug, Clone)]
pub struct MinimalitySetup {
    pub phi: Vec<f64>,
    pub a_field: Vec<f64>,
    pub eps0: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl MinimalitySetup {
    pub fn from_outcome(
        outcome: &IterationOutcome,
        problem: &IterationProblem<'_>,
        grid: &Grid,
    ) -> Result<Self> {
        let aux = AuxProblem::new(
            problem.f,
            problem.psi,
            &outcome.previous,
            problem.barriers.lower(),
            problem.params,
        )?;
        let phi = outcome.u_final.phi().to_vec();
        let a_field = frozen_lower_order(&phi, &aux, grid)?.into_vec();
        Ok(Self {
            phi,
            a_field,
            eps0: problem.params.eps0_floor,
            lower: problem.barriers.lower().phi().to_vec(),
            upper: problem.barriers.upper().phi().to_vec(),
        })
    }

    pub fn value(&self, eta: &[f64], grid: &Grid) -> Result<f64> {
        area_functional(eta, &self.phi, &self.a_field, self.eps0, grid)
    }

    pub fn project(&self, eta: &mut [f64]) -> usize {
        let mut clipped = 0;
        for (i, e) in eta.iter_mut().enumerate() {
            let c = e.clamp(self.lower[i], self.upper[i]);
            if c != *e {
                clipped += 1;
            }
            *e = c;
        }
        clipped
    }
}

/// Smooth random field: a cubic polynomial in the Cartesian coordinates of the
/// unit direction, rescaled to the given sup norm.
pub fn smooth_perturbation(rng: &mut impl Rng, amplitude: f64, grid: &Grid) -> Vec<f64> {
    let mut coeff = [0.0; 20];
    for c in coeff.iter_mut() {
        *c = rng.gen_range(-1.0..1.0);
    }
    let raw: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i).direction(grid.dim());
            let mut monomials = [0.0; 20];
            let mut m = 0;
            monomials[m] = 1.0;
            m += 1;
            for a in 0..3 {
                monomials[m] = x[a];
                m += 1;
            }
            for a in 0..3 {
                for b in a..3 {
                    monomials[m] = x[a] * x[b];
                    m += 1;
                }
            }
            for a in 0..3 {
                for b in a..3 {
                    for c in b..3 {
                        monomials[m] = x[a] * x[b] * x[c];
                        m += 1;
                    }
                }
            }
            monomials.iter().zip(&coeff).map(|(x, c)| x * c).sum()
        })
        .collect();
    let sup = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if sup == 0.0 {
        return raw;
    }
    raw.iter().map(|x| amplitude * x / sup).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityProbeReport {
    pub trials: usize,
    pub amplitude: f64,
    pub baseline_j: f64,
    /// max over trials of J(φ) - J(perturbed); positive means a better competitor.
    pub max_decrease: f64,
    pub min_increase: f64,
    pub violations: usize,
    pub feasible: usize,
    /// Trials in which projection onto the barrier interval clipped some node.
    pub clipped_trials: usize,
    pub tolerance: f64,
}

pub const MINIMALITY_TOL: f64 = 1e-8;

pub fn minimality_probe(
    setup: &MinimalitySetup,
    trials: usize,
    amplitude: f64,
    seed: u64,
    grid: &Grid,
) -> Result<MinimalityProbeReport> {
    let baseline_j = setup.value(&setup.phi, grid)?;
    let results = exec::map_jobs(trials, |t| -> Result<(f64, usize, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let delta = smooth_perturbation(&mut rng, amplitude, grid);
        let mut eta: Vec<f64> = setup.phi.iter().zip(&delta).map(|(p, d)| p + d).collect();
        let clipped = setup.project(&mut eta);
        let feasible = eta
            .iter()
            .enumerate()
            .all(|(i, e)| *e >= setup.lower[i] && *e <= setup.upper[i]);
        Ok((setup.value(&eta, grid)?, clipped, feasible))
    });
    let mut report = MinimalityProbeReport {
        trials,
        amplitude,
        baseline_j,
        max_decrease: f64::NEG_INFINITY,
        min_increase: f64::INFINITY,
        violations: 0,
        feasible: 0,
        clipped_trials: 0,
        tolerance: MINIMALITY_TOL,
    };
    for r in results {
        let (j, clipped, feasible) = r?;
        let decrease = baseline_j - j;
        report.max_decrease = report.max_decrease.max(decrease);
        report.min_increase = report.min_increase.min(-decrease);
        if decrease > MINIMALITY_TOL {
            report.violations += 1;
        }
        if feasible {
            report.feasible += 1;
        }
        if clipped > 0 {
            report.clipped_trials += 1;
        }
    }
    if trials == 0 {
        report.max_decrease = 0.0;
        report.min_increase = 0.0;
    }
    Ok(report)
}
