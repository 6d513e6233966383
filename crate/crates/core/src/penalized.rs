//! One penalized obstacle problem in `φ = log u`:
//!
//! `H = f - γe^{-μu}(u - u₀)` with `u₁ ≤ u ≤ u₀`,
//!
//! written in divergence form as `R(φ) = -D_i a^i(Dφ) + L(x, φ, Dφ)` with
//! `a^i = φ^i/v` and `R = u e^ψ (H - f + γe^{-μu}(u - u₀))`. The bilateral
//! constraint is handled by a semismooth Newton (primal-dual active set)
//! iteration on the natural residual `φ - mid(φ₁, φ - cR, φ₀)`.

use serde::{Deserialize, Serialize};

use crate::ambient::{ConformalFactor, PrescribedCurvature};
use crate::error::{PmcError, Result};
use crate::exec;
use crate::geometry::{ambient_mean_curvature, BarrierPair, RadialGraph};
use crate::sparse::{BandedLu, CsrMatrix};
use crate::sphere::{gradient, Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub gamma: f64,
    pub mu: f64,
    /// Required lower bound on the zero-order derivative `∂L/∂φ`.
    pub eps0_floor: f64,
}

impl PenaltyParams {
    /// γ and μ with the default floor `10⁻³·γ·e^{-μ·u_max}`.
    pub fn new(gamma: f64, mu: f64, u_max: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(PmcError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(PmcError::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        Ok(Self {
            gamma,
            mu,
            eps0_floor: 1e-3 * gamma * (-mu * u_max).exp(),
        })
    }

    /// `γe^{-μu}(u - u₀)`.
    pub fn penalty(&self, u: f64, u0: f64) -> f64 {
        self.gamma * (-self.mu * u).exp() * (u - u0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Step reduction factor of the backtracking line search.
    pub damping: f64,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 60,
            damping: 0.5,
            max_halvings: 20,
        }
    }
}

/// Curvature the solve aims at.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Field(&'a dyn PrescribedCurvature),
    /// `t·f(x, r) + (1 - t)·f₀(x)` with f₀ given per node.
    Blend {
        f: &'a dyn PrescribedCurvature,
        f0: &'a [f64],
        t: f64,
    },
}

impl Target<'_> {
    fn eval(&self, grid: &Grid, i: usize, u: f64) -> Result<(f64, f64)> {
        match *self {
            Target::Field(f) => f.eval_radial(grid.point(i), u),
            Target::Blend { f, f0, t } => {
                let (v, d) = f.eval_radial(grid.point(i), u)?;
                Ok((t * v + (1.0 - t) * f0[i], t * d))
            }
        }
    }
}

/// Penalized problem with supersolution `u₀` (upper obstacle) and lower
/// obstacle `u₁`.
#[derive(Debug, Clone, Copy)]
pub struct AuxProblem<'a> {
    pub target: Target<'a>,
    pub psi: &'a dyn ConformalFactor,
    pub upper: &'a RadialGraph,
    pub lower: &'a RadialGraph,
    pub params: PenaltyParams,
}

impl<'a> AuxProblem<'a> {
    pub fn new(
        f: &'a dyn PrescribedCurvature,
        psi: &'a dyn ConformalFactor,
        upper: &'a RadialGraph,
        lower: &'a RadialGraph,
        params: PenaltyParams,
    ) -> Result<Self> {
        let p = Self {
            target: Target::Field(f),
            psi,
            upper,
            lower,
            params,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.upper.len() != self.lower.len() {
            return Err(PmcError::ShapeMismatch {
                expected: self.upper.len(),
                found: self.lower.len(),
            });
        }
        for (node, (lo, hi)) in self.lower.u().iter().zip(self.upper.u().iter()).enumerate() {
            if lo > hi {
                return Err(PmcError::ObstaclesNotOrdered { node });
            }
        }
        PenaltyParams::new(self.params.gamma, self.params.mu, 1.0)?;
        Ok(())
    }
}

/// Pointwise coefficients of the residual and its linearization.
#[derive(Debug, Clone, Copy, Default)]
struct NodeTerms {
    flux: [f64; 2],
    lower_order: f64,
    /// ∂a^i/∂p_l
    m: [[f64; 2]; 2],
    d_phi: f64,
    d_p: [f64; 2],
}

fn node_terms(
    problem: &AuxProblem<'_>,
    grid: &Grid,
    i: usize,
    phi: f64,
    p: [f64; 2],
) -> Result<NodeTerms> {
    let n = grid.dim() as f64;
    let g = grid.inverse_metric(i);
    let x = grid.point(i);
    let u = phi.exp();
    let u0 = problem.upper.u()[i];
    let ps = problem.psi.eval(x, u)?;
    let (f, f_r) = problem.target.eval(grid, i, u)?;
    let up = [g[0] * p[0], g[1] * p[1]];
    let v = (1.0 + up[0] * p[0] + up[1] * p[1]).sqrt();
    let v3 = v * v * v;
    let psi_up = [g[0] * ps.tangential[0], g[1] * ps.tangential[1]];
    let q = psi_up[0] * p[0] + psi_up[1] * p[1];
    let q_u = g[0] * ps.tangential_dr[0] * p[0] + g[1] * ps.tangential_dr[1] * p[1];
    let a = n * (1.0 + u * ps.dr - q);
    let e_psi = ps.value.exp();
    let decay = problem.params.gamma * (-problem.params.mu * u).exp();
    let pen = decay * (u - u0);
    let pen_u = decay * (1.0 - problem.params.mu * (u - u0));
    let mut m = [[0.0; 2]; 2];
    for (r, row) in m.iter_mut().enumerate() {
        for (l, entry) in row.iter_mut().enumerate() {
            let diag = if r == l { g[r] / v } else { 0.0 };
            *entry = diag - up[r] * up[l] / v3;
        }
    }
    Ok(NodeTerms {
        flux: [up[0] / v, up[1] / v],
        lower_order: a / v - u * e_psi * (f - pen),
        m,
        d_phi: u
            * (n * (ps.dr + u * ps.drr - q_u) / v
                - e_psi * ((1.0 + u * ps.dr) * (f - pen) + u * (f_r - pen_u))),
        d_p: [
            -a * up[0] / v3 - n * psi_up[0] / v,
            -a * up[1] / v3 - n * psi_up[1] / v,
        ],
    })
}

fn all_terms(problem: &AuxProblem<'_>, phi: &[f64], grid: &Grid) -> Result<Vec<NodeTerms>> {
    grid.check_len(phi.len())?;
    grid.check_len(problem.upper.len())?;
    let p = gradient(phi, grid)?;
    exec::map_indexed(grid.len(), |i| node_terms(problem, grid, i, phi[i], p.0[i]))
        .into_iter()
        .collect()
}

fn dirs(grid: &Grid) -> usize {
    grid.dim()
}

fn residual_from(terms: &[NodeTerms], grid: &Grid) -> Vec<f64> {
    let div = grid.divergence_operators();
    let mut out: Vec<f64> = terms.iter().map(|t| t.lower_order).collect();
    for (c, d) in div.iter().enumerate().take(dirs(grid)) {
        let comp: Vec<f64> = terms.iter().map(|t| t.flux[c]).collect();
        for (o, x) in out.iter_mut().zip(d.mul_vec(&comp)) {
            *o -= x;
        }
    }
    out
}

fn jacobian_from(terms: &[NodeTerms], grid: &Grid) -> CsrMatrix {
    let n = grid.len();
    let k = dirs(grid);
    let grad = grid.gradient_operators();
    let div = grid.divergence_operators();
    let rows = exec::map_indexed(n, |i| {
        let mut row: Vec<(usize, f64)> = vec![(i, terms[i].d_phi)];
        for l in 0..k {
            let dp = terms[i].d_p[l];
            row.extend(grad[l].row(i).map(|(c, g)| (c, dp * g)));
        }
        for (r, d) in div.iter().enumerate().take(k) {
            for (mnode, dv) in d.row(i) {
                for (l, g) in grad.iter().enumerate().take(k) {
                    let coeff = terms[mnode].m[r][l];
                    if coeff != 0.0 {
                        row.extend(g.row(mnode).map(|(c, gv)| (c, -dv * coeff * gv)));
                    }
                }
            }
        }
        row
    });
    CsrMatrix::from_rows(n, rows)
}

/// R(φ); positive where the graph's curvature exceeds the penalized target.
pub fn residual(phi: &[f64], problem: &AuxProblem<'_>, grid: &Grid) -> Result<ScalarField> {
    let terms = all_terms(problem, phi, grid)?;
    Ok(residual_from(&terms, grid).into())
}

/// Exact derivative of [`residual`] with respect to φ.
pub fn jacobian(phi: &[f64], problem: &AuxProblem<'_>, grid: &Grid) -> Result<CsrMatrix> {
    let terms = all_terms(problem, phi, grid)?;
    Ok(jacobian_from(&terms, grid))
}

/// `∂L/∂φ` per node: the zero-order monotonicity of the operator.
pub fn zero_order_derivative(
    phi: &[f64],
    problem: &AuxProblem<'_>,
    grid: &Grid,
) -> Result<ScalarField> {
    let terms = all_terms(problem, phi, grid)?;
    Ok(terms.iter().map(|t| t.d_phi).collect::<Vec<_>>().into())
}

/// The lower-order term `L(x, φ, Dφ)` frozen at `phi`, as a function of x only.
pub fn frozen_lower_order(
    phi: &[f64],
    problem: &AuxProblem<'_>,
    grid: &Grid,
) -> Result<ScalarField> {
    let terms = all_terms(problem, phi, grid)?;
    Ok(terms.iter().map(|t| t.lower_order).collect::<Vec<_>>().into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterChoice {
    pub params: PenaltyParams,
    pub c: f64,
    /// min of ∂L/∂φ at Dφ = 0 over the barrier slab with u₀ = u₂.
    pub realized_eps0: f64,
    pub monotone: bool,
}

const SLAB_SAMPLES: usize = 9;

/// Heuristic γ and μ from bounds of ψ and f over the slab between the barriers:
/// `c = 1 + sup(|ψ_r| + |ψ_{,i}| + |f| + |Df|)`, `μ = 2c + 1`,
/// `γ = 4c(sup|f| + sup|Df| + 1)e^{μ u_max}/(u_min e^{ψ_min})`.
pub fn select_parameters(
    f: &dyn PrescribedCurvature,
    psi: &dyn ConformalFactor,
    barriers: &BarrierPair,
    grid: &Grid,
) -> Result<ParameterChoice> {
    let lower = barriers.lower().u();
    let upper = barriers.upper().u();
    grid.check_len(lower.len())?;
    struct Bounds {
        c: f64,
        f: f64,
        df: f64,
        psi_min: f64,
    }
    let per_node = exec::map_indexed(grid.len(), |i| -> Result<Bounds> {
        let x = grid.point(i);
        let g = grid.inverse_metric(i);
        let mut b = Bounds {
            c: 0.0,
            f: 0.0,
            df: 0.0,
            psi_min: f64::INFINITY,
        };
        for s in 0..SLAB_SAMPLES {
            let r = lower[i] + (upper[i] - lower[i]) * s as f64 / (SLAB_SAMPLES - 1) as f64;
            let ps = psi.eval(x, r)?;
            let fs = f.eval(x, r)?;
            let tan_psi = (g[0] * ps.tangential[0].powi(2) + g[1] * ps.tangential[1].powi(2)).sqrt();
            let tan_f = g[0] * fs.tangential[0].powi(2) + g[1] * fs.tangential[1].powi(2);
            let df = (fs.dr * fs.dr + tan_f / (r * r)).sqrt();
            b.c = b.c.max(ps.dr.abs() + tan_psi + fs.value.abs() + df);
            b.f = b.f.max(fs.value.abs());
            b.df = b.df.max(df);
            b.psi_min = b.psi_min.min(ps.value);
        }
        Ok(b)
    });
    let mut c_sup: f64 = 0.0;
    let mut f_sup: f64 = 0.0;
    let mut df_sup: f64 = 0.0;
    let mut psi_min = f64::INFINITY;
    for b in per_node {
        let b = b?;
        c_sup = c_sup.max(b.c);
        f_sup = f_sup.max(b.f);
        df_sup = df_sup.max(b.df);
        psi_min = psi_min.min(b.psi_min);
    }
    let c = 1.0 + c_sup;
    let mu = 2.0 * c + 1.0;
    let u_max = upper.max();
    let u_min = lower.min();
    let log_gamma = (4.0 * c * (f_sup + df_sup + 1.0)).ln() + mu * u_max - u_min.ln() - psi_min;
    let gamma = log_gamma.exp();
    if !gamma.is_finite() {
        return Err(PmcError::InvalidParameter(format!(
            "heuristic gamma overflows (log gamma = {log_gamma:.1}); supply gamma explicitly"
        )));
    }
    let params = PenaltyParams::new(gamma, mu, u_max)?;
    let realized_eps0 = slab_monotonicity(f, psi, barriers, params, grid)?;
    Ok(ParameterChoice {
        params,
        c,
        realized_eps0,
        monotone: realized_eps0 >= params.eps0_floor,
    })
}

/// min of `∂L/∂φ` at Dφ = 0 over the slab, with u₀ = u₂.
pub fn slab_monotonicity(
    f: &dyn PrescribedCurvature,
    psi: &dyn ConformalFactor,
    barriers: &BarrierPair,
    params: PenaltyParams,
    grid: &Grid,
) -> Result<f64> {
    let problem = AuxProblem::new(f, psi, barriers.upper(), barriers.lower(), params)?;
    let lower = barriers.lower().u();
    let upper = barriers.upper().u();
    let mins = exec::map_indexed(grid.len(), |i| -> Result<f64> {
        let mut m = f64::INFINITY;
        for s in 0..SLAB_SAMPLES {
            let r = lower[i] + (upper[i] - lower[i]) * s as f64 / (SLAB_SAMPLES - 1) as f64;
            m = m.min(node_terms(&problem, grid, i, r.ln(), [0.0; 2])?.d_phi);
        }
        Ok(m)
    });
    mins.into_iter()
        .try_fold(f64::INFINITY, |acc, m| Ok(acc.min(m?)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxResult {
    pub phi: ScalarField,
    pub residual: ScalarField,
    pub active_lower: Vec<usize>,
    pub active_upper: Vec<usize>,
    /// Nodes where the obstacles coincide; fixed at the common value.
    pub frozen: Vec<usize>,
    /// sup of the natural residual at the returned iterate.
    pub residual_sup: f64,
    pub newton_iters: usize,
    pub step_norms: Vec<f64>,
    pub merits: Vec<f64>,
    /// min over accepted iterates and nodes of ∂L/∂φ.
    pub min_zero_order: f64,
}

impl AuxResult {
    pub fn graph(&self) -> Result<RadialGraph> {
        RadialGraph::from_phi(self.phi.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonFailure {
    pub iterations: usize,
    pub merit: f64,
    pub best_phi: Vec<f64>,
    pub trace: Vec<f64>,
}

struct State {
    phi: Vec<f64>,
    terms: Vec<NodeTerms>,
    residual: Vec<f64>,
    scale: Vec<f64>,
    merit: f64,
    /// Σ natural residual², the line-search objective.
    energy: f64,
}

struct Bounds<'b> {
    lo: Vec<f64>,
    hi: Vec<f64>,
    free: &'b [bool],
}

fn evaluate(
    problem: &AuxProblem<'_>,
    grid: &Grid,
    phi: Vec<f64>,
    bounds: &Bounds<'_>,
) -> Result<State> {
    let terms = all_terms(problem, &phi, grid)?;
    let residual = residual_from(&terms, grid);
    let diag = jacobian_diagonal(&terms, grid);
    let mut scale = vec![1.0; phi.len()];
    let mut merit: f64 = 0.0;
    let mut energy = 0.0;
    for i in 0..phi.len() {
        if !bounds.free[i] {
            continue;
        }
        let c = 1.0 / diag[i].abs().max(f64::MIN_POSITIVE.sqrt());
        scale[i] = c;
        let mid = (phi[i] - c * residual[i]).clamp(bounds.lo[i], bounds.hi[i]);
        let natural = (phi[i] - mid) / c;
        merit = merit.max(natural.abs());
        energy += natural * natural;
    }
    if !merit.is_finite() || !energy.is_finite() {
        merit = f64::INFINITY;
        energy = f64::INFINITY;
    }
    Ok(State {
        phi,
        terms,
        residual,
        scale,
        merit,
        energy,
    })
}

fn jacobian_diagonal(terms: &[NodeTerms], grid: &Grid) -> Vec<f64> {
    let k = dirs(grid);
    let grad = grid.gradient_operators();
    let div = grid.divergence_operators();
    (0..grid.len())
        .map(|i| {
            let mut d = terms[i].d_phi;
            for l in 0..k {
                d += terms[i].d_p[l] * grad[l].get(i, i);
            }
            for (r, dm) in div.iter().enumerate().take(k) {
                for (mnode, dv) in dm.row(i) {
                    for (l, g) in grad.iter().enumerate().take(k) {
                        d -= dv * terms[mnode].m[r][l] * g.get(mnode, i);
                    }
                }
            }
            d
        })
        .collect()
}

/// Solve the auxiliary problem starting from `φ = log u₀`.
pub fn solve_aux(problem: &AuxProblem<'_>, config: &NewtonConfig, grid: &Grid) -> Result<AuxResult> {
    solve_aux_from(problem, config, grid, None)
}

/// Solve the auxiliary problem from a given start (clamped into the obstacles).
pub fn solve_aux_from(
    problem: &AuxProblem<'_>,
    config: &NewtonConfig,
    grid: &Grid,
    start: Option<&[f64]>,
) -> Result<AuxResult> {
    problem.validate()?;
    grid.check_len(problem.upper.len())?;
    let n = grid.len();
    let lo = problem.lower.phi().to_vec();
    let hi = problem.upper.phi().to_vec();
    let free: Vec<bool> = (0..n).map(|i| hi[i] > lo[i]).collect();
    let frozen: Vec<usize> = (0..n).filter(|&i| !free[i]).collect();
    let bounds = Bounds { lo, hi, free: &free };

    let mut phi0 = match start {
        Some(s) => {
            grid.check_len(s.len())?;
            s.to_vec()
        }
        None => bounds.hi.clone(),
    };
    for i in 0..n {
        phi0[i] = if free[i] {
            phi0[i].clamp(bounds.lo[i], bounds.hi[i])
        } else {
            bounds.hi[i]
        };
    }

    let order = grid.solver_ordering();
    let mut state = evaluate(problem, grid, phi0, &bounds)?;
    let mut merits = vec![state.merit];
    let mut step_norms = Vec::new();
    let mut min_zero_order = min_d_phi(&state.terms);
    let mut iters = 0;

    while state.merit > config.tol {
        if iters >= config.max_iter {
            return Err(PmcError::NewtonDidNotConverge(Box::new(NewtonFailure {
                iterations: iters,
                merit: state.merit,
                best_phi: state.phi,
                trace: merits,
            })));
        }
        iters += 1;
        let delta = newton_direction(&state, &bounds, grid, &order)?;
        let mut alpha = 1.0;
        let mut best: Option<State> = None;
        for _ in 0..=config.max_halvings {
            let trial: Vec<f64> = (0..n)
                .map(|i| {
                    if free[i] {
                        (state.phi[i] + alpha * delta[i]).clamp(bounds.lo[i], bounds.hi[i])
                    } else {
                        state.phi[i]
                    }
                })
                .collect();
            let cand = evaluate(problem, grid, trial, &bounds)?;
            let improved = cand.energy < state.energy;
            if best.as_ref().is_none_or(|b| cand.energy < b.energy) {
                best = Some(cand);
            }
            if improved {
                break;
            }
            alpha *= config.damping;
        }
        let next = best.expect("at least one trial step");
        let step = next
            .phi
            .iter()
            .zip(&state.phi)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        step_norms.push(step);
        merits.push(next.merit);
        min_zero_order = min_zero_order.min(min_d_phi(&next.terms));
        state = next;
        if step == 0.0 && state.merit > config.tol {
            return Err(PmcError::NewtonDidNotConverge(Box::new(NewtonFailure {
                iterations: iters,
                merit: state.merit,
                best_phi: state.phi,
                trace: merits,
            })));
        }
    }

    let mut active_lower = Vec::new();
    let mut active_upper = Vec::new();
    for i in 0..n {
        if !free[i] {
            continue;
        }
        let trial = state.phi[i] - state.scale[i] * state.residual[i];
        if trial <= bounds.lo[i] {
            active_lower.push(i);
        } else if trial >= bounds.hi[i] {
            active_upper.push(i);
        }
    }
    Ok(AuxResult {
        phi: state.phi.into(),
        residual: state.residual.into(),
        active_lower,
        active_upper,
        frozen,
        residual_sup: state.merit,
        newton_iters: iters,
        step_norms,
        merits,
        min_zero_order,
    })
}

fn min_d_phi(terms: &[NodeTerms]) -> f64 {
    terms.iter().fold(f64::INFINITY, |m, t| m.min(t.d_phi))
}

/// Active-set Newton step: bound values on the active set, a linear solve on
/// the inactive set.
fn newton_direction(
    state: &State,
    bounds: &Bounds<'_>,
    grid: &Grid,
    order: &[usize],
) -> Result<Vec<f64>> {
    let n = grid.len();
    let mut delta = vec![0.0; n];
    let mut inactive = vec![false; n];
    for i in 0..n {
        if !bounds.free[i] {
            continue;
        }
        let trial = state.phi[i] - state.scale[i] * state.residual[i];
        if trial <= bounds.lo[i] {
            delta[i] = bounds.lo[i] - state.phi[i];
        } else if trial >= bounds.hi[i] {
            delta[i] = bounds.hi[i] - state.phi[i];
        } else {
            inactive[i] = true;
        }
    }
    let sub_order: Vec<usize> = order.iter().copied().filter(|&i| inactive[i]).collect();
    if sub_order.is_empty() {
        return Ok(delta);
    }
    let jac = jacobian_from(&state.terms, grid);
    let coupling = jac.mul_vec(&delta);
    let rhs: Vec<f64> = sub_order
        .iter()
        .map(|&i| -state.residual[i] - coupling[i])
        .collect();
    let lu = BandedLu::factor(&jac.principal_submatrix(&sub_order))?;
    for (&i, d) in sub_order.iter().zip(lu.solve(&rhs)) {
        delta[i] = d;
    }
    Ok(delta)
}

/// Warm-started path `f_t = t f + (1 - t) f₀` over `t = k/steps`, where f₀ is
/// the curvature of graph u₀ held constant along rays.
pub fn continuation_solve(
    problem: &AuxProblem<'_>,
    f: &dyn PrescribedCurvature,
    steps: usize,
    config: &NewtonConfig,
    grid: &Grid,
) -> Result<AuxResult> {
    if steps == 0 {
        return Err(PmcError::InvalidParameter("continuation needs at least one step".into()));
    }
    let f0 = ambient_mean_curvature(problem.upper, problem.psi, grid)?.into_vec();
    let mut phi: Option<Vec<f64>> = None;
    let mut last = None;
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let leg = AuxProblem {
            target: Target::Blend { f, f0: &f0, t },
            ..*problem
        };
        let res = solve_aux_from(&leg, config, grid, phi.as_deref()).map_err(|e| {
            PmcError::ContinuationFailed {
                t,
                source: Box::new(e),
            }
        })?;
        phi = Some(res.phi.to_vec());
        last = Some(res);
    }
    Ok(last.expect("at least one leg"))
}
