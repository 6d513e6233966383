//! Radial graphs over the sphere and their curvature in a conformally flat
//! ambient space.
//!
//! A graph `r = u(x)` is handled through `φ = log u`. With `v = √(1 + |Dφ|²)`
//! the Euclidean mean curvature is `Ĥ = u⁻¹(-D_i(v⁻¹φ^i) + n/v)` and under the
//! metric `e^{2ψ}(dr² + r²σ)` it becomes
//! `H = e^{-ψ}(Ĥ + n v⁻¹(ψ_r - u⁻¹σ^{ij}ψ_{,i}φ_j))`.
//! The orientation is the one in which centered spheres have `H = n/u > 0`.

use serde::{Deserialize, Serialize};

use crate::ambient::{ConformalFactor, PrescribedCurvature};
use crate::error::{PmcError, Result};
use crate::exec;
use crate::sphere::{divergence, gradient, integrate, norm_sq_at, Grid, ScalarField, VectorField};

/// Default tolerance on barrier and supersolution margins.
pub const BARRIER_TOL: f64 = 1e-8;

/// Positive radius field with its logarithm cached.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGraph {
    u: ScalarField,
    phi: ScalarField,
}

impl RadialGraph {
    pub fn from_u(u: Vec<f64>) -> Result<Self> {
        if let Some((node, &value)) = u
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(PmcError::InvalidGraph { node, value });
        }
        let phi = u.iter().map(|x| x.ln()).collect::<Vec<_>>();
        Ok(Self {
            u: u.into(),
            phi: phi.into(),
        })
    }

    pub fn from_phi(phi: Vec<f64>) -> Result<Self> {
        let u: Vec<f64> = phi.iter().map(|p| p.exp()).collect();
        if let Some((node, &value)) = u
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(PmcError::InvalidGraph { node, value });
        }
        Ok(Self {
            u: u.into(),
            phi: phi.into(),
        })
    }

    pub fn constant(grid: &Grid, radius: f64) -> Result<Self> {
        Self::from_u(vec![radius; grid.len()])
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_u(self.u.iter().map(|x| x * factor).collect())
    }
}

pub fn tilt_v(graph: &RadialGraph, grid: &Grid) -> Result<ScalarField> {
    let p = gradient(graph.phi(), grid)?;
    Ok(p.0
        .iter()
        .enumerate()
        .map(|(i, pi)| (1.0 + norm_sq_at(grid, i, pi)).sqrt())
        .collect::<Vec<_>>()
        .into())
}

/// Unit normal in the polar frame `(∂_r, ∂_θ, ∂_λ)` of the flat metric.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitNormal {
    pub radial: ScalarField,
    pub tangential: VectorField,
}

pub fn unit_normal(graph: &RadialGraph, grid: &Grid) -> Result<UnitNormal> {
    let p = gradient(graph.phi(), grid)?;
    let raised = p.raise(grid);
    let mut radial = Vec::with_capacity(grid.len());
    let mut tangential = Vec::with_capacity(grid.len());
    for (i, (pi, up)) in p.0.iter().zip(&raised.0).enumerate() {
        let v = (1.0 + norm_sq_at(grid, i, pi)).sqrt();
        let u = graph.u()[i];
        radial.push(1.0 / v);
        tangential.push([-up[0] / (u * v), -up[1] / (u * v)]);
    }
    Ok(UnitNormal {
        radial: radial.into(),
        tangential: VectorField(tangential),
    })
}

pub fn hat_mean_curvature(graph: &RadialGraph, grid: &Grid) -> Result<ScalarField> {
    let p = gradient(graph.phi(), grid)?;
    let v: Vec<f64> = p
        .0
        .iter()
        .enumerate()
        .map(|(i, pi)| (1.0 + norm_sq_at(grid, i, pi)).sqrt())
        .collect();
    let flux = VectorField(
        p.raise(grid)
            .0
            .iter()
            .zip(&v)
            .map(|(a, vi)| [a[0] / vi, a[1] / vi])
            .collect(),
    );
    let div = divergence(&flux, grid)?;
    let n = grid.dim() as f64;
    Ok(div
        .iter()
        .zip(&v)
        .zip(graph.u().iter())
        .map(|((d, vi), u)| (-d + n / vi) / u)
        .collect::<Vec<_>>()
        .into())
}

pub fn ambient_mean_curvature(
    graph: &RadialGraph,
    psi: &dyn ConformalFactor,
    grid: &Grid,
) -> Result<ScalarField> {
    grid.check_len(graph.len())?;
    let hat = hat_mean_curvature(graph, grid)?;
    let p = gradient(graph.phi(), grid)?;
    let n = grid.dim() as f64;
    let values = exec::map_indexed(grid.len(), |i| -> Result<f64> {
        let u = graph.u()[i];
        let s = psi.eval(grid.point(i), u)?;
        let g = grid.inverse_metric(i);
        let pi = p.0[i];
        let v = (1.0 + g[0] * pi[0] * pi[0] + g[1] * pi[1] * pi[1]).sqrt();
        let q = g[0] * s.tangential[0] * pi[0] + g[1] * s.tangential[1] * pi[1];
        Ok((-s.value).exp() * (hat[i] + n * (s.dr - q / u) / v))
    });
    Ok(values.into_iter().collect::<Result<Vec<_>>>()?.into())
}

pub fn chi(graph: &RadialGraph, grid: &Grid) -> Result<ScalarField> {
    let v = tilt_v(graph, grid)?;
    Ok(v.iter()
        .zip(graph.u().iter())
        .map(|(v, u)| v / u)
        .collect::<Vec<_>>()
        .into())
}

/// Prescribed curvature sampled on the graph, `f(x, u(x))`.
pub fn sample_target(
    graph: &RadialGraph,
    f: &dyn PrescribedCurvature,
    grid: &Grid,
) -> Result<ScalarField> {
    grid.check_len(graph.len())?;
    let values = exec::map_indexed(grid.len(), |i| {
        f.eval_radial(grid.point(i), graph.u()[i]).map(|(v, _)| v)
    });
    Ok(values.into_iter().collect::<Result<Vec<_>>>()?.into())
}

/// `H(graph) - f(·, u)` per node.
pub fn curvature_gap(
    graph: &RadialGraph,
    f: &dyn PrescribedCurvature,
    psi: &dyn ConformalFactor,
    grid: &Grid,
) -> Result<ScalarField> {
    let h = ambient_mean_curvature(graph, psi, grid)?;
    let target = sample_target(graph, f, grid)?;
    Ok(h.iter()
        .zip(target.iter())
        .map(|(h, f)| h - f)
        .collect::<Vec<_>>()
        .into())
}

/// Sup and L² norms of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub sup: f64,
    pub l2: f64,
}

pub fn norms(field: &[f64], grid: &Grid) -> Result<Norms> {
    let sq: Vec<f64> = field.iter().map(|x| x * x).collect();
    Ok(Norms {
        sup: field.iter().fold(0.0, |m, x| m.max(x.abs())),
        l2: integrate(&sq, grid)?.sqrt(),
    })
}

/// Lower barrier `u₁` (H ≤ f) and upper barrier `u₂` (H ≥ f).
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierPair {
    lower: RadialGraph,
    upper: RadialGraph,
}

impl BarrierPair {
    pub fn new(lower: RadialGraph, upper: RadialGraph) -> Result<Self> {
        check_order(&lower, &upper)?;
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &RadialGraph {
        &self.lower
    }

    pub fn upper(&self) -> &RadialGraph {
        &self.upper
    }
}

fn check_order(lower: &RadialGraph, upper: &RadialGraph) -> Result<()> {
    if lower.len() != upper.len() {
        return Err(PmcError::ShapeMismatch {
            expected: lower.len(),
            found: upper.len(),
        });
    }
    for (node, (&lo, &hi)) in lower.u().iter().zip(upper.u().iter()).enumerate() {
        if lo > hi {
            return Err(PmcError::BarriersNotOrdered {
                node,
                lower: lo,
                upper: hi,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    /// max of H - f over the lower barrier; must be ≤ tolerance.
    pub lower_margin: f64,
    /// min of H - f over the upper barrier; must be ≥ -tolerance.
    pub upper_margin: f64,
    pub lower_pass: bool,
    pub upper_pass: bool,
    pub ordered: bool,
    pub tolerance: f64,
    pub pass: bool,
}

/// Margins of both barriers without requiring them to be ordered.
pub fn barrier_margins(
    lower: &RadialGraph,
    upper: &RadialGraph,
    f: &dyn PrescribedCurvature,
    psi: &dyn ConformalFactor,
    grid: &Grid,
) -> Result<BarrierReport> {
    let tolerance = BARRIER_TOL;
    let lower_margin = curvature_gap(lower, f, psi, grid)?.max();
    let upper_margin = curvature_gap(upper, f, psi, grid)?.min();
    let ordered = check_order(lower, upper).is_ok();
    let lower_pass = lower_margin <= tolerance;
    let upper_pass = upper_margin >= -tolerance;
    Ok(BarrierReport {
        lower_margin,
        upper_margin,
        lower_pass,
        upper_pass,
        ordered,
        tolerance,
        pass: ordered && lower_pass && upper_pass,
    })
}

pub fn barrier_check(
    barriers: &BarrierPair,
    f: &dyn PrescribedCurvature,
    psi: &dyn ConformalFactor,
    grid: &Grid,
) -> Result<BarrierReport> {
    check_order(&barriers.lower, &barriers.upper)?;
    barrier_margins(&barriers.lower, &barriers.upper, f, psi, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionReport {
    /// min over nodes of H - f.
    pub margin: f64,
    pub pass: bool,
}

pub fn supersolution_check(
    graph: &RadialGraph,
    f: &dyn PrescribedCurvature,
    psi: &dyn ConformalFactor,
    grid: &Grid,
) -> Result<SupersolutionReport> {
    supersolution_check_with(graph, f, psi, grid, BARRIER_TOL)
}

pub fn supersolution_check_with(
    graph: &RadialGraph,
    f: &dyn PrescribedCurvature,
    psi: &dyn ConformalFactor,
    grid: &Grid,
    tolerance: f64,
) -> Result<SupersolutionReport> {
    let margin = curvature_gap(graph, f, psi, grid)?.min();
    Ok(SupersolutionReport {
        margin,
        pass: margin >= -tolerance,
    })
}
