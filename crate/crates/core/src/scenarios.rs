//! Problem instances with known solutions and barriers.
//!
//! Each family is chosen so that `H - f` increases in the radius between the
//! barriers, which is what makes the barrier sandwich well posed.

use serde::{Deserialize, Serialize};

use crate::ambient::{ConformalFactor, FSpec, PrescribedCurvature, PsiSpec};
use crate::error::{PmcError, Result};
use crate::geometry::{barrier_check, BarrierPair, BarrierReport, RadialGraph};
use crate::iteration::{IterationConfig, IterationProblem};
use crate::penalized::PenaltyParams;
use crate::sphere::{build_grid, Grid};
use crate::surface::SurfaceSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub psi: PsiSpec,
    pub f: FSpec,
    pub lower: SurfaceSpec,
    pub upper: SurfaceSpec,
    pub exact: Option<SurfaceSpec>,
    /// True when ψ, f and the solution are all rotation invariant, so the
    /// discrete problem has no discretization error.
    pub constant_data: bool,
    /// Penalty (γ, μ) that gives a fast iteration for this instance.
    pub gamma: f64,
    pub mu: f64,
    pub default_resolution: Vec<usize>,
}

/// A scenario sampled on a grid.
#[derive(Debug)]
pub struct Instance {
    pub psi: Box<dyn ConformalFactor>,
    pub f: Box<dyn PrescribedCurvature>,
    pub barriers: BarrierPair,
    pub exact: Option<RadialGraph>,
    pub report: BarrierReport,
    /// The scenario's (γ, μ) with the floor taken at the sampled u_max.
    pub params: PenaltyParams,
}

impl Instance {
    pub fn problem(&self) -> IterationProblem<'_> {
        IterationProblem {
            f: self.f.as_ref(),
            psi: self.psi.as_ref(),
            barriers: &self.barriers,
            params: self.params,
        }
    }
}

fn default_resolution(dim: usize) -> Vec<usize> {
    if dim == 1 {
        vec![64]
    } else {
        vec![16, 32]
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(PmcError::UnsupportedDimension(n))
    }
}

/// ψ ≡ 0, f = β/r², exact solution u* = β/n, barriers 0.7u* and 1.5u*.
pub fn euclidean_radial(n: usize, beta: f64) -> Result<Scenario> {
    check_dim(n)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(PmcError::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let star = beta / n as f64;
    Ok(Scenario {
        name: format!("euclidean-radial-s{n}"),
        dim: n,
        psi: PsiSpec::Euclidean,
        f: FSpec::InversePower { beta, power: 2.0 },
        lower: SurfaceSpec::Constant { radius: 0.7 * star },
        upper: SurfaceSpec::Constant { radius: 1.5 * star },
        exact: Some(SurfaceSpec::Constant { radius: star }),
        constant_data: true,
        // invariant under u ↦ s·u
        gamma: 25.0 * n as f64 / (star * star),
        mu: 3.0 / star,
        default_resolution: default_resolution(n),
    })
}

/// Hyperbolic space in the ball model; the geodesic sphere of radius ρ₀ sits at
/// Euclidean radius r₀ = tanh(ρ₀/2) and has curvature n·coth ρ₀.
pub fn poincare_ball(n: usize, rho0: f64) -> Result<Scenario> {
    check_dim(n)?;
    let r0 = (0.5 * rho0).tanh();
    if !(rho0 > 0.0) || !(r0 <= 0.9) {
        return Err(PmcError::InvalidParameter(format!(
            "rho0 must be positive with tanh(rho0/2) <= 0.9, got rho0 = {rho0}"
        )));
    }
    // H - f has slope n(1 + 1/r₀²) at r₀; matching the penalty slope to it halves
    // the error per outer step
    let slope = n as f64 * (1.0 + 1.0 / (r0 * r0));
    let mu = 3.0 / r0;
    Ok(Scenario {
        name: format!("poincare-ball-s{n}"),
        dim: n,
        psi: PsiSpec::PoincareBall,
        f: FSpec::PoincareProfile { n, r0 },
        lower: SurfaceSpec::Constant { radius: 0.8 * r0 },
        upper: SurfaceSpec::Constant {
            radius: (1.25 * r0).min(0.95),
        },
        exact: Some(SurfaceSpec::Constant { radius: r0 }),
        constant_data: true,
        gamma: slope * (mu * r0).exp(),
        mu,
        default_resolution: default_resolution(n),
    })
}

/// f = H_e(x)·(u_e(x)/r)² where H_e is the curvature of the given exact graph;
/// barriers 0.8·u_e and 1.25·u_e.
pub fn manufactured(n: usize, exact: SurfaceSpec, psi: PsiSpec) -> Result<Scenario> {
    check_dim(n)?;
    exact.check(n)?;
    let base = match exact {
        SurfaceSpec::Constant { radius } => radius,
        SurfaceSpec::Cosine { base, .. }
        | SurfaceSpec::Zonal { base, .. }
        | SurfaceSpec::Sectoral { base, .. } => base,
    };
    let name = match &exact {
        SurfaceSpec::Constant { .. } => format!("manufactured-constant-s{n}"),
        SurfaceSpec::Cosine { .. } => "manufactured-cosine-s1".to_string(),
        SurfaceSpec::Zonal { .. } => "manufactured-zonal-s2".to_string(),
        SurfaceSpec::Sectoral { .. } => "manufactured-sectoral-s2".to_string(),
    };
    Ok(Scenario {
        name,
        dim: n,
        f: FSpec::Manufactured {
            surface: exact.clone(),
            psi,
        },
        psi,
        lower: exact.scaled(0.8),
        upper: exact.scaled(1.25),
        constant_data: matches!(exact, SurfaceSpec::Constant { .. }),
        exact: Some(exact),
        gamma: 50.0 / (base * base),
        mu: 3.0 / base,
        default_resolution: default_resolution(n),
    })
}

/// Every scenario shipped with the library, by name.
pub fn bundled() -> Vec<Scenario> {
    let mut out = vec![
        euclidean_radial(1, 1.0).expect("valid"),
        euclidean_radial(2, 2.0).expect("valid"),
        poincare_ball(1, 3f64.ln()).expect("valid"),
        poincare_ball(2, 3f64.ln()).expect("valid"),
        manufactured(
            1,
            SurfaceSpec::Cosine {
                base: 1.0,
                amp: 0.1,
                mode: 1,
            },
            PsiSpec::Euclidean,
        )
        .expect("valid"),
        manufactured(
            2,
            SurfaceSpec::Zonal {
                base: 1.0,
                amp: 0.1,
            },
            PsiSpec::Euclidean,
        )
        .expect("valid"),
    ];
    let mut tilted = manufactured(
        2,
        SurfaceSpec::Sectoral {
            base: 1.0,
            amp: 0.1,
        },
        PsiSpec::LinearTilt { eps: 0.2 },
    )
    .expect("valid");
    tilted.name = "manufactured-tilted-s2".to_string();
    out.push(tilted);
    out
}

pub fn by_name(name: &str) -> Result<Scenario> {
    bundled()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            let names: Vec<String> = bundled().into_iter().map(|s| s.name).collect();
            PmcError::InvalidParameter(format!(
                "unknown scenario '{name}'; available: {}",
                names.join(", ")
            ))
        })
}

/// Curvature tolerance when the discrete problem is exact on constants.
pub const CONSTANT_DATA_TOL: f64 = 1e-8;

impl Scenario {
    pub fn default_grid(&self) -> Result<Grid> {
        build_grid(self.dim, &self.default_resolution)
    }

    /// Default iteration settings; constant-data instances carry no
    /// discretization error and are held to a tighter curvature tolerance.
    pub fn default_config(&self) -> IterationConfig {
        let mut config = IterationConfig::default();
        if self.constant_data {
            config.curvature_tol = CONSTANT_DATA_TOL;
        }
        config
    }

    /// Sample onto `grid` and verify the barriers; a failing check rejects the
    /// scenario.
    pub fn instantiate(&self, grid: &Grid) -> Result<Instance> {
        let inst = self.instantiate_unchecked(grid)?;
        if !inst.report.pass {
            return Err(PmcError::BarrierCheckFailed(Box::new(inst.report)));
        }
        Ok(inst)
    }

    /// Sample onto `grid` and report the barrier margins without rejecting.
    pub fn instantiate_unchecked(&self, grid: &Grid) -> Result<Instance> {
        if grid.dim() != self.dim {
            return Err(PmcError::InvalidParameter(format!(
                "scenario {} lives on S^{}, grid is S^{}",
                self.name,
                self.dim,
                grid.dim()
            )));
        }
        let psi = self.psi.build(self.dim);
        let f = self.f.build(self.dim);
        let barriers = BarrierPair::new(self.lower.graph(grid)?, self.upper.graph(grid)?)?;
        let exact = self.exact.as_ref().map(|e| e.graph(grid)).transpose()?;
        let report = barrier_check(&barriers, f.as_ref(), psi.as_ref(), grid)?;
        let params = PenaltyParams::new(self.gamma, self.mu, barriers.upper().u().max())?;
        Ok(Instance {
            psi,
            f,
            barriers,
            exact,
            report,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_barrier_margins() {
        let s = euclidean_radial(2, 2.0).unwrap();
        let inst = s.instantiate(&s.default_grid().unwrap()).unwrap();
        assert!((inst.report.lower_margin + 1.2245).abs() < 1e-3);
        assert!((inst.report.upper_margin - 0.4444).abs() < 1e-3);
        assert!(euclidean_radial(2, 0.0).is_err());
    }

    #[test]
    fn poincare_barriers_pass() {
        let s = poincare_ball(2, 3f64.ln()).unwrap();
        assert!(matches!(s.exact, Some(SurfaceSpec::Constant { radius }) if (radius - 0.5).abs() < 1e-15));
        let inst = s.instantiate(&s.default_grid().unwrap()).unwrap();
        assert!(inst.report.pass);
        assert!(poincare_ball(2, 10.0).is_err());
    }

    #[test]
    fn every_bundled_scenario_instantiates() {
        for s in bundled() {
            let grid = s.default_grid().unwrap();
            let inst = s.instantiate(&grid).unwrap_or_else(|e| panic!("{}: {e}", s.name));
            assert!(inst.report.pass, "{}", s.name);
            assert_eq!(by_name(&s.name).unwrap(), s);
        }
        assert!(by_name("nope").is_err());
    }
}
