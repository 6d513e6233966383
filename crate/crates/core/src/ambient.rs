//! Ambient data: the conformal factor ψ of the metric `e^{2ψ}(dr² + r²σ)` and
//! the prescribed curvature f, both as closed-form evaluators with analytic
//! derivatives.
//!
//! Tangential derivatives are covariant components `[∂_θ, ∂_λ]` at fixed r.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{PmcError, Result};
use crate::sphere::SpherePoint;
use crate::surface::SurfaceSpec;

/// ψ and the derivatives the solver needs at one point `(x, r)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PsiSample {
    pub value: f64,
    pub dr: f64,
    pub drr: f64,
    pub tangential: [f64; 2],
    /// ∂_r of `tangential`.
    pub tangential_dr: [f64; 2],
}

pub trait ConformalFactor: Send + Sync + Debug {
    fn eval(&self, x: SpherePoint, r: f64) -> Result<PsiSample>;
}

/// f, ḟ = ∂f/∂r and `f_{,i}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CurvatureSample {
    pub value: f64,
    pub dr: f64,
    pub tangential: [f64; 2],
}

pub trait PrescribedCurvature: Send + Sync + Debug {
    fn eval(&self, x: SpherePoint, r: f64) -> Result<CurvatureSample>;

    /// `(f, ḟ)` only; the solver never needs the tangential derivative.
    fn eval_radial(&self, x: SpherePoint, r: f64) -> Result<(f64, f64)> {
        let s = self.eval(x, r)?;
        Ok((s.value, s.dr))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EuclideanFactor;

impl ConformalFactor for EuclideanFactor {
    fn eval(&self, _x: SpherePoint, _r: f64) -> Result<PsiSample> {
        Ok(PsiSample::default())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantFactor(pub f64);

impl ConformalFactor for ConstantFactor {
    fn eval(&self, _x: SpherePoint, _r: f64) -> Result<PsiSample> {
        Ok(PsiSample {
            value: self.0,
            ..PsiSample::default()
        })
    }
}

/// Poincaré ball model of hyperbolic space: ψ = log(2 / (1 - r²)), r < 1.
#[derive(Debug, Clone, Copy)]
pub struct PoincareBall;

impl ConformalFactor for PoincareBall {
    fn eval(&self, _x: SpherePoint, r: f64) -> Result<PsiSample> {
        if !(0.0..1.0).contains(&r) {
            return Err(PmcError::Evaluation(format!(
                "Poincaré factor undefined at r = {r}"
            )));
        }
        let q = 1.0 - r * r;
        Ok(PsiSample {
            value: (2.0 / q).ln(),
            dr: 2.0 * r / q,
            drr: 2.0 * (1.0 + r * r) / (q * q),
            tangential: [0.0; 2],
            tangential_dr: [0.0; 2],
        })
    }
}

/// ψ = ε·x₁, linear in the first Cartesian coordinate. Not radially symmetric,
/// so it exercises the tangential terms.
#[derive(Debug, Clone, Copy)]
pub struct LinearTilt {
    pub eps: f64,
    pub dim: usize,
}

impl ConformalFactor for LinearTilt {
    fn eval(&self, x: SpherePoint, r: f64) -> Result<PsiSample> {
        let e = self.eps;
        // x₁ = r·c(x) with c = cos θ on S^1, sin θ cos λ on S^2
        let (c, c_t, c_l) = if self.dim == 1 {
            (x.theta.cos(), -x.theta.sin(), 0.0)
        } else {
            let (st, ct) = x.theta.sin_cos();
            let (sl, cl) = x.lambda.sin_cos();
            (st * cl, ct * cl, -st * sl)
        };
        Ok(PsiSample {
            value: e * r * c,
            dr: e * c,
            drr: 0.0,
            tangential: [e * r * c_t, e * r * c_l],
            tangential_dr: [e * c_t, e * c_l],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    Euclidean,
    Constant { value: f64 },
    PoincareBall,
    LinearTilt { eps: f64 },
}

impl PsiSpec {
    pub fn build(&self, dim: usize) -> Box<dyn ConformalFactor> {
        match *self {
            PsiSpec::Euclidean => Box::new(EuclideanFactor),
            PsiSpec::Constant { value } => Box::new(ConstantFactor(value)),
            PsiSpec::PoincareBall => Box::new(PoincareBall),
            PsiSpec::LinearTilt { eps } => Box::new(LinearTilt { eps, dim }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantCurvature(pub f64);

impl PrescribedCurvature for ConstantCurvature {
    fn eval(&self, _x: SpherePoint, _r: f64) -> Result<CurvatureSample> {
        Ok(CurvatureSample {
            value: self.0,
            ..CurvatureSample::default()
        })
    }
}

/// f = β / r^p.
#[derive(Debug, Clone, Copy)]
pub struct InversePower {
    pub beta: f64,
    pub power: f64,
}

impl PrescribedCurvature for InversePower {
    fn eval(&self, _x: SpherePoint, r: f64) -> Result<CurvatureSample> {
        if r <= 0.0 {
            return Err(PmcError::Evaluation(format!("β/r^p at r = {r}")));
        }
        let value = self.beta * r.powf(-self.power);
        Ok(CurvatureSample {
            value,
            dr: -self.power * value / r,
            tangential: [0.0; 2],
        })
    }
}

/// f = n(1 + r²)/(2r) · (r₀/r)²: the hyperbolic sphere curvature profile with a
/// radial decay that makes r₀ an isolated, stable root of H - f.
#[derive(Debug, Clone, Copy)]
pub struct PoincareProfile {
    pub n: usize,
    pub r0: f64,
}

impl PrescribedCurvature for PoincareProfile {
    fn eval(&self, _x: SpherePoint, r: f64) -> Result<CurvatureSample> {
        if r <= 0.0 {
            return Err(PmcError::Evaluation(format!("Poincaré profile at r = {r}")));
        }
        let k = 0.5 * self.n as f64 * self.r0 * self.r0;
        Ok(CurvatureSample {
            value: k * (r.powi(-3) + 1.0 / r),
            dr: k * (-3.0 * r.powi(-4) - r.powi(-2)),
            tangential: [0.0; 2],
        })
    }
}

/// f(x, r) = H_e(x)·(u_e(x)/r)² where H_e is the exact ambient curvature of
/// graph u_e. The graph of u_e therefore solves H = f.
#[derive(Debug)]
pub struct ManufacturedCurvature {
    surface: SurfaceSpec,
    psi: Box<dyn ConformalFactor>,
    dim: usize,
}

impl ManufacturedCurvature {
    pub fn new(surface: SurfaceSpec, psi: &PsiSpec, dim: usize) -> Self {
        Self {
            surface,
            psi: psi.build(dim),
            dim,
        }
    }

    fn weight(&self, x: SpherePoint) -> Result<f64> {
        let u = self.surface.radius(x);
        let h = self.surface.ambient_mean_curvature(x, self.dim, self.psi.as_ref())?;
        Ok(h * u * u)
    }
}

impl PrescribedCurvature for ManufacturedCurvature {
    fn eval_radial(&self, x: SpherePoint, r: f64) -> Result<(f64, f64)> {
        if r <= 0.0 {
            return Err(PmcError::Evaluation(format!("manufactured f at r = {r}")));
        }
        let value = self.weight(x)? / (r * r);
        Ok((value, -2.0 * value / r))
    }

    fn eval(&self, x: SpherePoint, r: f64) -> Result<CurvatureSample> {
        if r <= 0.0 {
            return Err(PmcError::Evaluation(format!("manufactured f at r = {r}")));
        }
        let w = self.weight(x)?;
        let value = w / (r * r);
        // fourth-order central differences of the closed-form weight
        let step = 1e-3;
        let d = |shift: &dyn Fn(f64) -> SpherePoint| -> Result<f64> {
            let f = |s: f64| self.weight(shift(s));
            Ok((8.0 * (f(step)? - f(-step)?) - (f(2.0 * step)? - f(-2.0 * step)?))
                / (12.0 * step))
        };
        let wt = d(&|s| SpherePoint::sphere(x.theta + s, x.lambda))?;
        let wl = if self.dim == 2 {
            d(&|s| SpherePoint::sphere(x.theta, x.lambda + s))?
        } else {
            0.0
        };
        Ok(CurvatureSample {
            value,
            dr: -2.0 * value / r,
            tangential: [wt / (r * r), wl / (r * r)],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FSpec {
    Constant { value: f64 },
    InversePower { beta: f64, power: f64 },
    PoincareProfile { n: usize, r0: f64 },
    Manufactured { surface: SurfaceSpec, psi: PsiSpec },
}

impl FSpec {
    pub fn build(&self, dim: usize) -> Box<dyn PrescribedCurvature> {
        match self {
            FSpec::Constant { value } => Box::new(ConstantCurvature(*value)),
            FSpec::InversePower { beta, power } => Box::new(InversePower {
                beta: *beta,
                power: *power,
            }),
            FSpec::PoincareProfile { n, r0 } => Box::new(PoincareProfile { n: *n, r0: *r0 }),
            FSpec::Manufactured { surface, psi } => {
                Box::new(ManufacturedCurvature::new(surface.clone(), psi, dim))
            }
        }
    }
}

/// Relative FD tolerance for the supplied derivatives.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-6;

fn close(analytic: f64, fd: f64) -> bool {
    (analytic - fd).abs() <= DERIVATIVE_TOLERANCE * analytic.abs().max(fd.abs()).max(1.0)
}

fn central(f: impl Fn(f64) -> Result<f64>, at: f64, h: f64) -> Result<f64> {
    Ok((f(at + h)? - f(at - h)?) / (2.0 * h))
}

/// Check the analytic ψ derivatives against centered differences at the given
/// sample points.
pub fn validate_conformal(
    psi: &dyn ConformalFactor,
    dim: usize,
    samples: &[(SpherePoint, f64)],
) -> Result<()> {
    let h = 1e-5;
    for &(x, r) in samples {
        let s = psi.eval(x, r)?;
        let at_r = |rr: f64| psi.eval(x, rr);
        let checks = [
            ("dψ/dr", s.dr, central(|rr| Ok(at_r(rr)?.value), r, h)?),
            ("d²ψ/dr²", s.drr, central(|rr| Ok(at_r(rr)?.dr), r, h)?),
            (
                "ψ_θ",
                s.tangential[0],
                central(|t| Ok(psi.eval(SpherePoint::sphere(t, x.lambda), r)?.value), x.theta, h)?,
            ),
            (
                "∂_r ψ_θ",
                s.tangential_dr[0],
                central(|rr| Ok(at_r(rr)?.tangential[0]), r, h)?,
            ),
        ];
        for (name, a, fd) in checks {
            if !close(a, fd) {
                return Err(PmcError::Evaluation(format!(
                    "{name} at θ={:.4}, r={r:.4}: analytic {a} vs finite difference {fd}",
                    x.theta
                )));
            }
        }
        if dim == 2 {
            let fd = central(
                |l| Ok(psi.eval(SpherePoint::sphere(x.theta, l), r)?.value),
                x.lambda,
                h,
            )?;
            let fd_r = central(|rr| Ok(at_r(rr)?.tangential[1]), r, h)?;
            if !close(s.tangential[1], fd) || !close(s.tangential_dr[1], fd_r) {
                return Err(PmcError::Evaluation(format!(
                    "ψ_λ mismatch at θ={:.4}, λ={:.4}, r={r:.4}",
                    x.theta, x.lambda
                )));
            }
        }
    }
    Ok(())
}

pub fn validate_curvature(
    f: &dyn PrescribedCurvature,
    dim: usize,
    samples: &[(SpherePoint, f64)],
) -> Result<()> {
    let h = 1e-5;
    for &(x, r) in samples {
        let s = f.eval(x, r)?;
        if !s.value.is_finite() || !s.dr.is_finite() {
            return Err(PmcError::Evaluation(format!("non-finite f at r = {r}")));
        }
        let fd_r = central(|rr| Ok(f.eval(x, rr)?.value), r, h)?;
        let fd_t = central(
            |t| Ok(f.eval(SpherePoint::sphere(t, x.lambda), r)?.value),
            x.theta,
            h,
        )?;
        let mut ok = close(s.dr, fd_r) && close(s.tangential[0], fd_t);
        if dim == 2 {
            let fd_l = central(
                |l| Ok(f.eval(SpherePoint::sphere(x.theta, l), r)?.value),
                x.lambda,
                h,
            )?;
            ok &= close(s.tangential[1], fd_l);
        }
        if !ok {
            return Err(PmcError::Evaluation(format!(
                "f derivatives inconsistent at θ={:.4}, r={r:.4}",
                x.theta
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(dim: usize, radii: &[f64]) -> Vec<(SpherePoint, f64)> {
        let mut out = Vec::new();
        for (i, &r) in radii.iter().enumerate() {
            let t = 0.3 + 0.7 * i as f64;
            let l = if dim == 2 { 0.2 + 1.1 * i as f64 } else { 0.0 };
            out.push((SpherePoint::sphere(t, l), r));
        }
        out
    }

    #[test]
    fn factors_pass_fd_validation() {
        for dim in [1, 2] {
            let s = samples(dim, &[0.3, 0.5, 0.8]);
            for spec in [
                PsiSpec::Euclidean,
                PsiSpec::Constant { value: 0.4 },
                PsiSpec::PoincareBall,
                PsiSpec::LinearTilt { eps: 0.3 },
            ] {
                validate_conformal(spec.build(dim).as_ref(), dim, &s).unwrap();
            }
        }
    }

    #[test]
    fn curvatures_pass_fd_validation() {
        let s1 = samples(1, &[0.8, 1.0, 1.3]);
        let s2 = samples(2, &[0.8, 1.0, 1.3]);
        for spec in [
            FSpec::Constant { value: 2.0 },
            FSpec::InversePower { beta: 2.0, power: 2.0 },
            FSpec::PoincareProfile { n: 2, r0: 0.5 },
        ] {
            validate_curvature(spec.build(1).as_ref(), 1, &s1).unwrap();
            validate_curvature(spec.build(2).as_ref(), 2, &s2).unwrap();
        }
        let m1 = FSpec::Manufactured {
            surface: SurfaceSpec::Cosine { base: 1.0, amp: 0.1, mode: 1 },
            psi: PsiSpec::Euclidean,
        };
        validate_curvature(m1.build(1).as_ref(), 1, &s1).unwrap();
        let m2 = FSpec::Manufactured {
            surface: SurfaceSpec::Sectoral { base: 1.0, amp: 0.1 },
            psi: PsiSpec::LinearTilt { eps: 0.2 },
        };
        validate_curvature(m2.build(2).as_ref(), 2, &s2).unwrap();
    }

    #[test]
    fn poincare_outside_ball_fails() {
        assert!(PoincareBall.eval(SpherePoint::circle(0.0), 1.0).is_err());
    }

    #[test]
    fn broken_derivative_is_caught() {
        #[derive(Debug)]
        struct Wrong;
        impl ConformalFactor for Wrong {
            fn eval(&self, _x: SpherePoint, r: f64) -> Result<PsiSample> {
                Ok(PsiSample {
                    value: r * r,
                    dr: r, // should be 2r
                    drr: 2.0,
                    ..PsiSample::default()
                })
            }
        }
        let err = validate_conformal(&Wrong, 1, &samples(1, &[0.5])).unwrap_err();
        assert!(err.to_string().contains("dψ/dr"));
    }
}
