//! Closed-form radial graphs used as exact solutions and barriers.
//!
//! Every family has the form `u = base·(1 + amp·Y(x))` for a smooth Y, so the
//! log-radius φ = log u and its first and second coordinate derivatives are
//! available analytically. That gives a continuous mean curvature independent
//! of the grid operators.

use serde::{Deserialize, Serialize};

use crate::ambient::ConformalFactor;
use crate::error::{PmcError, Result};
use crate::geometry::RadialGraph;
use crate::sphere::{Grid, SpherePoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceSpec {
    /// Centered sphere of the given radius.
    Constant { radius: f64 },
    /// S^1 only: `base·(1 + amp·cos(mode·θ))`.
    Cosine { base: f64, amp: f64, mode: u32 },
    /// S^2 only: `base·(1 + amp·cos θ)`.
    Zonal { base: f64, amp: f64 },
    /// S^2 only: `base·(1 + amp·sin θ cos λ)`.
    Sectoral { base: f64, amp: f64 },
}

/// φ = log u with coordinate derivatives `[θ, λ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogJet {
    pub phi: f64,
    pub d: [f64; 2],
    pub dd: [[f64; 2]; 2],
}

impl SurfaceSpec {
    /// The one dimension this family lives on, if restricted.
    pub fn required_dim(&self) -> Option<usize> {
        match self {
            SurfaceSpec::Constant { .. } => None,
            SurfaceSpec::Cosine { .. } => Some(1),
            SurfaceSpec::Zonal { .. } | SurfaceSpec::Sectoral { .. } => Some(2),
        }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if let Some(d) = self.required_dim() {
            if d != dim {
                return Err(PmcError::InvalidParameter(format!(
                    "surface {self:?} lives on S^{d}, not S^{dim}"
                )));
            }
        }
        let (base, amp) = self.base_amp();
        if !(base > 0.0) || !base.is_finite() || !(amp.abs() < 1.0) {
            return Err(PmcError::InvalidParameter(format!(
                "surface needs base > 0 and |amp| < 1, got base {base}, amp {amp}"
            )));
        }
        Ok(())
    }

    fn base_amp(&self) -> (f64, f64) {
        match *self {
            SurfaceSpec::Constant { radius } => (radius, 0.0),
            SurfaceSpec::Cosine { base, amp, .. }
            | SurfaceSpec::Zonal { base, amp }
            | SurfaceSpec::Sectoral { base, amp } => (base, amp),
        }
    }

    /// The same shape with every radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self.clone() {
            SurfaceSpec::Constant { radius } => SurfaceSpec::Constant {
                radius: radius * factor,
            },
            SurfaceSpec::Cosine { base, amp, mode } => SurfaceSpec::Cosine {
                base: base * factor,
                amp,
                mode,
            },
            SurfaceSpec::Zonal { base, amp } => SurfaceSpec::Zonal {
                base: base * factor,
                amp,
            },
            SurfaceSpec::Sectoral { base, amp } => SurfaceSpec::Sectoral {
                base: base * factor,
                amp,
            },
        }
    }

    /// Y with its first and second coordinate derivatives.
    fn shape(&self, x: SpherePoint) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        match *self {
            SurfaceSpec::Constant { .. } => (0.0, [0.0; 2], [[0.0; 2]; 2]),
            SurfaceSpec::Cosine { mode, .. } => {
                let m = mode as f64;
                let (s, c) = (m * x.theta).sin_cos();
                (c, [-m * s, 0.0], [[-m * m * c, 0.0], [0.0, 0.0]])
            }
            SurfaceSpec::Zonal { .. } => {
                let (s, c) = x.theta.sin_cos();
                (c, [-s, 0.0], [[-c, 0.0], [0.0, 0.0]])
            }
            SurfaceSpec::Sectoral { .. } => {
                let (st, ct) = x.theta.sin_cos();
                let (sl, cl) = x.lambda.sin_cos();
                (
                    st * cl,
                    [ct * cl, -st * sl],
                    [[-st * cl, -ct * sl], [-ct * sl, -st * cl]],
                )
            }
        }
    }

    pub fn radius(&self, x: SpherePoint) -> f64 {
        let (base, amp) = self.base_amp();
        base * (1.0 + amp * self.shape(x).0)
    }

    pub fn log_jet(&self, x: SpherePoint) -> LogJet {
        let (base, amp) = self.base_amp();
        let (y, dy, ddy) = self.shape(x);
        let q = 1.0 + amp * y;
        let d = [amp * dy[0] / q, amp * dy[1] / q];
        let mut dd = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                dd[i][j] = amp * ddy[i][j] / q - d[i] * d[j];
            }
        }
        LogJet {
            phi: base.ln() + q.ln(),
            d,
            dd,
        }
    }

    /// Sample onto grid nodes.
    pub fn graph(&self, grid: &Grid) -> Result<RadialGraph> {
        self.check(grid.dim())?;
        RadialGraph::from_u((0..grid.len()).map(|i| self.radius(grid.point(i))).collect())
    }

    /// Euclidean mean curvature `u⁻¹(-D_i(v⁻¹φ^i) + n/v)` evaluated in closed form.
    pub fn hat_mean_curvature(&self, x: SpherePoint, dim: usize) -> f64 {
        let u = self.radius(x);
        let j = self.log_jet(x);
        let n = dim as f64;
        if dim == 1 {
            let v = (1.0 + j.d[0] * j.d[0]).sqrt();
            return (-j.dd[0][0] / (v * v * v) + n / v) / u;
        }
        let (s, c) = x.theta.sin_cos();
        let (pt, pl) = (j.d[0], j.d[1]);
        let (ptt, ptl, pll) = (j.dd[0][0], j.dd[0][1], j.dd[1][1]);
        let s2 = s * s;
        let v = (1.0 + pt * pt + pl * pl / s2).sqrt();
        let v_t = (pt * ptt + pl * ptl / s2 - pl * pl * c / (s2 * s)) / v;
        let v_l = (pt * ptl + pl * pll / s2) / v;
        let div = (c / s) * pt / v + ptt / v - pt * v_t / (v * v) + pll / (s2 * v)
            - pl * v_l / (s2 * v * v);
        (-div + n / v) / u
    }

    /// Ambient curvature `e^{-ψ}(Ĥ + n v⁻¹(ψ_r - u⁻¹σ^{ij}ψ_{,i}φ_j))` at r = u(x).
    pub fn ambient_mean_curvature(
        &self,
        x: SpherePoint,
        dim: usize,
        psi: &dyn ConformalFactor,
    ) -> Result<f64> {
        let u = self.radius(x);
        let j = self.log_jet(x);
        let ps = psi.eval(x, u)?;
        let inv = if dim == 1 {
            [1.0, 0.0]
        } else {
            [1.0, 1.0 / x.theta.sin().powi(2)]
        };
        let v = (1.0 + inv[0] * j.d[0] * j.d[0] + inv[1] * j.d[1] * j.d[1]).sqrt();
        let q = inv[0] * ps.tangential[0] * j.d[0] + inv[1] * ps.tangential[1] * j.d[1];
        let hat = self.hat_mean_curvature(x, dim);
        Ok((-ps.value).exp() * (hat + dim as f64 * (ps.dr - q / u) / v))
    }
}
