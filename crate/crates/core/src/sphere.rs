//! Discrete calculus on S^1 and S^2 with the round metric.
//!
//! S^1 uses a uniform periodic grid `θ_j = 2πj/N`. S^2 uses a latitude-longitude
//! grid whose colatitudes are staggered off the poles, `θ_j = (j + ½)π/Nθ`, with
//! periodic longitudes `λ_k = 2πk/Nλ`.
//!
//! The gradient `G` and divergence `D` are built as a pair with
//! `D = -W⁻¹ Gᵀ W` (W = quadrature weights), so summation by parts holds to
//! round-off and the divergence of any field integrates to zero. On S^1 and in
//! longitude both are the centered difference. In colatitude `G` averages the two
//! one-sided differences weighted by the lengths of the adjacent cell faces and
//! `D` is the matching finite-volume flux balance. The faces at the poles have
//! zero length, so no stencil reaches across a pole.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{PmcError, Result};
use crate::exec;
use crate::sparse::CsrMatrix;

/// Coordinates of a point on the sphere. On S^1 only `theta` is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub theta: f64,
    pub lambda: f64,
}

impl SpherePoint {
    pub fn circle(theta: f64) -> Self {
        Self { theta, lambda: 0.0 }
    }

    pub fn sphere(theta: f64, lambda: f64) -> Self {
        Self { theta, lambda }
    }

    /// Unit vector in R^{n+1} (padded to three components).
    pub fn direction(&self, dim: usize) -> [f64; 3] {
        if dim == 1 {
            [self.theta.cos(), self.theta.sin(), 0.0]
        } else {
            let s = self.theta.sin();
            [s * self.lambda.cos(), s * self.lambda.sin(), self.theta.cos()]
        }
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    n_theta: usize,
    n_lambda: usize,
    h_theta: f64,
    h_lambda: f64,
    theta: Vec<f64>,
    lambda: Vec<f64>,
    row_sin: Vec<f64>,
    weights: Vec<f64>,
    // per colatitude row: coefficients of the (upper, lower) one-sided differences
    theta_coef: Vec<[f64; 2]>,
    grad_ops: [CsrMatrix; 2],
    div_ops: [CsrMatrix; 2],
}

/// Build a grid from a dimension and per-coordinate node counts
/// (`[n]` for S^1, `[n_theta, n_lambda]` for S^2).
pub fn build_grid(dim: usize, resolution: &[usize]) -> Result<Grid> {
    match (dim, resolution) {
        (1, [n]) => Grid::circle(*n),
        (2, [nt, nl]) => Grid::sphere(*nt, *nl),
        (1 | 2, _) => Err(PmcError::ResolutionTooSmall(format!(
            "dimension {dim} needs {dim} node counts, got {}",
            resolution.len()
        ))),
        _ => Err(PmcError::UnsupportedDimension(dim)),
    }
}

impl Grid {
    pub fn circle(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(PmcError::ResolutionTooSmall(format!(
                "S^1 needs at least 8 nodes, got {n}"
            )));
        }
        let h = 2.0 * PI / n as f64;
        let theta: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
        let weights = vec![h; n];

        let inv = 1.0 / (2.0 * h);
        let g_theta = CsrMatrix::from_rows(
            n,
            (0..n)
                .map(|j| vec![((j + 1) % n, inv), ((j + n - 1) % n, -inv)])
                .collect(),
        );
        let zero = CsrMatrix::from_rows(n, vec![Vec::new(); n]);
        let d_theta = g_theta.clone();

        Ok(Self {
            dim: 1,
            n_theta: n,
            n_lambda: 1,
            h_theta: h,
            h_lambda: 0.0,
            theta,
            lambda: vec![0.0],
            row_sin: vec![1.0; n],
            weights,
            theta_coef: Vec::new(),
            grad_ops: [g_theta, zero.clone()],
            div_ops: [d_theta, zero],
        })
    }

    pub fn sphere(n_theta: usize, n_lambda: usize) -> Result<Self> {
        if n_theta < 4 || n_lambda < 8 {
            return Err(PmcError::ResolutionTooSmall(format!(
                "S^2 needs n_theta >= 4 and n_lambda >= 8, got {n_theta} x {n_lambda}"
            )));
        }
        let ht = PI / n_theta as f64;
        let hl = 2.0 * PI / n_lambda as f64;
        let theta: Vec<f64> = (0..n_theta).map(|j| (j as f64 + 0.5) * ht).collect();
        let lambda: Vec<f64> = (0..n_lambda).map(|k| k as f64 * hl).collect();
        let row_sin: Vec<f64> = theta.iter().map(|t| t.sin()).collect();

        // exact cell areas: (cos θ_{j-½} - cos θ_{j+½}) hλ = 2 sin θ_j sin(h/2) hλ
        let raw_row: Vec<f64> = row_sin
            .iter()
            .map(|s| 2.0 * s * (0.5 * ht).sin() * hl)
            .collect();
        let total = exec::ordered_sum(raw_row.iter().map(|w| w * n_lambda as f64));
        let kappa = 4.0 * PI / total;
        let row_w: Vec<f64> = raw_row.iter().map(|w| w * kappa).collect();
        // face j sits at θ = j·h; the two polar faces have zero length
        let face: Vec<f64> = (0..=n_theta)
            .map(|f| {
                if f == 0 || f == n_theta {
                    0.0
                } else {
                    kappa * (f as f64 * ht).sin() * hl
                }
            })
            .collect();

        let n = n_theta * n_lambda;
        let idx = |j: usize, k: usize| j * n_lambda + k;
        let mut g_theta = Vec::with_capacity(n);
        let mut d_theta = Vec::with_capacity(n);
        let mut g_lambda = Vec::with_capacity(n);
        for j in 0..n_theta {
            let w = row_w[j];
            let (a_up, a_dn) = (face[j], face[j + 1]);
            for k in 0..n_lambda {
                let mut g = Vec::with_capacity(3);
                let mut d = Vec::with_capacity(3);
                if j + 1 < n_theta {
                    let c = a_dn / (2.0 * w);
                    g.push((idx(j + 1, k), c));
                    g.push((idx(j, k), -c));
                    d.push((idx(j + 1, k), c));
                    d.push((idx(j, k), c));
                }
                if j > 0 {
                    let c = a_up / (2.0 * w);
                    g.push((idx(j, k), c));
                    g.push((idx(j - 1, k), -c));
                    d.push((idx(j, k), -c));
                    d.push((idx(j - 1, k), -c));
                }
                g_theta.push(g);
                d_theta.push(d);
                let inv = 1.0 / (2.0 * hl);
                g_lambda.push(vec![
                    (idx(j, (k + 1) % n_lambda), inv),
                    (idx(j, (k + n_lambda - 1) % n_lambda), -inv),
                ]);
            }
        }
        let g_lambda = CsrMatrix::from_rows(n, g_lambda);
        let d_lambda = g_lambda.clone();
        let weights = (0..n).map(|i| row_w[i / n_lambda]).collect();
        let theta_coef = (0..n_theta)
            .map(|j| [face[j] / (2.0 * row_w[j]), face[j + 1] / (2.0 * row_w[j])])
            .collect();

        Ok(Self {
            dim: 2,
            n_theta,
            n_lambda,
            h_theta: ht,
            h_lambda: hl,
            theta,
            lambda,
            row_sin,
            weights,
            theta_coef,
            grad_ops: [CsrMatrix::from_rows(n, g_theta), g_lambda],
            div_ops: [CsrMatrix::from_rows(n, d_theta), d_lambda],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_lambda
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node counts per coordinate, in the same form `build_grid` accepts.
    pub fn resolution(&self) -> Vec<usize> {
        if self.dim == 1 {
            vec![self.n_theta]
        } else {
            vec![self.n_theta, self.n_lambda]
        }
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_lambda(&self) -> usize {
        self.n_lambda
    }

    /// Largest coordinate spacing.
    pub fn spacing(&self) -> f64 {
        self.h_theta.max(self.h_lambda)
    }

    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.n_lambda + k
    }

    pub fn row_col(&self, i: usize) -> (usize, usize) {
        (i / self.n_lambda, i % self.n_lambda)
    }

    pub fn point(&self, i: usize) -> SpherePoint {
        let (j, k) = self.row_col(i);
        SpherePoint {
            theta: self.theta[j],
            lambda: self.lambda[k],
        }
    }

    pub fn points(&self) -> Vec<SpherePoint> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Diagonal of σ_ij at node `i`.
    pub fn metric(&self, i: usize) -> [f64; 2] {
        let s = self.row_sin[i / self.n_lambda];
        if self.dim == 1 {
            [1.0, 0.0]
        } else {
            [1.0, s * s]
        }
    }

    /// Diagonal of σ^ij at node `i`.
    pub fn inverse_metric(&self, i: usize) -> [f64; 2] {
        let s = self.row_sin[i / self.n_lambda];
        if self.dim == 1 {
            [1.0, 0.0]
        } else {
            [1.0, 1.0 / (s * s)]
        }
    }

    /// Covariant gradient matrices (θ, λ).
    pub fn gradient_operators(&self) -> &[CsrMatrix; 2] {
        &self.grad_ops
    }

    /// Divergence matrices acting on contravariant (θ, λ) components.
    pub fn divergence_operators(&self) -> &[CsrMatrix; 2] {
        &self.div_ops
    }

    /// Node permutation that keeps the Newton systems narrow-banded: on S^1 the
    /// periodic wrap is folded by a zigzag ordering.
    pub fn solver_ordering(&self) -> Vec<usize> {
        let n = self.len();
        if self.dim == 2 {
            return (0..n).collect();
        }
        let mut order = Vec::with_capacity(n);
        order.push(0);
        let (mut lo, mut hi) = (1, n - 1);
        while lo <= hi {
            order.push(lo);
            if hi != lo {
                order.push(hi);
            }
            lo += 1;
            hi -= 1;
        }
        order
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(PmcError::ShapeMismatch {
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }
}

/// One value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self(vec![value; grid.len()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(SpherePoint) -> f64) -> Self {
        Self((0..grid.len()).map(|i| f(grid.point(i))).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&x| f(x)).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Covariant (index-down) components `[θ, λ]` per node; the λ slot is zero on S^1.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorField(pub Vec<[f64; 2]>);

/// Contravariant (index-up) components `[θ, λ]` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(pub Vec<[f64; 2]>);

impl CovectorField {
    pub fn raise(&self, grid: &Grid) -> VectorField {
        VectorField(
            self.0
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let g = grid.inverse_metric(i);
                    [g[0] * c[0], g[1] * c[1]]
                })
                .collect(),
        )
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField(self.0.iter().map(|v| v[c]).collect())
    }
}

impl VectorField {
    pub fn lower(&self, grid: &Grid) -> CovectorField {
        CovectorField(
            self.0
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let g = grid.metric(i);
                    [g[0] * c[0], g[1] * c[1]]
                })
                .collect(),
        )
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField(self.0.iter().map(|v| v[c]).collect())
    }
}

/// Same values as the gradient matrices, but evaluated as sums of differences so
/// constants map to exactly zero.
pub fn gradient(field: &[f64], grid: &Grid) -> Result<CovectorField> {
    grid.check_len(field.len())?;
    let [gt, gl] = grid.gradient_operators();
    let dt = if grid.dim == 1 {
        gt.mul_vec(field)
    } else {
        let nl = grid.n_lambda;
        (0..grid.len())
            .map(|i| {
                let j = i / nl;
                let [up, dn] = grid.theta_coef[j];
                let mut d = 0.0;
                if j > 0 {
                    d += up * (field[i] - field[i - nl]);
                }
                if j + 1 < grid.n_theta {
                    d += dn * (field[i + nl] - field[i]);
                }
                d
            })
            .collect()
    };
    let dl = gl.mul_vec(field);
    Ok(CovectorField(dt.into_iter().zip(dl).map(|(a, b)| [a, b]).collect()))
}

pub fn divergence(vector: &VectorField, grid: &Grid) -> Result<ScalarField> {
    grid.check_len(vector.0.len())?;
    let [dt, dl] = grid.divergence_operators();
    let at: Vec<f64> = vector.0.iter().map(|v| v[0]).collect();
    let al: Vec<f64> = vector.0.iter().map(|v| v[1]).collect();
    let a = dt.mul_vec(&at);
    let b = dl.mul_vec(&al);
    Ok(ScalarField(a.into_iter().zip(b).map(|(x, y)| x + y).collect()))
}

pub fn integrate(field: &[f64], grid: &Grid) -> Result<f64> {
    grid.check_len(field.len())?;
    Ok(exec::ordered_sum(
        field.iter().zip(grid.weights()).map(|(f, w)| f * w),
    ))
}

/// σ^ij f_i f_j per node.
pub fn grad_norm_sq(field: &[f64], grid: &Grid) -> Result<ScalarField> {
    let g = gradient(field, grid)?;
    Ok(ScalarField(
        g.0.iter()
            .enumerate()
            .map(|(i, p)| norm_sq_at(grid, i, p))
            .collect(),
    ))
}

#[inline]
pub(crate) fn norm_sq_at(grid: &Grid, i: usize, p: &[f64; 2]) -> f64 {
    let g = grid.inverse_metric(i);
    g[0] * p[0] * p[0] + g[1] * p[1] * p[1]
}
