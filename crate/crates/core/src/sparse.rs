//! Compressed sparse rows and a banded LU with partial pivoting.
//!
//! The discrete operators couple each node to a small stencil, so after a
//! bandwidth-friendly ordering the Newton systems are banded.

use crate::error::{PmcError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row `(column, value)` lists. Duplicate columns are summed,
    /// explicit zeros are kept so the pattern is stable.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < ncols);
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                rows[c].push((i, v));
            }
        }
        CsrMatrix::from_rows(self.nrows, rows)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(i) {
                row[c] += v;
            }
        }
        out
    }

    /// Square submatrix on `keep` (sorted or not), re-indexed by `order` so that
    /// `order[k]` is the original index placed at position `k`.
    pub fn principal_submatrix(&self, order: &[usize]) -> CsrMatrix {
        let mut position = vec![usize::MAX; self.ncols];
        for (k, &orig) in order.iter().enumerate() {
            position[orig] = k;
        }
        let rows = order
            .iter()
            .map(|&orig| {
                self.row(orig)
                    .filter_map(|(c, v)| {
                        let p = position[c];
                        (p != usize::MAX).then_some((p, v))
                    })
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(order.len(), rows)
    }

    /// (lower, upper) bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.nrows {
            for (c, _) in self.row(i) {
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        (kl, ku)
    }
}

/// LU factors of a banded matrix, LAPACK `gbtrf` style: row interchanges
/// widen the upper band to `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    // row i stores columns i - kl ..= i + kl + ku
    band: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(matrix: &CsrMatrix) -> Result<Self> {
        assert_eq!(matrix.nrows(), matrix.ncols());
        let n = matrix.nrows();
        let (kl, ku) = matrix.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            for (c, v) in matrix.row(i) {
                band[i * width + (c + kl - i)] += v;
            }
        }
        let mut lu = Self {
            n,
            kl,
            width,
            band,
            multipliers: vec![0.0; n * kl.max(1)],
            pivots: vec![0; n],
        };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.width - kl - 1; // kl + ku
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.band[self.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(PmcError::SingularMatrix(k));
            }
            self.pivots[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.at(k, j);
                    let b = self.at(p, j);
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.at(k, k)];
            let len = last_col - k;
            for i in k + 1..=last_row {
                let ik = self.at(i, k);
                let l = self.band[ik] / pivot;
                self.multipliers[k * kl + (i - k - 1)] = l;
                self.band[ik] = 0.0;
                if l != 0.0 {
                    // rows k and i are contiguous over columns k+1..=last_col
                    let src = self.at(k, k + 1);
                    let dst = self.at(i, k + 1);
                    let (head, tail) = self.band.split_at_mut(dst);
                    let pivot_row = &head[src..src + len];
                    for (a, b) in tail[..len].iter_mut().zip(pivot_row) {
                        *a -= l * b;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.width - kl - 1;
        let mut b = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.multipliers[k * kl + (i - k - 1)] * bk;
            }
        }
        for i in (0..n).rev() {
            let last = (i + reach).min(n - 1);
            let start = self.at(i, i + 1);
            let row = &self.band[start..start + (last - i)];
            let s: f64 = row.iter().zip(&b[i + 1..=last]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / self.band[self.at(i, i)];
        }
        b
    }
}
