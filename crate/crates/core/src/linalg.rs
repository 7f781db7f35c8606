//! Banded symmetric storage, banded Cholesky, and the sparse cross-products
//! `BᵀB`, `BᵀΩB`, `Bᵀy`.
//!
//! Everything downstream of data ingestion works on `p × p` banded matrices,
//! so after the cross-products are formed the cost no longer depends on `n`.

use crate::basis::DesignMatrix;
use crate::error::{check_len, Error, Result};

/// A pivot below this fraction of the largest diagonal entry is treated as a
/// breakdown of positive definiteness.
pub const PIVOT_RELATIVE_TOL: f64 = 1e-12;

/// Diagonal jitter, as a fraction of the largest diagonal entry, added once
/// when a factorization breaks down.
pub const JITTER_RELATIVE: f64 = 1e-10;

/// Symmetric matrix stored by diagonals: `diags[d][i] = A[i + d][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymMatrix {
    dim: usize,
    bandwidth: usize,
    diags: Vec<Vec<f64>>,
}

impl BandedSymMatrix {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        let diags = (0..=bandwidth)
            .map(|d| vec![0.0; dim.saturating_sub(d)])
            .collect();
        Self {
            dim,
            bandwidth,
            diags,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(vec![1.0; dim])
    }

    pub fn from_diagonal(diag: Vec<f64>) -> Self {
        Self {
            dim: diag.len(),
            bandwidth: 0,
            diags: vec![diag],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// The `d`-th sub-diagonal.
    pub fn diagonal(&self, d: usize) -> &[f64] {
        &self.diags[d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        if d > self.bandwidth {
            0.0
        } else {
            self.diags[d][c]
        }
    }

    /// Adds `v` to entry `(i, j)`, `i >= j`, inside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bandwidth);
        self.diags[i - j][j] += v;
    }

    pub fn max_diagonal(&self) -> f64 {
        self.diags[0].iter().fold(0.0_f64, |m, &v| m.max(v))
    }

    pub fn add_to_diagonal(&mut self, v: f64) {
        self.diags[0].iter_mut().for_each(|d| *d += v);
    }

    /// Same matrix stored with a wider band.
    pub fn widened(&self, bandwidth: usize) -> Self {
        let mut out = Self::zeros(self.dim, bandwidth.max(self.bandwidth));
        for (d, diag) in self.diags.iter().enumerate() {
            out.diags[d].copy_from_slice(diag);
        }
        out
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &BandedSymMatrix) -> Result<Self> {
        check_len("banded matrix dimension", self.dim, other.dim)?;
        let mut out = self.widened(other.bandwidth);
        for (d, diag) in other.diags.iter().enumerate() {
            for (o, v) in out.diags[d].iter_mut().zip(diag) {
                *o += scale * v;
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("vector", self.dim, x.len())?;
        let mut y: Vec<f64> = self.diags[0].iter().zip(x).map(|(a, b)| a * b).collect();
        for d in 1..=self.bandwidth {
            for (j, &v) in self.diags[d].iter().enumerate() {
                y[j + d] += v * x[j];
                y[j] += v * x[j + d];
            }
        }
        Ok(y)
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        Ok(self.mul_vec(x)?.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// `BᵀB`, bandwidth `q`.
pub fn xtx(b: &DesignMatrix) -> BandedSymMatrix {
    let width = b.row_width();
    let mut out = BandedSymMatrix::zeros(b.ncols(), width - 1);
    for (off, vals) in b.rows() {
        for (r, &vr) in vals.iter().enumerate() {
            for (c, &vc) in vals[..=r].iter().enumerate() {
                out.diags[r - c][off + c] += vr * vc;
            }
        }
    }
    out
}

/// `BᵀΩB` for diagonal `Ω = diag(omega)`, bandwidth `q`.
pub fn xtwx(b: &DesignMatrix, omega: &[f64]) -> Result<BandedSymMatrix> {
    check_len("IRLS weights", b.nrows(), omega.len())?;
    if let Some((i, &w)) = omega
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
    {
        return Err(Error::InvalidArgument(format!(
            "IRLS weight {i} must be finite and non-negative, got {w}"
        )));
    }
    let width = b.row_width();
    let mut out = BandedSymMatrix::zeros(b.ncols(), width - 1);
    for ((off, vals), &w) in b.rows().zip(omega) {
        for (r, &vr) in vals.iter().enumerate() {
            let wr = w * vr;
            for (c, &vc) in vals[..=r].iter().enumerate() {
                out.diags[r - c][off + c] += wr * vc;
            }
        }
    }
    Ok(out)
}

/// `Bᵀy`.
pub fn xty(b: &DesignMatrix, y: &[f64]) -> Result<Vec<f64>> {
    check_len("response", b.nrows(), y.len())?;
    let mut out = vec![0.0; b.ncols()];
    for ((off, vals), &yi) in b.rows().zip(y) {
        for (o, &v) in out[off..].iter_mut().zip(vals) {
            *o += v * yi;
        }
    }
    Ok(out)
}

/// Lower-triangular banded factor `L` with `L Lᵀ = A`, stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    bandwidth: usize,
    diags: Vec<Vec<f64>>,
    /// Multiply-adds performed by the inner loops of the factorization.
    pub ops: usize,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// `L[i][j]` for `i >= j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.bandwidth {
            0.0
        } else {
            self.diags[i - j][j]
        }
    }

    /// Solves `L z = b` in place.
    pub fn forward_substitute(&self, b: &mut [f64]) -> Result<()> {
        check_len("right-hand side", self.dim, b.len())?;
        let m = self.bandwidth;
        for i in 0..self.dim {
            let mut s = b[i];
            for d in 1..=m.min(i) {
                s -= self.diags[d][i - d] * b[i - d];
            }
            b[i] = s / self.diags[0][i];
        }
        Ok(())
    }

    /// Solves `Lᵀ x = z` in place.
    pub fn back_substitute(&self, z: &mut [f64]) -> Result<()> {
        check_len("right-hand side", self.dim, z.len())?;
        let m = self.bandwidth;
        for i in (0..self.dim).rev() {
            let mut s = z[i];
            for d in 1..=m.min(self.dim - 1 - i) {
                s -= self.diags[d][i] * z[i + d];
            }
            z[i] = s / self.diags[0][i];
        }
        Ok(())
    }

    /// Row `i` of `Lᵀ`: the entries `L[i + t][i]`, `t = 0..=m`, starting at column `i`.
    pub(crate) fn transposed_row(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        (0..=self.bandwidth)
            .take_while(move |&t| i + t < self.dim)
            .map(move |t| self.diags[t][i])
    }
}

/// Banded Cholesky factorization in `O(p (m + 1)²)`.
pub fn cholesky(a: &BandedSymMatrix) -> Result<CholeskyFactor> {
    let p = a.dim;
    let m = a.bandwidth;
    let threshold = PIVOT_RELATIVE_TOL * a.max_diagonal();
    let mut l = a.diags.clone();
    let mut ops = 0usize;
    for j in 0..p {
        let lo = j.saturating_sub(m);
        let mut s = l[0][j];
        for k in lo..j {
            let v = l[j - k][k];
            s -= v * v;
            ops += 1;
        }
        if !(s > threshold) || !s.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: s });
        }
        let pivot = s.sqrt();
        l[0][j] = pivot;
        for i in j + 1..(j + m + 1).min(p) {
            let mut s = l[i - j][j];
            for k in i.saturating_sub(m)..j {
                s -= l[i - k][k] * l[j - k][k];
                ops += 1;
            }
            l[i - j][j] = s / pivot;
        }
    }
    Ok(CholeskyFactor {
        dim: p,
        bandwidth: m,
        diags: l,
        ops,
    })
}

/// Factorizes `A`; on breakdown adds `JITTER_RELATIVE × max diag` to the
/// diagonal and retries once. Returns the factor and the jitter used.
pub fn cholesky_with_jitter(a: &BandedSymMatrix) -> Result<(CholeskyFactor, f64)> {
    match cholesky(a) {
        Ok(f) => Ok((f, 0.0)),
        Err(first) => {
            let scale = a.max_diagonal();
            if !(scale > 0.0) {
                return Err(first);
            }
            let jitter = JITTER_RELATIVE * scale;
            let mut shifted = a.clone();
            shifted.add_to_diagonal(jitter);
            cholesky(&shifted).map(|f| (f, jitter))
        }
    }
}

/// Solves `A x = b` given the factor of `A`.
pub fn solve(f: &CholeskyFactor, b: &[f64]) -> Result<Vec<f64>> {
    let mut x = b.to_vec();
    f.forward_substitute(&mut x)?;
    f.back_substitute(&mut x)?;
    Ok(x)
}

/// Row-by-row Givens QR for banded least-squares problems.
///
/// Rows are merged one at a time into an upper-triangular factor `R` with
/// `bandwidth` super-diagonals. Solving through `R` instead of the normal
/// equations keeps heavily weighted penalty rows from swamping the data rows.
#[derive(Debug, Clone)]
pub struct BandedQr {
    dim: usize,
    bandwidth: usize,
    r: Vec<f64>,
    rhs: Vec<f64>,
    filled: Vec<bool>,
    work: Vec<f64>,
}

impl BandedQr {
    pub fn new(dim: usize, bandwidth: usize) -> Self {
        let w = bandwidth + 1;
        Self {
            dim,
            bandwidth,
            r: vec![0.0; dim * w],
            rhs: vec![0.0; dim],
            filled: vec![false; dim],
            work: vec![0.0; w],
        }
    }

    /// Merges the row `values` (placed at columns `start..`) with right-hand
    /// side `target`.
    pub fn add_row(&mut self, start: usize, values: &[f64], mut target: f64) {
        let w = self.bandwidth + 1;
        debug_assert!(values.len() <= w && start + values.len() <= self.dim);
        self.work.iter_mut().for_each(|v| *v = 0.0);
        self.work[..values.len()].copy_from_slice(values);
        let mut col = start;
        while col < self.dim {
            if self.work.iter().all(|&v| v == 0.0) {
                return;
            }
            let x = self.work[0];
            if x != 0.0 {
                let row = &mut self.r[col * w..(col + 1) * w];
                if !self.filled[col] {
                    row.copy_from_slice(&self.work);
                    self.rhs[col] = target;
                    self.filled[col] = true;
                    return;
                }
                let rr = row[0];
                let rho = rr.hypot(x);
                let (c, s) = (rr / rho, x / rho);
                for (rv, wv) in row.iter_mut().zip(self.work.iter_mut()) {
                    let (a, b) = (*rv, *wv);
                    *rv = c * a + s * b;
                    *wv = c * b - s * a;
                }
                let t = self.rhs[col];
                self.rhs[col] = c * t + s * target;
                target = c * target - s * t;
            }
            self.work.rotate_left(1);
            self.work[w - 1] = 0.0;
            col += 1;
        }
    }

    /// Back-substitution through `R`.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let w = self.bandwidth + 1;
        let scale = (0..self.dim)
            .map(|i| self.r[i * w].abs())
            .fold(0.0_f64, f64::max);
        let mut x = vec![0.0; self.dim];
        for i in (0..self.dim).rev() {
            let row = &self.r[i * w..(i + 1) * w];
            let diag = row[0];
            if !self.filled[i] || !(diag.abs() > f64::EPSILON * scale) {
                return Err(Error::NotPositiveDefinite {
                    index: i,
                    pivot: diag * diag,
                });
            }
            let mut s = self.rhs[i];
            for t in 1..w.min(self.dim - i) {
                s -= row[t] * x[i + t];
            }
            x[i] = s / diag;
        }
        Ok(x)
    }
}
