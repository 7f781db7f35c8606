//! Knot sequences and B-spline basis evaluation.
//!
//! A [`KnotVector`] holds the interior knots `t_1 < … < t_k` of a degree-`q`
//! spline on `[lo, hi]` together with the augmented sequence used by the
//! Cox–de Boor recursion. The basis always has `q + k + 1` functions, and at
//! any `x` at most `q + 1` consecutive ones are non-zero.
//!
//! Two boundary conventions are supported. They span the same function space
//! on `[lo, hi]` but give different coefficient parametrizations:
//!
//! * [`Boundary::Clamped`]: `lo` and `hi` are each repeated `q + 1` times. The
//!   first and last basis functions interpolate the end points.
//! * [`Boundary::Uniform`]: the knot grid is continued past `lo` and `hi` with
//!   the mean interior spacing. On equally spaced knots this makes every basis
//!   function a translate of the same cardinal B-spline, so the
//!   `(q+1)`-th coefficient difference at knot `t_j` is proportional to the jump
//!   of the `q`-th derivative there. The adaptive-ridge penalty relies on that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the knot sequence is continued beyond the domain end points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Clamped,
    #[default]
    Uniform,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Clamped => "clamped",
            Boundary::Uniform => "uniform",
        })
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clamped" => Ok(Boundary::Clamped),
            "uniform" => Ok(Boundary::Uniform),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary convention `{other}` (expected clamped or uniform)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    lo: f64,
    hi: f64,
    interior: Vec<f64>,
    degree: usize,
    boundary: Boundary,
    full: Vec<f64>,
}

impl KnotVector {
    /// Builds a knot vector from explicit interior knots.
    pub fn new(
        lo: f64,
        hi: f64,
        interior: Vec<f64>,
        degree: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "domain bounds must be finite, got [{lo}, {hi}]"
            )));
        }
        if lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "domain must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        let mut prev = lo;
        for &t in &interior {
            if !t.is_finite() || t <= prev || t >= hi {
                return Err(Error::InvalidArgument(format!(
                    "interior knots must be strictly increasing inside ({lo}, {hi}); offending knot {t}"
                )));
            }
            prev = t;
        }

        let q = degree;
        let k = interior.len();
        let mut full = Vec::with_capacity(k + 2 * (q + 1));
        match boundary {
            Boundary::Clamped => {
                full.extend(std::iter::repeat_n(lo, q + 1));
                full.extend_from_slice(&interior);
                full.extend(std::iter::repeat_n(hi, q + 1));
            }
            Boundary::Uniform => {
                let h = (hi - lo) / (k + 1) as f64;
                full.extend((0..=q).rev().map(|i| lo - i as f64 * h));
                full.extend_from_slice(&interior);
                full.extend((0..=q).map(|i| hi + i as f64 * h));
            }
        }

        Ok(Self {
            lo,
            hi,
            interior,
            degree,
            boundary,
            full,
        })
    }

    /// `k` equally spaced interior knots `t_j = lo + j (hi - lo) / (k + 1)`.
    pub fn equally_spaced(
        lo: f64,
        hi: f64,
        k: usize,
        degree: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "domain must be finite with lo < hi, got [{lo}, {hi}]"
            )));
        }
        let step = (hi - lo) / (k + 1) as f64;
        let interior = (1..=k).map(|j| lo + j as f64 * step).collect();
        Self::new(lo, hi, interior, degree, boundary)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// The augmented sequence of length `k + 2(q + 1)`.
    pub fn full(&self) -> &[f64] {
        &self.full
    }

    /// Basis dimension `q + k + 1`.
    pub fn dim(&self) -> usize {
        self.degree + self.interior.len() + 1
    }

    /// Same interior knots, different boundary convention.
    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        Self::new(
            self.lo,
            self.hi,
            self.interior.clone(),
            self.degree,
            boundary,
        )
        .expect("knots were already validated")
    }

    /// Support `[lo, hi]` of basis function `j`, clipped to the domain.
    pub fn support(&self, j: usize) -> (f64, f64) {
        let q = self.degree;
        let lo = self.full[j].max(self.lo);
        let hi = self.full[(j + q + 1).min(self.full.len() - 1)].min(self.hi);
        (lo, hi)
    }

    /// Writes the `q + 1` possibly non-zero basis values at `x` into `out` and
    /// returns the index of the first one.
    pub fn nonzero_basis(&self, x: f64, out: &mut [f64]) -> Result<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return Err(Error::OutOfDomain {
                x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        let q = self.degree;
        debug_assert_eq!(out.len(), q + 1);
        // Knot span [τ_s, τ_{s+1}) containing x; x = hi falls in the last span.
        let span = q + self.interior.partition_point(|&t| t <= x);
        let tau = &self.full;

        let mut left = [0.0; MAX_STACK_DEGREE + 1];
        let mut right = [0.0; MAX_STACK_DEGREE + 1];
        let (mut left_heap, mut right_heap);
        let (left, right): (&mut [f64], &mut [f64]) = if q <= MAX_STACK_DEGREE {
            (&mut left[..=q], &mut right[..=q])
        } else {
            left_heap = vec![0.0; q + 1];
            right_heap = vec![0.0; q + 1];
            (&mut left_heap, &mut right_heap)
        };

        out[0] = 1.0;
        for j in 1..=q {
            left[j] = x - tau[span + 1 - j];
            right[j] = tau[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        Ok(span - q)
    }

    /// Value of the spline with the given coefficients at `x`.
    pub fn evaluate(&self, coefficients: &[f64], x: f64) -> Result<f64> {
        crate::error::check_len("spline coefficients", self.dim(), coefficients.len())?;
        let mut vals = vec![0.0; self.degree + 1];
        let offset = self.nonzero_basis(x, &mut vals)?;
        Ok(vals
            .iter()
            .zip(&coefficients[offset..])
            .map(|(b, a)| b * a)
            .sum())
    }
}

const MAX_STACK_DEGREE: usize = 7;

/// `k` equally spaced interior knots on `[lo, hi]` with uniformly extended
/// boundary knots, the layout used for penalized fitting.
pub fn make_knots(lo: f64, hi: f64, k: usize, degree: usize) -> Result<KnotVector> {
    KnotVector::equally_spaced(lo, hi, k, degree, Boundary::Uniform)
}

/// All `q + k + 1` basis values at `x`.
pub fn eval_basis(kv: &KnotVector, x: f64) -> Result<Vec<f64>> {
    let mut vals = vec![0.0; kv.degree() + 1];
    let offset = kv.nonzero_basis(x, &mut vals)?;
    let mut row = vec![0.0; kv.dim()];
    row[offset..offset + vals.len()].copy_from_slice(&vals);
    Ok(row)
}

/// Row-sparse design matrix: each row stores `q + 1` contiguous values
/// starting at its column offset.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    nrows: usize,
    ncols: usize,
    width: usize,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of stored values per row (`q + 1`).
    pub fn row_width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        let w = self.width;
        (self.offsets[i], &self.values[i * w..(i + 1) * w])
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.offsets
            .iter()
            .copied()
            .zip(self.values.chunks_exact(self.width.max(1)))
    }

    /// `B a`.
    pub fn mul_vec(&self, a: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("coefficient vector", self.ncols, a.len())?;
        Ok(self
            .rows()
            .map(|(off, vals)| vals.iter().zip(&a[off..]).map(|(b, c)| b * c).sum())
            .collect())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows()
            .map(|(off, vals)| {
                let mut row = vec![0.0; self.ncols];
                row[off..off + vals.len()].copy_from_slice(vals);
                row
            })
            .collect()
    }
}

/// Design matrix `B = [B_j(x_i)]`.
pub fn build_design(kv: &KnotVector, xs: &[f64]) -> Result<DesignMatrix> {
    let width = kv.degree() + 1;
    let mut offsets = Vec::with_capacity(xs.len());
    let mut values = vec![0.0; xs.len() * width];
    for (i, &x) in xs.iter().enumerate() {
        let off = kv.nonzero_basis(x, &mut values[i * width..(i + 1) * width])?;
        offsets.push(off);
    }
    Ok(DesignMatrix {
        nrows: xs.len(),
        ncols: kv.dim(),
        width,
        offsets,
        values,
    })
}
