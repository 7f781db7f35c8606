//! Finite differences of spline coefficients and the weighted difference
//! penalty `DᵀWD`, assembled from the stencil without forming `D`.

use crate::error::{check_len, Error, Result};
use crate::linalg::BandedSymMatrix;

/// Default `ε` in the weight update.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// The order-`d` difference operator on coefficient vectors of length `len`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSpec {
    order: usize,
    len: usize,
    stencil: Vec<f64>,
}

impl DiffSpec {
    pub fn new(order: usize, len: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "difference order must be at least 1".into(),
            ));
        }
        if order >= len {
            return Err(Error::InvalidArgument(format!(
                "difference order {order} needs more than {len} coefficients"
            )));
        }
        Ok(Self {
            order,
            len,
            stencil: stencil(order),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Length of the coefficient vectors it applies to.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of differences, i.e. rows of `D`.
    pub fn num_diffs(&self) -> usize {
        self.len - self.order
    }

    /// `(-1)^(d-i) C(d, i)` for `i = 0..=d`.
    pub fn stencil(&self) -> &[f64] {
        &self.stencil
    }

    pub fn apply(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_len("coefficient vector", self.len, a.len())?;
        Ok(a.windows(self.order + 1)
            .map(|win| win.iter().zip(&self.stencil).map(|(x, s)| x * s).sum())
            .collect())
    }
}

fn stencil(order: usize) -> Vec<f64> {
    let mut s = vec![0.0; order + 1];
    let mut binom = 1.0;
    for i in 0..=order {
        let sign = if (order - i).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        s[i] = sign * binom;
        binom = binom * (order - i) as f64 / (i + 1) as f64;
    }
    s
}

/// `Δ^order a`.
pub fn diff(a: &[f64], order: usize) -> Result<Vec<f64>> {
    DiffSpec::new(order, a.len())?.apply(a)
}

/// Positive penalty weights, one per penalized difference.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some((j, &v)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "penalty weight {j} must be finite and positive, got {v}"
            )));
        }
        Ok(Self(w))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `DᵀWD` with bandwidth `d`.
pub fn penalty_matrix(spec: &DiffSpec, w: &WeightVector) -> Result<BandedSymMatrix> {
    check_len("penalty weights", spec.num_diffs(), w.len())?;
    let d = spec.order;
    let st = &spec.stencil;
    let mut out = BandedSymMatrix::zeros(spec.len, d);
    for (j, &wj) in w.as_slice().iter().enumerate() {
        for r in 0..=d {
            let wr = wj * st[r];
            for c in 0..=r {
                out.add(j + r, j + c, wr * st[c]);
            }
        }
    }
    Ok(out)
}

/// `w_j = 1 / ((Δ^d a)_j² + ε²)`.
pub fn update_weights(a: &[f64], spec: &DiffSpec, epsilon: f64) -> Result<WeightVector> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let eps2 = epsilon * epsilon;
    let w = spec
        .apply(a)?
        .into_iter()
        .map(|v| 1.0 / (v * v + eps2))
        .collect();
    Ok(WeightVector(w))
}

/// Weighted-difference scores `s_j = w_j (Δ^d a)_j²`.
pub fn knot_scores(a: &[f64], spec: &DiffSpec, w: &WeightVector) -> Result<Vec<f64>> {
    check_len("penalty weights", spec.num_diffs(), w.len())?;
    Ok(spec
        .apply(a)?
        .into_iter()
        .zip(w.as_slice())
        .map(|(v, wj)| wj * v * v)
        .collect())
}

/// The weighted difference penalty `Σ_j w_j (Δ^d a)_j²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub spec: DiffSpec,
    pub weights: WeightVector,
}

impl Penalty {
    pub fn new(spec: DiffSpec, weights: WeightVector) -> Result<Self> {
        check_len("penalty weights", spec.num_diffs(), weights.len())?;
        Ok(Self { spec, weights })
    }

    /// Unit weights, the plain P-spline penalty.
    pub fn unweighted(spec: DiffSpec) -> Self {
        let weights = WeightVector::ones(spec.num_diffs());
        Self { spec, weights }
    }

    pub fn matrix(&self) -> BandedSymMatrix {
        penalty_matrix(&self.spec, &self.weights).expect("lengths checked at construction")
    }

    pub fn value(&self, a: &[f64]) -> Result<f64> {
        Ok(self
            .spec
            .apply(a)?
            .iter()
            .zip(self.weights.as_slice())
            .map(|(v, w)| w * v * v)
            .sum())
    }

    /// Rows of `√(λW) D` as `(start column, scale)`; the values are the stencil
    /// times the scale.
    pub(crate) fn scaled_rows(&self, lambda: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .as_slice()
            .iter()
            .enumerate()
            .map(move |(j, w)| (j, (lambda * w).sqrt()))
    }
}
