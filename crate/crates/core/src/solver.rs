//! Adaptive-ridge knot selection for a single penalty and along a penalty path.
//!
//! For fixed weights `w` the objective
//!
//! ```text
//! WPSS(a) = ‖y − B a‖² + λ Σ_j w_j (Δ^{q+1} a)_j²
//! ```
//!
//! has the explicit minimizer `(BᵀB + λ DᵀWD)⁻¹ Bᵀy`. The adaptive ridge
//! alternates that solve with the weight update `w_j = 1 / ((Δ^{q+1} a)_j² + ε²)`
//! until the coefficients and the selected knot set stop moving. Knot `t_j` is
//! selected when its score `w_j (Δ^{q+1} a)_j²` reaches the selection threshold.

use serde::{Deserialize, Serialize};

use crate::basis::{DesignMatrix, KnotVector};
use crate::error::{check_len, Error, Result};
use crate::linalg::{cholesky_with_jitter, xtx, xty, BandedQr, BandedSymMatrix, CholeskyFactor};
use crate::penalty::{
    knot_scores, update_weights, DiffSpec, Penalty, WeightVector, DEFAULT_EPSILON,
};

/// Cross-products of the design with itself and with the response, plus the
/// Cholesky factor of `BᵀB` used by every penalized solve.
#[derive(Debug, Clone)]
pub struct DesignProducts {
    design: DesignMatrix,
    y: Vec<f64>,
    gram: BandedSymMatrix,
    xty: Vec<f64>,
    factor: CholeskyFactor,
    projected: Vec<f64>,
    jitter: f64,
}

impl DesignProducts {
    pub fn new(design: DesignMatrix, y: &[f64]) -> Result<Self> {
        check_len("response", design.nrows(), y.len())?;
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "response value {i} is not finite: {v}"
            )));
        }
        let gram = xtx(&design);
        let xty = xty(&design, y)?;
        let (factor, jitter, projected) = data_factor(&gram, &xty)?;
        Ok(Self {
            design,
            y: y.to_vec(),
            gram,
            xty,
            factor,
            projected,
            jitter,
        })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn gram(&self) -> &BandedSymMatrix {
        &self.gram
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    /// Diagonal jitter that had to be added to factor `BᵀB` (0 when full rank).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `‖y − B a‖²`.
    pub fn residual_ss(&self, a: &[f64]) -> Result<f64> {
        let fitted = self.design.mul_vec(a)?;
        Ok(self
            .y
            .iter()
            .zip(&fitted)
            .map(|(y, f)| (y - f) * (y - f))
            .sum())
    }
}

/// Factors a data Gram matrix `G` and returns `(L, jitter, L⁻¹ r)`.
pub(crate) fn data_factor(
    gram: &BandedSymMatrix,
    rhs: &[f64],
) -> Result<(CholeskyFactor, f64, Vec<f64>)> {
    let (factor, jitter) = cholesky_with_jitter(gram)?;
    if jitter > 0.0 {
        log::debug!("data Gram matrix is rank deficient; added diagonal jitter {jitter:e}");
    }
    let mut projected = rhs.to_vec();
    factor.forward_substitute(&mut projected)?;
    Ok((factor, jitter, projected))
}

/// Minimizes `‖Lᵀ a − c‖² + λ Σ_j w_j (Δ a)_j²`, which has the same minimizer
/// as `(L Lᵀ + λ DᵀWD) a = L c`, by a banded Givens QR of the stacked rows.
pub(crate) fn penalized_solve(
    factor: &CholeskyFactor,
    projected: &[f64],
    penalty: Option<&Penalty>,
    lambda: f64,
) -> Result<Vec<f64>> {
    let p = factor.dim();
    let order = penalty.map_or(0, |pen| pen.spec.order());
    let bandwidth = factor.bandwidth().max(order);

    enum Row {
        Data(usize),
        Penalty(usize, f64),
    }
    let mut rows: Vec<(f64, Row)> = (0..p)
        .map(|i| {
            let norm = factor.transposed_row(i).map(|v| v * v).sum::<f64>().sqrt();
            (norm, Row::Data(i))
        })
        .collect();
    if let Some(pen) = penalty {
        check_len("penalty dimension", p, pen.spec.len())?;
        let stencil_norm = pen.spec.stencil().iter().map(|s| s * s).sum::<f64>().sqrt();
        rows.extend(
            pen.scaled_rows(lambda)
                .filter(|(_, scale)| *scale > 0.0)
                .map(|(j, scale)| (scale * stencil_norm, Row::Penalty(j, scale))),
        );
    }
    // Heaviest rows first keeps the rotations well conditioned.
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut qr = BandedQr::new(p, bandwidth);
    let mut buf = vec![0.0; bandwidth + 1];
    for (_, row) in &rows {
        match *row {
            Row::Data(i) => {
                let len = (factor.bandwidth() + 1).min(p - i);
                for (b, v) in buf.iter_mut().zip(factor.transposed_row(i)) {
                    *b = v;
                }
                qr.add_row(i, &buf[..len], projected[i]);
            }
            Row::Penalty(j, scale) => {
                let stencil = penalty
                    .expect("penalty rows only exist with a penalty")
                    .spec
                    .stencil();
                for (b, s) in buf.iter_mut().zip(stencil) {
                    *b = scale * s;
                }
                qr.add_row(j, &buf[..stencil.len()], 0.0);
            }
        }
    }
    qr.solve()
}

/// Exact minimizer of the weighted penalized sum of squares for fixed weights.
pub fn wpss_minimize(prod: &DesignProducts, penalty: &Penalty, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "penalty must be finite and non-negative, got {lambda}"
        )));
    }
    penalized_solve(&prod.factor, &prod.projected, Some(penalty), lambda)
}

/// `‖y − B a‖² + λ Σ_j w_j (Δ^{q+1} a)_j²`.
pub fn wpss_value(prod: &DesignProducts, penalty: &Penalty, lambda: f64, a: &[f64]) -> Result<f64> {
    Ok(prod.residual_ss(a)? + lambda * penalty.value(a)?)
}

/// Least-squares fit without penalty (with the rank-deficiency jitter, if any).
pub fn unpenalized_fit(prod: &DesignProducts) -> Result<Vec<f64>> {
    penalized_solve(&prod.factor, &prod.projected, None, 0.0)
}

/// Starting point of each penalty after the first along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathStart {
    /// From the previous penalty's coefficients.
    #[default]
    Warm,
    /// From `a = 0, w = 1`.
    Cold,
}

impl std::str::FromStr for PathStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "warm" => Ok(PathStart::Warm),
            "cold" => Ok(PathStart::Cold),
            other => Err(Error::InvalidArgument(format!(
                "unknown path start `{other}`"
            ))),
        }
    }
}

/// Tuning constants of the adaptive ridge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArConfig {
    pub epsilon: f64,
    pub sel_threshold: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub path_start: PathStart,
}

impl Default for ArConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            sel_threshold: 0.99,
            tol: 1e-8,
            max_iter: 1000,
            path_start: PathStart::default(),
        }
    }
}

impl ArConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.epsilon.is_finite()
            && self.sel_threshold > 0.0
            && self.sel_threshold < 1.0
            && self.tol > 0.0
            && self.max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid adaptive-ridge configuration {self:?}"
            )))
        }
    }
}

/// Converged (or iteration-capped) adaptive-ridge state for one penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct ArState {
    pub coefficients: Vec<f64>,
    pub weights: Vec<f64>,
    pub scores: Vec<f64>,
    pub selected: Vec<bool>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ArState {
    pub fn num_selected(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    /// Selected interior knots of `kv`.
    pub fn selected_knots(&self, kv: &KnotVector) -> Vec<f64> {
        kv.interior()
            .iter()
            .zip(&self.selected)
            .filter_map(|(&t, &s)| s.then_some(t))
            .collect()
    }
}

/// The `(q+1)`-order difference operator for `kv`, or `None` without interior knots.
pub(crate) fn knot_diff_spec(kv: &KnotVector) -> Option<DiffSpec> {
    (kv.num_interior() > 0).then(|| {
        DiffSpec::new(kv.degree() + 1, kv.dim()).expect("k >= 1 leaves enough coefficients")
    })
}

/// Shared adaptive-ridge loop; `minimize` returns the WPSS minimizer for the
/// given weights, starting from the previous coefficients.
pub(crate) fn adaptive_ridge_with<F>(
    kv: &KnotVector,
    lambda: f64,
    cfg: &ArConfig,
    init: Option<&[f64]>,
    mut minimize: F,
) -> Result<ArState>
where
    F: FnMut(Option<&Penalty>, &[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "adaptive ridge needs a positive finite penalty, got {lambda}"
        )));
    }
    let p = kv.dim();
    if let Some(a0) = init {
        check_len("initial coefficients", p, a0.len())?;
    }

    let Some(spec) = knot_diff_spec(kv) else {
        // Nothing to select: the fit is the plain polynomial regression.
        let a = minimize(None, init.unwrap_or(&vec![0.0; p]))?;
        return Ok(ArState {
            coefficients: a,
            weights: Vec::new(),
            scores: Vec::new(),
            selected: Vec::new(),
            lambda,
            iterations: 1,
            converged: true,
        });
    };

    let (mut a, mut w) = match init {
        Some(a0) => (a0.to_vec(), update_weights(a0, &spec, cfg.epsilon)?),
        None => (vec![0.0; p], WeightVector::ones(spec.num_diffs())),
    };
    let mut selected: Vec<bool> = knot_scores(&a, &spec, &w)?
        .iter()
        .map(|&s| s >= cfg.sel_threshold)
        .collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let penalty = Penalty::new(spec.clone(), w)?;
        let a_new = minimize(Some(&penalty), &a)?;
        let w_new = update_weights(&a_new, &spec, cfg.epsilon)?;
        let scores = knot_scores(&a_new, &spec, &w_new)?;
        let sel_new: Vec<bool> = scores.iter().map(|&s| s >= cfg.sel_threshold).collect();

        let scale = 1.0 + a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let change = a
            .iter()
            .zip(&a_new)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
            / scale;
        let stable = sel_new == selected;
        a = a_new;
        w = w_new;
        selected = sel_new;
        if change <= cfg.tol && stable {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "adaptive ridge hit max_iter = {} at lambda = {lambda:e}",
            cfg.max_iter
        );
    }

    let scores = knot_scores(&a, &spec, &w)?;
    Ok(ArState {
        coefficients: a,
        weights: w.as_slice().to_vec(),
        scores,
        selected,
        lambda,
        iterations,
        converged,
    })
}

/// Adaptive ridge for one penalty `lambda`, cold-started at `a = 0, w = 1`
/// unless `init` coefficients are supplied.
pub fn adaptive_ridge(
    prod: &DesignProducts,
    kv: &KnotVector,
    lambda: f64,
    cfg: &ArConfig,
    init: Option<&[f64]>,
) -> Result<ArState> {
    check_len("basis dimension", prod.dim(), kv.dim())?;
    adaptive_ridge_with(kv, lambda, cfg, init, |pen, _| {
        penalized_solve(&prod.factor, &prod.projected, pen, lambda)
    })
}

/// Logarithmically spaced penalties, from `min` up to `max`.
///
/// The path runs from wiggly to smooth: a knot dropped by the adaptive ridge
/// gets a weight near `1/ε²` and is not re-admitted at smaller penalties, so
/// a path started at large penalties never reaches the richer models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self {
            min: 1e-4,
            max: 1e6,
            count: 100,
        }
    }
}

impl LambdaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let valid = self.min > 0.0
            && self.max.is_finite()
            && self.count >= 1
            && (self.max > self.min || (self.count == 1 && self.max >= self.min));
        if !valid {
            return Err(Error::InvalidArgument(format!(
                "invalid penalty grid: min = {}, max = {}, count = {}",
                self.min, self.max, self.count
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.min]);
        }
        let (lo, hi) = (self.min.ln(), self.max.ln());
        let step = (hi - lo) / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| match i {
                0 => self.min,
                _ if i + 1 == self.count => self.max,
                _ => (lo + step * i as f64).exp(),
            })
            .collect())
    }
}

/// Converged states along a penalty path.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPath {
    pub knots: KnotVector,
    pub states: Vec<ArState>,
}

impl LambdaPath {
    pub fn lambdas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub(crate) fn check_path_order(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty penalty path".into()));
    }
    let increasing = lambdas.windows(2).all(|w| w[0] < w[1]);
    let decreasing = lambdas.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidArgument(
            "penalties must be strictly monotone".into(),
        ));
    }
    Ok(())
}

/// Walks `lambdas` in order; `solve(λ, init)` runs the adaptive ridge for one
/// penalty.
pub(crate) fn path_with<F>(
    kv: &KnotVector,
    lambdas: &[f64],
    cfg: &ArConfig,
    mut solve: F,
) -> Result<LambdaPath>
where
    F: FnMut(f64, Option<&[f64]>) -> Result<ArState>,
{
    check_path_order(lambdas)?;
    let mut states: Vec<ArState> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let init = states.last().map(|s| s.coefficients.as_slice());
        let init = init.filter(|_| cfg.path_start == PathStart::Warm);
        states.push(solve(lambda, init)?);
    }
    Ok(LambdaPath {
        knots: kv.clone(),
        states,
    })
}

/// Runs the adaptive ridge over `lambdas`. Each penalty after the first starts
/// from the previous coefficients unless `cfg.path_start` asks for a cold start.
pub fn run_path(
    prod: &DesignProducts,
    kv: &KnotVector,
    lambdas: &[f64],
    cfg: &ArConfig,
) -> Result<LambdaPath> {
    path_with(kv, lambdas, cfg, |lambda, init| {
        adaptive_ridge(prod, kv, lambda, cfg, init)
    })
}
