//! Information criteria, the unpenalized refit on selected knots, and the
//! choice of the best model along a penalty path.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::basis::{build_design, Boundary, KnotVector};
use crate::error::{Error, Result};
use crate::glm::{irls_fit, Family, IrlsConfig};
use crate::linalg::{cholesky, solve, xtx, xty};
use crate::solver::LambdaPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    #[default]
    Ebic0,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Aic, Criterion::Bic, Criterion::Ebic0];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Ebic0 => "ebic0",
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            "ebic" | "ebic0" => Ok(Criterion::Ebic0),
            other => Err(Error::InvalidArgument(format!(
                "unknown criterion `{other}`"
            ))),
        }
    }
}

/// `fit + 2 dim`.
pub fn aic(fit: f64, model_dim: usize) -> f64 {
    fit + 2.0 * model_dim as f64
}

/// `fit + dim log n`.
pub fn bic(fit: f64, model_dim: usize, n: usize) -> f64 {
    fit + model_dim as f64 * (n as f64).ln()
}

/// `log C(n, k)` through log-gamma.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n, "log_binomial needs k <= n");
    if k == 0 || k == n {
        return 0.0;
    }
    let (n, k) = (n as f64, k as f64);
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// `BIC + 2 log C(full_dim, dim)`.
pub fn ebic0(fit: f64, model_dim: usize, n: usize, full_dim: usize) -> Result<f64> {
    if model_dim > full_dim {
        return Err(Error::InvalidArgument(format!(
            "model dimension {model_dim} exceeds the full dimension {full_dim}"
        )));
    }
    Ok(bic(fit, model_dim, n) + 2.0 * log_binomial(full_dim, model_dim))
}

/// How the goodness-of-fit term of the criteria is computed from the refit.
///
/// `Profile` uses `n log(SS / n)` for Gaussian responses, the profile
/// `-2 log-likelihood` with the noise variance estimated. `Raw` plugs the
/// residual sum of squares in directly, which only makes sense when the noise
/// variance is near one. Non-Gaussian families always use the deviance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitScale {
    Raw,
    #[default]
    Profile,
}

impl std::str::FromStr for FitScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(FitScale::Raw),
            "profile" => Ok(FitScale::Profile),
            other => Err(Error::InvalidArgument(format!(
                "unknown fit scale `{other}`"
            ))),
        }
    }
}

impl FitScale {
    pub fn term(self, family: Family, loss: f64, n: usize) -> f64 {
        match (self, family) {
            (FitScale::Profile, Family::Gaussian) => {
                let n = n as f64;
                n * (loss / n).max(f64::MIN_POSITIVE).ln()
            }
            _ => loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub aic: f64,
    pub bic: f64,
    pub ebic0: f64,
}

impl Criteria {
    pub fn compute(fit: f64, model_dim: usize, n: usize, full_dim: usize) -> Result<Self> {
        Ok(Self {
            aic: aic(fit, model_dim),
            bic: bic(fit, model_dim, n),
            ebic0: ebic0(fit, model_dim, n, full_dim)?,
        })
    }

    pub fn get(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
            Criterion::Ebic0 => self.ebic0,
        }
    }
}

/// Unpenalized fit on a reduced knot set.
#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    pub knots: KnotVector,
    pub coefficients: Vec<f64>,
    /// Residual sum of squares (Gaussian) or deviance.
    pub loss: f64,
}

/// Least-squares (or maximum-likelihood) spline fit on `selected_knots`.
pub fn refit(
    xs: &[f64],
    y: &[f64],
    domain: (f64, f64),
    selected_knots: &[f64],
    degree: usize,
    family: Family,
) -> Result<Refit> {
    let kv = KnotVector::new(
        domain.0,
        domain.1,
        selected_knots.to_vec(),
        degree,
        Boundary::Clamped,
    )?;
    let design = build_design(&kv, xs)?;
    let gram = xtx(&design);
    let factor = cholesky(&gram).map_err(|e| match e {
        Error::NotPositiveDefinite { index, .. } => {
            let (lo, hi) = kv.support(index);
            Error::RankDeficient { lo, hi }
        }
        other => other,
    })?;
    let (coefficients, loss) = match family {
        Family::Gaussian => {
            let a = solve(&factor, &xty(&design, y)?)?;
            let fitted = design.mul_vec(&a)?;
            let ss = y.iter().zip(&fitted).map(|(y, f)| (y - f) * (y - f)).sum();
            (a, ss)
        }
        _ => {
            let st = irls_fit(&design, y, family, None, 0.0, &IrlsConfig::default(), None)?;
            (st.coefficients, st.deviance)
        }
    };
    Ok(Refit {
        knots: kv,
        coefficients,
        loss,
    })
}

/// A refitted model from the penalty path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub lambda: f64,
    pub degree: usize,
    pub domain: (f64, f64),
    pub family: Family,
    pub selected_knots: Vec<f64>,
    pub k_lambda: usize,
    pub coefficients: Vec<f64>,
    pub model_dim: usize,
    pub ss_or_deviance: f64,
    pub criteria: Criteria,
    pub converged: bool,
}

impl FitResult {
    /// The clamped knot vector the coefficients refer to.
    pub fn knot_vector(&self) -> Result<KnotVector> {
        KnotVector::new(
            self.domain.0,
            self.domain.1,
            self.selected_knots.clone(),
            self.degree,
            Boundary::Clamped,
        )
    }

    /// Linear predictor `B(x) â`.
    pub fn linear_predictor(&self, x: f64) -> Result<f64> {
        self.knot_vector()?.evaluate(&self.coefficients, x)
    }

    /// Fitted mean `g⁻¹(B(x) â)` at each of `xs`.
    pub fn predict(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let kv = self.knot_vector()?;
        xs.iter()
            .map(|&x| {
                Ok(self
                    .family
                    .inverse_link(kv.evaluate(&self.coefficients, x)?))
            })
            .collect()
    }
}

/// Outcome of the refit for one penalty on the path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    pub lambda: f64,
    pub num_selected: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Index into the candidate list, or the refit error.
    pub candidate: std::result::Result<usize, Error>,
}

/// Refits every distinct selected knot set on `path`.
///
/// Penalties that select the same knots share one candidate, labelled with the
/// largest of their penalties.
pub fn evaluate_path(
    xs: &[f64],
    y: &[f64],
    path: &LambdaPath,
    family: Family,
    scale: FitScale,
) -> (Vec<FitResult>, Vec<PathEntry>) {
    let kv = &path.knots;
    let q = kv.degree();
    let full_dim = kv.dim();
    let n = xs.len();

    let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for (i, st) in path.states.iter().enumerate() {
        groups.entry(st.selected.clone()).or_default().push(i);
    }

    let mut candidates = Vec::new();
    let mut outcome: Vec<Option<std::result::Result<usize, Error>>> = vec![None; path.len()];
    for members in groups.values() {
        let lead = *members
            .iter()
            .max_by(|&&a, &&b| path.states[a].lambda.total_cmp(&path.states[b].lambda))
            .expect("groups are non-empty");
        let st = &path.states[lead];
        let knots = st.selected_knots(kv);
        let result = refit(xs, y, kv.domain(), &knots, q, family).and_then(|r| {
            let model_dim = q + knots.len() + 1;
            let criteria =
                Criteria::compute(scale.term(family, r.loss, n), model_dim, n, full_dim)?;
            Ok(FitResult {
                lambda: st.lambda,
                degree: q,
                domain: kv.domain(),
                family,
                k_lambda: knots.len(),
                selected_knots: knots,
                coefficients: r.coefficients,
                model_dim,
                ss_or_deviance: r.loss,
                criteria,
                converged: members.iter().all(|&m| path.states[m].converged),
            })
        });
        let tag = match result {
            Ok(fit) => {
                candidates.push(fit);
                Ok(candidates.len() - 1)
            }
            Err(e) => {
                log::debug!("refit failed at lambda = {:e}: {e}", st.lambda);
                Err(e)
            }
        };
        for &m in members {
            outcome[m] = Some(tag.clone());
        }
    }

    let entries = path
        .states
        .iter()
        .zip(outcome)
        .map(|(st, candidate)| PathEntry {
            lambda: st.lambda,
            num_selected: st.num_selected(),
            converged: st.converged,
            iterations: st.iterations,
            candidate: candidate.expect("every state belongs to a group"),
        })
        .collect();
    (candidates, entries)
}

/// The candidate minimizing `criterion`; ties go to the larger penalty.
pub fn select_best(candidates: &[FitResult], criterion: Criterion) -> Result<&FitResult> {
    candidates
        .iter()
        .filter(|c| !c.criteria.get(criterion).is_nan())
        .min_by(|a, b| {
            a.criteria
                .get(criterion)
                .total_cmp(&b.criteria.get(criterion))
                .then(b.lambda.total_cmp(&a.lambda))
        })
        .ok_or(Error::EmptyPath)
}
