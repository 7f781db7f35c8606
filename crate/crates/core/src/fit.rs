//! End-to-end A-spline fit: penalty path, refit of each distinct knot set, and
//! the choice of the penalty by an information criterion.

use serde::{Deserialize, Serialize};

use crate::basis::{build_design, Boundary, KnotVector};
use crate::error::{check_len, Error, Result};
use crate::glm::{glm_run_path, Family, IrlsConfig};
use crate::selection::{evaluate_path, select_best, Criterion, FitResult, FitScale, PathEntry};
use crate::solver::{run_path, ArConfig, DesignProducts, LambdaGrid, LambdaPath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub degree: usize,
    /// Number of equally spaced candidate interior knots.
    pub num_knots: usize,
    pub family: Family,
    pub criterion: Criterion,
    pub grid: LambdaGrid,
    pub adaptive_ridge: ArConfig,
    pub irls: IrlsConfig,
    /// Boundary knots of the penalized basis.
    pub boundary: Boundary,
    /// Defaults to the range of the data.
    pub domain: Option<(f64, f64)>,
    pub fit_scale: FitScale,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            num_knots: 40,
            family: Family::Gaussian,
            criterion: Criterion::Ebic0,
            grid: LambdaGrid::default(),
            adaptive_ridge: ArConfig::default(),
            irls: IrlsConfig::default(),
            boundary: Boundary::Uniform,
            domain: None,
            fit_scale: FitScale::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub best: FitResult,
    pub criterion: Criterion,
    /// One refit per distinct selected knot set.
    pub candidates: Vec<FitResult>,
    pub trace: Vec<PathEntry>,
    pub path: LambdaPath,
}

impl FitOutcome {
    /// The best candidate under another criterion.
    pub fn best_by(&self, criterion: Criterion) -> Result<&FitResult> {
        select_best(&self.candidates, criterion)
    }
}

fn data_domain(xs: &[f64]) -> Result<(f64, f64)> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(Error::InvalidArgument(
            "x must take at least two distinct values".into(),
        ))
    }
}

/// Adaptive-ridge path of `cfg` on the data, without refitting.
pub fn fit_path(xs: &[f64], y: &[f64], cfg: &FitConfig) -> Result<LambdaPath> {
    check_len("response", xs.len(), y.len())?;
    if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("x[{i}] is not finite")));
    }
    cfg.adaptive_ridge.validate()?;
    cfg.family.validate_response(y)?;
    let (lo, hi) = match cfg.domain {
        Some(d) => d,
        None => data_domain(xs)?,
    };
    let kv = KnotVector::equally_spaced(lo, hi, cfg.num_knots, cfg.degree, cfg.boundary)?;
    let lambdas = cfg.grid.values()?;
    let design = build_design(&kv, xs)?;
    match cfg.family {
        Family::Gaussian => {
            let prod = DesignProducts::new(design, y)?;
            run_path(&prod, &kv, &lambdas, &cfg.adaptive_ridge)
        }
        family => glm_run_path(
            &design,
            y,
            family,
            &kv,
            &lambdas,
            &cfg.adaptive_ridge,
            &cfg.irls,
        ),
    }
}

/// Fits an adaptive spline and picks the penalty by `cfg.criterion`.
pub fn fit_aspline(xs: &[f64], y: &[f64], cfg: &FitConfig) -> Result<FitOutcome> {
    let path = fit_path(xs, y, cfg)?;
    let (candidates, trace) = evaluate_path(xs, y, &path, cfg.family, cfg.fit_scale);
    let best = match select_best(&candidates, cfg.criterion) {
        Ok(best) => best.clone(),
        Err(Error::EmptyPath) => {
            // Surface the refit error of the sparsest model, if any.
            return Err(trace
                .iter()
                .rev()
                .find_map(|e| e.candidate.clone().err())
                .unwrap_or(Error::EmptyPath));
        }
        Err(e) => return Err(e),
    };
    Ok(FitOutcome {
        best,
        criterion: cfg.criterion,
        candidates,
        trace,
        path,
    })
}
