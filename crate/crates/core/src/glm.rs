//! Penalized IRLS for exponential families with canonical links.
//!
//! Each step solves
//!
//! ```text
//! (BᵀΩB + λ DᵀWD) a⁺ = Bᵀ(Ω B a + y − μ),   ω_ii = 1 / (V(μ_i) g'(μ_i)²)
//! ```
//!
//! which is a Newton step on `deviance(a) + λ Σ_j w_j (Δ^{q+1} a)_j²`. The
//! adaptive ridge wraps a full IRLS solve per weight update.

use serde::{Deserialize, Serialize};

use crate::basis::{DesignMatrix, KnotVector};
use crate::error::{check_len, Error, Result};
use crate::linalg::{xtwx, xty};
use crate::penalty::Penalty;
use crate::solver::{
    adaptive_ridge_with, data_factor, path_with, penalized_solve, ArConfig, ArState, LambdaPath,
};

const OMEGA_MIN: f64 = 1e-10;
const OMEGA_MAX: f64 = 1e10;
const ETA_MAX_LOG: f64 = 700.0;
const ETA_MAX_LOGIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Gaussian,
    Poisson,
    Binomial,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "poisson" => Ok(Family::Poisson),
            "binomial" | "logistic" => Ok(Family::Binomial),
            other => Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn xlogy_ratio(y: f64, mu: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y * (y / mu).ln()
    }
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Poisson => "poisson",
            Family::Binomial => "binomial",
        }
    }

    /// Canonical link `g(μ)`.
    pub fn link(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => mu,
            Family::Poisson => mu.ln(),
            Family::Binomial => (mu / (1.0 - mu)).ln(),
        }
    }

    /// `g⁻¹(η)`, with `η` clipped so that the mean stays strictly inside its domain.
    pub fn inverse_link(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Poisson => eta.clamp(-ETA_MAX_LOG, ETA_MAX_LOG).exp(),
            Family::Binomial => {
                let e = eta.clamp(-ETA_MAX_LOGIT, ETA_MAX_LOGIT);
                1.0 / (1.0 + (-e).exp())
            }
        }
    }

    /// `g'(μ)`.
    pub fn link_derivative(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Poisson => 1.0 / mu,
            Family::Binomial => 1.0 / (mu * (1.0 - mu)),
        }
    }

    pub fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Poisson => mu,
            Family::Binomial => mu * (1.0 - mu),
        }
    }

    /// IRLS weight `1 / (V(μ) g'(μ)²)`, clamped to `[1e-10, 1e10]`.
    pub fn irls_weight(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            _ => {
                let g = self.link_derivative(mu);
                (1.0 / (self.variance(mu) * g * g)).clamp(OMEGA_MIN, OMEGA_MAX)
            }
        }
    }

    pub fn mean_in_domain(self, mu: f64) -> bool {
        match self {
            Family::Gaussian => mu.is_finite(),
            Family::Poisson => mu > 0.0 && mu.is_finite(),
            Family::Binomial => mu > 0.0 && mu < 1.0,
        }
    }

    /// Unit deviance summed over observations.
    pub fn deviance(self, y: &[f64], mu: &[f64]) -> f64 {
        y.iter()
            .zip(mu)
            .map(|(&y, &m)| match self {
                Family::Gaussian => (y - m) * (y - m),
                Family::Poisson => 2.0 * (xlogy_ratio(y, m) - (y - m)),
                Family::Binomial => 2.0 * (xlogy_ratio(y, m) + xlogy_ratio(1.0 - y, 1.0 - m)),
            })
            .sum()
    }

    /// Checks that every response value is admissible for the family.
    pub fn validate_response(self, y: &[f64]) -> Result<()> {
        let bad = y.iter().enumerate().find(|(_, &v)| match self {
            Family::Gaussian => !v.is_finite(),
            Family::Poisson => !(v.is_finite() && v >= 0.0 && v.fract() == 0.0),
            Family::Binomial => !(v == 0.0 || v == 1.0),
        });
        match bad {
            Some((index, &value)) => Err(Error::InvalidResponse {
                family: self.name(),
                index,
                value,
            }),
            None => Ok(()),
        }
    }

    /// Starting means: `y`, `y + 0.1`, `(y + 0.5) / 2`.
    pub fn initial_mean(self, y: f64) -> f64 {
        match self {
            Family::Gaussian => y,
            Family::Poisson => y + 0.1,
            Family::Binomial => (y + 0.5) / 2.0,
        }
    }

    /// Working right-hand side `Ω η + y − μ`.
    fn working_response(self, y: &[f64], eta: &[f64], mu: &[f64], omega: &[f64]) -> Vec<f64> {
        match self {
            // Identity link: Ωη + y − μ = y exactly.
            Family::Gaussian => y.to_vec(),
            _ => y
                .iter()
                .zip(eta)
                .zip(mu.iter().zip(omega))
                .map(|((&y, &e), (&m, &w))| w * e + (y - m))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrlsConfig {
    /// Relative change of the penalized deviance that stops the iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive increases of the penalized deviance treated as divergence.
    pub divergence_patience: usize,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            divergence_patience: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsState {
    pub coefficients: Vec<f64>,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
    pub deviance: f64,
    /// Deviance plus `λ Σ w_j (Δ a)_j²`; NaN before the first step.
    pub penalized_deviance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized deviance after each step.
    pub trace: Vec<f64>,
}

impl IrlsState {
    /// State at the family's default starting means.
    pub fn initial(family: Family, y: &[f64]) -> Self {
        let mu: Vec<f64> = y.iter().map(|&v| family.initial_mean(v)).collect();
        Self::from_mean(family, y, mu, Vec::new())
    }

    /// State at the given coefficients.
    pub fn at(family: Family, b: &DesignMatrix, y: &[f64], coefficients: &[f64]) -> Result<Self> {
        let eta = b.mul_vec(coefficients)?;
        let mu = eta.iter().map(|&e| family.inverse_link(e)).collect();
        let mut st = Self::from_mean(family, y, mu, coefficients.to_vec());
        st.eta = eta;
        Ok(st)
    }

    fn from_mean(family: Family, y: &[f64], mu: Vec<f64>, coefficients: Vec<f64>) -> Self {
        let eta = mu.iter().map(|&m| family.link(m)).collect();
        let omega = mu.iter().map(|&m| family.irls_weight(m)).collect();
        let deviance = family.deviance(y, &mu);
        Self {
            coefficients,
            eta,
            mu,
            omega,
            deviance,
            penalized_deviance: f64::NAN,
            iterations: 0,
            converged: false,
            trace: Vec::new(),
        }
    }
}

/// One penalized IRLS step.
pub fn irls_step(
    b: &DesignMatrix,
    y: &[f64],
    family: Family,
    state: &IrlsState,
    penalty: Option<&Penalty>,
    lambda: f64,
) -> Result<IrlsState> {
    check_len("response", b.nrows(), y.len())?;
    check_len("linear predictor", b.nrows(), state.eta.len())?;
    let gram = xtwx(b, &state.omega)?;
    let z = family.working_response(y, &state.eta, &state.mu, &state.omega);
    let rhs = xty(b, &z)?;
    let (factor, _, projected) = data_factor(&gram, &rhs)?;
    let a = penalized_solve(&factor, &projected, penalty, lambda)?;

    let mut next = IrlsState::at(family, b, y, &a)?;
    let pen = match penalty {
        Some(p) if lambda > 0.0 => lambda * p.value(&a)?,
        _ => 0.0,
    };
    next.penalized_deviance = next.deviance + pen;
    next.iterations = state.iterations + 1;
    next.trace = state.trace.clone();
    next.trace.push(next.penalized_deviance);
    Ok(next)
}

/// Iterates [`irls_step`] until the relative change of the penalized deviance
/// drops below `cfg.tol`. Starts from `start` coefficients if given, otherwise
/// from the family's default means.
pub fn irls_fit(
    b: &DesignMatrix,
    y: &[f64],
    family: Family,
    penalty: Option<&Penalty>,
    lambda: f64,
    cfg: &IrlsConfig,
    start: Option<&[f64]>,
) -> Result<IrlsState> {
    family.validate_response(y)?;
    let mut state = match start {
        Some(a) => IrlsState::at(family, b, y, a)?,
        None => IrlsState::initial(family, y),
    };
    let mut increases = 0;
    let mut previous = f64::NAN;
    for _ in 0..cfg.max_iter {
        let next = irls_step(b, y, family, &state, penalty, lambda)?;
        let current = next.penalized_deviance;
        if !current.is_finite() {
            return Err(Error::Diverged {
                iterations: next.iterations,
                deviance: current,
            });
        }
        state = next;
        // Identity link: the quadratic objective is minimized in one step.
        if family == Family::Gaussian {
            state.converged = true;
            return Ok(state);
        }
        if previous.is_finite() {
            if current > previous {
                increases += 1;
                if increases >= cfg.divergence_patience {
                    return Err(Error::Diverged {
                        iterations: state.iterations,
                        deviance: current,
                    });
                }
            } else {
                increases = 0;
            }
            if (current - previous).abs() <= cfg.tol * (current.abs() + 0.1) {
                state.converged = true;
                return Ok(state);
            }
        }
        previous = current;
    }
    log::warn!(
        "IRLS reached max_iter = {} without converging",
        cfg.max_iter
    );
    Ok(state)
}

/// Adaptive ridge with an IRLS solve per weight update.
#[allow(clippy::too_many_arguments)]
pub fn glm_adaptive_ridge(
    b: &DesignMatrix,
    y: &[f64],
    family: Family,
    kv: &KnotVector,
    lambda: f64,
    cfg: &ArConfig,
    irls: &IrlsConfig,
    init: Option<&[f64]>,
) -> Result<ArState> {
    check_len("basis dimension", b.ncols(), kv.dim())?;
    family.validate_response(y)?;
    adaptive_ridge_with(kv, lambda, cfg, init, |pen, previous| {
        // The cold start (a = 0) is a poor IRLS start for non-identity links.
        let start = previous.iter().any(|&v| v != 0.0).then_some(previous);
        Ok(irls_fit(b, y, family, pen, lambda, irls, start)?.coefficients)
    })
}

/// [`glm_adaptive_ridge`] over a warm-started penalty path.
pub fn glm_run_path(
    b: &DesignMatrix,
    y: &[f64],
    family: Family,
    kv: &KnotVector,
    lambdas: &[f64],
    cfg: &ArConfig,
    irls: &IrlsConfig,
) -> Result<LambdaPath> {
    path_with(kv, lambdas, cfg, |lambda, init| {
        glm_adaptive_ridge(b, y, family, kv, lambda, cfg, irls, init)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn link_pairs_invert() {
        for fam in [Family::Gaussian, Family::Poisson, Family::Binomial] {
            for mu in [0.1, 0.3, 0.5, 0.9] {
                assert_relative_eq!(fam.inverse_link(fam.link(mu)), mu, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn irls_weights() {
        assert_eq!(Family::Gaussian.irls_weight(3.0), 1.0);
        assert_relative_eq!(Family::Poisson.irls_weight(2.5), 2.5, max_relative = 1e-14);
        assert_relative_eq!(
            Family::Binomial.irls_weight(0.2),
            0.16,
            max_relative = 1e-12
        );
        assert_eq!(Family::Poisson.irls_weight(1e-20), 1e-10);
    }

    #[test]
    fn saturated_deviance_is_zero() {
        let y = [0.0, 1.0, 3.0, 7.0];
        assert_eq!(Family::Poisson.deviance(&y[1..], &y[1..]), 0.0);
        assert_eq!(Family::Gaussian.deviance(&y, &y), 0.0);
        let yb = [0.0, 1.0, 1.0];
        let mu = [1e-300, 1.0 - 1e-16, 1.0 - 1e-16];
        assert!(Family::Binomial.deviance(&yb, &mu) < 1e-10);
    }

    #[test]
    fn means_stay_in_domain() {
        for eta in [-1e4, -50.0, 0.0, 50.0, 1e4] {
            assert!(Family::Poisson.mean_in_domain(Family::Poisson.inverse_link(eta)));
            assert!(Family::Binomial.mean_in_domain(Family::Binomial.inverse_link(eta)));
        }
    }

    #[test]
    fn response_validation() {
        assert!(Family::Poisson.validate_response(&[0.0, 2.0, 5.0]).is_ok());
        assert!(matches!(
            Family::Poisson.validate_response(&[0.0, -1.0]),
            Err(Error::InvalidResponse { index: 1, .. })
        ));
        assert!(Family::Poisson.validate_response(&[1.5]).is_err());
        assert!(Family::Binomial.validate_response(&[0.0, 1.0]).is_ok());
        assert!(Family::Binomial.validate_response(&[0.5]).is_err());
        assert!(Family::Gaussian.validate_response(&[f64::NAN]).is_err());
    }

    #[test]
    fn parses_family_names() {
        assert_eq!("Poisson".parse::<Family>().unwrap(), Family::Poisson);
        assert!("gamma".parse::<Family>().is_err());
    }
}
