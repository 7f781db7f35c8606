//! Benchmark functions, noise models, and a replication runner measuring the
//! integrated squared error of the fitted curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{build_design, KnotVector};
use crate::error::{Error, Result};
use crate::fit::{fit_aspline, FitConfig};
use crate::linalg::{cholesky_with_jitter, solve};
use crate::penalty::Penalty;
use crate::selection::{Criterion, FitScale};
use crate::solver::{knot_diff_spec, wpss_minimize, DesignProducts, LambdaGrid};

pub const DEFAULT_SEED: u64 = 20_190_501;
pub const DEFAULT_MSE_GRID: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    Bump,
    Logit,
    Sine,
    SpaHet,
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] = [
        TestFunction::Bump,
        TestFunction::Logit,
        TestFunction::Sine,
        TestFunction::SpaHet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Bump => "bump",
            TestFunction::Logit => "logit",
            TestFunction::Sine => "sine",
            TestFunction::SpaHet => "spahet",
        }
    }

    /// Value at `x ∈ [0, 1]`, without the domain check.
    pub fn value(self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            TestFunction::Bump => {
                let z = 16.0 * (x - 0.5);
                0.4 * (x + 2.0 * (-(z * z)).exp())
            }
            TestFunction::Logit => 1.0 / (1.0 + (-20.0 * (x - 0.5)).exp()),
            TestFunction::Sine => 0.5 * (6.0 * PI * x).sin() + 0.5,
            TestFunction::SpaHet => {
                let c = 2f64.powf(-0.6);
                (x * (1.0 - x)).sqrt() * (2.0 * PI * (1.0 + c) / (x + c)).sin() + 0.5
            }
        }
    }

    pub fn eval(self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain {
                x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.value(x))
    }

    /// The noise model paired with the function in the benchmark.
    pub fn default_noise(self) -> NoiseSpec {
        match self {
            TestFunction::Logit | TestFunction::Sine => NoiseSpec::Homoscedastic { sd: 0.15 },
            TestFunction::Bump | TestFunction::SpaHet => NoiseSpec::Heteroscedastic,
        }
    }
}

impl std::fmt::Display for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bump" => Ok(TestFunction::Bump),
            "logit" => Ok(TestFunction::Logit),
            "sine" => Ok(TestFunction::Sine),
            "spahet" => Ok(TestFunction::SpaHet),
            other => Err(Error::InvalidArgument(format!(
                "unknown test function `{other}`"
            ))),
        }
    }
}

/// Standard deviation of the additive Gaussian noise as a function of `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseSpec {
    Homoscedastic {
        sd: f64,
    },
    /// `sd(x) = (0.3 x + 0.2 √x)²`.
    Heteroscedastic,
}

impl NoiseSpec {
    pub fn sd(&self, x: f64) -> f64 {
        match *self {
            NoiseSpec::Homoscedastic { sd } => sd,
            NoiseSpec::Heteroscedastic => {
                let s = 0.3 * x + 0.2 * x.max(0.0).sqrt();
                s * s
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            NoiseSpec::Homoscedastic { sd } => format!("homoscedastic({sd})"),
            NoiseSpec::Heteroscedastic => "heteroscedastic".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Homoscedastic { sd } if !(sd >= 0.0 && sd.is_finite()) => Err(
                Error::InvalidArgument(format!("noise sd must be nonnegative, got {sd}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Generator of replication `replication` under `seed`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// `n` uniform design points with `y = f(x) + sd(x) z`.
pub fn simulate_dataset<R: Rng + ?Sized>(
    f: TestFunction,
    n: usize,
    noise: &NoiseSpec,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let ys = xs
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(rng);
            f.value(x) + noise.sd(x) * z
        })
        .collect();
    (xs, ys)
}

/// `∫₀¹ (f - g)²` by the trapezoid rule on `grid_size` equally spaced points.
pub fn mse<F, G>(f_true: F, f_hat: G, grid_size: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> Result<f64>,
{
    if grid_size < 2 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least 2 points".into(),
        ));
    }
    let h = 1.0 / (grid_size - 1) as f64;
    let mut total = 0.0;
    for i in 0..grid_size {
        let x = if i + 1 == grid_size {
            1.0
        } else {
            i as f64 * h
        };
        let d = f_true(x) - f_hat(x)?;
        let wt = if i == 0 || i + 1 == grid_size {
            0.5
        } else {
            1.0
        };
        total += wt * d * d;
    }
    Ok(total * h)
}

/// Declarative description of a simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub function: TestFunction,
    pub n: usize,
    pub replications: usize,
    pub seed: Option<u64>,
    /// Defaults to the function's own noise model.
    pub noise: Option<NoiseSpec>,
    pub criteria: Vec<Criterion>,
    pub degree: usize,
    pub num_knots: usize,
    pub grid: LambdaGrid,
    pub fit_scale: FitScale,
    /// Also fit a unit-weight P-spline with the penalty chosen by GCV.
    pub pspline: bool,
    pub mse_grid: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            function: TestFunction::Logit,
            n: 200,
            replications: 100,
            seed: None,
            noise: None,
            criteria: Criterion::ALL.to_vec(),
            degree: 3,
            num_knots: 40,
            grid: LambdaGrid::default(),
            fit_scale: FitScale::default(),
            pspline: false,
            mse_grid: DEFAULT_MSE_GRID,
        }
    }
}

impl ScenarioConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise.unwrap_or_else(|| self.function.default_noise())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument(
                "replications must be positive".into(),
            ));
        }
        if self.n < self.degree + 2 {
            return Err(Error::InvalidArgument(format!(
                "n = {} is too small for degree {}",
                self.n, self.degree
            )));
        }
        if self.criteria.is_empty() {
            return Err(Error::InvalidArgument("no criteria requested".into()));
        }
        self.noise().validate()?;
        self.grid.values()?;
        Ok(())
    }

    fn fit_config(&self, criterion: Criterion) -> FitConfig {
        FitConfig {
            degree: self.degree,
            num_knots: self.num_knots,
            criterion,
            grid: self.grid,
            domain: Some((0.0, 1.0)),
            fit_scale: self.fit_scale,
            ..FitConfig::default()
        }
    }
}

/// A method compared in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Aspline(Criterion),
    Pspline,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arm::Aspline(c) => write!(f, "aspline-{c}"),
            Arm::Pspline => f.write_str("pspline-gcv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub arm: Arm,
    /// `None` when the fit failed.
    pub mse: Option<f64>,
    pub basis_count: Option<usize>,
    pub lambda: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub successes: usize,
    pub failures: usize,
    pub median_mse: f64,
    pub median_basis_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub function: TestFunction,
    pub n: usize,
    pub noise: String,
    pub seed: u64,
    pub replications: usize,
    /// Sorted by arm, then replication.
    pub runs: Vec<ReplicationResult>,
    pub summaries: Vec<ArmSummary>,
}

impl ScenarioResult {
    pub fn summary(&self, arm: Arm) -> Option<&ArmSummary> {
        self.summaries.iter().find(|s| s.arm == arm)
    }

    pub fn median_mse(&self, criterion: Criterion) -> Option<f64> {
        self.summary(Arm::Aspline(criterion)).map(|s| s.median_mse)
    }

    pub fn median_basis_count(&self, criterion: Criterion) -> Option<f64> {
        self.summary(Arm::Aspline(criterion))
            .map(|s| s.median_basis_count)
    }
}

/// Median of a sample; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn failed(replication: usize, arm: Arm, e: &Error) -> ReplicationResult {
    ReplicationResult {
        replication,
        arm,
        mse: None,
        basis_count: None,
        lambda: None,
        error: Some(e.to_string()),
    }
}

fn run_replication(cfg: &ScenarioConfig, replication: usize) -> Vec<ReplicationResult> {
    let f = cfg.function;
    let mut rng = replication_rng(cfg.seed(), replication as u64);
    let (xs, ys) = simulate_dataset(f, cfg.n, &cfg.noise(), &mut rng);
    let mut out = Vec::new();

    match fit_aspline(&xs, &ys, &cfg.fit_config(cfg.criteria[0])) {
        Ok(outcome) => {
            for &c in &cfg.criteria {
                let arm = Arm::Aspline(c);
                let res = outcome.best_by(c).and_then(|best| {
                    let err = mse(|x| f.value(x), |x| best.linear_predictor(x), cfg.mse_grid)?;
                    Ok(ReplicationResult {
                        replication,
                        arm,
                        mse: Some(err),
                        basis_count: Some(best.model_dim),
                        lambda: Some(best.lambda),
                        error: None,
                    })
                });
                out.push(res.unwrap_or_else(|e| failed(replication, arm, &e)));
            }
        }
        Err(e) => {
            log::debug!("replication {replication} failed: {e}");
            out.extend(
                cfg.criteria
                    .iter()
                    .map(|&c| failed(replication, Arm::Aspline(c), &e)),
            );
        }
    }

    if cfg.pspline {
        let res = pspline_gcv(&xs, &ys, cfg).and_then(|(kv, a, lambda)| {
            let err = mse(|x| f.value(x), |x| kv.evaluate(&a, x), cfg.mse_grid)?;
            Ok(ReplicationResult {
                replication,
                arm: Arm::Pspline,
                mse: Some(err),
                basis_count: Some(kv.dim()),
                lambda: Some(lambda),
                error: None,
            })
        });
        out.push(res.unwrap_or_else(|e| failed(replication, Arm::Pspline, &e)));
    }
    out
}

/// Unit-weight P-spline with `λ` minimizing `n SS / (n - tr H)²` over the grid.
pub fn pspline_gcv(
    xs: &[f64],
    ys: &[f64],
    cfg: &ScenarioConfig,
) -> Result<(KnotVector, Vec<f64>, f64)> {
    let kv = KnotVector::equally_spaced(
        0.0,
        1.0,
        cfg.num_knots,
        cfg.degree,
        crate::basis::Boundary::Uniform,
    )?;
    let prod = DesignProducts::new(build_design(&kv, xs)?, ys)?;
    let spec = knot_diff_spec(&kv)
        .ok_or_else(|| Error::InvalidArgument("P-spline arm needs interior knots".into()))?;
    let penalty = Penalty::unweighted(spec);
    let pmat = penalty.matrix();
    let n = xs.len() as f64;
    let p = kv.dim();

    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for lambda in cfg.grid.values()? {
        let a = wpss_minimize(&prod, &penalty, lambda)?;
        let ss = prod.residual_ss(&a)?;
        let system = prod.gram().add_scaled(lambda, &pmat)?;
        let (factor, _) = cholesky_with_jitter(&system)?;
        let mut trace = 0.0;
        for i in 0..p {
            let col: Vec<f64> = (0..p).map(|r| prod.gram().get(r, i)).collect();
            trace += solve(&factor, &col)?[i];
        }
        let gcv = n * ss / (n - trace).powi(2);
        if best.as_ref().is_none_or(|(g, _, _)| gcv < *g) {
            best = Some((gcv, lambda, a));
        }
    }
    let (_, lambda, a) = best.ok_or(Error::EmptyPath)?;
    Ok((kv, a, lambda))
}

fn summarize(arm: Arm, runs: &[ReplicationResult]) -> ArmSummary {
    let mine: Vec<&ReplicationResult> = runs.iter().filter(|r| r.arm == arm).collect();
    let mses: Vec<f64> = mine.iter().filter_map(|r| r.mse).collect();
    let dims: Vec<f64> = mine
        .iter()
        .filter_map(|r| r.basis_count.map(|d| d as f64))
        .collect();
    ArmSummary {
        arm,
        successes: mses.len(),
        failures: mine.len() - mses.len(),
        median_mse: median(&mses),
        median_basis_count: median(&dims),
    }
}

/// Runs all replications of `cfg` in parallel.
///
/// Fails when more than 5% of the replications of any arm failed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let mut runs: Vec<ReplicationResult> = (0..cfg.replications)
        .into_par_iter()
        .flat_map_iter(|r| run_replication(cfg, r))
        .collect();
    runs.sort_by_key(|r| (arm_order(r.arm), r.replication));

    let mut arms: Vec<Arm> = cfg.criteria.iter().map(|&c| Arm::Aspline(c)).collect();
    if cfg.pspline {
        arms.push(Arm::Pspline);
    }
    let summaries: Vec<ArmSummary> = arms.iter().map(|&a| summarize(a, &runs)).collect();
    for s in &summaries {
        if s.failures * 20 > cfg.replications {
            let first = runs
                .iter()
                .find_map(|r| (r.arm == s.arm).then(|| r.error.clone()).flatten())
                .unwrap_or_default();
            return Err(Error::InvalidArgument(format!(
                "{} of {} replications failed for {}; first error: {first}",
                s.failures, cfg.replications, s.arm
            )));
        }
    }
    Ok(ScenarioResult {
        function: cfg.function,
        n: cfg.n,
        noise: cfg.noise().label(),
        seed: cfg.seed(),
        replications: cfg.replications,
        runs,
        summaries,
    })
}

fn arm_order(arm: Arm) -> usize {
    match arm {
        Arm::Aspline(c) => Criterion::ALL.iter().position(|&x| x == c).unwrap_or(0),
        Arm::Pspline => Criterion::ALL.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn function_values() {
        assert_eq!(TestFunction::Logit.eval(0.5).unwrap(), 0.5);
        assert_abs_diff_eq!(TestFunction::Bump.eval(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            TestFunction::SpaHet.eval(0.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(TestFunction::Sine.eval(0.25).unwrap(), 0.0, epsilon = 1e-15);
        assert!(TestFunction::Sine.eval(1.5).is_err());
    }

    #[test]
    fn functions_stay_near_unit_interval() {
        for f in TestFunction::ALL {
            for i in 0..1001 {
                let v = f.value(i as f64 / 1000.0);
                assert!((-0.05..=1.05).contains(&v), "{f} at {i}: {v}");
            }
        }
    }

    #[test]
    fn noiseless_data_is_exact() {
        let mut rng = replication_rng(1, 0);
        let (xs, ys) = simulate_dataset(
            TestFunction::Sine,
            50,
            &NoiseSpec::Homoscedastic { sd: 0.0 },
            &mut rng,
        );
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(*y, TestFunction::Sine.value(*x));
        }
    }

    #[test]
    fn datasets_are_reproducible() {
        let noise = NoiseSpec::Heteroscedastic;
        let a = simulate_dataset(TestFunction::Bump, 30, &noise, &mut replication_rng(7, 3));
        let b = simulate_dataset(TestFunction::Bump, 30, &noise, &mut replication_rng(7, 3));
        let c = simulate_dataset(TestFunction::Bump, 30, &noise, &mut replication_rng(7, 4));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn heteroscedastic_spread_grows_with_x() {
        let noise = NoiseSpec::Heteroscedastic;
        let mut rng = replication_rng(11, 0);
        let (xs, ys) = simulate_dataset(TestFunction::Logit, 10_000, &noise, &mut rng);
        let spread = |lo: f64, hi: f64| {
            let r: Vec<f64> = xs
                .iter()
                .zip(&ys)
                .filter(|(x, _)| (lo..hi).contains(*x))
                .map(|(x, y)| y - TestFunction::Logit.value(*x))
                .collect();
            (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
        };
        assert!(spread(0.9, 1.0) > 3.0 * spread(0.0, 0.1));
        assert_abs_diff_eq!(noise.sd(1.0), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn quadrature() {
        assert_eq!(mse(|x| x.sin(), |x| Ok(x.sin()), 1001).unwrap(), 0.0);
        assert_abs_diff_eq!(
            mse(|_| 0.0, |_| Ok(1.0), 1001).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            mse(|_| 0.0, |x| Ok(x), 1001).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-6
        );
        assert!(mse(|_| 0.0, |x| Ok(x), 1).is_err());
    }

    #[test]
    fn median_of_samples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn scenario_config_rejects_unknown_keys() {
        let err = toml::from_str::<ScenarioConfig>("function = \"sine\"\nreplicates = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("replicates"), "{err}");
        let cfg: ScenarioConfig = toml::from_str("function = \"spahet\"\nn = 50\n").unwrap();
        assert_eq!(cfg.function, TestFunction::SpaHet);
        assert_eq!(cfg.seed(), DEFAULT_SEED);
        assert_eq!(cfg.noise(), NoiseSpec::Heteroscedastic);
    }
}
