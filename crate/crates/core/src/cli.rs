//! The `aspline` command line: `fit`, `simulate` and `basis`.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::basis::{eval_basis, Boundary, KnotVector};
use crate::error::Error;
use crate::fit::{fit_aspline, FitConfig, FitOutcome};
use crate::glm::Family;
use crate::selection::{Criteria, Criterion, FitResult, FitScale};
use crate::simulation::{run_scenario, ScenarioConfig, ScenarioResult};
use crate::solver::{ArConfig, LambdaGrid, PathStart};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Failure of a command, mapped to the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            return CliError::Numerical(e.to_string());
        }
        match e {
            Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "aspline",
    version,
    about = "Spline regression with adaptive knot selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an adaptive spline to two columns of a CSV file.
    Fit(FitArgs),
    /// Run a simulation scenario described by a TOML file.
    Simulate(SimulateArgs),
    /// Tabulate the B-spline basis on a grid.
    Basis(BasisArgs),
}

/// Fit options. Every option can also be given in the `--config` file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitArgs {
    /// TOML file with default values for any of the options below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Headered CSV input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub x_column: Option<String>,
    #[arg(long)]
    pub y_column: Option<String>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Number of equally spaced candidate knots.
    #[arg(long)]
    pub knots: Option<usize>,
    /// gaussian, poisson or binomial.
    #[arg(long)]
    pub family: Option<Family>,
    /// aic, bic or ebic0.
    #[arg(long)]
    pub criterion: Option<Criterion>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub lambda_count: Option<usize>,
    /// uniform or clamped boundary knots for the penalized fit.
    #[arg(long)]
    pub boundary: Option<Boundary>,
    /// profile or raw goodness-of-fit term in the criteria.
    #[arg(long)]
    pub fit_scale: Option<FitScale>,
    /// warm or cold start for each penalty along the path.
    #[arg(long)]
    pub path_start: Option<PathStart>,
    /// JSON report path; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Number of points of the fitted-curve grid in the report.
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Also write the fitted grid as CSV.
    #[arg(long)]
    pub grid_csv: Option<PathBuf>,
}

impl FitArgs {
    /// Options given on the command line win over those in the file.
    fn merged_with(self, file: FitArgs) -> FitArgs {
        FitArgs {
            config: self.config,
            input: self.input.or(file.input),
            x_column: self.x_column.or(file.x_column),
            y_column: self.y_column.or(file.y_column),
            degree: self.degree.or(file.degree),
            knots: self.knots.or(file.knots),
            family: self.family.or(file.family),
            criterion: self.criterion.or(file.criterion),
            lambda_min: self.lambda_min.or(file.lambda_min),
            lambda_max: self.lambda_max.or(file.lambda_max),
            lambda_count: self.lambda_count.or(file.lambda_count),
            boundary: self.boundary.or(file.boundary),
            fit_scale: self.fit_scale.or(file.fit_scale),
            path_start: self.path_start.or(file.path_start),
            output: self.output.or(file.output),
            grid_size: self.grid_size.or(file.grid_size),
            grid_csv: self.grid_csv.or(file.grid_csv),
        }
    }

    fn resolve(self) -> Result<FitRequest, CliError> {
        let args = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                let file: FitArgs = toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                self.merged_with(file)
            }
            None => self,
        };
        let defaults = FitConfig::default();
        let grid = LambdaGrid {
            min: args.lambda_min.unwrap_or(defaults.grid.min),
            max: args.lambda_max.unwrap_or(defaults.grid.max),
            count: args.lambda_count.unwrap_or(defaults.grid.count),
        };
        let config = FitConfig {
            degree: args.degree.unwrap_or(defaults.degree),
            num_knots: args.knots.unwrap_or(defaults.num_knots),
            family: args.family.unwrap_or(defaults.family),
            criterion: args.criterion.unwrap_or(defaults.criterion),
            grid,
            boundary: args.boundary.unwrap_or(defaults.boundary),
            fit_scale: args.fit_scale.unwrap_or(defaults.fit_scale),
            adaptive_ridge: ArConfig {
                path_start: args
                    .path_start
                    .unwrap_or(defaults.adaptive_ridge.path_start),
                ..defaults.adaptive_ridge
            },
            ..defaults
        };
        let grid_size = args.grid_size.unwrap_or(201);
        if grid_size < 2 {
            return Err(CliError::Usage("--grid-size must be at least 2".into()));
        }
        Ok(FitRequest {
            input: args
                .input
                .ok_or_else(|| CliError::Usage("no input file given (--input)".into()))?,
            x_column: args.x_column.unwrap_or_else(|| "x".into()),
            y_column: args.y_column.unwrap_or_else(|| "y".into()),
            config,
            output: args.output,
            grid_size,
            grid_csv: args.grid_csv,
        })
    }
}

/// Fully resolved `fit` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRequest {
    pub input: PathBuf,
    pub x_column: String,
    pub y_column: String,
    pub config: FitConfig,
    pub output: Option<PathBuf>,
    pub grid_size: usize,
    pub grid_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario TOML file.
    #[arg(long)]
    pub config: PathBuf,
    /// Per-replication CSV; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Overrides the replication count of the file.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Overrides the seed of the file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct BasisArgs {
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Number of equally spaced interior knots.
    #[arg(long, default_value_t = 3)]
    pub knots: usize,
    /// Number of grid points.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub hi: f64,
    #[arg(long, default_value_t = Boundary::Clamped)]
    pub boundary: Boundary,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub x_column: String,
    pub y_column: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedGrid {
    pub x: Vec<f64>,
    pub fitted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub lambda: f64,
    pub num_selected: usize,
    pub iterations: usize,
    pub converged: bool,
    pub model_dim: Option<usize>,
    pub criteria: Option<Criteria>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub elapsed_seconds: f64,
    pub seed: Option<u64>,
}

/// JSON document written by `aspline fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub input: InputInfo,
    pub config: FitConfig,
    pub result: FitResult,
    pub grid: FittedGrid,
    pub trace: Vec<TraceEntry>,
    pub metadata: RunMetadata,
}

impl FitReport {
    pub fn new(
        input: InputInfo,
        config: FitConfig,
        outcome: &FitOutcome,
        grid_size: usize,
        elapsed_seconds: f64,
    ) -> Result<Self, Error> {
        let best = outcome.best.clone();
        let (lo, hi) = best.domain;
        let x: Vec<f64> = (0..grid_size)
            .map(|i| {
                if i + 1 == grid_size {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (grid_size - 1) as f64
                }
            })
            .collect();
        let fitted = best.predict(&x)?;
        let trace = outcome
            .trace
            .iter()
            .map(|e| {
                let (model_dim, criteria, error) = match &e.candidate {
                    Ok(i) => {
                        let c = &outcome.candidates[*i];
                        (Some(c.model_dim), Some(c.criteria), None)
                    }
                    Err(err) => (None, None, Some(err.to_string())),
                };
                TraceEntry {
                    lambda: e.lambda,
                    num_selected: e.num_selected,
                    iterations: e.iterations,
                    converged: e.converged,
                    model_dim,
                    criteria,
                    error,
                }
            })
            .collect();
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            input,
            config,
            result: best,
            grid: FittedGrid { x, fitted },
            trace,
            metadata: RunMetadata {
                version: env!("CARGO_PKG_VERSION").into(),
                elapsed_seconds,
                seed: None,
            },
        })
    }
}

/// Reads two named numeric columns of a headered CSV.
pub fn read_columns<R: Read>(
    reader: R,
    x_column: &str,
    y_column: &str,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read CSV header: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("column `{name}` not found in the header")))
    };
    let (ix, iy) = (column(x_column)?, column(y_column)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Data(format!("malformed CSV at line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |i: usize, name: &str| -> Result<f64, CliError> {
            let field = record.get(i).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| {
                CliError::Data(format!(
                    "line {line}: `{field}` in column `{name}` is not a number"
                ))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Data(format!(
                    "line {line}: non-finite value in column `{name}`"
                )))
            }
        };
        xs.push(parse(ix, x_column)?);
        ys.push(parse(iy, y_column)?);
    }
    Ok((xs, ys))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn cmd_fit(args: FitArgs) -> Result<FitReport, CliError> {
    let req = args.resolve()?;
    let start = Instant::now();
    let file = File::open(&req.input)
        .map_err(|e| CliError::Data(format!("{}: {e}", req.input.display())))?;
    let (xs, ys) = read_columns(file, &req.x_column, &req.y_column)?;
    let q = req.config.degree;
    if xs.len() < q + 2 {
        return Err(CliError::Data(format!(
            "{} observations are too few for degree {q} (need at least {})",
            xs.len(),
            q + 2
        )));
    }
    let outcome = fit_aspline(&xs, &ys, &req.config)?;
    let input = InputInfo {
        path: req.input.display().to_string(),
        x_column: req.x_column.clone(),
        y_column: req.y_column.clone(),
        n: xs.len(),
    };
    let report = FitReport::new(
        input,
        req.config.clone(),
        &outcome,
        req.grid_size,
        start.elapsed().as_secs_f64(),
    )?;

    let mut out = open_output(req.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    if let Some(path) = &req.grid_csv {
        let mut w = csv::Writer::from_path(path).map_err(io::Error::from)?;
        w.write_record(["x", "fitted"]).map_err(io::Error::from)?;
        for (x, f) in report.grid.x.iter().zip(&report.grid.fitted) {
            w.write_record([x.to_string(), f.to_string()])
                .map_err(io::Error::from)?;
        }
        w.flush()?;
    }
    Ok(report)
}

fn write_scenario_csv<W: Write>(w: W, res: &ScenarioResult) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(w);
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    w.write_record([
        "function",
        "n",
        "noise",
        "arm",
        "replication",
        "seed",
        "mse",
        "basis_count",
        "lambda",
        "status",
    ])
    .map_err(io::Error::from)?;
    let head = [
        res.function.to_string(),
        res.n.to_string(),
        res.noise.clone(),
    ];
    for r in &res.runs {
        let status = r
            .error
            .clone()
            .map_or_else(|| "ok".into(), |e| format!("failed: {e}"));
        let row = [
            r.arm.to_string(),
            r.replication.to_string(),
            res.seed.to_string(),
            opt(r.mse),
            opt(r.basis_count.map(|d| d as f64)),
            opt(r.lambda),
            status,
        ];
        w.write_record(head.iter().chain(&row))
            .map_err(io::Error::from)?;
    }
    for s in &res.summaries {
        let row = [
            s.arm.to_string(),
            "median".into(),
            res.seed.to_string(),
            s.median_mse.to_string(),
            s.median_basis_count.to_string(),
            String::new(),
            format!("summary {}/{} ok", s.successes, s.successes + s.failures),
        ];
        w.write_record(head.iter().chain(&row))
            .map_err(io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<ScenarioResult, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let mut cfg: ScenarioConfig = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let res = run_scenario(&cfg).map_err(|e| match e {
        Error::InvalidArgument(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    write_scenario_csv(open_output(args.output.as_deref())?, &res)?;
    eprintln!(
        "{} n={} noise={} seed={} replications={}",
        res.function, res.n, res.noise, res.seed, res.replications
    );
    for s in &res.summaries {
        eprintln!(
            "  {:<14} median mse {:.6}  median basis count {}  ({}/{} ok)",
            s.arm.to_string(),
            s.median_mse,
            s.median_basis_count,
            s.successes,
            s.successes + s.failures
        );
    }
    Ok(res)
}

pub fn cmd_basis(args: BasisArgs) -> Result<(), CliError> {
    if args.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let kv = KnotVector::equally_spaced(args.lo, args.hi, args.knots, args.degree, args.boundary)?;
    let mut w = csv::Writer::from_writer(open_output(args.output.as_deref())?);
    let header: Vec<String> = std::iter::once("x".to_string())
        .chain((0..kv.dim()).map(|j| format!("b{j}")))
        .collect();
    w.write_record(&header).map_err(io::Error::from)?;
    for i in 0..args.grid {
        let x = if i + 1 == args.grid {
            args.hi
        } else {
            args.lo + (args.hi - args.lo) * i as f64 / (args.grid - 1) as f64
        };
        let row = eval_basis(&kv, x)?;
        w.write_record(std::iter::once(x).chain(row).map(|v| v.to_string()))
            .map_err(io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args).map(|_| ()),
        Command::Simulate(args) => cmd_simulate(args).map(|_| ()),
        Command::Basis(args) => cmd_basis(args),
    }
}
