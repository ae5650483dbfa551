//! Argument parsing and the `point`, `curve` and `verify` commands.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gaussrdp_core::model::{SweepOutcome, DEFAULT_NULL_TOLERANCE};
use gaussrdp_core::{
    solver, CurveSweep, PerceptionMetric, RateUnit, SolverConfig, SourceSpectrum, SweepMetadata, TradeoffQuery,
};

use crate::error::{CliError, Result};
use crate::grid::Axis;
use crate::{covfile, format, sweep, verify};

#[derive(Debug, Parser)]
#[command(
    name = "gaussrdp",
    version,
    about = "Rate-distortion-perception function of Gaussian vector sources"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a single (D, P) query.
    Point(RunArgs),
    /// Sweep a grid over D and/or P.
    Curve(RunArgs),
    /// Cross-check one query against the barrier oracle and Monte Carlo sampling.
    Verify(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Kl,
    W2,
    None,
}

impl From<MetricArg> for PerceptionMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Kl => PerceptionMetric::Kl,
            MetricArg::W2 => PerceptionMetric::W2,
            MetricArg::None => PerceptionMetric::Unconstrained,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    Nats,
    Bits,
}

#[derive(Debug, Args)]
#[group(skip)]
pub struct RunArgs {
    /// Comma-separated eigenvalues of the source covariance.
    #[arg(long, required_unless_present = "covariance", conflicts_with = "covariance")]
    pub lambdas: Option<String>,
    /// Covariance file: dimension L on the first line, then L rows of L reals.
    #[arg(long, value_name = "PATH")]
    pub covariance: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    /// Distortion budget: a number or `min:max:count[:linear|log]`.
    #[arg(long, allow_hyphen_values = true)]
    pub distortion: Axis,
    /// Perception budget (same syntax as --distortion); ignored for --metric none.
    #[arg(long, allow_hyphen_values = true)]
    pub perception: Option<Axis>,
    /// Defaults to json for point/verify and csv for curve.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long, value_enum, default_value = "nats")]
    pub rate_unit: UnitArg,
    /// Write the result here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Worker threads for grid evaluation and sampling.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo samples per component (verify only).
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Distortion constraint tolerance, relative to the total variance.
    #[arg(long)]
    pub tol_distortion: Option<f64>,
    #[arg(long)]
    pub tol_perception: Option<f64>,
    #[arg(long)]
    pub max_dual_iterations: Option<usize>,
}

impl RunArgs {
    pub fn metric(&self) -> PerceptionMetric {
        self.metric.into()
    }

    pub fn rate_unit(&self) -> RateUnit {
        match self.rate_unit {
            UnitArg::Nats => RateUnit::Nats,
            UnitArg::Bits => RateUnit::Bits,
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::default();
        if let Some(t) = self.tol_distortion {
            cfg.distortion_tol = t;
        }
        if let Some(t) = self.tol_perception {
            cfg.perception_tol = t;
        }
        if let Some(n) = self.max_dual_iterations {
            cfg.max_dual_iterations = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn spectrum(&self) -> Result<SourceSpectrum> {
        match (&self.lambdas, &self.covariance) {
            (Some(list), None) => Ok(SourceSpectrum::from_eigenvalues(&parse_lambdas(list)?)?),
            (None, Some(path)) => {
                let m = covfile::read(path)?;
                Ok(SourceSpectrum::from_covariance(&m, DEFAULT_NULL_TOLERANCE)?)
            }
            _ => Err(CliError::Input("give exactly one of --lambdas or --covariance".into())),
        }
    }

    pub fn metadata(&self) -> SweepMetadata {
        let source = match (&self.lambdas, &self.covariance) {
            (Some(l), _) => format!("lambdas={l}"),
            (_, Some(p)) => format!("covariance={}", p.display()),
            _ => String::new(),
        };
        SweepMetadata {
            source,
            rate_unit: self.rate_unit(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Perception axis; `inf` when the metric is `none`.
    pub fn perception_axis(&self) -> Result<Axis> {
        match (self.metric, self.perception) {
            (MetricArg::None, _) => Ok(Axis::Scalar(f64::INFINITY)),
            (_, Some(p)) => Ok(p),
            (_, None) => Err(CliError::Input("--perception is required unless --metric none".into())),
        }
    }

    fn scalar_query(&self) -> Result<TradeoffQuery> {
        let (Axis::Scalar(d), Axis::Scalar(p)) = (self.distortion, self.perception_axis()?) else {
            return Err(CliError::Input(
                "this command takes scalar --distortion and --perception; use curve for grids".into(),
            ));
        };
        Ok(TradeoffQuery::new(d, p, self.metric())?)
    }
}

pub fn parse_lambdas(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .enumerate()
        .map(|(i, f)| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("--lambdas field {}: invalid number '{}'", i + 1, f.trim())))
        })
        .collect()
}

fn emit(args: &RunArgs, text: &str) -> Result<()> {
    match &args.output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn point(args: &RunArgs) -> Result<String> {
    let s = args.spectrum()?;
    let q = args.scalar_query()?;
    let sol = solver::solve(&s, &q, &args.solver_config()?)?;
    let meta = args.metadata();
    match args.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => format::solution_to_json(&s, &q, &sol, &meta),
        OutputFormat::Csv => {
            let outcome = SweepOutcome::from_solution(&sol, meta.rate_unit);
            let one = CurveSweep {
                metadata: meta,
                queries: vec![q],
                solutions: vec![outcome],
            };
            format::sweep_to_csv(&one, s.len())
        }
    }
}

pub fn curve(args: &RunArgs) -> Result<String> {
    let p_axis = args.perception_axis()?;
    if !args.distortion.is_grid() && !p_axis.is_grid() {
        return Err(CliError::Input(
            "curve needs a grid on --distortion or --perception".into(),
        ));
    }
    let s = args.spectrum()?;
    let queries = sweep::grid_queries(args.metric(), &args.distortion.values(), &p_axis.values())?;
    let result = sweep::run(&s, queries, &args.solver_config()?, args.metadata(), args.jobs)?;
    match args.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => format::sweep_to_csv(&result, s.len()),
        OutputFormat::Json => format::sweep_to_json(&result),
    }
}

/// Returns the report and whether every check passed.
pub fn verify(args: &RunArgs) -> Result<(String, bool)> {
    if args.format == Some(OutputFormat::Csv) {
        return Err(CliError::Input("verify only writes json".into()));
    }
    let s = args.spectrum()?;
    let q = args.scalar_query()?;
    let cfg = args.solver_config()?;
    let report = sweep::pool(args.jobs)?.install(|| verify::run(&s, &q, &cfg, args.samples, args.seed))?;
    Ok((verify::to_json(&s, &q, &report)?, report.passed))
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Point(a) => emit(a, &point(a)?),
        Command::Curve(a) => emit(a, &curve(a)?),
        Command::Verify(a) => {
            let (text, passed) = verify(a)?;
            emit(a, &text)?;
            if passed {
                Ok(())
            } else {
                Err(CliError::VerifyFailed)
            }
        }
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gaussrdp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
