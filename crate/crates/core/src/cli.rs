//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or configuration error, 2 I/O error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::backtest::{self, AccumulationMode, BacktestConfig, ReturnsPanel, StrategyReturns};
use crate::error::{Error, Result};
use crate::io::{self, FactorData};
use crate::metrics::{self, BacktestReport, FactorPanel, Tail};
use crate::solver::{self, InitialPosition, SolverParams};
use crate::strategies::Strategy;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ltpss",
    version,
    about = "Sparse-spectrum linear trading positions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the position of a given prediction matrix.
    Solve(SolveArgs),
    /// Backtest one or more strategies and report their metrics.
    Backtest(BacktestArgs),
    /// Mean return of each single principal portfolio.
    Ppscan(PpscanArgs),
    /// Sharpe ratio of the sparse-spectrum strategy for several eta values.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SolverFlags {
    #[arg(long, default_value_t = solver::DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = solver::DEFAULT_ETA)]
    eta: f64,
    #[arg(long, default_value_t = solver::DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = solver::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = solver::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Initial position: `pp:<l>` (sum of the first l principal portfolios) or `zero`.
    #[arg(long, default_value = "pp:3")]
    init: InitSpec,
}

impl SolverFlags {
    fn params(&self) -> SolverParams {
        SolverParams {
            beta: self.beta,
            eta: self.eta,
            theta: self.theta,
            max_iters: self.max_iters,
            tol: self.tol,
            initial: self.init.0.clone(),
            unconstrained: false,
        }
    }
}

#[derive(Debug, Clone)]
struct InitSpec(InitialPosition);

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "zero" {
            return Ok(InitSpec(InitialPosition::Zero));
        }
        if let Some(l) = s.strip_prefix("pp:") {
            let l: usize = l
                .parse()
                .map_err(|_| format!("bad principal portfolio count in {s:?}"))?;
            if l == 0 {
                return Err("principal portfolio count must be at least 1".into());
            }
            return Ok(InitSpec(InitialPosition::PrincipalPortfolios(l)));
        }
        Err(format!("expected pp:<l> or zero, got {s:?}"))
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Headerless N×N prediction matrix.
    #[arg(long)]
    pi: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Drop the spectral-norm constraint (proximal-gradient comparator, diagnostic only).
    #[arg(long)]
    unconstrained: bool,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataFlags {
    /// Returns CSV: `date,<asset>,...`.
    #[arg(long)]
    data: PathBuf,
    /// Factor CSV: `date,MKT,SMB,HML,RMW,CMA,RF`.
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Number of consecutive periods merged into one trading period.
    #[arg(long = "accumulate", default_value_t = 1)]
    accumulate: usize,
    /// Estimation window, in trading periods.
    #[arg(long, default_value_t = backtest::DEFAULT_WINDOW)]
    window: usize,
    /// Risk-free rate for the Sharpe ratio; defaults to the mean RF factor, or 0.
    #[arg(long)]
    rf: Option<f64>,
    /// Sum returns within a block instead of compounding them.
    #[arg(long)]
    sum_accumulate: bool,
}

impl DataFlags {
    fn mode(&self) -> AccumulationMode {
        if self.sum_accumulate {
            AccumulationMode::Sum
        } else {
            AccumulationMode::Compound
        }
    }

    fn config(&self, strategy: Strategy) -> BacktestConfig {
        BacktestConfig {
            window: self.window,
            strategy,
            accumulation: self.accumulate,
            mode: self.mode(),
        }
    }
}

#[derive(Debug, Args)]
struct BacktestArgs {
    #[command(flatten)]
    data: DataFlags,
    /// Comma-separated list of sf, cf, pp:<l>, ppcomp:<n>, ltpss.
    #[arg(long, value_delimiter = ',', required = true)]
    strategy: Vec<String>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Test alpha against the lower tail instead of the upper tail.
    #[arg(long)]
    left_tail: bool,
    /// Output directory for strategy_returns.csv and report.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PpscanArgs {
    #[command(flatten)]
    data: DataFlags,
    /// Range of principal portfolio orders, e.g. `1..10`.
    #[arg(long)]
    orders: OrderRange,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy)]
struct OrderRange(usize, usize);

impl FromStr for OrderRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("expected <from>..<to>, got {s:?}"))?;
        let a: usize = a
            .trim()
            .parse()
            .map_err(|_| format!("bad range start in {s:?}"))?;
        let b: usize = b
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| format!("bad range end in {s:?}"))?;
        if a == 0 || b < a {
            return Err(format!("range must satisfy 1 <= from <= to, got {s:?}"));
        }
        Ok(OrderRange(a, b))
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataFlags,
    /// Comma-separated eta values.
    #[arg(long, value_delimiter = ',', required = true)]
    eta: Vec<f64>,
    #[arg(long, default_value_t = solver::DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = solver::DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = solver::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = solver::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value = "pp:3")]
    init: InitSpec,
    #[arg(long)]
    out: PathBuf,
}

/// Parses a strategy spec: `sf`, `cf`, `pp:<l>` (`pp` alone means 3),
/// `ppcomp:<n>`, `ltpss`.
pub fn parse_strategy(spec: &str, ltpss: &SolverParams) -> Result<Strategy> {
    let spec = spec.trim();
    let count = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::config(format!("bad count in strategy {spec:?}")))
    };
    match spec {
        "sf" => Ok(Strategy::SimpleFactor),
        "cf" => Ok(Strategy::ClosedForm),
        "pp" => Ok(Strategy::PrincipalPortfolios(solver::DEFAULT_PP_COUNT)),
        "ltpss" => Ok(Strategy::Ltpss(ltpss.clone())),
        _ => {
            if let Some(l) = spec.strip_prefix("pp:") {
                Ok(Strategy::PrincipalPortfolios(count(l)?))
            } else if let Some(n) = spec.strip_prefix("ppcomp:") {
                Ok(Strategy::PpComponent(count(n)?))
            } else {
                Err(Error::config(format!(
                    "unknown strategy {spec:?} (expected sf, cf, pp:<l>, ppcomp:<n> or ltpss)"
                )))
            }
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Domain(_) | Error::SingularDesign(_) | Error::UndefinedMetric(_) => EXIT_NUMERIC,
        Error::Dimension(_)
        | Error::Config(_)
        | Error::InsufficientHistory { .. }
        | Error::Validation { .. } => EXIT_INVALID,
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// code. Errors are reported on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Backtest(a) => cmd_backtest(a),
        Command::Ppscan(a) => cmd_ppscan(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let pi = io::load_matrix_csv(&a.pi)?;
    let params = SolverParams {
        unconstrained: a.unconstrained,
        ..a.solver.params()
    };
    let sol = solver::solve(&pi, &params)?;
    io::write_matrix_csv(&a.out, &sol.position)?;
    if let Some(trace) = &a.trace {
        io::write_trace_csv(trace, &sol.trace)?;
    }
    eprintln!(
        "{} after {} iterations, final gap {:.3e}",
        sol.status(),
        sol.trace.iterations(),
        sol.trace.records.last().map(|r| r.gap).unwrap_or(f64::NAN)
    );
    Ok(())
}

/// Loaded inputs shared by the data-driven subcommands.
struct Inputs {
    panel: ReturnsPanel,
    factors: Option<FactorData>,
}

fn load_inputs(flags: &DataFlags) -> Result<Inputs> {
    let panel = io::load_returns_csv(&flags.data)?;
    let factors = match &flags.factors {
        None => None,
        Some(p) => {
            let raw = io::load_factors_csv(p)?;
            // Factors given at the raw return frequency are merged with the
            // same blocks; otherwise they must already be on trading dates.
            if flags.accumulate > 1 && raw.dates == panel.dates() {
                Some(raw.accumulate(flags.accumulate, flags.mode())?)
            } else {
                Some(raw)
            }
        }
    };
    Ok(Inputs { panel, factors })
}

fn factor_panel(
    inputs: &Inputs,
    flags: &DataFlags,
    dates: &[String],
) -> Result<Option<FactorPanel>> {
    let Some(factors) = &inputs.factors else {
        return Ok(None);
    };
    let sf = backtest::run(&inputs.panel, &flags.config(Strategy::SimpleFactor))?;
    if sf.dates != dates {
        return Err(Error::dim("simple-factor and strategy dates differ"));
    }
    factors.align(dates, &sf.values).map(Some)
}

fn risk_free(flags: &DataFlags, factors: Option<&FactorPanel>) -> Result<f64> {
    match (flags.rf, factors) {
        (Some(rf), _) => Ok(rf),
        (None, Some(f)) => f.mean_risk_free(),
        (None, None) => Ok(0.0),
    }
}

fn cmd_backtest(a: BacktestArgs) -> Result<()> {
    let params = a.solver.params();
    let strategies: Vec<Strategy> = a
        .strategy
        .iter()
        .map(|s| parse_strategy(s, &params))
        .collect::<Result<_>>()?;
    let inputs = load_inputs(&a.data)?;
    let series: Vec<StrategyReturns> = strategies
        .iter()
        .map(|s| backtest::run(&inputs.panel, &a.data.config(s.clone())))
        .collect::<Result<_>>()?;

    let dates = &series[0].dates;
    let factors = factor_panel(&inputs, &a.data, dates)?;
    let rf = risk_free(&a.data, factors.as_ref())?;
    let tail = if a.left_tail {
        Tail::Lower
    } else {
        Tail::Upper
    };
    let report = BacktestReport {
        rows: series
            .iter()
            .map(|s| metrics::evaluate(&s.strategy, &s.values, factors.as_ref(), rf, tail))
            .collect::<Result<_>>()?,
    };

    let out = io::ensure_dir(&a.out)?;
    io::write_returns_csv(out.join("strategy_returns.csv"), &series)?;
    io::write_report(out.join("report.csv"), &report)?;
    Ok(())
}

fn cmd_ppscan(a: PpscanArgs) -> Result<()> {
    let inputs = load_inputs(&a.data)?;
    let OrderRange(from, to) = a.orders;
    if to > inputs.panel.n_assets() {
        return Err(Error::config(format!(
            "orders go up to {to} but the panel has {} assets",
            inputs.panel.n_assets()
        )));
    }
    let mut rows = Vec::new();
    for n in from..=to {
        let s = backtest::run(&inputs.panel, &a.data.config(Strategy::PpComponent(n)))?;
        let mr = metrics::mean_return(&s.values)?;
        let factors = factor_panel(&inputs, &a.data, &s.dates)?;
        let rf = risk_free(&a.data, factors.as_ref())?;
        let sr = metrics::sharpe_ratio(&s.values, rf).ok();
        rows.push(vec![
            n.to_string(),
            io::format_metric(mr),
            sr.map(io::format_metric).unwrap_or_default(),
        ]);
    }
    io::write_table(&a.out, &["order", "MR", "SR"], &rows)
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let inputs = load_inputs(&a.data)?;
    let mut rows = Vec::new();
    for &eta in &a.eta {
        let params = SolverParams {
            beta: a.beta,
            eta,
            theta: a.theta,
            tol: a.tol,
            max_iters: a.max_iters,
            initial: a.init.0.clone(),
            unconstrained: false,
        };
        params.validate()?;
        let s = backtest::run(&inputs.panel, &a.data.config(Strategy::Ltpss(params)))?;
        let factors = factor_panel(&inputs, &a.data, &s.dates)?;
        let rf = risk_free(&a.data, factors.as_ref())?;
        let mr = metrics::mean_return(&s.values)?;
        let sr = metrics::sharpe_ratio(&s.values, rf).ok();
        rows.push(vec![
            io::format_exact(eta),
            io::format_metric(mr),
            sr.map(io::format_metric).unwrap_or_default(),
        ]);
    }
    io::write_table(&a.out, &["eta", "MR", "SR"], &rows)
}
