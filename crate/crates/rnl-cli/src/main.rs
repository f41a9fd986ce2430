//! Command-line surface: estimate dispersion matrices from CSV data, run
//! Monte-Carlo PRIAL scenarios, and backtest minimum-variance portfolios.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical or
//! convergence error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rnl_core::error::Error;
use rnl_core::numkit::{matrix_from_csv, matrix_to_csv, matrix_to_json, DataMatrix};
use rnl_core::portfolio::{attach_caps_csv, read_panel_csv, rolling_backtest, BacktestConfig};
use rnl_core::rnl::{normalize_rows, rcnl_estimate, rnl_estimate, RnlConfig, TraceScale};
use rnl_core::simlab::{
    estimate_dispersion, parse_scenario_config, run_scenario, EstimatorSettings, MethodId,
};
use rnl_core::tyler::{
    robust_linear_shrinkage_detailed, tyler_estimate_detailed, FixedPointConfig,
};
use rnl_core::{QisShrinker, SpdMatrix};

/// Environment variable supplying the default seed for `simulate`.
const SEED_ENV: &str = "RNL_SEED";

#[derive(Parser)]
#[command(
    name = "rnl",
    about = "Robust dispersion-matrix estimation, Monte-Carlo PRIAL lab and minimum-variance backtester",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a dispersion/covariance matrix from an n x p CSV data file.
    Estimate(EstimateArgs),
    /// Run a Monte-Carlo scenario file and write the PRIAL table.
    Simulate(SimulateArgs),
    /// Run a rolling minimum-variance backtest on a daily return panel.
    Backtest(BacktestArgs),
}

#[derive(Args, Clone, Copy)]
struct MethodOptions {
    /// Stationarity tolerance of the eigenvector iteration (rnl, rcnl).
    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,
    /// Iteration budget of the iterative estimators.
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Identity-shrinkage intensity in (0, 1] (rls).
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Successive-iterate tolerance of the fixed-point loops (tyler, rls).
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

impl MethodOptions {
    fn settings(&self, trace_scale: TraceScale) -> EstimatorSettings {
        EstimatorSettings {
            rho: self.rho,
            rnl: RnlConfig {
                epsilon: self.epsilon,
                max_iter: self.max_iter,
                trace_scale,
            },
            fixed_point: FixedPointConfig {
                tol: self.tol,
                max_iter: self.max_iter,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceScaleArg {
    /// Normalize the estimate to trace p (dispersion scale).
    P,
    /// Normalize to the trace of the sample covariance (covariance scale).
    Sample,
}

impl From<TraceScaleArg> for TraceScale {
    fn from(v: TraceScaleArg) -> Self {
        match v {
            TraceScaleArg::P => TraceScale::Dimension,
            TraceScaleArg::Sample => TraceScale::SampleCovariance,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV: one observation per line, comma-separated, no header.
    #[arg(long)]
    input: PathBuf,
    /// Estimation method: sample, ls, nl, tyler, rls, rnl or rcnl.
    #[arg(long, default_value = "rnl", value_parser = parse_method)]
    method: MethodId,
    /// Output path for the estimated matrix (a `.json` extension selects the
    /// JSON array-of-arrays format, anything else CSV).
    #[arg(long)]
    output: PathBuf,
    /// Trace normalization of rnl/rcnl estimates.
    #[arg(long, value_enum, default_value_t = TraceScaleArg::P)]
    trace_scale: TraceScaleArg,
    #[command(flatten)]
    options: MethodOptions,
    /// Print the eigenvector-iteration trace to standard error.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file with flat `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV with the header `estimator,nu,prial,se`.
    #[arg(long)]
    output: PathBuf,
    /// Worker-thread cap for replications (output is independent of it).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct BacktestArgs {
    /// Daily return panel CSV: header `date,ASSET...`, empty cell = missing.
    #[arg(long)]
    returns: PathBuf,
    /// Optional market-capitalization CSV of identical shape.
    #[arg(long)]
    caps: Option<PathBuf>,
    /// Covariance estimation method.
    #[arg(long, default_value = "rnl", value_parser = parse_method)]
    method: MethodId,
    /// Estimation window in trading days.
    #[arg(long, default_value_t = 252)]
    window: usize,
    /// Holding period in trading days.
    #[arg(long, default_value_t = 21)]
    holding: usize,
    /// Number of assets selected each month.
    #[arg(long, default_value_t = 100)]
    universe: usize,
    /// Maximum missing days tolerated in the estimation window.
    #[arg(long, default_value_t = 32)]
    max_missing: usize,
    /// Output path of the JSON report.
    #[arg(long)]
    report: PathBuf,
    /// Optional output path of the one-line CSV summary.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    options: MethodOptions,
}

fn parse_method(s: &str) -> Result<MethodId, String> {
    s.parse::<MethodId>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Backtest(args) => cmd_backtest(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_)
        | Error::DegenerateInput(_)
        | Error::Io(_)
        | Error::Parse(_) => 3,
        Error::UnsupportedRegime(_)
        | Error::Decomposition(_)
        | Error::Numerical(_)
        | Error::NoConvergence { .. }
        | Error::Estimation(_) => 4,
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), Error> {
    let raw = matrix_from_csv(&std::fs::read_to_string(&args.input)?)?;
    let data = DataMatrix::new(raw)?;
    let settings = args.options.settings(TraceScale::from(args.trace_scale));

    let started = Instant::now();
    let (estimate, iterations, final_criterion): (SpdMatrix, Option<usize>, Option<f64>) =
        match args.method {
            MethodId::Rnl | MethodId::Rcnl => {
                let fit = if args.method == MethodId::Rnl {
                    rnl_estimate(&data, &QisShrinker, &settings.rnl)?
                } else {
                    rcnl_estimate(&data, &QisShrinker, &settings.rnl)?
                };
                let trace = fit.iteration_trace();
                if args.verbose {
                    for (k, (c, f)) in trace
                        .criterion_history
                        .iter()
                        .zip(trace.objective_history.iter().skip(1))
                        .enumerate()
                    {
                        eprintln!("iteration {:>4}: criterion {c:.6e} objective {f:.12}", k + 1);
                    }
                }
                let iters = trace.iterations;
                let criterion = trace.criterion_history.last().copied();
                (fit.h().clone(), Some(iters), criterion)
            }
            MethodId::Tyler => {
                let z = normalize_rows(&data)?;
                let (h, report) = tyler_estimate_detailed(z.data(), &settings.fixed_point)?;
                (h, Some(report.iterations), Some(report.residual))
            }
            MethodId::Rls => {
                let z = normalize_rows(&data)?;
                let (h, report) = robust_linear_shrinkage_detailed(
                    z.data(),
                    settings.rho,
                    &settings.fixed_point,
                )?;
                (h, Some(report.iterations), Some(report.residual))
            }
            other => (estimate_dispersion(other, &data, &settings)?, None, None),
        };
    let wall = started.elapsed().as_secs_f64();

    let text = if args
        .output
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        matrix_to_json(estimate.values())
    } else {
        matrix_to_csv(estimate.values())
    };
    std::fs::write(&args.output, text)?;

    let metadata = serde_json::json!({
        "method": args.method.id(),
        "n": data.n(),
        "p": data.p(),
        "trace": estimate.trace(),
        "iterations": iterations,
        "final_criterion": final_criterion,
        "wall_time_s": wall,
        "output": args.output.display().to_string(),
    });
    println!("{metadata}");
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let fallback_seed = std::env::var(SEED_ENV)
        .ok()
        .and_then(|v| v.parse::<u64>().ok())
        .unwrap_or(0);
    let cfg = parse_scenario_config(&std::fs::read_to_string(&args.config)?, fallback_seed)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build worker pool: {e}")))?;
    let table = pool.install(|| run_scenario(&cfg))?;
    std::fs::write(&args.output, table.to_csv())?;
    eprintln!(
        "wrote {} rows to {}",
        table.rows.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_backtest(args: &BacktestArgs) -> Result<(), Error> {
    let mut panel = read_panel_csv(&args.returns)?;
    if let Some(caps) = &args.caps {
        panel = attach_caps_csv(panel, &std::fs::read_to_string(caps)?)?;
    }
    let cfg = BacktestConfig {
        estimation_window: args.window,
        holding_period: args.holding,
        universe_size: args.universe,
        max_missing: args.max_missing,
    };
    let settings = args.options.settings(TraceScale::Dimension);
    let method = args.method;
    let estimator = move |d: &DataMatrix| -> Result<SpdMatrix, Error> {
        estimate_dispersion(method, d, &settings)
    };
    let report = rolling_backtest(&panel, &cfg, &estimator)?;
    std::fs::write(&args.report, report.to_json())?;
    if let Some(summary) = &args.summary {
        std::fs::write(summary, report.summary_csv())?;
    }
    eprintln!(
        "backtest: {} months ({} flagged), SD {:.4}, TO {}",
        report.months.len(),
        report.flagged_months,
        report.metrics.sd,
        report
            .average_turnover
            .map(|t| format!("{t:.4}"))
            .unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}
