//! `dyadic-lab`: closed forms, simulations and verification suites for the
//! forced linear stochastic dyadic model.
//!
//! Exit codes: 0 success, 1 failed verification or I/O error, 2 usage
//! error, 3 numeric-range error.

mod commands;
mod config;
mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use dyadic_core::crossval::Suite;
use dyadic_core::galerkin::{ForcingOrder, SchemeKind};
use dyadic_core::Boundary;

use config::{OutputFormat, Settings};

/// A bad flag, config value or combination of them.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Some verification metrics failed; the table was already printed.
#[derive(Debug)]
pub struct VerificationFailed(pub usize);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} metric(s) failed", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

#[derive(Debug, Parser)]
#[command(name = "dyadic-lab", version, about = "Simulate and verify the forced linear stochastic dyadic model")]
struct Cli {
    /// JSON file with default values for any option (a run manifest works too).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print closed-form values.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Ensemble of Galerkin SDE paths; writes second-moment and energy series.
    SimulateSde(SdeArgs),
    /// Solve the second-moment equations; writes the moment series.
    SolveMoments(MomentArgs),
    /// Simulate the birth-death chain; writes survival and occupation statistics.
    SimulateChain(ChainArgs),
    /// Run a verification suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct ModelFlags {
    /// Wavenumber ratio, k_n = lambda^n (must exceed 1).
    #[arg(long)]
    lambda: Option<f64>,
    /// Forcing amplitude on mode 1 [default: 0].
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct OutputFlags {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Stationary second moments s_1..s_n.
    Stationary {
        #[command(flatten)]
        model: ModelFlags,
        /// Number of modes to print.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Expected time E_i(T_j) the chain spends in j starting from i.
    Occupation {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        i: u32,
        #[arg(long)]
        j: u32,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Probability that the chain started at i never visits j.
    Pi {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        i: u32,
        #[arg(long)]
        j: u32,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Upper bound on the survival probability at time t, and the time where it reaches 1.
    SurvivalBound {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
}

#[derive(Debug, Args)]
struct SdeArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Number of modes kept [default: 16].
    #[arg(long)]
    n_modes: Option<usize>,
    /// conservative or absorbing closure at the last mode [default: conservative].
    #[arg(long)]
    boundary: Option<Boundary>,
    /// ito_splitting, cayley_stratonovich or rotation_splitting [default: rotation_splitting].
    #[arg(long)]
    scheme: Option<SchemeKind>,
    /// Time step [default: chosen from the stiffest pair].
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Number of equal sampling intervals.
    #[arg(long)]
    samples: Option<usize>,
    /// Substeps per dt, as a power of two.
    #[arg(long)]
    refinement: Option<u32>,
    /// pre, post or strang (Cayley scheme only).
    #[arg(long)]
    forcing_order: Option<ForcingOrder>,
    /// Two-level Richardson extrapolation of the second moments.
    #[arg(long)]
    richardson: Option<bool>,
    /// Number of paths [default: 1000].
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initial condition: zero, e<k>, geom:<a>:<r>, stationary, gauss:<spec> or v1,v2,...
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Debug, Args)]
struct MomentArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Number of modes kept [default: 16].
    #[arg(long)]
    n_modes: Option<usize>,
    /// conservative or absorbing closure at the last mode [default: conservative].
    #[arg(long)]
    boundary: Option<Boundary>,
    /// Initial second moments, same forms as --x0.
    #[arg(long, allow_hyphen_values = true)]
    u0: Option<String>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Number of equal output intervals [default: 10].
    #[arg(long)]
    checkpoints: Option<usize>,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Debug, Args)]
struct ChainArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Initial state [default: 1].
    #[arg(long)]
    start: Option<u32>,
    /// Simulation horizon; `inf` runs every path to explosion.
    #[arg(long)]
    horizon: Option<f64>,
    /// Reaching this state counts as explosion.
    #[arg(long)]
    cap: Option<u32>,
    /// Number of paths [default: 10000].
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Survival times, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// oracles, energy, representation, dissipation, invariant, contraction or all.
    suite: Suite,
    /// Master seed [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the full reports here.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

fn model(m: &ModelFlags) -> Settings {
    Settings {
        lambda: m.lambda,
        sigma: m.sigma,
        ..Settings::default()
    }
}

fn with_output(s: Settings, o: &OutputFlags) -> Settings {
    Settings {
        out: o.out.clone(),
        format: o.format,
        ..s
    }
}

fn subcommand_usage(path: &[&str]) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    for name in path {
        match cmd.find_subcommand(name) {
            Some(sub) => cmd = sub.clone(),
            None => break,
        }
    }
    cmd.render_usage().to_string()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => config::load(path)?,
        None => Settings::default(),
    };
    match cli.command {
        Command::Oracle(oracle) => {
            let (flags, query, format) = match &oracle {
                OracleCommand::Stationary { model: m, n, format } => (
                    Settings {
                        n_modes: *n,
                        ..model(m)
                    },
                    commands::OracleQuery::Stationary,
                    *format,
                ),
                OracleCommand::Occupation { model: m, i, j, format } => {
                    (model(m), commands::OracleQuery::Occupation(*i, *j), *format)
                }
                OracleCommand::Pi { model: m, i, j, format } => (model(m), commands::OracleQuery::Pi(*i, *j), *format),
                OracleCommand::SurvivalBound { model: m, t, format } => {
                    (model(m), commands::OracleQuery::SurvivalBound(*t), *format)
                }
            };
            let settings = file.overlay(Settings { format, ..flags });
            commands::oracle(&settings, query)
        }
        Command::SimulateSde(a) => {
            let flags = Settings {
                n_modes: a.n_modes,
                boundary: a.boundary,
                scheme: a.scheme,
                dt: a.dt,
                t_final: a.t_final,
                samples: a.samples,
                refinement: a.refinement,
                forcing_order: a.forcing_order,
                richardson: a.richardson,
                paths: a.paths,
                seed: a.seed,
                x0: a.x0.clone(),
                ..model(&a.model)
            };
            commands::simulate_sde(&file.overlay(with_output(flags, &a.output)))
        }
        Command::SolveMoments(a) => {
            let flags = Settings {
                n_modes: a.n_modes,
                boundary: a.boundary,
                u0: a.u0.clone(),
                t_final: a.t_final,
                checkpoints: a.checkpoints,
                ..model(&a.model)
            };
            commands::solve_moments(&file.overlay(with_output(flags, &a.output)))
        }
        Command::SimulateChain(a) => {
            let flags = Settings {
                start: a.start,
                horizon: a.horizon,
                cap: a.cap,
                paths: a.paths,
                seed: a.seed,
                grid: a.grid.clone(),
                ..model(&a.model)
            };
            commands::simulate_chain(&file.overlay(with_output(flags, &a.output)))
        }
        Command::Verify(a) => {
            let flags = Settings {
                seed: a.seed,
                out: a.out.clone(),
                format: a.format,
                ..Settings::default()
            };
            let write = a.out.is_some() || file.out.is_some();
            commands::verify(a.suite, &file.overlay(flags), write)
        }
    }
}

fn find<T: std::error::Error + 'static>(err: &anyhow::Error) -> Option<&T> {
    err.chain().find_map(|e| e.downcast_ref::<T>())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if find::<UsageError>(err).is_some() {
        return 2;
    }
    if find::<VerificationFailed>(err).is_some() {
        return 1;
    }
    match find::<dyadic_core::Error>(err) {
        Some(e) if e.is_range() => 3,
        Some(dyadic_core::Error::InvalidParameter { .. }) => 2,
        _ => 1,
    }
}

fn configure_threads() -> Result<(), UsageError> {
    let Ok(raw) = std::env::var("DYADIC_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("DYADIC_LAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| UsageError(format!("DYADIC_LAB_THREADS: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let path: &[&str] = match &cli.command {
        Command::Oracle(OracleCommand::Stationary { .. }) => &["oracle", "stationary"],
        Command::Oracle(OracleCommand::Occupation { .. }) => &["oracle", "occupation"],
        Command::Oracle(OracleCommand::Pi { .. }) => &["oracle", "pi"],
        Command::Oracle(OracleCommand::SurvivalBound { .. }) => &["oracle", "survival-bound"],
        Command::SimulateSde(_) => &["simulate-sde"],
        Command::SolveMoments(_) => &["solve-moments"],
        Command::SimulateChain(_) => &["simulate-chain"],
        Command::Verify(_) => &["verify"],
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e:#}");
            if code == 2 {
                eprintln!("\n{}", subcommand_usage(path));
            }
            ExitCode::from(code)
        }
    }
}
