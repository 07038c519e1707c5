//! `mjls`: stability, Riccati, attenuation and simulation runs from a JSON
//! model config.
//!
//! Every invocation prints exactly one JSON object on stdout and exits with
//! 0 (success, stable or verified), 1 (usage, input or premise error),
//! 2 (unstable, inconclusive or sign-condition failure) or 3 (a solver did
//! not converge). Diagnostics go to stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mjls::{MjlsError, Quadrature};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "mjls", version, about = "Markov jump linear system analysis on Borel mode spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral mean-square stability tests and a Lyapunov certificate.
    AnalyzeStability {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the coupled algebraic Riccati equation at one attenuation level.
    SolveAre {
        #[command(flatten)]
        common: Common,
        /// Attenuation level; falls back to the config's `gamma`.
        #[arg(long)]
        gamma: Option<f64>,
        /// Stopping accuracy; falls back to the config's `eps`, then 1e-5.
        #[arg(long)]
        eps: Option<f64>,
        /// Also check the finite-horizon condition over this many steps.
        #[arg(long)]
        horizon: Option<usize>,
        /// Recompute both horizons from zero every round.
        #[arg(long)]
        fidelity_algorithm1: bool,
    },
    /// Monte Carlo trajectories, energy ratios and second moments.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of Monte Carlo trajectories
        #[arg(long, default_value_t = 100)]
        traj: usize,
        /// Number of steps; `--horizon` is accepted as an alias.
        #[arg(long, alias = "horizon")]
        steps: Option<usize>,
        /// Master seed; falls back to the config's `seed`, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// zero | exp(rate) | impulse(k0) | file(path)
        #[arg(long, default_value = "zero")]
        disturbance: String,
    },
    /// Bisection bracket for the smallest feasible attenuation level.
    HinfBound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        fidelity_algorithm1: bool,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model config (JSON).
    pub config: PathBuf,
    /// Directory for report.json and CSV outputs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the node count of every component.
    #[arg(long)]
    pub grid_nodes: Option<usize>,
    /// Override the quadrature rule (midpoint or trapezoid)
    #[arg(long)]
    pub quadrature: Option<Quadrature>,
    /// Print the effective config (after overrides) and exit.
    #[arg(long)]
    pub dump_config: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AnalyzeStability { .. } => "analyze-stability",
            Command::SolveAre { .. } => "solve-are",
            Command::Simulate { .. } => "simulate",
            Command::HinfBound { .. } => "hinf-bound",
        }
    }
}

/// Result of a command that ran to completion.
pub struct Outcome {
    pub exit: u8,
    pub status: &'static str,
    pub report: Value,
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<MjlsError>() {
        Some(MjlsError::NotConverged { .. } | MjlsError::PowerIterationDiverged { .. }) => 3,
        Some(MjlsError::SignCondition { .. } | MjlsError::Unstable { .. }) => 2,
        _ => 1,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MJLS_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("MJLS_THREADS must be a positive integer, got `{v}`"))?;
        anyhow::ensure!(n > 0, "MJLS_THREADS must be a positive integer, got `{v}`");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn emit(value: &Value) {
    use std::io::Write;
    // A closed pipe on the reader's side is not our failure; drop the output.
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let exit = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            eprint!("{e}");
            let status = if exit == 0 { "ok" } else { "error" };
            emit(&json!({ "command": null, "status": status, "exit_code": exit,
                          "error": (exit != 0).then(|| e.kind().to_string()) }));
            return ExitCode::from(exit);
        }
    };
    let name = cli.command.name();
    let result = configure_threads().and_then(|()| commands::run(&cli.command));
    let (exit, value) = match result {
        Ok(outcome) => {
            let mut v = json!({ "command": name, "status": outcome.status, "exit_code": outcome.exit });
            if let (Value::Object(map), Value::Object(extra)) = (&mut v, outcome.report) {
                map.extend(extra);
            }
            (outcome.exit, v)
        }
        Err(err) => {
            let exit = exit_code_for(&err);
            let message = format!("{err:#}");
            eprintln!("error: {message}");
            let status = match exit {
                2 => "sign_failure_or_unstable",
                3 => "not_converged",
                _ => "error",
            };
            (exit, json!({ "command": name, "status": status, "exit_code": exit, "error": message }))
        }
    };
    emit(&value);
    ExitCode::from(exit)
}
