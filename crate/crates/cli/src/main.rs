//! `barrierlab`: lemma checks, barrier construction and certification,
//! radial simulations and the radial transform, driven by a JSON config.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
//! 3 the solution reached the edge of the grid.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use barrierlab::barriers::BarrierKind;
use barrierlab::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "barrierlab", version, about = "Barrier certification and radial experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the doubling bounds and envelope inequalities; writes lemma_report.json.
    VerifyLemmas(Common),
    /// Select barrier constants; writes barrier_params.json.
    BuildBarrier(WithKind),
    /// Sample the barrier residual; writes residual_report.json and residual.csv.
    VerifyBarrier(WithKind),
    /// Run the radial solver; writes trajectory.csv, profiles.csv, decay.json, support.json.
    Simulate(Common),
    /// Simulate and compare against fitted barriers; adds comparison.json.
    Compare(Common),
    /// Build the radial transform; writes transform.csv and asymptotics.json.
    Transform(Common),
    /// Summarize the pass flags of existing artifacts; writes report.json.
    Report(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out_dir` from the config, else its directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WithKind {
    #[command(flatten)]
    common: Common,
    /// Overrides `barrier.kind` from the config.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Super,
    Sub,
}

impl From<KindArg> for BarrierKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Super => BarrierKind::Super,
            KindArg::Sub => BarrierKind::Sub,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidSpec(_) | Error::Json(_) | Error::Io(_) => 2,
        Error::GridTooSmall { .. } => 3,
        _ => 1,
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("TOOL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("TOOL_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    init_threads()?;
    let (common, kind) = match &cli.command {
        Command::BuildBarrier(w) | Command::VerifyBarrier(w) => (&w.common, w.kind.map(BarrierKind::from)),
        Command::VerifyLemmas(c)
        | Command::Simulate(c)
        | Command::Compare(c)
        | Command::Transform(c)
        | Command::Report(c) => (c, None),
    };
    let cfg = RunConfig::load(&common.config)?;
    let out = cfg.out_dir(common.out.as_deref());
    let kind = kind.unwrap_or(cfg.barrier.kind);
    match cli.command {
        Command::VerifyLemmas(_) => commands::verify_lemmas(&cfg, &out),
        Command::BuildBarrier(_) => commands::build_barrier(&cfg, kind, &out),
        Command::VerifyBarrier(_) => commands::verify_barrier(&cfg, kind, &out),
        Command::Simulate(_) => commands::simulate_cmd(&cfg, &out),
        Command::Compare(_) => commands::compare_cmd(&cfg, &out),
        Command::Transform(_) => commands::transform_cmd(&cfg, &out),
        Command::Report(_) => commands::report_cmd(&out),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
