//! `shoal` — out-of-core state-vector simulation over a shared storage
//! pool, from the command line.
//!
//! Subcommands: `init` allocates a pool, `run` executes a circuit and
//! reports per-gate metrics, `bench` compares the direct and emulated
//! backends, `verify` checks a run against the in-memory oracle, and
//! `analyze` prints closed-form sizing estimates. A hidden `worker`
//! subcommand is what `run` spawns for each child process.

mod analyze;
mod bench;
mod common;
mod init;
mod run;
mod verify;
mod worker;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "shoal",
    version,
    about = "Full-amplitude quantum circuit simulation through a tiered storage pool",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate a pool: shard files plus a manifest, reset to a basis state
    Init(init::InitArgs),
    /// Execute a circuit with distributed workers and report per-gate metrics
    Run(run::RunArgs),
    /// Compare direct and emulated backends at two cache capacities
    Bench(bench::BenchArgs),
    /// Re-run a circuit against the in-memory oracle and compare amplitudes
    Verify(verify::VerifyArgs),
    /// Closed-form throughput, transfer, and cost estimates for large states
    Analyze(analyze::AnalyzeArgs),
    /// Internal: one worker process of a `run` invocation
    #[command(hide = true)]
    Worker(worker::WorkerArgs),
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes, the way other Unix
    // filters do, instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Init(args) => init::execute(&args),
        Command::Run(args) => run::execute(&args),
        Command::Bench(args) => bench::execute(&args),
        Command::Verify(args) => verify::execute(&args),
        Command::Analyze(args) => analyze::execute(&args),
        Command::Worker(args) => worker::execute(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
