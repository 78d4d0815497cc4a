//! Hidden `shoal worker`: one worker process of a distributed run.
//! Spawned by `shoal run`; connects back to the coordinator, executes
//! its share of every gate, and exits when released.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use shoal_core::cluster::{run_worker, WorkerConfig};
use shoal_core::engine::TraversalMode;
use shoal_core::state::Circuit;

use crate::common::{load_manifest, BackendArgs};

#[derive(Args, Debug)]
pub struct WorkerArgs {
    /// Coordinator address to connect back to
    #[arg(long)]
    pub connect: SocketAddr,
    /// This worker's node id
    #[arg(long)]
    pub node: u32,
    /// Directory of the shared pool
    #[arg(long)]
    pub pool_dir: PathBuf,
    /// Circuit file, identical to the coordinator's
    #[arg(long)]
    pub circuit: PathBuf,
    /// Cache capacity in bytes
    #[arg(long)]
    pub cache_bytes: u64,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Strict read-compute-write loop instead of prefetch pipelining
    #[arg(long)]
    pub sequential: bool,
}

pub fn execute(args: &WorkerArgs) -> Result<ExitCode> {
    let manifest = load_manifest(&args.pool_dir)?;
    let text = std::fs::read_to_string(&args.circuit)
        .with_context(|| format!("reading circuit file {}", args.circuit.display()))?;
    let circuit = Circuit::parse(&text, manifest.n_qubits)
        .with_context(|| format!("parsing circuit file {}", args.circuit.display()))?;
    run_worker(
        args.connect,
        args.node,
        &WorkerConfig {
            pool_dir: args.pool_dir.clone(),
            circuit,
            cache_bytes: args.cache_bytes,
            backend: args.backend.config()?,
            mode: if args.sequential {
                TraversalMode::Sequential
            } else {
                TraversalMode::Pipelined
            },
        },
    )
    .with_context(|| format!("worker {} failed", args.node))?;
    Ok(ExitCode::SUCCESS)
}
