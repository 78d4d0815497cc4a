//! `shoal bench`: the same circuit over both backends at two cache
//! capacities, reduced to median throughput per configuration.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Args;
use shoal_core::cluster::DEFAULT_GATE_TIMEOUT_SECS;
use shoal_core::engine::{
    bench_cache_pair, run_bench, BenchOptions, BenchReport, TraversalMode, REFERENCE_LOCAL_MB_S,
    REFERENCE_REMOTE_MB_S,
};

use crate::common::{human_bytes, load_manifest, CircuitArgs, ProfileArgs};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Directory of an initialized pool
    #[arg(long, env = "SHOAL_POOL_DIR")]
    pub pool_dir: PathBuf,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    /// Worker count, a power of two
    #[arg(long, default_value_t = 2, env = "SHOAL_WORKERS")]
    pub workers: u32,
    /// Repetitions per configuration; medians need at least three
    #[arg(long, default_value_t = 3)]
    pub reps: u32,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Strict read-compute-write loop instead of prefetch pipelining
    #[arg(long)]
    pub sequential: bool,
    /// Abort if a worker has not finished a gate within this budget
    #[arg(long, default_value_t = DEFAULT_GATE_TIMEOUT_SECS)]
    pub gate_timeout_secs: u64,
    /// Write the full grid as JSON here
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn execute(args: &BenchArgs) -> Result<ExitCode> {
    let manifest = load_manifest(&args.pool_dir)?;
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let circuit = args.circuit.load(manifest.n_qubits)?;
    if circuit.is_empty() {
        bail!("the circuit has no gates");
    }
    let (cache_small, cache_large) =
        bench_cache_pair(manifest.total_bytes(), manifest.chunk_bytes);

    let report = run_bench(&BenchOptions {
        pool_dir: args.pool_dir.clone(),
        circuit,
        workers: args.workers,
        reps: args.reps,
        mode: if args.sequential { TraversalMode::Sequential } else { TraversalMode::Pipelined },
        profile: args.profile.profile()?,
        cache_small_bytes: cache_small,
        cache_large_bytes: cache_large,
        gate_timeout: Duration::from_secs(args.gate_timeout_secs.max(1)),
    })
    .map_err(|e| anyhow::anyhow!("bench run failed: {e}"))?;

    print_report(&report);

    if let Some(path) = &args.json {
        let file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(file, &report)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("grid written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn print_report(report: &BenchReport) {
    println!(
        "{} qubits, {} workers, {} repetitions per cell, chunk {}",
        report.n_qubits,
        report.workers,
        report.reps,
        human_bytes(report.chunk_bytes),
    );
    println!(
        "{:<10} {:>9} {:>12} {:>10} {:>10} {:>10} {:>10}",
        "framework", "cache", "median MB/s", "compute", "read", "write", "writeback"
    );
    for cell in &report.cells {
        let m = &cell.median_totals;
        println!(
            "{:<10} {:>9} {:>12.1} {:>8.0}ms {:>8.0}ms {:>8.0}ms {:>8.0}ms",
            cell.framework,
            human_bytes(cell.cache_bytes),
            cell.median_speed_mb_s,
            m.compute_ms,
            m.read_ms,
            m.write_ms,
            m.writeback_ms,
        );
    }
    for cache in [report.cache_small_bytes, report.cache_large_bytes] {
        if let Some(speedup) = report.speedup(cache) {
            println!(
                "direct over emulated at {} cache: {speedup:.2}x",
                human_bytes(cache)
            );
        }
    }
    for framework in ["direct", "emulated"] {
        if let Some(sensitivity) = report.cache_sensitivity(framework) {
            println!(
                "cache doubling moves {framework} median by {:.1}%",
                sensitivity * 100.0
            );
        }
    }
    println!(
        "reference deployment: {REFERENCE_LOCAL_MB_S} MB/s local pool vs \
         {REFERENCE_REMOTE_MB_S} MB/s replicated remote store, a {:.2}x gap (+{:.0}%)",
        REFERENCE_LOCAL_MB_S / REFERENCE_REMOTE_MB_S,
        (REFERENCE_LOCAL_MB_S / REFERENCE_REMOTE_MB_S - 1.0) * 100.0,
    );
}
