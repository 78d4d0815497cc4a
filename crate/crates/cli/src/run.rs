//! `shoal run`: execute a circuit across workers and report metrics.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Args;
use shoal_core::cluster::{
    run_cluster, ClusterOptions, WorkerLaunch, DEFAULT_GATE_TIMEOUT_SECS,
};
use shoal_core::engine::{RunReport, TraversalMode};
use shoal_core::state::Circuit;
use shoal_core::storage::default_cache_bytes;

use crate::common::{circuit_to_text, human_bytes, load_manifest, BackendArgs, CircuitArgs};

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Directory of an initialized pool
    #[arg(long, env = "SHOAL_POOL_DIR")]
    pub pool_dir: PathBuf,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    /// Worker count, a power of two
    #[arg(long, default_value_t = 2, env = "SHOAL_WORKERS")]
    pub workers: u32,
    /// Per-worker cache capacity in bytes [default: a quarter of the
    /// pool, at most 512 MiB]
    #[arg(long, env = "SHOAL_CACHE_BYTES")]
    pub cache_bytes: Option<u64>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Circuit passes executed back to back in one session
    #[arg(long, default_value_t = 1)]
    pub reps: u32,
    /// Strict read-compute-write loop instead of prefetch pipelining
    #[arg(long)]
    pub sequential: bool,
    /// Run workers as in-process threads instead of child processes
    #[arg(long)]
    pub worker_threads: bool,
    /// Abort if a worker has not finished a gate within this budget
    #[arg(long, default_value_t = DEFAULT_GATE_TIMEOUT_SECS)]
    pub gate_timeout_secs: u64,
    /// Write the per-gate metrics CSV here; "-" streams it to stdout
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the full run report as JSON here
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn execute(args: &RunArgs) -> Result<ExitCode> {
    let manifest = load_manifest(&args.pool_dir)?;
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let single = args.circuit.load(manifest.n_qubits)?;
    if single.is_empty() {
        bail!("the circuit has no gates");
    }
    let mut gates = Vec::with_capacity(single.len() * args.reps as usize);
    for _ in 0..args.reps {
        gates.extend_from_slice(single.gates());
    }
    let circuit = Circuit::new(manifest.n_qubits, gates)?;

    let cache_bytes = args
        .cache_bytes
        .unwrap_or_else(|| default_cache_bytes(manifest.total_bytes(), manifest.chunk_bytes));
    let mode = if args.sequential { TraversalMode::Sequential } else { TraversalMode::Pipelined };
    let options = ClusterOptions {
        pool_dir: args.pool_dir.clone(),
        circuit: circuit.clone(),
        workers: args.workers,
        cache_bytes,
        backend: args.backend.config()?,
        mode,
        gate_timeout: Duration::from_secs(args.gate_timeout_secs.max(1)),
    };

    let mut staged = None;
    let launch = if args.worker_threads {
        WorkerLaunch::Threads
    } else {
        let path = match &args.circuit.circuit {
            // Workers parse the same file the user supplied; a built-in
            // or repeated circuit is staged to a temp file instead.
            Some(path) if args.reps == 1 => path.clone(),
            _ => {
                let tmp = StagedCircuit::write(&circuit)?;
                let path = tmp.path.clone();
                staged = Some(tmp);
                path
            }
        };
        process_launch(args, cache_bytes, path)?
    };

    let result = run_cluster(&options, launch);
    drop(staged);
    let csv_on_stdout = args.csv.as_deref() == Some(Path::new("-"));
    match result {
        Ok(report) => {
            if !csv_on_stdout {
                print_summary(&report, cache_bytes, mode);
            }
            write_outputs(args, &report)?;
            Ok(ExitCode::SUCCESS)
        }
        Err(failure) => {
            // The rounds that did finish are still worth keeping.
            write_outputs(args, &failure.partial)?;
            eprintln!(
                "run aborted after {} completed gates: {}",
                failure.partial.rounds.len(),
                failure.error
            );
            Ok(ExitCode::FAILURE)
        }
    }
}

/// Builds the child argv for every worker of a process-mode run.
fn process_launch(
    args: &RunArgs,
    cache_bytes: u64,
    circuit_path: PathBuf,
) -> Result<WorkerLaunch> {
    let exe = std::env::current_exe().context("locating the shoal binary")?;
    let pool_dir = args.pool_dir.clone();
    let backend = args.backend.kind_flag();
    let latency_ms = args.backend.profile.latency_ms;
    let bandwidth_gbps = args.backend.profile.bandwidth_gbps;
    let replication = args.backend.profile.replication;
    let sequential = args.sequential;
    Ok(WorkerLaunch::Processes(Box::new(move |node, addr| {
        let mut cmd = Command::new(&exe);
        cmd.arg("worker")
            .arg("--connect")
            .arg(addr.to_string())
            .arg("--node")
            .arg(node.to_string())
            .arg("--pool-dir")
            .arg(&pool_dir)
            .arg("--circuit")
            .arg(&circuit_path)
            .arg("--cache-bytes")
            .arg(cache_bytes.to_string())
            .arg("--backend")
            .arg(backend)
            .arg("--latency-ms")
            .arg(latency_ms.to_string())
            .arg("--bandwidth-gbps")
            .arg(bandwidth_gbps.to_string())
            .arg("--replication")
            .arg(replication.to_string());
        if sequential {
            cmd.arg("--sequential");
        }
        cmd
    })))
}

/// A circuit file written for child workers, removed when dropped.
struct StagedCircuit {
    path: PathBuf,
}

impl StagedCircuit {
    fn write(circuit: &Circuit) -> Result<StagedCircuit> {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.subsec_nanos())
            .unwrap_or(0);
        let path = std::env::temp_dir()
            .join(format!("shoal-circuit-{}-{nanos}.txt", std::process::id()));
        std::fs::write(&path, circuit_to_text(circuit))
            .with_context(|| format!("staging circuit for workers at {}", path.display()))?;
        Ok(StagedCircuit { path })
    }
}

impl Drop for StagedCircuit {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn print_summary(report: &RunReport, cache_bytes: u64, mode: TraversalMode) {
    println!(
        "{} backend, {} qubits, {} workers, cache {} per worker, {} traversal",
        report.framework,
        report.n_qubits,
        report.workers,
        human_bytes(cache_bytes),
        match mode {
            TraversalMode::Sequential => "sequential",
            TraversalMode::Pipelined => "pipelined",
        }
    );
    println!(
        "{:>5}  {:<10} {:>12} {:>12} {:>10}",
        "gate", "label", "wall ms", "MB", "MB/s"
    );
    for round in &report.rounds {
        let s = round.summary();
        println!(
            "{:>5}  {:<10} {:>12.3} {:>12.3} {:>10.1}",
            round.gate_seq,
            round.gate_label,
            round.wall_ms,
            s.bytes_processed as f64 / shoal_core::engine::BYTES_PER_MB,
            s.speed_mb_s(),
        );
    }
    let totals = report.summary_totals();
    println!(
        "total: {} gates, {:.3} MB in {:.3} s, aggregate {:.1} MB/s",
        report.rounds.len(),
        totals.bytes_processed as f64 / shoal_core::engine::BYTES_PER_MB,
        totals.total_ms / 1e3,
        report.aggregate_speed_mb_s(),
    );
    println!(
        "control plane: {:.0} bytes per gate per worker",
        report.control_bytes_per_gate_per_node()
    );
}

fn write_outputs(args: &RunArgs, report: &RunReport) -> Result<()> {
    if let Some(path) = &args.csv {
        if path == Path::new("-") {
            report.write_csv(std::io::stdout().lock()).context("writing CSV to stdout")?;
        } else {
            let file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            report.write_csv(file).with_context(|| format!("writing {}", path.display()))?;
            println!("metrics written to {}", path.display());
        }
    }
    if let Some(path) = &args.json {
        let file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(file, report)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("report written to {}", path.display());
    }
    Ok(())
}
