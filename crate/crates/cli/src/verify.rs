//! `shoal verify`: run a circuit through the pool and compare every
//! amplitude against the in-memory oracle.

use std::io::{Read, Seek, SeekFrom, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shoal_core::cluster::{
    run_cluster, ClusterOptions, WorkerLaunch, DEFAULT_GATE_TIMEOUT_SECS,
};
use shoal_core::engine::{
    first_deviation_above, max_deviation_from_dense, pool_norm_sq, read_dense_state, TraversalMode,
};
use shoal_core::state::Circuit;
use shoal_core::storage::{default_cache_bytes, BackendConfig, Pool, PoolManifest};
use shoal_core::tol;

use crate::common::{load_manifest, BackendArgs, CircuitArgs};

/// Largest state the oracle holds in memory by default: 2^26 amplitudes
/// is a 1 GiB reference copy.
const DEFAULT_ORACLE_QUBITS: u8 = 26;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Directory of an initialized pool
    #[arg(long, env = "SHOAL_POOL_DIR")]
    pub pool_dir: PathBuf,
    #[command(flatten)]
    pub circuit: CircuitArgs,
    /// Without --circuit: length of the random circuit to generate
    #[arg(long, default_value_t = 20)]
    pub random_gates: usize,
    /// Seed for the random circuit
    #[arg(long, default_value_t = 0, env = "SHOAL_SEED")]
    pub seed: u64,
    /// Worker count, a power of two
    #[arg(long, default_value_t = 2, env = "SHOAL_WORKERS")]
    pub workers: u32,
    /// Per-worker cache capacity in bytes [default: a quarter of the pool]
    #[arg(long, env = "SHOAL_CACHE_BYTES")]
    pub cache_bytes: Option<u64>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Strict read-compute-write loop instead of prefetch pipelining
    #[arg(long)]
    pub sequential: bool,
    /// Refuse pools whose oracle copy would exceed 2^n amplitudes
    #[arg(long, default_value_t = DEFAULT_ORACLE_QUBITS)]
    pub max_oracle_qubits: u8,
    /// Testing aid: flip one stored byte after the run to confirm the
    /// comparison catches damage
    #[arg(long)]
    pub inject_corruption: bool,
}

pub fn execute(args: &VerifyArgs) -> Result<ExitCode> {
    let manifest = load_manifest(&args.pool_dir)?;
    let n = manifest.n_qubits;
    if n > args.max_oracle_qubits {
        bail!(
            "a {n} qubit oracle needs {} amplitudes in memory; the cap is {} qubits \
             (raise --max-oracle-qubits up to {} if the machine has the room)",
            1u128 << n,
            args.max_oracle_qubits,
            shoal_core::state::DENSE_MAX_QUBITS,
        );
    }

    let circuit = match &args.circuit.circuit {
        Some(_) => args.circuit.load(n)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            Circuit::random(n, args.random_gates, &mut rng)
        }
    };
    let cache_bytes = args
        .cache_bytes
        .unwrap_or_else(|| default_cache_bytes(manifest.total_bytes(), manifest.chunk_bytes));

    // The oracle starts from whatever state the pool holds now, so
    // verification composes across successive runs.
    let mut reference = {
        let mut pool = Pool::open(&args.pool_dir, cache_bytes, &BackendConfig::Direct)?;
        read_dense_state(&mut pool)?
    };
    reference.apply_all(&circuit)?;

    if !circuit.is_empty() {
        run_cluster(
            &ClusterOptions {
                pool_dir: args.pool_dir.clone(),
                circuit: circuit.clone(),
                workers: args.workers,
                cache_bytes,
                backend: args.backend.config()?,
                mode: if args.sequential {
                    TraversalMode::Sequential
                } else {
                    TraversalMode::Pipelined
                },
                gate_timeout: Duration::from_secs(DEFAULT_GATE_TIMEOUT_SECS),
            },
            WorkerLaunch::Threads,
        )
        .map_err(|e| anyhow::anyhow!("circuit execution failed: {e}"))?;
    }

    if args.inject_corruption {
        corrupt_one_byte(&args.pool_dir, &manifest)?;
    }

    let mut pool = Pool::open(&args.pool_dir, cache_bytes, &BackendConfig::Direct)?;
    let deviation = max_deviation_from_dense(&mut pool, &reference)?;
    let norm_drift = (pool_norm_sq(&mut pool)? - reference.norm_sq()).abs();

    println!(
        "{} gates over {n} qubits, {} workers",
        circuit.len(),
        args.workers
    );
    if deviation <= tol::ORACLE_EQUIV {
        println!(
            "PASS: max deviation {deviation:.3e} (bound {:.1e}), norm drift {norm_drift:.3e}",
            tol::ORACLE_EQUIV
        );
        Ok(ExitCode::SUCCESS)
    } else {
        let (index, dev) = first_deviation_above(&mut pool, &reference, tol::ORACLE_EQUIV)?
            .expect("max deviation exceeded the bound");
        println!(
            "FAIL: first mismatch at amplitude index {index} (deviation {dev:.3e}, \
             bound {:.1e}); worst deviation {deviation:.3e}",
            tol::ORACLE_EQUIV
        );
        Ok(ExitCode::FAILURE)
    }
}

/// Corrupts one byte in the middle of the first shard: the high byte of
/// an amplitude's real part, with its top exponent bit flipped. That
/// turns 0.0 into 2.0 and scales any normalized value by 2^±1024, so
/// the damage is never below the comparison tolerance and never NaN.
fn corrupt_one_byte(pool_dir: &std::path::Path, manifest: &PoolManifest) -> Result<()> {
    let shard = manifest.shards.first().context("pool has no shards")?;
    let path = pool_dir.join(&shard.path);
    let offset = ((shard.bytes / 2) & !15) + 7;
    let mut file = std::fs::OpenOptions::new()
        .read(true)
        .write(true)
        .open(&path)
        .with_context(|| format!("opening shard {}", path.display()))?;
    file.seek(SeekFrom::Start(offset))?;
    let mut byte = [0u8; 1];
    file.read_exact(&mut byte)?;
    byte[0] ^= 0x40;
    file.seek(SeekFrom::Start(offset))?;
    file.write_all(&byte)?;
    file.sync_data()?;
    eprintln!(
        "injected corruption: flipped a bit at byte {offset} of {}",
        path.display()
    );
    Ok(())
}
