//! `shoal init`: allocate shard files and reset to a basis state.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use shoal_core::engine::init_basis_state;
use shoal_core::storage::{
    create_pool, default_cache_bytes, BackendConfig, Pool, PoolManifest, DEFAULT_CHUNK_BYTES,
};

use crate::common::{commas, human_bytes};

/// Basis index used when none is given, chosen to sit past the first
/// storage chunk at production sizes; clamped into range for small pools.
const DEFAULT_BASIS_INDEX: u64 = 1 << 13;

#[derive(Args, Debug)]
pub struct InitArgs {
    /// Directory that will hold the shard files and manifest
    #[arg(long, env = "SHOAL_POOL_DIR")]
    pub pool_dir: PathBuf,
    /// Qubit count; the pool holds 2^n amplitudes of 16 bytes
    #[arg(long, env = "SHOAL_QUBITS")]
    pub qubits: u8,
    /// Transfer granularity between cache and shards, a power of two
    /// [default: 262144, clamped to the pool size]
    #[arg(long, env = "SHOAL_CHUNK_BYTES")]
    pub chunk_bytes: Option<u64>,
    /// Number of shard files, a power of two
    #[arg(long)]
    pub shards: Option<u32>,
    /// Initial basis state |k>; default 8192, clamped below 2^n
    #[arg(long)]
    pub basis_index: Option<u64>,
    /// Re-initialize even if the directory already holds a pool
    #[arg(long)]
    pub force: bool,
}

pub fn execute(args: &InitArgs) -> Result<ExitCode> {
    // An explicit chunk size is taken at face value; the default shrinks
    // to fit pools smaller than one production chunk.
    let total_bytes = 16u64 << args.qubits.min(62);
    let chunk_bytes = args.chunk_bytes.unwrap_or_else(|| DEFAULT_CHUNK_BYTES.min(total_bytes));
    let basis_index = match args.basis_index {
        Some(k) => {
            if args.qubits < 64 && k >> args.qubits != 0 {
                bail!(
                    "--basis-index {k} is out of range for {} qubits (must be below {})",
                    args.qubits,
                    1u64 << args.qubits
                );
            }
            k
        }
        None => {
            if args.qubits < 64 && DEFAULT_BASIS_INDEX >> args.qubits != 0 {
                (1u64 << args.qubits) - 1
            } else {
                DEFAULT_BASIS_INDEX
            }
        }
    };

    if PoolManifest::load(&args.pool_dir).is_ok() {
        if !args.force {
            bail!(
                "{} already holds a pool; pass --force to re-initialize it",
                args.pool_dir.display()
            );
        }
        remove_existing(&args.pool_dir)?;
    }

    let shards = args.shards.unwrap_or_else(|| {
        let chunks = total_bytes / chunk_bytes.max(1);
        2.min(chunks.max(1)) as u32
    });
    let manifest = create_pool(&args.pool_dir, args.qubits, chunk_bytes, shards)
        .with_context(|| format!("creating pool in {}", args.pool_dir.display()))?;

    let cache = default_cache_bytes(manifest.total_bytes(), manifest.chunk_bytes);
    let mut pool = Pool::open(&args.pool_dir, cache, &BackendConfig::Direct)?;
    init_basis_state(&mut pool, basis_index)?;

    println!(
        "initialized {} qubit pool in {}",
        manifest.n_qubits,
        args.pool_dir.display()
    );
    println!(
        "  {} bytes ({}) across {} shard files, {} chunks of {}",
        commas(manifest.total_bytes() as u128),
        human_bytes(manifest.total_bytes()),
        manifest.shards.len(),
        commas(manifest.chunk_count() as u128),
        human_bytes(manifest.chunk_bytes),
    );
    println!("  state |{basis_index}>");
    Ok(ExitCode::SUCCESS)
}

/// Removes the manifest and every shard it lists, leaving unrelated
/// files in the directory alone.
fn remove_existing(pool_dir: &std::path::Path) -> Result<()> {
    let manifest = PoolManifest::load(pool_dir)?;
    for shard in &manifest.shards {
        let full = pool_dir.join(&shard.path);
        if full.exists() {
            std::fs::remove_file(&full)
                .with_context(|| format!("removing old shard {}", full.display()))?;
        }
    }
    std::fs::remove_file(PoolManifest::manifest_path(pool_dir)).context("removing old manifest")?;
    Ok(())
}
