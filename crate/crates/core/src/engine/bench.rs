//! Comparative throughput harness: runs one circuit over both backends
//! at two cache capacities, repeats each configuration, and reduces the
//! repetitions to medians so one outlier cannot skew a comparison.

use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;

use crate::cluster::{run_cluster, ClusterOptions, ClusterRunError, WorkerLaunch};
use crate::engine::{GateMetrics, TraversalMode};
use crate::state::Circuit;
use crate::storage::{default_cache_bytes, BackendConfig, NetworkProfile, PoolManifest};

/// Throughput of the reference deployment's node-local shared pool, in
/// MB/s. Quoted by `bench` output as context for the measured ratio.
pub const REFERENCE_LOCAL_MB_S: f64 = 207.5;

/// Throughput of the reference deployment's replicated remote store.
pub const REFERENCE_REMOTE_MB_S: f64 = 44.5;

/// Cache capacities used for a comparative run: a quarter and a half of
/// the pool, capped at the reference deployment's 512 MiB and 1 GiB so
/// large pools keep the published cache-to-state ratio.
pub fn bench_cache_pair(total_bytes: u64, chunk_bytes: u64) -> (u64, u64) {
    let small = default_cache_bytes(total_bytes, chunk_bytes);
    let large = (total_bytes / 2).clamp(chunk_bytes, 1024 << 20);
    (small, large)
}

pub struct BenchOptions {
    pub pool_dir: PathBuf,
    pub circuit: Circuit,
    pub workers: u32,
    /// Repetitions per configuration; at least one.
    pub reps: u32,
    pub mode: TraversalMode,
    /// Cost model for the emulated cells.
    pub profile: NetworkProfile,
    pub cache_small_bytes: u64,
    pub cache_large_bytes: u64,
    pub gate_timeout: Duration,
}

/// One (backend, cache capacity) configuration after all repetitions.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub framework: String,
    pub cache_bytes: u64,
    /// Aggregate MB/s of every repetition, in run order.
    pub rep_speeds: Vec<f64>,
    pub median_speed_mb_s: f64,
    /// Field-wise median over repetitions of the per-repetition phase
    /// totals.
    pub median_totals: GateMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub n_qubits: u8,
    pub workers: u32,
    pub reps: u32,
    pub chunk_bytes: u64,
    pub cache_small_bytes: u64,
    pub cache_large_bytes: u64,
    /// Direct then emulated, small cache then large within each.
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    pub fn cell(&self, framework: &str, cache_bytes: u64) -> Option<&BenchCell> {
        self.cells
            .iter()
            .find(|c| c.framework == framework && c.cache_bytes == cache_bytes)
    }

    /// Direct-over-emulated median speed ratio at one cache capacity.
    pub fn speedup(&self, cache_bytes: u64) -> Option<f64> {
        let direct = self.cell("direct", cache_bytes)?;
        let emulated = self.cell("emulated", cache_bytes)?;
        if emulated.median_speed_mb_s > 0.0 {
            Some(direct.median_speed_mb_s / emulated.median_speed_mb_s)
        } else {
            None
        }
    }

    /// Relative change in median speed when the cache doubles, for one
    /// backend: `|large - small| / small`.
    pub fn cache_sensitivity(&self, framework: &str) -> Option<f64> {
        let small = self.cell(framework, self.cache_small_bytes)?;
        let large = self.cell(framework, self.cache_large_bytes)?;
        if small.median_speed_mb_s > 0.0 {
            Some((large.median_speed_mb_s - small.median_speed_mb_s).abs() / small.median_speed_mb_s)
        } else {
            None
        }
    }
}

/// Runs the full grid with in-process worker threads. The pool's state
/// evolves across repetitions; throughput does not depend on amplitude
/// values, so repetitions stay comparable without re-initialization.
pub fn run_bench(opts: &BenchOptions) -> Result<BenchReport, Box<ClusterRunError>> {
    let chunk_bytes = PoolManifest::load(&opts.pool_dir)
        .map(|m| m.chunk_bytes)
        .unwrap_or(0);
    let reps = opts.reps.max(1);
    let backends = [
        BackendConfig::Direct,
        BackendConfig::Emulated(opts.profile),
    ];
    let caches = [opts.cache_small_bytes, opts.cache_large_bytes];

    let mut cells = Vec::with_capacity(4);
    let mut n_qubits = 0;
    for backend in &backends {
        for &cache_bytes in &caches {
            let mut rep_speeds = Vec::with_capacity(reps as usize);
            let mut totals = Vec::with_capacity(reps as usize);
            for _ in 0..reps {
                let report = run_cluster(
                    &ClusterOptions {
                        pool_dir: opts.pool_dir.clone(),
                        circuit: opts.circuit.clone(),
                        workers: opts.workers,
                        cache_bytes,
                        backend: backend.clone(),
                        mode: opts.mode,
                        gate_timeout: opts.gate_timeout,
                    },
                    WorkerLaunch::Threads,
                )?;
                n_qubits = report.n_qubits;
                rep_speeds.push(report.aggregate_speed_mb_s());
                totals.push(report.summary_totals());
            }
            cells.push(BenchCell {
                framework: backend.label().to_string(),
                cache_bytes,
                median_speed_mb_s: median(&rep_speeds),
                median_totals: median_totals(&totals),
                rep_speeds,
            });
        }
    }

    Ok(BenchReport {
        n_qubits,
        workers: opts.workers,
        reps,
        chunk_bytes,
        cache_small_bytes: opts.cache_small_bytes,
        cache_large_bytes: opts.cache_large_bytes,
        cells,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn median_totals(totals: &[GateMetrics]) -> GateMetrics {
    let field = |f: fn(&GateMetrics) -> f64| median(&totals.iter().map(f).collect::<Vec<_>>());
    GateMetrics {
        compute_ms: field(|m| m.compute_ms),
        read_ms: field(|m| m.read_ms),
        write_ms: field(|m| m.write_ms),
        writeback_ms: field(|m| m.writeback_ms),
        total_ms: field(|m| m.total_ms),
        bytes_processed: totals
            .iter()
            .map(|m| m.bytes_processed)
            .max()
            .unwrap_or(0),
    }
}
