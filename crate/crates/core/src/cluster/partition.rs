//! Per-gate partitioning of the chunked state into worker-owned ranges.
//!
//! A gate with stride `2^t` pairs amplitude `i` (bit `t` clear) with
//! `i + 2^t`. When the stride fits inside a chunk every chunk is
//! self-contained and workers take contiguous chunk runs. Once the
//! stride reaches the chunk size each pair spans two chunks exactly
//! `2^t / chunk_len` apart, and workers take contiguous runs of pair
//! indices instead. Either way a worker's range is closed under the
//! pairing, so gates need no cross-worker amplitude traffic.

use super::ClusterError;
use crate::state::Circuit;
use crate::storage::PoolManifest;
use serde::{Deserialize, Serialize};

/// One worker's share of one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WorkRange {
    /// Chunks `[chunk_lo, chunk_hi)`, each transformed in isolation.
    IntraChunk { chunk_lo: u64, chunk_hi: u64 },
    /// Pair indices `[pair_lo, pair_hi)`; pair `p` joins two chunks
    /// `2^stride_chunks_log2` apart (see [`WorkRange::pair_chunks`]).
    CrossChunk { pair_lo: u64, pair_hi: u64, stride_chunks_log2: u8 },
}

/// One unit of traversal: a single chunk, or a cross-chunk pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkItem {
    pub lo_chunk: u64,
    pub hi_chunk: Option<u64>,
}

impl WorkRange {
    /// Chunks (intra) or pairs (cross) in the range.
    pub fn unit_count(&self) -> u64 {
        match *self {
            WorkRange::IntraChunk { chunk_lo, chunk_hi } => chunk_hi - chunk_lo,
            WorkRange::CrossChunk { pair_lo, pair_hi, .. } => pair_hi - pair_lo,
        }
    }

    /// Distinct chunks the range touches.
    pub fn chunk_count(&self) -> u64 {
        match self {
            WorkRange::IntraChunk { .. } => self.unit_count(),
            WorkRange::CrossChunk { .. } => 2 * self.unit_count(),
        }
    }

    /// The two chunks of cross pair `p` at chunk stride `2^k`: the pair
    /// index is the chunk index with bit `k` deleted, so reinserting a
    /// cleared or set bit `k` recovers the low and high chunk.
    pub fn pair_chunks(pair: u64, stride_chunks_log2: u8) -> (u64, u64) {
        let k = stride_chunks_log2;
        let low_bits = pair & ((1u64 << k) - 1);
        let lo = ((pair >> k) << (k + 1)) | low_bits;
        (lo, lo | (1u64 << k))
    }

    pub fn item(&self, unit: u64) -> WorkItem {
        debug_assert!(unit < self.unit_count());
        match *self {
            WorkRange::IntraChunk { chunk_lo, .. } => {
                WorkItem { lo_chunk: chunk_lo + unit, hi_chunk: None }
            }
            WorkRange::CrossChunk { pair_lo, stride_chunks_log2, .. } => {
                let (lo, hi) = WorkRange::pair_chunks(pair_lo + unit, stride_chunks_log2);
                WorkItem { lo_chunk: lo, hi_chunk: Some(hi) }
            }
        }
    }

    pub fn items(&self) -> impl Iterator<Item = WorkItem> + '_ {
        (0..self.unit_count()).map(move |u| self.item(u))
    }

    /// Constant-time membership test used by the pool write guard.
    pub fn contains_chunk(&self, chunk: u64) -> bool {
        match *self {
            WorkRange::IntraChunk { chunk_lo, chunk_hi } => (chunk_lo..chunk_hi).contains(&chunk),
            WorkRange::CrossChunk { pair_lo, pair_hi, stride_chunks_log2 } => {
                let k = stride_chunks_log2;
                // Delete bit k to recover the pair index this chunk belongs to.
                let pair = ((chunk >> (k + 1)) << k) | (chunk & ((1u64 << k) - 1));
                (pair_lo..pair_hi).contains(&pair)
            }
        }
    }
}

/// Splits one gate's work evenly across `worker_count` workers. Returns
/// one range per worker, in node order. The worker count must be a power
/// of two no larger than the number of work units the gate has.
pub fn partition_gate(
    manifest: &PoolManifest,
    target: u8,
    worker_count: u32,
) -> Result<Vec<WorkRange>, ClusterError> {
    if target >= manifest.n_qubits {
        return Err(ClusterError::Geometry(format!(
            "target qubit {target} outside a {}-qubit state",
            manifest.n_qubits
        )));
    }
    if worker_count == 0 || !worker_count.is_power_of_two() {
        return Err(ClusterError::Geometry(format!(
            "worker count {worker_count} must be a nonzero power of two"
        )));
    }
    let chunk_count = manifest.chunk_count();
    let chunk_len_log2 = manifest.amps_per_chunk().trailing_zeros() as u8;
    let workers = worker_count as u64;

    let ranges = if target < chunk_len_log2 {
        let units = chunk_count;
        if workers > units {
            return Err(ClusterError::Geometry(format!(
                "worker count {worker_count} exceeds the {units} chunks a stride-2^{target} gate splits into; \
                 use at most {units} workers or a smaller chunk size"
            )));
        }
        let per = units / workers;
        (0..workers)
            .map(|w| WorkRange::IntraChunk { chunk_lo: w * per, chunk_hi: (w + 1) * per })
            .collect()
    } else {
        let units = chunk_count / 2;
        if workers > units {
            return Err(ClusterError::Geometry(format!(
                "worker count {worker_count} exceeds the {units} chunk pairs a stride-2^{target} gate splits into; \
                 use at most {units} workers or a smaller chunk size"
            )));
        }
        let per = units / workers;
        let k = target - chunk_len_log2;
        (0..workers)
            .map(|w| WorkRange::CrossChunk {
                pair_lo: w * per,
                pair_hi: (w + 1) * per,
                stride_chunks_log2: k,
            })
            .collect()
    };
    Ok(ranges)
}

/// The largest power-of-two worker count every gate in the circuit can
/// be split across on this pool geometry.
pub fn max_worker_count(manifest: &PoolManifest, circuit: &Circuit) -> u32 {
    let chunk_count = manifest.chunk_count();
    let chunk_len_log2 = manifest.amps_per_chunk().trailing_zeros() as u8;
    let min_units = circuit
        .gates()
        .iter()
        .map(|g| if g.target() < chunk_len_log2 { chunk_count } else { chunk_count / 2 })
        .min()
        .unwrap_or(chunk_count)
        .max(1);
    u64::min(min_units, u32::MAX as u64) as u32
}
