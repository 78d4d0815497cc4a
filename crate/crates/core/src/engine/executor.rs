//! Applies one gate to the chunks a worker owns.

use super::{decode_vec, encode_vec, EngineError, GateMetrics};
use crate::cluster::{WorkItem, WorkRange};
use crate::state::{apply_gate_chunkpair, Amplitude, Gate};
use crate::storage::{ChunkId, ChunkReader, Pool, StorageError};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

/// Chunk pairs kept in flight ahead of the transform loop.
const PREFETCH_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraversalMode {
    /// Read, transform, write, one unit at a time.
    Sequential,
    /// A prefetch thread reads ahead on its own backend handle while the
    /// current unit is transformed and written.
    Pipelined,
}

/// Applies `gate` to every chunk in `ranges` and flushes the dirty set,
/// so the update is durable and visible to other pool handles on
/// return. The ranges must be closed under the gate's pairing, which is
/// what [`crate::cluster::partition_gate`] produces.
pub fn apply_gate_over_ranges(
    pool: &mut Pool,
    gate: &Gate,
    ranges: &[WorkRange],
    mode: TraversalMode,
) -> Result<GateMetrics, EngineError> {
    gate.validate(pool.manifest().n_qubits)?;
    let before = pool.stats();
    let started = Instant::now();
    let cost = match mode {
        TraversalMode::Sequential => run_sequential(pool, gate, ranges)?,
        TraversalMode::Pipelined => run_pipelined(pool, gate, ranges)?,
    };
    pool.write_back()?;
    let total = started.elapsed();
    let delta = pool.stats().delta_since(&before);
    let bytes = ranges.iter().map(WorkRange::chunk_count).sum::<u64>() * pool.chunk_bytes();
    Ok(GateMetrics {
        compute_ms: ms(cost.compute),
        read_ms: delta.read_ms() + ms(cost.read_stall),
        write_ms: delta.write_ms(),
        writeback_ms: delta.writeback_ms(),
        total_ms: ms(total),
        bytes_processed: bytes,
    })
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

struct LoopCost {
    compute: Duration,
    /// Time the transform loop spent blocked on the prefetch stage.
    read_stall: Duration,
}

fn run_sequential(pool: &mut Pool, gate: &Gate, ranges: &[WorkRange]) -> Result<LoopCost, EngineError> {
    let amps_per_chunk = pool.manifest().amps_per_chunk();
    let mut compute = Duration::ZERO;
    for range in ranges {
        for item in range.items() {
            let mut lo = decode_vec(pool.read_chunk(ChunkId(item.lo_chunk))?);
            let hi = match item.hi_chunk {
                Some(h) => Some((decode_vec(pool.read_chunk(ChunkId(h))?), h)),
                None => None,
            };
            let started = Instant::now();
            let (lo_bytes, hi_bytes) = transform(&mut lo, hi, item.lo_chunk, amps_per_chunk, gate)?;
            compute += started.elapsed();
            pool.write_chunk(ChunkId(item.lo_chunk), &lo_bytes)?;
            if let (Some(h), Some(bytes)) = (item.hi_chunk, hi_bytes) {
                pool.write_chunk(ChunkId(h), &bytes)?;
            }
        }
    }
    Ok(LoopCost { compute, read_stall: Duration::ZERO })
}

struct Fetched {
    item: WorkItem,
    lo: Vec<u8>,
    hi: Option<Vec<u8>>,
}

fn run_pipelined(pool: &mut Pool, gate: &Gate, ranges: &[WorkRange]) -> Result<LoopCost, EngineError> {
    let amps_per_chunk = pool.manifest().amps_per_chunk();
    let chunk_bytes = pool.chunk_bytes() as usize;
    let items: Vec<WorkItem> = ranges.iter().flat_map(WorkRange::items).collect();
    let mut reader = pool.raw_reader()?;
    let (sender, receiver) = mpsc::sync_channel::<Result<Fetched, StorageError>>(PREFETCH_DEPTH);
    let fetch_items = items.clone();
    let prefetcher = thread::spawn(move || {
        for item in fetch_items {
            let fetched = fetch(reader.as_mut(), item, chunk_bytes);
            let failed = fetched.is_err();
            // A send error means the transform loop bailed out first.
            if sender.send(fetched).is_err() || failed {
                return;
            }
        }
    });

    let mut compute = Duration::ZERO;
    let mut read_stall = Duration::ZERO;
    let mut outcome: Result<(), EngineError> = Ok(());
    for _ in 0..items.len() {
        let started = Instant::now();
        let fetched = match receiver.recv() {
            Ok(Ok(f)) => f,
            Ok(Err(e)) => {
                outcome = Err(e.into());
                break;
            }
            Err(_) => {
                outcome = Err(EngineError::Pipeline("prefetch stage exited early".into()));
                break;
            }
        };
        read_stall += started.elapsed();

        let started = Instant::now();
        let mut lo = decode_vec(&fetched.lo);
        let hi = match (&fetched.hi, fetched.item.hi_chunk) {
            (Some(bytes), Some(h)) => Some((decode_vec(bytes), h)),
            _ => None,
        };
        let step = transform(&mut lo, hi, fetched.item.lo_chunk, amps_per_chunk, gate);
        compute += started.elapsed();
        let (lo_bytes, hi_bytes) = match step {
            Ok(out) => out,
            Err(e) => {
                outcome = Err(e);
                break;
            }
        };
        let wrote = pool
            .write_chunk(ChunkId(fetched.item.lo_chunk), &lo_bytes)
            .and_then(|()| match (fetched.item.hi_chunk, hi_bytes) {
                (Some(h), Some(bytes)) => pool.write_chunk(ChunkId(h), &bytes),
                _ => Ok(()),
            });
        if let Err(e) = wrote {
            outcome = Err(e.into());
            break;
        }
    }
    drop(receiver);
    let _ = prefetcher.join();
    outcome.map(|()| LoopCost { compute, read_stall })
}

fn fetch(reader: &mut dyn ChunkReader, item: WorkItem, chunk_bytes: usize) -> Result<Fetched, StorageError> {
    let mut lo = vec![0u8; chunk_bytes];
    reader.read_chunk(ChunkId(item.lo_chunk), &mut lo)?;
    let hi = match item.hi_chunk {
        Some(h) => {
            let mut buf = vec![0u8; chunk_bytes];
            reader.read_chunk(ChunkId(h), &mut buf)?;
            Some(buf)
        }
        None => None,
    };
    Ok(Fetched { item, lo, hi })
}

/// Applies the gate to one decoded unit and re-encodes it.
fn transform(
    lo: &mut Vec<Amplitude>,
    hi: Option<(Vec<Amplitude>, u64)>,
    lo_chunk: u64,
    amps_per_chunk: u64,
    gate: &Gate,
) -> Result<(Vec<u8>, Option<Vec<u8>>), EngineError> {
    let lo_offset = lo_chunk * amps_per_chunk;
    match hi {
        None => {
            apply_gate_chunkpair(lo, None, lo_offset, gate)?;
            Ok((encode_vec(lo), None))
        }
        Some((mut hi_amps, hi_chunk)) => {
            let hi_offset = hi_chunk * amps_per_chunk;
            apply_gate_chunkpair(lo, Some((&mut hi_amps, hi_offset)), lo_offset, gate)?;
            Ok((encode_vec(lo), Some(encode_vec(&hi_amps))))
        }
    }
}
