//! Streaming gate execution over a pool slice, and the timing model
//! reported for every gate.
//!
//! The engine applies one gate at a time to the chunks a worker owns,
//! either strictly sequentially (read, compute, write, repeat) or with a
//! prefetch thread that keeps the next chunks in flight while the
//! current one is being transformed. Both paths produce identical bytes;
//! only the timing differs.

mod bench;
mod executor;
mod metrics;
mod state_io;

pub use bench::{
    bench_cache_pair, run_bench, BenchCell, BenchOptions, BenchReport, REFERENCE_LOCAL_MB_S,
    REFERENCE_REMOTE_MB_S,
};
pub use executor::{apply_gate_over_ranges, TraversalMode};
pub use metrics::{CsvRow, GateMetrics, RoundMetrics, RunReport, BYTES_PER_MB};
pub use state_io::{
    first_deviation_above, init_basis_state, max_deviation_from_dense, pool_norm_sq,
    read_dense_state,
};

use crate::state::{decode_amplitudes, encode_amplitudes, Amplitude, StateError, AMP_BYTES};
use crate::storage::StorageError;
use thiserror::Error;

pub(crate) fn decode_vec(bytes: &[u8]) -> Vec<Amplitude> {
    let mut amps = vec![Amplitude::new(0.0, 0.0); bytes.len() / AMP_BYTES];
    decode_amplitudes(bytes, &mut amps);
    amps
}

pub(crate) fn encode_vec(amps: &[Amplitude]) -> Vec<u8> {
    let mut bytes = vec![0u8; amps.len() * AMP_BYTES];
    encode_amplitudes(amps, &mut bytes);
    bytes
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("pipeline stage failed: {0}")]
    Pipeline(String),
}
