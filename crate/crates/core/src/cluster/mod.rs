//! Multi-worker execution: gate partitioning, the wire protocol, the
//! worker loop, and the barrier coordinator.
//!
//! Every gate is re-partitioned into per-worker ranges that are closed
//! under the gate's index pairing, so workers never exchange amplitude
//! data; they synchronize only through the storage pool plus a small
//! control-plane barrier per gate.

mod coordinator;
mod partition;
mod protocol;
mod worker;

pub use coordinator::{run_cluster, ClusterOptions, ClusterRunError, WorkerLaunch};
pub use partition::{max_worker_count, partition_gate, WorkItem, WorkRange};
pub use protocol::{
    read_message, read_preamble, write_message, write_preamble, GateOutcome, Message,
    MAX_FRAME_BYTES,
};
pub use worker::{run_worker, WorkerConfig};

use crate::engine::EngineError;
use crate::storage::StorageError;
use std::io;
use thiserror::Error;

pub const DEFAULT_GATE_TIMEOUT_SECS: u64 = 60;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("partition geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("worker {node} failed during gate {gate_seq}: {reason}")]
    WorkerFailed { node: u32, gate_seq: u32, reason: String },
    #[error("worker {node} did not finish gate {gate_seq} within {timeout_secs} s")]
    Timeout { node: u32, gate_seq: u32, timeout_secs: u64 },
    #[error("worker {node} exited abnormally: {reason}")]
    WorkerExit { node: u32, reason: String },
    #[error("failed to launch worker {node}: {reason}")]
    Launch { node: u32, reason: String },
}

impl ClusterError {
    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> ClusterError {
        let context = context.into();
        move |source| ClusterError::Io { context, source }
    }
}
