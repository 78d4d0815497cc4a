//! Shard-backed chunk pool with a bounded write-back cache tier.
//!
//! A pool is a directory: a `manifest.toml` sidecar describing the
//! geometry plus a few shard files whose concatenation is the raw state
//! (2^n amplitudes × 16 bytes, no header). All I/O happens in fixed-size
//! chunks addressed by [`ChunkId`], positionally, so independent handles
//! can work disjoint chunk ranges of the same shard files concurrently.
//!
//! Every pool handle owns a private cache tier. The tier is write-back:
//! writes land in cache marked dirty, reach the backend on eviction or on
//! [`Pool::write_back`], and only the latter is a durability barrier (one
//! file sync per shard written since the last barrier).
//!
//! Cost accounting rules, which the engine's per-phase metrics rely on:
//!
//! * `read` accumulates only on cache misses (a hit costs nothing);
//! * `write` accumulates the cache-tier insertion cost of every chunk
//!   write;
//! * `writeback` accumulates dirty-eviction flushes and barrier flushes;
//! * `bytes_read`/`bytes_written` count logical chunk bytes moved to and
//!   from the backend, never cache hits and never replication copies.
//!
//! The [`EmulatedRemoteBackend`] wraps the direct backend and injects a
//! per-request latency plus a bytes/bandwidth transfer delay on every
//! backend read and write, with write bytes amplified by the replication
//! factor; data written through it is byte-identical to the direct path.

mod backend;
mod cache;
mod manifest;
mod pool;

pub use backend::{
    open_backend, ChunkBackend, ChunkReader, DirectBackend, EmulatedRemoteBackend, NetworkProfile,
    WireCounters,
};
pub use manifest::{PoolManifest, ShardEntry, FORMAT_VERSION, MANIFEST_FILE};
pub use pool::{create_pool, ChunkGuard, Pool};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::time::Duration;
use thiserror::Error;

/// Default chunk size. Small enough that the emulated remote's
/// per-request latency is exercised at realistic request granularity,
/// large enough that the direct path stays syscall-cheap; 256 KiB keeps
/// the local-versus-remote throughput gap wide on ordinary hardware.
pub const DEFAULT_CHUNK_BYTES: u64 = 256 * 1024;

/// Default cache tier size for a pool of `total_bytes`: a quarter of the
/// state, floored at one chunk and capped at 512 MiB.
pub fn default_cache_bytes(total_bytes: u64, chunk_bytes: u64) -> u64 {
    (total_bytes / 4).clamp(chunk_bytes, 512 << 20)
}

/// Index of one fixed-size chunk within the pool, counted from the start
/// of shard 0.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(pub u64);

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chunk {}", self.0)
    }
}

/// Accumulated I/O cost of one pool handle. See the module docs for what
/// counts where.
#[derive(Clone, Copy, Debug, Default)]
pub struct IoStats {
    pub read: Duration,
    pub write: Duration,
    pub writeback: Duration,
    pub bytes_read: u64,
    pub bytes_written: u64,
}

impl IoStats {
    pub fn read_ms(&self) -> f64 {
        1e3 * self.read.as_secs_f64()
    }

    pub fn write_ms(&self) -> f64 {
        1e3 * self.write.as_secs_f64()
    }

    pub fn writeback_ms(&self) -> f64 {
        1e3 * self.writeback.as_secs_f64()
    }

    /// Stats accumulated since `earlier` was captured from the same handle.
    pub fn delta_since(&self, earlier: &IoStats) -> IoStats {
        IoStats {
            read: self.read.saturating_sub(earlier.read),
            write: self.write.saturating_sub(earlier.write),
            writeback: self.writeback.saturating_sub(earlier.writeback),
            bytes_read: self.bytes_read - earlier.bytes_read,
            bytes_written: self.bytes_written - earlier.bytes_written,
        }
    }
}

/// Which backend a pool handle talks to.
#[derive(Clone, Debug, PartialEq)]
pub enum BackendConfig {
    Direct,
    Emulated(NetworkProfile),
}

impl BackendConfig {
    /// Framework label used in metrics rows.
    pub fn label(&self) -> &'static str {
        match self {
            BackendConfig::Direct => "direct",
            BackendConfig::Emulated(_) => "emulated",
        }
    }
}

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest at {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("existing manifest at {path} is incompatible: {reason}")]
    IncompatibleManifest { path: PathBuf, reason: String },
    #[error("pool geometry: {0}")]
    Geometry(String),
    #[error("{id} out of range; the pool has {chunk_count} chunks")]
    ChunkOutOfRange { id: ChunkId, chunk_count: u64 },
    #[error("chunk data is {got} bytes but the pool chunk size is {expect}")]
    ChunkSizeMismatch { got: u64, expect: u64 },
    #[error("cache capacity {capacity_bytes} B cannot hold one chunk of {chunk_bytes} B")]
    CacheTooSmall { capacity_bytes: u64, chunk_bytes: u64 },
    #[error("network profile: {0}")]
    Profile(String),
}

impl StorageError {
    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> StorageError {
        let context = context.into();
        move |source| StorageError::Io { context, source }
    }
}
