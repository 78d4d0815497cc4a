//! Full-amplitude quantum state simulation streamed through a shared,
//! tiered storage pool.
//!
//! The crate is organized around five subsystems:
//!
//! * [`state`] — amplitude layout, gate algebra, the in-memory reference
//!   simulator, and the chunk-level gate kernels used by everything else.
//! * [`storage`] — the shard-backed chunk pool with a bounded write-back
//!   cache tier and an optional emulated-remote backend that injects
//!   network costs.
//! * [`cluster`] — per-gate work partitioning and the coordinator/worker
//!   barrier protocol over length-prefixed stream sockets.
//! * [`engine`] — the per-worker execution loop (sequential or
//!   prefetch-pipelined), per-phase timing, and metrics reporting.
//! * [`analysis`] — closed-form throughput, transfer, and cost estimates
//!   for sizing runs that do not fit on one machine.
//!
//! A state of `n` qubits is 2^n complex amplitudes, 16 bytes each, stored
//! index-major across a small number of shard files. Workers never hold
//! the whole state: they stream fixed-size chunks through their cache
//! tier, apply the gate kernel, and write the results back before each
//! barrier.

pub mod analysis;
pub mod cluster;
pub mod engine;
pub mod state;
pub mod storage;
pub mod tol;
