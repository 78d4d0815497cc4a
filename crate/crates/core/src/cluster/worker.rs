//! The worker side of a run: one pool handle, one connection, one gate
//! at a time.

use super::protocol::{read_message, write_message, write_preamble, GateOutcome, Message};
use super::{ClusterError, WorkRange};
use crate::engine::{apply_gate_over_ranges, TraversalMode};
use crate::state::Circuit;
use crate::storage::{BackendConfig, Pool};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::PathBuf;

/// Everything a worker needs besides its node id and the coordinator
/// address. Distributed out of band (thread spawn or process argv); the
/// control plane itself never carries the circuit or pool location.
#[derive(Debug, Clone)]
pub struct WorkerConfig {
    pub pool_dir: PathBuf,
    pub circuit: Circuit,
    pub cache_bytes: u64,
    pub backend: BackendConfig,
    pub mode: TraversalMode,
}

/// Connects to the coordinator, executes its share of every gate, and
/// returns once released by a clean shutdown. Any engine failure is
/// reported to the coordinator before it is returned.
pub fn run_worker<A: ToSocketAddrs>(
    coordinator: A,
    node: u32,
    config: &WorkerConfig,
) -> Result<(), ClusterError> {
    let mut stream = TcpStream::connect(coordinator)
        .map_err(ClusterError::io(format!("worker {node} connecting to coordinator")))?;
    stream.set_nodelay(true).map_err(ClusterError::io("disabling Nagle batching"))?;
    write_preamble(&mut stream, node)?;

    let schedule = match read_message(&mut stream)?.0 {
        Message::Assign { node: for_node, schedule } if for_node == node => schedule,
        Message::Assign { node: for_node, .. } => {
            return Err(ClusterError::Protocol(format!(
                "worker {node} received the schedule for node {for_node}"
            )));
        }
        other => {
            return Err(ClusterError::Protocol(format!(
                "worker {node} expected ASSIGN first, got {other:?}"
            )));
        }
    };
    if schedule.len() != config.circuit.len() {
        return Err(ClusterError::Protocol(format!(
            "schedule covers {} gates but the circuit has {}",
            schedule.len(),
            config.circuit.len()
        )));
    }

    let mut pool = Pool::open(&config.pool_dir, config.cache_bytes, &config.backend)?;
    loop {
        match read_message(&mut stream)?.0 {
            Message::StartGate { gate_seq } => {
                let gate = config
                    .circuit
                    .gates()
                    .get(gate_seq as usize)
                    .ok_or_else(|| {
                        ClusterError::Protocol(format!("START_GATE for unknown gate {gate_seq}"))
                    })?;
                let range: WorkRange = schedule[gate_seq as usize];
                pool.set_guard(Some(Box::new(move |id| range.contains_chunk(id.0))));
                let outcome = match apply_gate_over_ranges(
                    &mut pool,
                    gate,
                    std::slice::from_ref(&range),
                    config.mode,
                ) {
                    Ok(metrics) => GateOutcome::Ok { metrics },
                    Err(e) => GateOutcome::Failed { error: e.to_string() },
                };
                // Coherence across the barrier: every chunk in this
                // gate's range was exclusively ours and is now flushed,
                // so those copies stay valid. Anything else may be
                // rewritten by its owner before our next gate, so it
                // must be forgotten, not reused.
                pool.retain_cached(|id| range.contains_chunk(id.0));
                let failure = match &outcome {
                    GateOutcome::Failed { error } => Some(error.clone()),
                    GateOutcome::Ok { .. } => None,
                };
                write_message(&mut stream, &Message::GateDone { gate_seq, outcome })?;
                if let Some(reason) = failure {
                    return Err(ClusterError::WorkerFailed { node, gate_seq, reason });
                }
                match read_message(&mut stream)?.0 {
                    Message::BarrierRelease { gate_seq: released } if released == gate_seq => {}
                    other => {
                        return Err(ClusterError::Protocol(format!(
                            "worker {node} expected BARRIER_RELEASE for gate {gate_seq}, got {other:?}"
                        )));
                    }
                }
            }
            Message::Shutdown => return Ok(()),
            other => {
                return Err(ClusterError::Protocol(format!(
                    "worker {node} expected START_GATE or SHUTDOWN, got {other:?}"
                )));
            }
        }
    }
}
