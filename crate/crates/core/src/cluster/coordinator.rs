//! The coordinator: owns the listener, the per-gate barrier, and the
//! lifecycle of every worker in a run.

use super::partition::partition_gate;
use super::protocol::{read_message, read_preamble, write_message, GateOutcome, Message};
use super::worker::{run_worker, WorkerConfig};
use super::{ClusterError, WorkRange};
use crate::engine::{RoundMetrics, RunReport, TraversalMode};
use crate::state::Circuit;
use crate::storage::{BackendConfig, PoolManifest};
use std::fmt;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::process::{Child, Command};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

pub struct ClusterOptions {
    pub pool_dir: PathBuf,
    pub circuit: Circuit,
    pub workers: u32,
    pub cache_bytes: u64,
    pub backend: BackendConfig,
    pub mode: TraversalMode,
    /// Budget for one barrier round, and for all workers to connect at
    /// startup.
    pub gate_timeout: Duration,
}

/// How workers other than node 0 come to exist. Node 0 always runs as a
/// thread inside the coordinator process.
pub enum WorkerLaunch {
    /// Spawn every worker as a thread in this process.
    Threads,
    /// Spawn each worker as a child process built by the closure, given
    /// the node id and the coordinator address.
    Processes(Box<dyn Fn(u32, SocketAddr) -> Command>),
    /// Workers are started elsewhere; the callback receives the address
    /// they must connect to (to print, write to a file, or hand to a
    /// test harness) before the accept window opens.
    External(Box<dyn FnOnce(SocketAddr) + Send>),
}

/// A failed run still carries everything measured before the abort.
#[derive(Debug)]
pub struct ClusterRunError {
    pub error: ClusterError,
    pub partial: RunReport,
}

impl fmt::Display for ClusterRunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} completed rounds)", self.error, self.partial.rounds.len())
    }
}

impl std::error::Error for ClusterRunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

type WorkerThread = (u32, JoinHandle<Result<(), ClusterError>>);

/// Runs the circuit across `options.workers` workers and returns the
/// per-round metrics. On any failure the run aborts: remaining child
/// processes are killed and the error carries the rounds completed so
/// far.
pub fn run_cluster(
    options: &ClusterOptions,
    launch: WorkerLaunch,
) -> Result<RunReport, Box<ClusterRunError>> {
    let mut rounds = Vec::new();
    let mut control = vec![0u64; options.workers as usize];
    let mut children: Vec<(u32, Child)> = Vec::new();
    let mut threads: Vec<WorkerThread> = Vec::new();
    let outcome =
        drive(options, launch, &mut rounds, &mut control, &mut children, &mut threads);
    let late_error = teardown(children, threads, outcome.is_err());
    let report = RunReport {
        framework: options.backend.label().to_string(),
        n_qubits: options.circuit.n_qubits(),
        workers: options.workers,
        rounds,
        control_bytes_per_node: control,
    };
    match outcome.and(late_error.map_or(Ok(()), Err)) {
        Ok(()) => Ok(report),
        Err(error) => Err(Box::new(ClusterRunError { error, partial: report })),
    }
}

fn drive(
    options: &ClusterOptions,
    launch: WorkerLaunch,
    rounds: &mut Vec<RoundMetrics>,
    control: &mut [u64],
    children: &mut Vec<(u32, Child)>,
    threads: &mut Vec<WorkerThread>,
) -> Result<(), ClusterError> {
    if options.workers == 0 || !options.workers.is_power_of_two() {
        return Err(ClusterError::Geometry(format!(
            "worker count {} must be a nonzero power of two",
            options.workers
        )));
    }
    let manifest = PoolManifest::load(&options.pool_dir)?;
    if manifest.n_qubits != options.circuit.n_qubits() {
        return Err(ClusterError::Geometry(format!(
            "circuit is for {} qubits but the pool holds {}",
            options.circuit.n_qubits(),
            manifest.n_qubits
        )));
    }
    let workers = options.workers as usize;
    let mut schedules: Vec<Vec<WorkRange>> = vec![Vec::with_capacity(options.circuit.len()); workers];
    for gate in options.circuit.gates() {
        let ranges = partition_gate(&manifest, gate.target(), options.workers)?;
        for (node, range) in ranges.into_iter().enumerate() {
            schedules[node].push(range);
        }
    }

    let listener = TcpListener::bind("127.0.0.1:0")
        .map_err(ClusterError::io("binding the coordinator listener"))?;
    let addr = listener.local_addr().map_err(ClusterError::io("reading the listener address"))?;

    let config = WorkerConfig {
        pool_dir: options.pool_dir.clone(),
        circuit: options.circuit.clone(),
        cache_bytes: options.cache_bytes,
        backend: options.backend.clone(),
        mode: options.mode,
    };
    let spawn_thread = |node: u32| -> Result<WorkerThread, ClusterError> {
        let config = config.clone();
        thread::Builder::new()
            .name(format!("worker-{node}"))
            .spawn(move || run_worker(addr, node, &config))
            .map(|handle| (node, handle))
            .map_err(|e| ClusterError::Launch { node, reason: e.to_string() })
    };
    threads.push(spawn_thread(0)?);
    match launch {
        WorkerLaunch::Threads => {
            for node in 1..options.workers {
                threads.push(spawn_thread(node)?);
            }
        }
        WorkerLaunch::Processes(build) => {
            for node in 1..options.workers {
                let child = build(node, addr)
                    .spawn()
                    .map_err(|e| ClusterError::Launch { node, reason: e.to_string() })?;
                children.push((node, child));
            }
        }
        WorkerLaunch::External(announce) => announce(addr),
    }

    let mut streams = accept_workers(&listener, options.workers, options.gate_timeout, control)?;

    for (node, stream) in streams.iter_mut().enumerate() {
        let message =
            Message::Assign { node: node as u32, schedule: schedules[node].clone() };
        control[node] += write_message(stream, &message)? as u64;
    }

    for (gate_seq, gate) in options.circuit.gates().iter().enumerate() {
        let gate_seq = gate_seq as u32;
        let started = Instant::now();
        for (node, stream) in streams.iter_mut().enumerate() {
            control[node] += write_message(stream, &Message::StartGate { gate_seq })? as u64;
        }
        let mut per_node = Vec::with_capacity(workers);
        for (node, stream) in streams.iter_mut().enumerate() {
            let (message, bytes) =
                read_gate_done(stream, options.gate_timeout, node as u32, gate_seq)?;
            control[node] += bytes as u64;
            match message {
                Message::GateDone { gate_seq: done, outcome } if done == gate_seq => {
                    match outcome {
                        GateOutcome::Ok { metrics } => per_node.push(metrics),
                        GateOutcome::Failed { error } => {
                            return Err(ClusterError::WorkerFailed {
                                node: node as u32,
                                gate_seq,
                                reason: error,
                            });
                        }
                    }
                }
                other => {
                    return Err(ClusterError::Protocol(format!(
                        "expected GATE_DONE for gate {gate_seq} from node {node}, got {other:?}"
                    )));
                }
            }
        }
        for (node, stream) in streams.iter_mut().enumerate() {
            control[node] += write_message(stream, &Message::BarrierRelease { gate_seq })? as u64;
        }
        rounds.push(RoundMetrics {
            gate_seq,
            gate_label: gate.label(),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            per_node,
        });
    }

    for (node, stream) in streams.iter_mut().enumerate() {
        control[node] += write_message(stream, &Message::Shutdown)? as u64;
    }
    Ok(())
}

fn accept_workers(
    listener: &TcpListener,
    workers: u32,
    window: Duration,
    control: &mut [u64],
) -> Result<Vec<TcpStream>, ClusterError> {
    listener
        .set_nonblocking(true)
        .map_err(ClusterError::io("switching the listener to polling"))?;
    let deadline = Instant::now() + window;
    let mut slots: Vec<Option<TcpStream>> = (0..workers).map(|_| None).collect();
    let mut connected = 0;
    while connected < workers {
        match listener.accept() {
            Ok((mut stream, _)) => {
                stream
                    .set_nonblocking(false)
                    .and_then(|()| stream.set_nodelay(true))
                    .and_then(|()| stream.set_read_timeout(Some(window)))
                    .map_err(ClusterError::io("configuring a worker connection"))?;
                let (node, bytes) = read_preamble(&mut stream)?;
                let slot = slots.get_mut(node as usize).ok_or_else(|| {
                    ClusterError::Protocol(format!(
                        "a connection introduced itself as node {node}, beyond the {workers} expected"
                    ))
                })?;
                if slot.is_some() {
                    return Err(ClusterError::Protocol(format!("node {node} connected twice")));
                }
                control[node as usize] += bytes as u64;
                *slot = Some(stream);
                connected += 1;
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if Instant::now() > deadline {
                    let missing = slots.iter().position(Option::is_none).unwrap_or(0) as u32;
                    return Err(ClusterError::Launch {
                        node: missing,
                        reason: format!("did not connect within {window:?}"),
                    });
                }
                thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(ClusterError::io("accepting a worker connection")(e)),
        }
    }
    Ok(slots.into_iter().flatten().collect())
}

fn read_gate_done(
    stream: &mut TcpStream,
    timeout: Duration,
    node: u32,
    gate_seq: u32,
) -> Result<(Message, usize), ClusterError> {
    stream
        .set_read_timeout(Some(timeout.max(Duration::from_millis(1))))
        .map_err(ClusterError::io("arming the round timeout"))?;
    match read_message(stream) {
        Err(ClusterError::Io { source, .. })
            if matches!(source.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
        {
            Err(ClusterError::Timeout { node, gate_seq, timeout_secs: timeout.as_secs() })
        }
        other => other,
    }
}

/// Reaps workers. On an aborted run children are killed first and their
/// outcomes ignored; on a clean run any abnormal exit is reported.
fn teardown(
    children: Vec<(u32, Child)>,
    threads: Vec<WorkerThread>,
    aborted: bool,
) -> Option<ClusterError> {
    let mut late: Option<ClusterError> = None;
    for (node, mut child) in children {
        if aborted {
            let _ = child.kill();
        }
        match child.wait() {
            Ok(status) if status.success() || aborted => {}
            Ok(status) => {
                late.get_or_insert(ClusterError::WorkerExit {
                    node,
                    reason: format!("process exited with {status}"),
                });
            }
            Err(e) => {
                late.get_or_insert(ClusterError::WorkerExit { node, reason: e.to_string() });
            }
        }
    }
    for (node, handle) in threads {
        match handle.join() {
            Ok(Ok(())) => {}
            Ok(Err(e)) => {
                if !aborted {
                    late.get_or_insert(e);
                }
            }
            Err(_) => {
                if !aborted {
                    late.get_or_insert(ClusterError::WorkerExit {
                        node,
                        reason: "worker thread panicked".to_string(),
                    });
                }
            }
        }
    }
    late
}
