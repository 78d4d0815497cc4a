//! Control-plane wire format: length-prefixed JSON frames over TCP.
//!
//! Each frame is a 4-byte big-endian payload length followed by one JSON
//! message. A worker introduces itself after connecting with a 4-byte
//! big-endian node id preamble; everything after that is frames. TCP
//! ordering is the only acknowledgement mechanism.

use super::{ClusterError, WorkRange};
use crate::engine::GateMetrics;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Upper bound on one frame's payload; anything larger is a corrupt or
/// foreign stream, not a legitimate schedule.
pub const MAX_FRAME_BYTES: u32 = 16 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Message {
    /// Coordinator to worker, once per run: the worker's range for every
    /// gate, indexed by gate sequence number.
    #[serde(rename = "ASSIGN")]
    Assign { node: u32, schedule: Vec<WorkRange> },
    /// Coordinator to worker: execute gate `gate_seq` of the circuit.
    #[serde(rename = "START_GATE")]
    StartGate { gate_seq: u32 },
    /// Worker to coordinator: the gate finished (or failed) locally and
    /// its dirty chunks are flushed.
    #[serde(rename = "GATE_DONE")]
    GateDone { gate_seq: u32, outcome: GateOutcome },
    /// Coordinator to worker: every worker finished `gate_seq`; the next
    /// gate may read any chunk.
    #[serde(rename = "BARRIER_RELEASE")]
    BarrierRelease { gate_seq: u32 },
    /// Coordinator to worker: clean exit after the last gate.
    #[serde(rename = "SHUTDOWN")]
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum GateOutcome {
    Ok { metrics: GateMetrics },
    Failed { error: String },
}

/// Frames and sends one message. Returns the bytes put on the wire.
pub fn write_message<W: Write>(writer: &mut W, message: &Message) -> Result<usize, ClusterError> {
    let payload = serde_json::to_vec(message)
        .map_err(|e| ClusterError::Protocol(format!("encoding {message:?}: {e}")))?;
    if payload.len() > MAX_FRAME_BYTES as usize {
        return Err(ClusterError::Protocol(format!(
            "{} byte frame exceeds the {MAX_FRAME_BYTES} byte limit",
            payload.len()
        )));
    }
    writer
        .write_all(&(payload.len() as u32).to_be_bytes())
        .and_then(|()| writer.write_all(&payload))
        .and_then(|()| writer.flush())
        .map_err(ClusterError::io("sending frame"))?;
    Ok(4 + payload.len())
}

/// Receives one message. Returns it with the bytes read off the wire.
pub fn read_message<R: Read>(reader: &mut R) -> Result<(Message, usize), ClusterError> {
    let mut header = [0u8; 4];
    reader.read_exact(&mut header).map_err(ClusterError::io("reading frame header"))?;
    let len = u32::from_be_bytes(header);
    if len > MAX_FRAME_BYTES {
        return Err(ClusterError::Protocol(format!(
            "{len} byte frame exceeds the {MAX_FRAME_BYTES} byte limit"
        )));
    }
    let mut payload = vec![0u8; len as usize];
    reader.read_exact(&mut payload).map_err(ClusterError::io("reading frame payload"))?;
    let message = serde_json::from_slice(&payload)
        .map_err(|e| ClusterError::Protocol(format!("decoding frame: {e}")))?;
    Ok((message, 4 + len as usize))
}

/// Sends the 4-byte node id a worker opens its connection with.
pub fn write_preamble<W: Write>(writer: &mut W, node: u32) -> Result<usize, ClusterError> {
    writer
        .write_all(&node.to_be_bytes())
        .and_then(|()| writer.flush())
        .map_err(ClusterError::io("sending node preamble"))?;
    Ok(4)
}

pub fn read_preamble<R: Read>(reader: &mut R) -> Result<(u32, usize), ClusterError> {
    let mut bytes = [0u8; 4];
    reader.read_exact(&mut bytes).map_err(ClusterError::io("reading node preamble"))?;
    Ok((u32::from_be_bytes(bytes), 4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn round_trip(message: Message) -> usize {
        let mut wire = Vec::new();
        let written = write_message(&mut wire, &message).unwrap();
        assert_eq!(written, wire.len());
        let (back, read) = read_message(&mut Cursor::new(&wire)).unwrap();
        assert_eq!(read, written);
        assert_eq!(back, message);
        written
    }

    #[test]
    fn every_kind_round_trips() {
        round_trip(Message::Assign {
            node: 1,
            schedule: vec![
                WorkRange::IntraChunk { chunk_lo: 0, chunk_hi: 1024 },
                WorkRange::CrossChunk { pair_lo: 0, pair_hi: 512, stride_chunks_log2: 3 },
            ],
        });
        round_trip(Message::StartGate { gate_seq: 7 });
        round_trip(Message::GateDone {
            gate_seq: 7,
            outcome: GateOutcome::Ok {
                metrics: GateMetrics {
                    compute_ms: 1.5,
                    read_ms: 2.0,
                    write_ms: 0.5,
                    writeback_ms: 3.0,
                    total_ms: 7.25,
                    bytes_processed: 1 << 20,
                },
            },
        });
        round_trip(Message::GateDone {
            gate_seq: 8,
            outcome: GateOutcome::Failed { error: "disk gone".into() },
        });
        round_trip(Message::BarrierRelease { gate_seq: 7 });
        round_trip(Message::Shutdown);
    }

    #[test]
    fn json_uses_upper_case_kind_tags() {
        let json = serde_json::to_string(&Message::StartGate { gate_seq: 3 }).unwrap();
        assert_eq!(json, r#"{"kind":"START_GATE","gate_seq":3}"#);
        let json = serde_json::to_string(&Message::Shutdown).unwrap();
        assert_eq!(json, r#"{"kind":"SHUTDOWN"}"#);
        let json = serde_json::to_string(&Message::GateDone {
            gate_seq: 0,
            outcome: GateOutcome::Failed { error: "x".into() },
        })
        .unwrap();
        assert!(json.contains(r#""kind":"GATE_DONE""#));
        assert!(json.contains(r#""status":"failed""#));
    }

    #[test]
    fn frame_is_length_prefixed_big_endian() {
        let mut wire = Vec::new();
        write_message(&mut wire, &Message::Shutdown).unwrap();
        let len = u32::from_be_bytes(wire[..4].try_into().unwrap()) as usize;
        assert_eq!(len, wire.len() - 4);
        assert_eq!(&wire[4..], br#"{"kind":"SHUTDOWN"}"#);
    }

    #[test]
    fn oversized_and_garbage_frames_are_rejected() {
        let mut wire = Vec::new();
        wire.extend((MAX_FRAME_BYTES + 1).to_be_bytes());
        assert!(matches!(
            read_message(&mut Cursor::new(&wire)),
            Err(ClusterError::Protocol(_))
        ));

        let mut wire = Vec::new();
        wire.extend(7u32.to_be_bytes());
        wire.extend(b"not {} ");
        assert!(matches!(
            read_message(&mut Cursor::new(&wire)),
            Err(ClusterError::Protocol(_))
        ));

        // Truncated payload surfaces as an I/O error, not a hang.
        let mut wire = Vec::new();
        write_message(&mut wire, &Message::StartGate { gate_seq: 1 }).unwrap();
        wire.truncate(wire.len() - 2);
        assert!(matches!(read_message(&mut Cursor::new(&wire)), Err(ClusterError::Io { .. })));
    }

    #[test]
    fn preamble_is_four_bytes_big_endian() {
        let mut wire = Vec::new();
        assert_eq!(write_preamble(&mut wire, 0x0102_0304).unwrap(), 4);
        assert_eq!(wire, vec![1, 2, 3, 4]);
        let (node, read) = read_preamble(&mut Cursor::new(&wire)).unwrap();
        assert_eq!((node, read), (0x0102_0304, 4));
    }
}
