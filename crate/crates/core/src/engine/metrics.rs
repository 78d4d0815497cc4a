//! Per-gate and per-round timing records and their CSV form.

use serde::{Deserialize, Serialize};
use std::io;

/// Throughput is reported in MiB-based megabytes.
pub const BYTES_PER_MB: f64 = (1u64 << 20) as f64;

/// One worker's cost breakdown for one gate. Phase times follow the
/// storage accounting split; `bytes_processed` is the slice of state the
/// gate touched (each chunk counted once even though it is both read and
/// written).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GateMetrics {
    pub compute_ms: f64,
    pub read_ms: f64,
    pub write_ms: f64,
    pub writeback_ms: f64,
    pub total_ms: f64,
    pub bytes_processed: u64,
}

impl GateMetrics {
    /// Megabytes per second over the whole gate, zero for an empty or
    /// unmeasured gate.
    pub fn speed_mb_s(&self) -> f64 {
        if self.total_ms <= 0.0 {
            return 0.0;
        }
        (self.bytes_processed as f64 / BYTES_PER_MB) / (self.total_ms / 1e3)
    }
}

/// One barrier round: every worker's metrics for the same gate plus the
/// coordinator-side wall time from the start broadcast to the last
/// release sent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub gate_seq: u32,
    pub gate_label: String,
    pub wall_ms: f64,
    pub per_node: Vec<GateMetrics>,
}

impl RoundMetrics {
    pub fn bytes_processed(&self) -> u64 {
        self.per_node.iter().map(|m| m.bytes_processed).sum()
    }

    /// The round viewed as one record: phase times are the slowest
    /// worker's (critical path), total is the barrier wall, bytes are
    /// summed.
    pub fn summary(&self) -> GateMetrics {
        let max = |f: fn(&GateMetrics) -> f64| {
            self.per_node.iter().map(f).fold(0.0, f64::max)
        };
        GateMetrics {
            compute_ms: max(|m| m.compute_ms),
            read_ms: max(|m| m.read_ms),
            write_ms: max(|m| m.write_ms),
            writeback_ms: max(|m| m.writeback_ms),
            total_ms: self.wall_ms,
            bytes_processed: self.bytes_processed(),
        }
    }
}

/// Everything one circuit run produced, ready for CSV or JSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    /// Backend label: "direct" or "emulated".
    pub framework: String,
    pub n_qubits: u8,
    pub workers: u32,
    pub rounds: Vec<RoundMetrics>,
    /// Framed control-plane bytes exchanged with each worker, both
    /// directions, including assignment and shutdown.
    pub control_bytes_per_node: Vec<u64>,
}

impl RunReport {
    pub fn total_wall_ms(&self) -> f64 {
        self.rounds.iter().map(|r| r.wall_ms).sum()
    }

    /// All rounds folded into one record: phase times are the sums of
    /// each round's critical path, total is the summed barrier walls.
    pub fn summary_totals(&self) -> GateMetrics {
        let mut totals = GateMetrics::default();
        for round in &self.rounds {
            let s = round.summary();
            totals.compute_ms += s.compute_ms;
            totals.read_ms += s.read_ms;
            totals.write_ms += s.write_ms;
            totals.writeback_ms += s.writeback_ms;
            totals.total_ms += s.total_ms;
            totals.bytes_processed += s.bytes_processed;
        }
        totals
    }

    /// Whole-run throughput: all bytes processed over all barrier wall
    /// time.
    pub fn aggregate_speed_mb_s(&self) -> f64 {
        self.summary_totals().speed_mb_s()
    }

    pub fn control_bytes_per_gate_per_node(&self) -> f64 {
        let nodes = self.control_bytes_per_node.len().max(1) as f64;
        let gates = self.rounds.len().max(1) as f64;
        self.control_bytes_per_node.iter().sum::<u64>() as f64 / nodes / gates
    }

    /// Flattens to CSV rows: one row per worker per gate, then one
    /// `node = "all"` round row per gate.
    pub fn rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for round in &self.rounds {
            for (node, m) in round.per_node.iter().enumerate() {
                rows.push(CsvRow::new(
                    &self.framework,
                    node.to_string(),
                    round.gate_seq,
                    round.gate_label.clone(),
                    m,
                ));
            }
            rows.push(CsvRow::new(
                &self.framework,
                "all".to_string(),
                round.gate_seq,
                "round".to_string(),
                &round.summary(),
            ));
        }
        rows
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_writer(out);
        for row in self.rows() {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// One line of the metrics CSV. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub framework: String,
    pub node: String,
    pub gate_seq: u32,
    pub gate_label: String,
    pub compute_ms: f64,
    pub read_ms: f64,
    pub write_ms: f64,
    pub writeback_ms: f64,
    pub total_ms: f64,
    pub speed_mb_s: f64,
}

impl CsvRow {
    fn new(framework: &str, node: String, gate_seq: u32, gate_label: String, m: &GateMetrics) -> CsvRow {
        CsvRow {
            framework: framework.to_string(),
            node,
            gate_seq,
            gate_label,
            compute_ms: m.compute_ms,
            read_ms: m.read_ms,
            write_ms: m.write_ms,
            writeback_ms: m.writeback_ms,
            total_ms: m.total_ms,
            speed_mb_s: m.speed_mb_s(),
        }
    }
}
