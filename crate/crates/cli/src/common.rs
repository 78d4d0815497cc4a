//! Argument groups and helpers shared by more than one subcommand.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use shoal_core::state::{Circuit, Gate};
use shoal_core::storage::{BackendConfig, NetworkProfile, PoolManifest};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// Local shard files, positional I/O only.
    Direct,
    /// Same shard files with per-request network costs injected.
    Emulated,
}

/// Cost model of the emulated backend. Parsed even when the direct
/// backend is selected so `bench`, which always runs both, can share it.
#[derive(Args, Debug)]
pub struct ProfileArgs {
    /// Emulated backend: latency added to every storage request, in ms
    #[arg(long, default_value_t = 1.0)]
    pub latency_ms: f64,
    /// Emulated backend: link bandwidth in gigabits per second
    #[arg(long, default_value_t = 10.0)]
    pub bandwidth_gbps: f64,
    /// Emulated backend: each write moves replication x bytes on the wire
    #[arg(long, default_value_t = 1)]
    pub replication: u32,
}

impl ProfileArgs {
    pub fn profile(&self) -> Result<NetworkProfile> {
        if !(self.latency_ms >= 0.0) {
            bail!("--latency-ms must be zero or positive, got {}", self.latency_ms);
        }
        if !(self.bandwidth_gbps > 0.0) {
            bail!("--bandwidth-gbps must be positive, got {}", self.bandwidth_gbps);
        }
        if self.replication == 0 {
            bail!("--replication must be at least 1");
        }
        Ok(NetworkProfile {
            per_request_latency: Duration::from_secs_f64(self.latency_ms / 1e3),
            bandwidth_bytes_per_sec: self.bandwidth_gbps * 1e9 / 8.0,
            replication: self.replication,
        })
    }
}

#[derive(Args, Debug)]
pub struct BackendArgs {
    /// Storage backend every worker opens
    #[arg(long, value_enum, default_value_t = BackendKind::Direct, env = "SHOAL_BACKEND")]
    pub backend: BackendKind,
    #[command(flatten)]
    pub profile: ProfileArgs,
}

impl BackendArgs {
    pub fn config(&self) -> Result<BackendConfig> {
        Ok(match self.backend {
            BackendKind::Direct => BackendConfig::Direct,
            BackendKind::Emulated => BackendConfig::Emulated(self.profile.profile()?),
        })
    }

    /// The flag value that reproduces this selection in a child argv.
    pub fn kind_flag(&self) -> &'static str {
        match self.backend {
            BackendKind::Direct => "direct",
            BackendKind::Emulated => "emulated",
        }
    }
}

#[derive(Args, Debug)]
pub struct CircuitArgs {
    /// Circuit file: one gate per line (`h 13`, `x 5`, `cx 0 5`,
    /// `u 3 <8 matrix reals>`), `#` comments
    #[arg(long, env = "SHOAL_CIRCUIT")]
    pub circuit: Option<PathBuf>,
    /// Without --circuit: target of the built-in H-then-X pair, clamped
    /// below the pool's qubit count
    #[arg(long, default_value_t = 13)]
    pub target_qubit: u8,
}

impl CircuitArgs {
    pub fn load(&self, n_qubits: u8) -> Result<Circuit> {
        match &self.circuit {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading circuit file {}", path.display()))?;
                Circuit::parse(&text, n_qubits)
                    .with_context(|| format!("parsing circuit file {}", path.display()))
            }
            None => {
                let target = self.target_qubit.min(n_qubits - 1);
                Ok(Circuit::parse(&format!("h {target}\nx {target}\n"), n_qubits)
                    .expect("built-in circuit"))
            }
        }
    }
}

/// Serializes a circuit to the same text format `Circuit::parse` reads.
/// `Display` for f64 round-trips, so a parse of the result reproduces
/// every matrix exactly.
pub fn circuit_to_text(circuit: &Circuit) -> String {
    let mut text = String::new();
    for gate in circuit.gates() {
        match gate {
            Gate::H { target } => writeln!(text, "h {target}"),
            Gate::X { target } => writeln!(text, "x {target}"),
            Gate::CX { control, target } => writeln!(text, "cx {control} {target}"),
            Gate::U1Q { target, matrix } => {
                write!(text, "u {target}").unwrap();
                for entry in matrix {
                    write!(text, " {} {}", entry.re, entry.im).unwrap();
                }
                writeln!(text)
            }
        }
        .unwrap();
    }
    text
}

pub fn load_manifest(pool_dir: &std::path::Path) -> Result<PoolManifest> {
    PoolManifest::load(pool_dir)
        .with_context(|| format!("opening pool at {}", pool_dir.display()))
}

/// `1234567` -> `"1,234,567"`.
pub fn commas(value: u128) -> String {
    let digits = value.to_string();
    let mut grouped = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i != 0 && (digits.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    grouped
}

/// Binary-unit rendering for byte counts: `268435456` -> `"256 MiB"`.
pub fn human_bytes(bytes: u64) -> String {
    const UNITS: [(&str, u64); 4] =
        [("GiB", 1 << 30), ("MiB", 1 << 20), ("KiB", 1 << 10), ("B", 1)];
    for (unit, scale) in UNITS {
        if bytes >= scale {
            let scaled = bytes as f64 / scale as f64;
            return if (bytes % scale) == 0 {
                format!("{} {unit}", bytes / scale)
            } else {
                format!("{scaled:.1} {unit}")
            };
        }
    }
    "0 B".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comma_grouping() {
        assert_eq!(commas(0), "0");
        assert_eq!(commas(999), "999");
        assert_eq!(commas(2_147_483_648), "2,147,483,648");
        assert_eq!(commas(17_592_186_044_416), "17,592,186,044,416");
    }

    #[test]
    fn byte_rendering() {
        assert_eq!(human_bytes(0), "0 B");
        assert_eq!(human_bytes(512), "512 B");
        assert_eq!(human_bytes(256 << 20), "256 MiB");
        assert_eq!(human_bytes((1 << 30) + (512 << 20)), "1.5 GiB");
    }

    #[test]
    fn circuit_text_round_trips() {
        // cos(0.3), sin(0.3): a rotation with an imaginary off-diagonal.
        let (c, s) = (0.9553364891256061, 0.29552020666133955);
        let src = format!("h 0\nu 2 {c} 0 0 {s} 0 {s} {c} 0\ncx 1 3\nx 3\n");
        let circuit = Circuit::parse(&src, 4).unwrap();
        let text = circuit_to_text(&circuit);
        let back = Circuit::parse(&text, 4).unwrap();
        assert_eq!(circuit.gates(), back.gates());
    }

    #[test]
    fn bandwidth_converts_gigabits() {
        let args = ProfileArgs { latency_ms: 1.0, bandwidth_gbps: 10.0, replication: 1 };
        let p = args.profile().unwrap();
        assert_eq!(p.bandwidth_bytes_per_sec, 1.25e9);
        assert_eq!(p.per_request_latency, Duration::from_millis(1));
    }
}
