//! Circuit container and its text format.
//!
//! One gate per line, `#` starts a comment, blank lines are skipped:
//!
//! ```text
//! h 13
//! x 13
//! u 2 0.0 0.0 1.0 0.0 1.0 0.0 0.0 0.0
//! cx 0 2
//! ```
//!
//! `u` takes the 2x2 matrix as eight reals, row-major `re,im` pairs.

use super::{Amplitude, Gate, StateError};
use rand::Rng;
use std::f64::consts::TAU;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: u8,
    gates: Vec<Gate>,
}

impl Circuit {
    /// Validates every gate against `n_qubits`.
    pub fn new(n_qubits: u8, gates: Vec<Gate>) -> Result<Self, StateError> {
        for gate in &gates {
            gate.validate(n_qubits)?;
        }
        Ok(Circuit { n_qubits, gates })
    }

    pub fn n_qubits(&self) -> u8 {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Parses the one-gate-per-line format described in the module docs.
    pub fn parse(text: &str, n_qubits: u8) -> Result<Self, StateError> {
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut fields = body.split_whitespace();
            let op = fields.next().unwrap().to_ascii_lowercase();
            let gate = match op.as_str() {
                "h" => Gate::H { target: parse_qubit(&mut fields, line, "h")? },
                "x" => Gate::X { target: parse_qubit(&mut fields, line, "x")? },
                "cx" => {
                    let control = parse_qubit(&mut fields, line, "cx")?;
                    let target = parse_qubit(&mut fields, line, "cx")?;
                    Gate::CX { control, target }
                }
                "u" => {
                    let target = parse_qubit(&mut fields, line, "u")?;
                    let mut reals = [0.0f64; 8];
                    for slot in reals.iter_mut() {
                        let tok = fields.next().ok_or_else(|| StateError::CircuitParse {
                            line,
                            reason: "u needs a qubit and 8 matrix reals".into(),
                        })?;
                        *slot = tok.parse().map_err(|_| StateError::CircuitParse {
                            line,
                            reason: format!("bad matrix entry {tok:?}"),
                        })?;
                    }
                    let matrix = [
                        Amplitude::new(reals[0], reals[1]),
                        Amplitude::new(reals[2], reals[3]),
                        Amplitude::new(reals[4], reals[5]),
                        Amplitude::new(reals[6], reals[7]),
                    ];
                    Gate::U1Q { target, matrix }
                }
                other => {
                    return Err(StateError::CircuitParse {
                        line,
                        reason: format!("unknown gate {other:?}"),
                    })
                }
            };
            if let Some(extra) = fields.next() {
                return Err(StateError::CircuitParse {
                    line,
                    reason: format!("trailing token {extra:?}"),
                });
            }
            gate.validate(n_qubits).map_err(|e| StateError::CircuitParse {
                line,
                reason: e.to_string(),
            })?;
            gates.push(gate);
        }
        Ok(Circuit { n_qubits, gates })
    }

    /// A random circuit over {H, X, U1Q, CX} with Haar-style random
    /// single-qubit unitaries. CX appears only when two qubits exist.
    pub fn random<R: Rng>(n_qubits: u8, len: usize, rng: &mut R) -> Self {
        assert!(n_qubits >= 1);
        let kinds = if n_qubits >= 2 { 4 } else { 3 };
        let gates = (0..len)
            .map(|_| {
                let target = rng.gen_range(0..n_qubits);
                match rng.gen_range(0..kinds) {
                    0 => Gate::H { target },
                    1 => Gate::X { target },
                    2 => Gate::U1Q { target, matrix: random_unitary(rng) },
                    _ => {
                        let mut control = rng.gen_range(0..n_qubits);
                        while control == target {
                            control = rng.gen_range(0..n_qubits);
                        }
                        Gate::CX { control, target }
                    }
                }
            })
            .collect();
        Circuit { n_qubits, gates }
    }
}

/// Unit-modulus parameterization `U(θ, φ, λ)`; unitary by construction.
fn random_unitary<R: Rng>(rng: &mut R) -> [Amplitude; 4] {
    let theta = rng.gen_range(0.0..TAU);
    let phi = rng.gen_range(0.0..TAU);
    let lambda = rng.gen_range(0.0..TAU);
    let (sin, cos) = (theta / 2.0).sin_cos();
    [
        Amplitude::new(cos, 0.0),
        -Amplitude::from_polar(sin, lambda),
        Amplitude::from_polar(sin, phi),
        Amplitude::from_polar(cos, phi + lambda),
    ]
}

fn parse_qubit(
    fields: &mut std::str::SplitWhitespace<'_>,
    line: usize,
    op: &str,
) -> Result<u8, StateError> {
    let tok = fields.next().ok_or_else(|| StateError::CircuitParse {
        line,
        reason: format!("{op} is missing a qubit argument"),
    })?;
    tok.parse().map_err(|_| StateError::CircuitParse {
        line,
        reason: format!("bad qubit index {tok:?}"),
    })
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for gate in &self.gates {
            match gate {
                Gate::H { target } => writeln!(f, "h {target}")?,
                Gate::X { target } => writeln!(f, "x {target}")?,
                Gate::CX { control, target } => writeln!(f, "cx {control} {target}")?,
                Gate::U1Q { target, matrix } => {
                    write!(f, "u {target}")?;
                    for m in matrix {
                        write!(f, " {} {}", m.re, m.im)?;
                    }
                    writeln!(f)?;
                }
            }
        }
        Ok(())
    }
}
