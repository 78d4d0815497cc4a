//! State layout, gate algebra, and the in-memory reference simulator.
//!
//! An `n`-qubit state is the vector of 2^n complex amplitudes indexed by
//! basis ket, qubit 0 in the least significant bit. A single-qubit gate on
//! qubit `t` touches amplitude pairs `(i, i + 2^t)` where bit `t` of `i` is
//! clear; CX uses the same pairing on its target and updates only pairs
//! whose control bit is set.
//!
//! [`DenseState`] holds the whole vector in memory and is the reference
//! implementation everything chunked is checked against. The chunk kernel
//! in [`kernel`] applies the same arithmetic to storage-sized blocks.

mod bytes;
mod circuit;
mod kernel;

pub use bytes::{decode_amplitudes, encode_amplitudes, AMP_BYTES};
pub use circuit::Circuit;
pub use kernel::{apply_gate_chunkpair, apply_gate_dense, norm_sq, pair_index};

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;
use thiserror::Error;

/// One complex amplitude. Serialized as 16 bytes: little-endian f64 real
/// part, then imaginary part.
pub type Amplitude = Complex64;

/// Largest qubit count [`DenseState`] will allocate (2^32 amplitudes is
/// already 64 GiB; larger states only exist chunked on storage).
pub const DENSE_MAX_QUBITS: u8 = 32;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("qubit count {n_qubits} outside supported range 1..={max}")]
    QubitCountUnsupported { n_qubits: u8, max: u8 },
    #[error("basis index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: u64, n_qubits: u8 },
    #[error("gate targets qubit {target} but the state has {n_qubits} qubits")]
    TargetOutOfRange { target: u8, n_qubits: u8 },
    #[error("CX control and target are both qubit {qubit}")]
    ControlEqualsTarget { qubit: u8 },
    #[error("gate matrix is not unitary (max |M†M - I| element = {deviation:.3e})")]
    NonUnitary { deviation: f64 },
    #[error("index {index} has pair bit {target} set; not a pair low index")]
    PairBitSet { index: u64, target: u8 },
    #[error("chunk offset {offset} is not a multiple of the chunk length {chunk_len}")]
    ChunkMisaligned { offset: u64, chunk_len: u64 },
    #[error("chunk length {len} is not a power of two of at least 2 amplitudes")]
    BadChunkLen { len: u64 },
    #[error("gate stride {stride} spans chunks but no high chunk was supplied")]
    MissingHighChunk { stride: u64 },
    #[error("gate stride {stride} fits inside one chunk; unexpected high chunk")]
    UnexpectedHighChunk { stride: u64, chunk_len: u64 },
    #[error("low/high chunk lengths differ: {lo} vs {hi}")]
    ChunkLenMismatch { lo: u64, hi: u64 },
    #[error("high chunk at offset {hi_offset} does not sit one stride ({stride}) above low chunk at {lo_offset}")]
    BadPairOffset { lo_offset: u64, hi_offset: u64, stride: u64 },
    #[error("amplitude count {amps} does not match {n_qubits} qubits")]
    LengthMismatch { amps: u64, n_qubits: u8 },
    #[error("circuit line {line}: {reason}")]
    CircuitParse { line: usize, reason: String },
    #[error("circuit is for {circuit_qubits} qubits but the state has {n_qubits}")]
    CircuitQubitMismatch { circuit_qubits: u8, n_qubits: u8 },
}

/// One circuit operation. Matrices are row-major `[m00, m01, m10, m11]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    H { target: u8 },
    X { target: u8 },
    U1Q { target: u8, matrix: [Amplitude; 4] },
    CX { control: u8, target: u8 },
}

impl Gate {
    /// The qubit whose stride defines the amplitude pairing.
    pub fn target(&self) -> u8 {
        match *self {
            Gate::H { target }
            | Gate::X { target }
            | Gate::U1Q { target, .. }
            | Gate::CX { target, .. } => target,
        }
    }

    pub fn control(&self) -> Option<u8> {
        match *self {
            Gate::CX { control, .. } => Some(control),
            _ => None,
        }
    }

    /// The 2x2 matrix applied to each selected pair. For CX this is the X
    /// matrix; the control-bit filter is the kernel's job.
    pub fn pair_matrix(&self) -> [Amplitude; 4] {
        let one = Amplitude::new(1.0, 0.0);
        let zero = Amplitude::new(0.0, 0.0);
        match self {
            Gate::H { .. } => {
                let h = Amplitude::new(FRAC_1_SQRT_2, 0.0);
                [h, h, h, -h]
            }
            Gate::X { .. } | Gate::CX { .. } => [zero, one, one, zero],
            Gate::U1Q { matrix, .. } => *matrix,
        }
    }

    /// Shape checks that need no qubit count: control distinct from target
    /// and a unitary matrix (within [`crate::tol::UNITARY`]).
    pub fn validate_shape(&self) -> Result<(), StateError> {
        if let Gate::CX { control, target } = *self {
            if control == target {
                return Err(StateError::ControlEqualsTarget { qubit: target });
            }
        }
        if let Gate::U1Q { matrix, .. } = self {
            let dev = unitary_deviation(matrix);
            if dev > crate::tol::UNITARY {
                return Err(StateError::NonUnitary { deviation: dev });
            }
        }
        Ok(())
    }

    pub fn validate(&self, n_qubits: u8) -> Result<(), StateError> {
        self.validate_shape()?;
        if self.target() >= n_qubits {
            return Err(StateError::TargetOutOfRange { target: self.target(), n_qubits });
        }
        if let Some(control) = self.control() {
            if control >= n_qubits {
                return Err(StateError::TargetOutOfRange { target: control, n_qubits });
            }
        }
        Ok(())
    }

    /// Short human label used in metrics rows, e.g. `H q13`.
    pub fn label(&self) -> String {
        match *self {
            Gate::H { target } => format!("H q{target}"),
            Gate::X { target } => format!("X q{target}"),
            Gate::U1Q { target, .. } => format!("U q{target}"),
            Gate::CX { control, target } => format!("CX q{control} q{target}"),
        }
    }
}

/// Max elementwise deviation of M†M from the identity.
pub fn unitary_deviation(m: &[Amplitude; 4]) -> f64 {
    // M†M entry (r, c) = Σ_k conj(m[k][r]) * m[k][c] with row-major m.
    let mut dev: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let v = m[r].conj() * m[c] + m[2 + r].conj() * m[2 + c];
            let expect = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((v - Amplitude::new(expect, 0.0)).norm());
        }
    }
    dev
}

/// Full state vector held in memory. The reference implementation: chunked
/// execution is correct exactly when it matches this one.
#[derive(Clone, Debug)]
pub struct DenseState {
    n_qubits: u8,
    amps: Vec<Amplitude>,
}

impl DenseState {
    /// The basis state `|index⟩`.
    pub fn basis(n_qubits: u8, index: u64) -> Result<Self, StateError> {
        if n_qubits == 0 || n_qubits > DENSE_MAX_QUBITS {
            return Err(StateError::QubitCountUnsupported { n_qubits, max: DENSE_MAX_QUBITS });
        }
        let len = 1u64 << n_qubits;
        if index >= len {
            return Err(StateError::IndexOutOfRange { index, n_qubits });
        }
        let mut amps = vec![Amplitude::new(0.0, 0.0); len as usize];
        amps[index as usize] = Amplitude::new(1.0, 0.0);
        Ok(DenseState { n_qubits, amps })
    }

    pub fn from_amps(n_qubits: u8, amps: Vec<Amplitude>) -> Result<Self, StateError> {
        if n_qubits == 0 || n_qubits > DENSE_MAX_QUBITS {
            return Err(StateError::QubitCountUnsupported { n_qubits, max: DENSE_MAX_QUBITS });
        }
        if amps.len() as u64 != 1u64 << n_qubits {
            return Err(StateError::LengthMismatch { amps: amps.len() as u64, n_qubits });
        }
        Ok(DenseState { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> u8 {
        self.n_qubits
    }

    pub fn amps(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Amplitude] {
        &mut self.amps
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<(), StateError> {
        kernel::apply_gate_dense(self, gate)
    }

    pub fn apply_all(&mut self, circuit: &Circuit) -> Result<(), StateError> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(StateError::CircuitQubitMismatch {
                circuit_qubits: circuit.n_qubits(),
                n_qubits: self.n_qubits,
            });
        }
        for gate in circuit.gates() {
            self.apply(gate)?;
        }
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        kernel::norm_sq(&self.amps)
    }

    /// Largest |a_i - b_i| over all amplitudes.
    pub fn max_deviation(&self, other: &DenseState) -> f64 {
        assert_eq!(self.n_qubits, other.n_qubits);
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_state_is_unit_vector() {
        let s = DenseState::basis(3, 5).unwrap();
        assert_eq!(s.amps()[5], Amplitude::new(1.0, 0.0));
        assert_eq!(s.norm_sq(), 1.0);
        assert_eq!(s.amps().iter().filter(|a| a.norm() > 0.0).count(), 1);
    }

    #[test]
    fn basis_index_must_be_in_range() {
        assert!(matches!(
            DenseState::basis(10, 8192),
            Err(StateError::IndexOutOfRange { .. })
        ));
        assert!(DenseState::basis(14, 8192).is_ok());
    }

    #[test]
    fn zero_qubits_rejected() {
        assert!(matches!(
            DenseState::basis(0, 0),
            Err(StateError::QubitCountUnsupported { .. })
        ));
    }

    #[test]
    fn h_matrix_is_unitary_x_is_involution() {
        assert!(unitary_deviation(&Gate::H { target: 0 }.pair_matrix()) < 1e-15);
        assert!(unitary_deviation(&Gate::X { target: 0 }.pair_matrix()) < 1e-15);
    }

    #[test]
    fn non_unitary_matrix_rejected() {
        let m = [
            Amplitude::new(1.0, 0.0),
            Amplitude::new(1.0, 0.0),
            Amplitude::new(0.0, 0.0),
            Amplitude::new(1.0, 0.0),
        ];
        let g = Gate::U1Q { target: 0, matrix: m };
        assert!(matches!(g.validate_shape(), Err(StateError::NonUnitary { .. })));
    }

    #[test]
    fn cx_control_must_differ_from_target() {
        let g = Gate::CX { control: 2, target: 2 };
        assert!(matches!(
            g.validate_shape(),
            Err(StateError::ControlEqualsTarget { qubit: 2 })
        ));
    }

    #[test]
    fn gate_labels() {
        assert_eq!(Gate::H { target: 13 }.label(), "H q13");
        assert_eq!(Gate::CX { control: 0, target: 2 }.label(), "CX q0 q2");
    }
}
