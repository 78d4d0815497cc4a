//! Gate kernels: full-state and chunk-level.
//!
//! Both kernels perform the identical pair update
//!
//! ```text
//! (a', b') = (m00*a + m01*b, m10*a + m11*b)    with b = amps[i + 2^t]
//! ```
//!
//! and differ only in how pairs are enumerated. The chunk kernel runs in
//! one of two modes decided by the gate stride 2^t against the chunk
//! length:
//!
//! * intra-chunk (`2^t < chunk_len`): both pair members sit inside one
//!   chunk, every chunk is self-contained;
//! * cross-chunk (`2^t >= chunk_len`): the stride pairs whole chunks, and
//!   the kernel combines element `k` of the low chunk with element `k` of
//!   the high chunk.

use super::{Amplitude, DenseState, Gate, StateError};

/// The amplitude pair a gate on qubit `target` touches at low index
/// `index`: `(index, index + 2^target)`. Rejects indices with the pair bit
/// already set; those are high members, not pair bases.
pub fn pair_index(index: u64, target: u8) -> Result<(u64, u64), StateError> {
    debug_assert!(target < 63);
    let stride = 1u64 << target;
    if index & stride != 0 {
        return Err(StateError::PairBitSet { index, target });
    }
    Ok((index, index + stride))
}

/// Applies `gate` to the whole in-memory state. Reference implementation:
/// simple, allocation-free, and trusted by everything chunked.
pub fn apply_gate_dense(state: &mut DenseState, gate: &Gate) -> Result<(), StateError> {
    gate.validate(state.n_qubits())?;
    let stride = 1usize << gate.target();
    let control_mask = gate.control().map(|c| 1usize << c);
    let m = gate.pair_matrix();
    let amps = state.amps_mut();
    for base in (0..amps.len()).step_by(stride * 2) {
        for i in base..base + stride {
            if let Some(mask) = control_mask {
                if i & mask == 0 {
                    continue;
                }
            }
            let (a, b) = (amps[i], amps[i + stride]);
            amps[i] = m[0] * a + m[1] * b;
            amps[i + stride] = m[2] * a + m[3] * b;
        }
    }
    Ok(())
}

/// Applies `gate` to one chunk (intra-chunk mode, `hi` = `None`) or to a
/// lo/hi chunk pair (cross-chunk mode). Offsets are global amplitude
/// indices of each chunk's first element; the CX control filter always
/// tests the global index, so a control outside the chunk works the same
/// as one inside it.
pub fn apply_gate_chunkpair(
    lo: &mut [Amplitude],
    hi: Option<(&mut [Amplitude], u64)>,
    lo_offset: u64,
    gate: &Gate,
) -> Result<(), StateError> {
    gate.validate_shape()?;
    let chunk_len = lo.len() as u64;
    if chunk_len < 2 || !chunk_len.is_power_of_two() {
        return Err(StateError::BadChunkLen { len: chunk_len });
    }
    if lo_offset % chunk_len != 0 {
        return Err(StateError::ChunkMisaligned { offset: lo_offset, chunk_len });
    }
    let stride = 1u64 << gate.target();
    let control_mask = gate.control().map(|c| 1u64 << c);
    let m = gate.pair_matrix();

    if stride < chunk_len {
        if hi.is_some() {
            return Err(StateError::UnexpectedHighChunk { stride, chunk_len });
        }
        let stride = stride as usize;
        for base in (0..lo.len()).step_by(stride * 2) {
            for i in base..base + stride {
                if let Some(mask) = control_mask {
                    if (lo_offset + i as u64) & mask == 0 {
                        continue;
                    }
                }
                let (a, b) = (lo[i], lo[i + stride]);
                lo[i] = m[0] * a + m[1] * b;
                lo[i + stride] = m[2] * a + m[3] * b;
            }
        }
        return Ok(());
    }

    let (hi, hi_offset) = hi.ok_or(StateError::MissingHighChunk { stride })?;
    if hi.len() as u64 != chunk_len {
        return Err(StateError::ChunkLenMismatch { lo: chunk_len, hi: hi.len() as u64 });
    }
    if hi_offset % chunk_len != 0 {
        return Err(StateError::ChunkMisaligned { offset: hi_offset, chunk_len });
    }
    // The low chunk's base must itself be a pair low index, and the high
    // chunk must sit exactly one stride above it.
    let (_, expected_hi) = pair_index(lo_offset, gate.target())?;
    if hi_offset != expected_hi {
        return Err(StateError::BadPairOffset { lo_offset, hi_offset, stride });
    }
    for k in 0..lo.len() {
        if let Some(mask) = control_mask {
            if (lo_offset + k as u64) & mask == 0 {
                continue;
            }
        }
        let (a, b) = (lo[k], hi[k]);
        lo[k] = m[0] * a + m[1] * b;
        hi[k] = m[2] * a + m[3] * b;
    }
    Ok(())
}

/// Σ|amp|² with Neumaier compensation, so states far past 2^20 amplitudes
/// still sum well inside the norm-drift tolerance.
pub fn norm_sq(amps: &[Amplitude]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for a in amps {
        let term = a.norm_sqr();
        let next = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - next) + term;
        } else {
            comp += (term - next) + sum;
        }
        sum = next;
    }
    sum + comp
}
