//! Whole-state helpers: initialization, norm, and dense comparison.
//!
//! These stream the pool chunk by chunk, so they work at any size the
//! pool does; only [`read_dense_state`] is limited to sizes that fit in
//! memory.

use super::{decode_vec, EngineError};
use crate::state::{self, Amplitude, DenseState, StateError, AMP_BYTES};
use crate::storage::{ChunkId, Pool};

/// Resets the pool to the computational basis state `|basis_index>`:
/// every amplitude zero except a single one. Durable on return.
pub fn init_basis_state(pool: &mut Pool, basis_index: u64) -> Result<(), EngineError> {
    let n_qubits = pool.manifest().n_qubits;
    if basis_index >> n_qubits != 0 {
        return Err(StateError::IndexOutOfRange { index: basis_index, n_qubits }.into());
    }
    let amps_per_chunk = pool.manifest().amps_per_chunk();
    let zero_chunk = vec![0u8; pool.chunk_bytes() as usize];
    let one_chunk = basis_index / amps_per_chunk;
    for chunk in 0..pool.chunk_count() {
        if chunk == one_chunk {
            let mut buf = zero_chunk.clone();
            let at = (basis_index % amps_per_chunk) as usize * AMP_BYTES;
            buf[at..at + 8].copy_from_slice(&1f64.to_le_bytes());
            pool.write_chunk(ChunkId(chunk), &buf)?;
        } else {
            pool.write_chunk(ChunkId(chunk), &zero_chunk)?;
        }
    }
    pool.write_back()?;
    Ok(())
}

/// Squared two-norm of the pooled state, with the same compensated
/// summation the dense path uses so drift checks see identical noise.
pub fn pool_norm_sq(pool: &mut Pool) -> Result<f64, EngineError> {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for chunk in 0..pool.chunk_count() {
        let part = state::norm_sq(&decode_vec(pool.read_chunk(ChunkId(chunk))?));
        let t = sum + part;
        if sum.abs() >= part.abs() {
            compensation += (sum - t) + part;
        } else {
            compensation += (part - t) + sum;
        }
        sum = t;
    }
    Ok(sum + compensation)
}

/// Materializes the pooled state in memory. Only for sizes within
/// [`state::DENSE_MAX_QUBITS`].
pub fn read_dense_state(pool: &mut Pool) -> Result<DenseState, EngineError> {
    let n_qubits = pool.manifest().n_qubits;
    let mut amps: Vec<Amplitude> = Vec::with_capacity(1usize << n_qubits.min(state::DENSE_MAX_QUBITS));
    for chunk in 0..pool.chunk_count() {
        amps.extend(decode_vec(pool.read_chunk(ChunkId(chunk))?));
    }
    Ok(DenseState::from_amps(n_qubits, amps)?)
}

/// Largest absolute amplitude difference between the pooled state and a
/// dense reference, streamed so the pool side is never copied whole.
pub fn max_deviation_from_dense(pool: &mut Pool, reference: &DenseState) -> Result<f64, EngineError> {
    let n_qubits = pool.manifest().n_qubits;
    if n_qubits != reference.n_qubits() {
        return Err(StateError::CircuitQubitMismatch {
            circuit_qubits: reference.n_qubits(),
            n_qubits,
        }
        .into());
    }
    let amps_per_chunk = pool.manifest().amps_per_chunk() as usize;
    let mut max = 0.0f64;
    for chunk in 0..pool.chunk_count() {
        let amps = decode_vec(pool.read_chunk(ChunkId(chunk))?);
        let base = chunk as usize * amps_per_chunk;
        for (k, amp) in amps.iter().enumerate() {
            max = max.max((amp - reference.amps()[base + k]).norm());
        }
    }
    Ok(max)
}

/// Lowest amplitude index whose deviation from the dense reference
/// exceeds `threshold`, with that deviation. `None` means the states
/// agree everywhere within the threshold.
pub fn first_deviation_above(
    pool: &mut Pool,
    reference: &DenseState,
    threshold: f64,
) -> Result<Option<(u64, f64)>, EngineError> {
    let n_qubits = pool.manifest().n_qubits;
    if n_qubits != reference.n_qubits() {
        return Err(StateError::CircuitQubitMismatch {
            circuit_qubits: reference.n_qubits(),
            n_qubits,
        }
        .into());
    }
    let amps_per_chunk = pool.manifest().amps_per_chunk() as usize;
    for chunk in 0..pool.chunk_count() {
        let amps = decode_vec(pool.read_chunk(ChunkId(chunk))?);
        let base = chunk as usize * amps_per_chunk;
        for (k, amp) in amps.iter().enumerate() {
            let dev = (amp - reference.amps()[base + k]).norm();
            if dev > threshold {
                return Ok(Some(((base + k) as u64, dev)));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Circuit;
    use crate::storage::{create_pool, BackendConfig};

    fn small_pool(n_qubits: u8, chunk_bytes: u64) -> (tempfile::TempDir, Pool) {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), n_qubits, chunk_bytes, 2).unwrap();
        let pool = Pool::open(dir.path(), 4 * chunk_bytes, &BackendConfig::Direct).unwrap();
        (dir, pool)
    }

    #[test]
    fn basis_state_has_unit_norm_and_matches_dense() {
        let (_dir, mut pool) = small_pool(6, 64);
        init_basis_state(&mut pool, 37).unwrap();
        assert_eq!(pool_norm_sq(&mut pool).unwrap(), 1.0);
        let dense = read_dense_state(&mut pool).unwrap();
        assert_eq!(dense.amps()[37], Amplitude::new(1.0, 0.0));
        assert_eq!(max_deviation_from_dense(&mut pool, &dense).unwrap(), 0.0);
    }

    #[test]
    fn reinitialization_clears_previous_state() {
        let (_dir, mut pool) = small_pool(5, 64);
        init_basis_state(&mut pool, 3).unwrap();
        init_basis_state(&mut pool, 17).unwrap();
        let dense = read_dense_state(&mut pool).unwrap();
        assert_eq!(dense.amps()[3], Amplitude::new(0.0, 0.0));
        assert_eq!(dense.amps()[17], Amplitude::new(1.0, 0.0));
    }

    #[test]
    fn deviation_sees_a_planted_error() {
        let (_dir, mut pool) = small_pool(5, 64);
        init_basis_state(&mut pool, 0).unwrap();
        let mut reference = read_dense_state(&mut pool).unwrap();
        reference.amps_mut()[20] += Amplitude::new(0.0, 2.5e-3);
        let dev = max_deviation_from_dense(&mut pool, &reference).unwrap();
        assert!((dev - 2.5e-3).abs() < 1e-15);
    }

    #[test]
    fn first_deviation_reports_lowest_index() {
        let (_dir, mut pool) = small_pool(5, 64);
        init_basis_state(&mut pool, 0).unwrap();
        let mut reference = read_dense_state(&mut pool).unwrap();
        reference.amps_mut()[9] += Amplitude::new(1e-6, 0.0);
        reference.amps_mut()[23] += Amplitude::new(1e-3, 0.0);
        let (index, dev) = first_deviation_above(&mut pool, &reference, 1e-9)
            .unwrap()
            .expect("planted mismatch");
        assert_eq!(index, 9);
        assert!((dev - 1e-6).abs() < 1e-12);
        // A loose threshold still finds the bigger error.
        let (index, _) = first_deviation_above(&mut pool, &reference, 1e-4)
            .unwrap()
            .unwrap();
        assert_eq!(index, 23);
        assert!(first_deviation_above(&mut pool, &reference, 1.0).unwrap().is_none());
    }

    #[test]
    fn rejects_out_of_range_basis_index() {
        let (_dir, mut pool) = small_pool(5, 64);
        assert!(init_basis_state(&mut pool, 1 << 5).is_err());
    }

    #[test]
    fn mismatched_reference_size_is_rejected() {
        let (_dir, mut pool) = small_pool(5, 64);
        init_basis_state(&mut pool, 0).unwrap();
        let other = DenseState::basis(4, 0).unwrap();
        assert!(max_deviation_from_dense(&mut pool, &other).is_err());
    }

    #[test]
    fn norm_tracks_applied_circuit() {
        let (_dir, mut pool) = small_pool(6, 64);
        init_basis_state(&mut pool, 0).unwrap();
        // Dense reference path for the same prep.
        let mut dense = DenseState::basis(6, 0).unwrap();
        let circuit = Circuit::parse("h 0\nh 3\ncx 0 5\nx 2", 6).unwrap();
        dense.apply_all(&circuit).unwrap();
        assert!((dense.norm_sq() - 1.0).abs() < 1e-15);
    }
}
