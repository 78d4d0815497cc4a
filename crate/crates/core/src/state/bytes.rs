//! Amplitude byte codec.
//!
//! One amplitude is exactly 16 bytes: little-endian f64 real part, then
//! little-endian f64 imaginary part. A state file or chunk is amplitudes
//! back to back in index order with no header or padding, so amplitude `i`
//! lives at byte offset `16 * i`.

use super::Amplitude;

/// Serialized width of one amplitude.
pub const AMP_BYTES: usize = 16;

/// Panics if `out` is not exactly `16 * amps.len()` bytes.
pub fn encode_amplitudes(amps: &[Amplitude], out: &mut [u8]) {
    assert_eq!(out.len(), amps.len() * AMP_BYTES, "output buffer size mismatch");
    for (a, frame) in amps.iter().zip(out.chunks_exact_mut(AMP_BYTES)) {
        frame[..8].copy_from_slice(&a.re.to_le_bytes());
        frame[8..].copy_from_slice(&a.im.to_le_bytes());
    }
}

/// Panics if `bytes` is not exactly `16 * out.len()` bytes.
pub fn decode_amplitudes(bytes: &[u8], out: &mut [Amplitude]) {
    assert_eq!(bytes.len(), out.len() * AMP_BYTES, "input buffer size mismatch");
    for (a, frame) in out.iter_mut().zip(bytes.chunks_exact(AMP_BYTES)) {
        let re = f64::from_le_bytes(frame[..8].try_into().unwrap());
        let im = f64::from_le_bytes(frame[8..].try_into().unwrap());
        *a = Amplitude::new(re, im);
    }
}
