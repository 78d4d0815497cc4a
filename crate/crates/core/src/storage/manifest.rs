//! Pool manifest sidecar.
//!
//! `manifest.toml` in the pool directory records the geometry; shard paths
//! are relative to that directory. The binary shard format has no header,
//! so the manifest is the only metadata a pool carries.

use super::{ChunkId, StorageError};
use crate::state::AMP_BYTES;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const FORMAT_VERSION: u32 = 1;

/// Largest qubit count a pool will lay out (a 40-qubit state is 16 TiB of
/// shards; anything above that is planning territory, not simulation).
pub const POOL_MAX_QUBITS: u8 = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolManifest {
    pub format_version: u32,
    pub n_qubits: u8,
    pub chunk_bytes: u64,
    pub shards: Vec<ShardEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub path: String,
    pub bytes: u64,
}

impl PoolManifest {
    /// 2^n amplitudes × 16 bytes.
    pub fn total_bytes(&self) -> u64 {
        (1u64 << self.n_qubits) * AMP_BYTES as u64
    }

    pub fn chunk_count(&self) -> u64 {
        self.total_bytes() / self.chunk_bytes
    }

    pub fn amps_per_chunk(&self) -> u64 {
        self.chunk_bytes / AMP_BYTES as u64
    }

    /// First amplitude index held by `id`.
    pub fn chunk_amp_offset(&self, id: ChunkId) -> u64 {
        id.0 * self.amps_per_chunk()
    }

    /// Shard index and byte offset within that shard where `id` lives.
    pub fn locate(&self, id: ChunkId) -> Result<(usize, u64), StorageError> {
        if id.0 >= self.chunk_count() {
            return Err(StorageError::ChunkOutOfRange { id, chunk_count: self.chunk_count() });
        }
        let mut offset = id.0 * self.chunk_bytes;
        for (idx, shard) in self.shards.iter().enumerate() {
            if offset < shard.bytes {
                return Ok((idx, offset));
            }
            offset -= shard.bytes;
        }
        unreachable!("validated manifests cover every chunk");
    }

    pub fn validate(&self) -> Result<(), StorageError> {
        let geometry = |reason: String| StorageError::Geometry(reason);
        if self.format_version != FORMAT_VERSION {
            return Err(geometry(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.n_qubits == 0 || self.n_qubits > POOL_MAX_QUBITS {
            return Err(geometry(format!(
                "qubit count {} outside 1..={POOL_MAX_QUBITS}",
                self.n_qubits
            )));
        }
        if self.chunk_bytes < 32 || !self.chunk_bytes.is_power_of_two() {
            return Err(geometry(format!(
                "chunk_bytes {} must be a power of two of at least 32",
                self.chunk_bytes
            )));
        }
        if self.chunk_bytes > self.total_bytes() {
            return Err(geometry(format!(
                "chunk_bytes {} exceeds the {}-byte state",
                self.chunk_bytes,
                self.total_bytes()
            )));
        }
        if self.shards.is_empty() {
            return Err(geometry("no shards listed".into()));
        }
        let mut sum = 0u64;
        for shard in &self.shards {
            if shard.path.is_empty() || Path::new(&shard.path).is_absolute() {
                return Err(geometry(format!(
                    "shard path {:?} must be relative to the pool directory",
                    shard.path
                )));
            }
            if shard.bytes == 0 || shard.bytes % self.chunk_bytes != 0 {
                return Err(geometry(format!(
                    "shard {:?} length {} is not a positive multiple of chunk_bytes {}",
                    shard.path, shard.bytes, self.chunk_bytes
                )));
            }
            sum += shard.bytes;
        }
        if sum != self.total_bytes() {
            return Err(geometry(format!(
                "shard lengths sum to {} but the state needs {}",
                sum,
                self.total_bytes()
            )));
        }
        Ok(())
    }

    pub fn manifest_path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn load(dir: &Path) -> Result<Self, StorageError> {
        let path = Self::manifest_path(dir);
        let text = fs::read_to_string(&path)
            .map_err(StorageError::io(format!("reading {}", path.display())))?;
        let manifest: PoolManifest = toml::from_str(&text).map_err(|e| StorageError::Manifest {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn store(&self, dir: &Path) -> Result<(), StorageError> {
        self.validate()?;
        let path = Self::manifest_path(dir);
        let text = toml::to_string_pretty(self).map_err(|e| StorageError::Manifest {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        fs::write(&path, text)
            .map_err(StorageError::io(format!("writing {}", path.display())))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(n: u8, chunk: u64, shards: u64) -> PoolManifest {
        let total = (1u64 << n) * 16;
        PoolManifest {
            format_version: FORMAT_VERSION,
            n_qubits: n,
            chunk_bytes: chunk,
            shards: (0..shards)
                .map(|i| ShardEntry { path: format!("shard-{i}.bin"), bytes: total / shards })
                .collect(),
        }
    }

    #[test]
    fn paper_scale_sizes() {
        let m = manifest(27, 1 << 20, 2);
        assert_eq!(m.total_bytes(), 2_147_483_648);
        assert_eq!(m.shards[0].bytes, 1 << 30);
        assert_eq!(m.chunk_count(), 2048);
        assert!(m.validate().is_ok());

        let m = manifest(24, 1 << 20, 2);
        assert_eq!(m.total_bytes(), 256 << 20);
        assert_eq!(m.shards[0].bytes, 128 << 20);
    }

    #[test]
    fn tiny_pool_sizes() {
        let m = manifest(4, 32, 1);
        assert_eq!(m.total_bytes(), 256);
        assert_eq!(m.chunk_count(), 8);
        assert_eq!(m.amps_per_chunk(), 2);
        assert!(m.validate().is_ok());
    }

    #[test]
    fn locate_walks_shards() {
        let m = manifest(4, 32, 2); // 256 bytes, two 128-byte shards
        assert_eq!(m.locate(ChunkId(0)).unwrap(), (0, 0));
        assert_eq!(m.locate(ChunkId(3)).unwrap(), (0, 96));
        assert_eq!(m.locate(ChunkId(4)).unwrap(), (1, 0));
        assert_eq!(m.locate(ChunkId(7)).unwrap(), (1, 96));
        assert!(matches!(
            m.locate(ChunkId(8)),
            Err(StorageError::ChunkOutOfRange { .. })
        ));
    }

    #[test]
    fn geometry_rejections() {
        assert!(manifest(0, 32, 1).validate().is_err());
        let mut m = manifest(4, 48, 1);
        m.shards[0].bytes = 256;
        assert!(m.validate().is_err()); // not a power of two
        assert!(manifest(4, 16, 1).validate().is_err()); // below 32
        assert!(manifest(4, 512, 1).validate().is_err()); // chunk above total
        let mut m = manifest(4, 32, 1);
        m.shards[0].bytes = 128;
        assert!(m.validate().is_err()); // shards do not cover the state
        let mut m = manifest(4, 32, 1);
        m.shards[0].path = "/abs/shard.bin".into();
        assert!(m.validate().is_err());
    }

    #[test]
    fn store_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(6, 64, 2);
        m.store(dir.path()).unwrap();
        let back = PoolManifest::load(dir.path()).unwrap();
        assert_eq!(m, back);
    }
}
