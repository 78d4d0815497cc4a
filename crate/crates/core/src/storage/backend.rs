//! Chunk backends: positional shard-file I/O, plus the emulated-remote
//! wrapper that injects network costs.

use super::{BackendConfig, ChunkId, PoolManifest, StorageError};
use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::Path;
use std::thread;
use std::time::Duration;

/// Raw chunk transport under the cache tier. One instance per pool
/// handle; `sync` is the durability barrier.
pub trait ChunkBackend: Send {
    fn read_chunk(&mut self, id: ChunkId, buf: &mut [u8]) -> Result<(), StorageError>;
    fn write_chunk(&mut self, id: ChunkId, data: &[u8]) -> Result<(), StorageError>;
    /// One file sync per shard written since the last barrier.
    fn sync(&mut self) -> Result<(), StorageError>;
    /// Independent read-only handle over the same shards, for a prefetch
    /// stage running on its own thread. Emulated backends keep injecting
    /// their read costs through it.
    fn reader(&self) -> Result<Box<dyn ChunkReader>, StorageError>;
    /// Bytes that crossed the (possibly emulated) wire. Write bytes are
    /// amplified by the replication factor; logical accounting lives in
    /// the pool's `IoStats` instead.
    fn wire(&self) -> WireCounters;
}

pub trait ChunkReader: Send {
    fn read_chunk(&mut self, id: ChunkId, buf: &mut [u8]) -> Result<(), StorageError>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WireCounters {
    pub bytes_read: u64,
    pub bytes_written: u64,
}

/// Cost model of the emulated remote store.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkProfile {
    /// Added to every backend request.
    pub per_request_latency: Duration,
    /// Transfer rate applied to the wire bytes of each request. May be
    /// `f64::INFINITY` for a latency-only model.
    pub bandwidth_bytes_per_sec: f64,
    /// Write fan-out: every write-back moves `replication × bytes` over
    /// the wire.
    pub replication: u32,
}

impl NetworkProfile {
    pub fn validate(&self) -> Result<(), StorageError> {
        if !(self.bandwidth_bytes_per_sec > 0.0) {
            return Err(StorageError::Profile(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth_bytes_per_sec
            )));
        }
        if self.replication == 0 {
            return Err(StorageError::Profile("replication factor must be at least 1".into()));
        }
        Ok(())
    }

    /// Modeled wire time for one request carrying `wire_bytes`.
    pub fn transfer_delay(&self, wire_bytes: u64) -> Duration {
        let seconds = wire_bytes as f64 / self.bandwidth_bytes_per_sec;
        self.per_request_latency + Duration::from_secs_f64(seconds)
    }
}

impl Default for NetworkProfile {
    /// 1 ms per request over a 1.25 GB/s link, single replica.
    fn default() -> Self {
        NetworkProfile {
            per_request_latency: Duration::from_millis(1),
            bandwidth_bytes_per_sec: 1.25e9,
            replication: 1,
        }
    }
}

pub fn open_backend(
    dir: &Path,
    manifest: &PoolManifest,
    config: &BackendConfig,
) -> Result<Box<dyn ChunkBackend>, StorageError> {
    match config {
        BackendConfig::Direct => Ok(Box::new(DirectBackend::open(dir, manifest)?)),
        BackendConfig::Emulated(profile) => {
            let inner = DirectBackend::open(dir, manifest)?;
            Ok(Box::new(EmulatedRemoteBackend::wrap(inner, *profile)?))
        }
    }
}

/// Positional I/O straight onto the shard files.
pub struct DirectBackend {
    manifest: PoolManifest,
    shard_paths: Vec<std::path::PathBuf>,
    files: Vec<File>,
    unsynced: Vec<bool>,
    wire: WireCounters,
}

impl DirectBackend {
    pub fn open(dir: &Path, manifest: &PoolManifest) -> Result<Self, StorageError> {
        Self::open_with(dir, manifest, false)
    }

    fn open_with(dir: &Path, manifest: &PoolManifest, read_only: bool) -> Result<Self, StorageError> {
        manifest.validate()?;
        let mut files = Vec::with_capacity(manifest.shards.len());
        let mut shard_paths = Vec::with_capacity(manifest.shards.len());
        for shard in &manifest.shards {
            let path = dir.join(&shard.path);
            let file = OpenOptions::new()
                .read(true)
                .write(!read_only)
                .open(&path)
                .map_err(StorageError::io(format!("opening shard {}", path.display())))?;
            let len = file
                .metadata()
                .map_err(StorageError::io(format!("statting shard {}", path.display())))?
                .len();
            if len != shard.bytes {
                return Err(StorageError::Manifest {
                    path,
                    reason: format!("shard is {len} bytes on disk, manifest says {}", shard.bytes),
                });
            }
            files.push(file);
            shard_paths.push(path);
        }
        let unsynced = vec![false; files.len()];
        Ok(DirectBackend { manifest: manifest.clone(), shard_paths, files, unsynced, wire: WireCounters::default() })
    }

    fn read_at(&self, id: ChunkId, buf: &mut [u8]) -> Result<(), StorageError> {
        let (shard, offset) = self.manifest.locate(id)?;
        self.files[shard].read_exact_at(buf, offset).map_err(StorageError::io(format!(
            "reading {id} from shard {}",
            self.shard_paths[shard].display()
        )))
    }
}

impl ChunkBackend for DirectBackend {
    fn read_chunk(&mut self, id: ChunkId, buf: &mut [u8]) -> Result<(), StorageError> {
        self.read_at(id, buf)?;
        self.wire.bytes_read += buf.len() as u64;
        Ok(())
    }

    fn write_chunk(&mut self, id: ChunkId, data: &[u8]) -> Result<(), StorageError> {
        let (shard, offset) = self.manifest.locate(id)?;
        self.files[shard].write_all_at(data, offset).map_err(StorageError::io(format!(
            "writing {id} to shard {}",
            self.shard_paths[shard].display()
        )))?;
        self.unsynced[shard] = true;
        self.wire.bytes_written += data.len() as u64;
        Ok(())
    }

    fn sync(&mut self) -> Result<(), StorageError> {
        for (shard, pending) in self.unsynced.iter_mut().enumerate() {
            if *pending {
                self.files[shard].sync_data().map_err(StorageError::io(format!(
                    "syncing shard {}",
                    self.shard_paths[shard].display()
                )))?;
                *pending = false;
            }
        }
        Ok(())
    }

    fn reader(&self) -> Result<Box<dyn ChunkReader>, StorageError> {
        let dir = self.shard_paths[0].parent().unwrap_or(Path::new("."));
        Ok(Box::new(DirectBackend::open_with(dir, &self.manifest, true)?))
    }

    fn wire(&self) -> WireCounters {
        self.wire
    }
}

impl ChunkReader for DirectBackend {
    fn read_chunk(&mut self, id: ChunkId, buf: &mut [u8]) -> Result<(), StorageError> {
        ChunkBackend::read_chunk(self, id, buf)
    }
}

/// Direct backend plus modeled network costs. Every read sleeps the
/// request latency and the transfer time of the chunk; every write does
/// the same with its bytes amplified by the replication factor. Data is
/// byte-identical to the direct path; only timing and wire accounting
/// differ.
pub struct EmulatedRemoteBackend {
    inner: DirectBackend,
    profile: NetworkProfile,
    wire: WireCounters,
}

impl EmulatedRemoteBackend {
    pub fn wrap(inner: DirectBackend, profile: NetworkProfile) -> Result<Self, StorageError> {
        profile.validate()?;
        Ok(EmulatedRemoteBackend { inner, profile, wire: WireCounters::default() })
    }
}

impl ChunkBackend for EmulatedRemoteBackend {
    fn read_chunk(&mut self, id: ChunkId, buf: &mut [u8]) -> Result<(), StorageError> {
        thread::sleep(self.profile.transfer_delay(buf.len() as u64));
        self.inner.read_at(id, buf)?;
        self.wire.bytes_read += buf.len() as u64;
        Ok(())
    }

    fn write_chunk(&mut self, id: ChunkId, data: &[u8]) -> Result<(), StorageError> {
        let wire_bytes = data.len() as u64 * self.profile.replication as u64;
        thread::sleep(self.profile.transfer_delay(wire_bytes));
        self.inner.write_chunk(id, data)?;
        // The inner backend counted the logical bytes; keep the amplified figure.
        self.wire.bytes_written += wire_bytes;
        Ok(())
    }

    fn sync(&mut self) -> Result<(), StorageError> {
        self.inner.sync()
    }

    fn reader(&self) -> Result<Box<dyn ChunkReader>, StorageError> {
        Ok(Box::new(EmulatedReader { inner: self.inner.reader()?, profile: self.profile }))
    }

    fn wire(&self) -> WireCounters {
        self.wire
    }
}

struct EmulatedReader {
    inner: Box<dyn ChunkReader>,
    profile: NetworkProfile,
}

impl ChunkReader for EmulatedReader {
    fn read_chunk(&mut self, id: ChunkId, buf: &mut [u8]) -> Result<(), StorageError> {
        thread::sleep(self.profile.transfer_delay(buf.len() as u64));
        self.inner.read_chunk(id, buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_delay_for_one_mebibyte() {
        // 1 ms latency + 2^20 / 1.25e9 s of transfer = 1.8389 ms.
        let p = NetworkProfile::default();
        let d = p.transfer_delay(1 << 20);
        assert!(d >= Duration::from_micros(1838), "got {d:?}");
        assert!(d <= Duration::from_micros(1840), "got {d:?}");
    }

    #[test]
    fn identity_profile_has_zero_transfer_delay() {
        let p = NetworkProfile {
            per_request_latency: Duration::ZERO,
            bandwidth_bytes_per_sec: f64::INFINITY,
            replication: 1,
        };
        assert_eq!(p.transfer_delay(u64::MAX), Duration::ZERO);
    }

    #[test]
    fn profile_validation() {
        let mut p = NetworkProfile::default();
        p.replication = 0;
        assert!(p.validate().is_err());
        let mut p = NetworkProfile::default();
        p.bandwidth_bytes_per_sec = 0.0;
        assert!(p.validate().is_err());
        p.bandwidth_bytes_per_sec = f64::NAN;
        assert!(p.validate().is_err());
    }
}
