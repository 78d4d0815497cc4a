//! Pool handle: cache tier + backend + accounting, and pool creation.

use super::backend::{open_backend, ChunkBackend, ChunkReader, WireCounters};
use super::cache::CacheTier;
use super::manifest::POOL_MAX_QUBITS;
use super::{BackendConfig, ChunkId, IoStats, PoolManifest, ShardEntry, StorageError, FORMAT_VERSION};
use crate::state::AMP_BYTES;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Membership test for the chunk range a worker may touch. Checked with
/// debug assertions on every pool read and write while installed.
pub type ChunkGuard = Box<dyn Fn(ChunkId) -> bool + Send>;

/// Lays out a fresh zeroed pool: shard files at their full (sparse)
/// length plus the manifest sidecar. Shards are split evenly across
/// `shard_count` files named `shard-<i>.bin`.
///
/// An existing manifest with the same geometry is re-created in place
/// (data zeroed); a differing one is an error.
pub fn create_pool(
    dir: &Path,
    n_qubits: u8,
    chunk_bytes: u64,
    shard_count: u32,
) -> Result<PoolManifest, StorageError> {
    if n_qubits == 0 || n_qubits > POOL_MAX_QUBITS {
        return Err(StorageError::Geometry(format!(
            "qubit count {n_qubits} outside 1..={POOL_MAX_QUBITS}"
        )));
    }
    let total_bytes = (1u64 << n_qubits) * AMP_BYTES as u64;
    if !shard_count.is_power_of_two() {
        return Err(StorageError::Geometry(format!(
            "shard count {shard_count} must be a power of two"
        )));
    }
    if chunk_bytes == 0 || total_bytes / chunk_bytes < shard_count as u64 {
        return Err(StorageError::Geometry(format!(
            "cannot split {total_bytes} bytes into {shard_count} shards of whole {chunk_bytes}-byte chunks"
        )));
    }
    let shard_bytes = total_bytes / shard_count as u64;
    let manifest = PoolManifest {
        format_version: FORMAT_VERSION,
        n_qubits,
        chunk_bytes,
        shards: (0..shard_count)
            .map(|i| ShardEntry { path: format!("shard-{i}.bin"), bytes: shard_bytes })
            .collect(),
    };
    manifest.validate()?;

    fs::create_dir_all(dir).map_err(StorageError::io(format!("creating {}", dir.display())))?;
    let manifest_path = PoolManifest::manifest_path(dir);
    if manifest_path.exists() {
        let existing = PoolManifest::load(dir)?;
        if existing != manifest {
            return Err(StorageError::IncompatibleManifest {
                path: manifest_path,
                reason: format!(
                    "existing pool is n={}, chunk_bytes={}, {} shards",
                    existing.n_qubits,
                    existing.chunk_bytes,
                    existing.shards.len()
                ),
            });
        }
    }
    for shard in &manifest.shards {
        let path = dir.join(&shard.path);
        let file = fs::File::create(&path)
            .map_err(StorageError::io(format!("creating shard {}", path.display())))?;
        file.set_len(shard.bytes)
            .map_err(StorageError::io(format!("sizing shard {}", path.display())))?;
        file.sync_all()
            .map_err(StorageError::io(format!("syncing shard {}", path.display())))?;
    }
    manifest.store(dir)?;
    Ok(manifest)
}

/// One handle onto a pool: private cache tier and stats over a shared set
/// of shard files. Multiple handles may work the same pool concurrently
/// as long as their written chunk ranges are disjoint.
pub struct Pool {
    dir: PathBuf,
    manifest: PoolManifest,
    backend: Box<dyn ChunkBackend>,
    cache: CacheTier,
    stats: IoStats,
    guard: Option<ChunkGuard>,
}

impl Pool {
    pub fn open(dir: &Path, cache_bytes: u64, backend: &BackendConfig) -> Result<Pool, StorageError> {
        let manifest = PoolManifest::load(dir)?;
        let cache = CacheTier::new(cache_bytes, manifest.chunk_bytes).ok_or(
            StorageError::CacheTooSmall { capacity_bytes: cache_bytes, chunk_bytes: manifest.chunk_bytes },
        )?;
        let backend = open_backend(dir, &manifest, backend)?;
        Ok(Pool { dir: dir.to_path_buf(), manifest, backend, cache, stats: IoStats::default(), guard: None })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &PoolManifest {
        &self.manifest
    }

    pub fn chunk_bytes(&self) -> u64 {
        self.manifest.chunk_bytes
    }

    pub fn chunk_count(&self) -> u64 {
        self.manifest.chunk_count()
    }

    pub fn stats(&self) -> IoStats {
        self.stats
    }

    pub fn wire(&self) -> WireCounters {
        self.backend.wire()
    }

    pub fn cache_resident_chunks(&self) -> usize {
        self.cache.resident_chunks()
    }

    pub fn dirty_chunks(&self) -> usize {
        self.cache.dirty_count()
    }

    /// Drops every clean cached chunk `keep` rejects; dirty chunks stay.
    /// Costs nothing on the backend, the copies are simply forgotten.
    /// This is how a cluster worker stays coherent: after a barrier
    /// flush, chunks outside its own range may be rewritten by their
    /// owners, so only its own writes may remain resident.
    pub fn retain_cached(&mut self, keep: impl Fn(ChunkId) -> bool) -> usize {
        self.cache.retain_clean(keep)
    }

    /// Installs (or clears) the owned-range guard.
    pub fn set_guard(&mut self, guard: Option<ChunkGuard>) {
        self.guard = guard;
    }

    /// Raw read-only handle over the same shards for a prefetch stage. It
    /// bypasses this handle's cache, so it must only be used for chunks
    /// that are not dirty in it.
    pub fn raw_reader(&self) -> Result<Box<dyn ChunkReader>, StorageError> {
        self.backend.reader()
    }

    /// The chunk, served from cache on a hit; on a miss it is fetched
    /// from the backend (time lands in `read`, bytes in `bytes_read`) and
    /// admitted, evicting the least recently used chunk if the tier is
    /// full. Evicting a dirty victim flushes it first (time lands in
    /// `writeback`).
    pub fn read_chunk(&mut self, id: ChunkId) -> Result<&[u8], StorageError> {
        self.check_guard(id);
        if self.cache.contains(id) {
            return Ok(self.cache.get(id).expect("resident chunk"));
        }
        let mut buf = vec![0u8; self.manifest.chunk_bytes as usize];
        let started = Instant::now();
        self.backend.read_chunk(id, &mut buf)?;
        self.stats.read += started.elapsed();
        self.stats.bytes_read += self.manifest.chunk_bytes;
        self.evict_until_room()?;
        self.cache.insert(id, buf, false);
        Ok(self.cache.get(id).expect("just admitted"))
    }

    /// Writes one full chunk into the cache tier, marking it dirty. Cache
    /// insertion cost lands in `write`; a dirty eviction needed to make
    /// room lands in `writeback`. Nothing reaches the backend until
    /// eviction or [`Pool::write_back`].
    pub fn write_chunk(&mut self, id: ChunkId, data: &[u8]) -> Result<(), StorageError> {
        self.check_guard(id);
        if data.len() as u64 != self.manifest.chunk_bytes {
            return Err(StorageError::ChunkSizeMismatch {
                got: data.len() as u64,
                expect: self.manifest.chunk_bytes,
            });
        }
        if self.manifest.locate(id).is_err() {
            return Err(StorageError::ChunkOutOfRange { id, chunk_count: self.chunk_count() });
        }
        let started = Instant::now();
        if self.cache.write_resident(id, data) {
            self.stats.write += started.elapsed();
            return Ok(());
        }
        self.stats.write += started.elapsed();
        self.evict_until_room()?;
        let started = Instant::now();
        self.cache.insert(id, data.to_vec(), true);
        self.stats.write += started.elapsed();
        Ok(())
    }

    /// Flushes every dirty chunk (ascending id, so shards are written
    /// sequentially) and then issues the durability barrier: one file
    /// sync per shard written since the last one. A tier with no dirty
    /// chunks flushes nothing.
    pub fn write_back(&mut self) -> Result<(), StorageError> {
        let started = Instant::now();
        for id in self.cache.dirty_ids_sorted() {
            let data = self.cache.peek(id).expect("dirty chunk resident");
            self.backend.write_chunk(id, data)?;
            self.stats.bytes_written += self.manifest.chunk_bytes;
            self.cache.mark_clean(id);
        }
        self.backend.sync()?;
        self.stats.writeback += started.elapsed();
        Ok(())
    }

    fn evict_until_room(&mut self) -> Result<(), StorageError> {
        while self.cache.is_full() {
            let (victim, data, dirty) = self.cache.pop_lru().expect("full cache has a victim");
            if dirty {
                let started = Instant::now();
                self.backend.write_chunk(victim, &data)?;
                self.stats.writeback += started.elapsed();
                self.stats.bytes_written += self.manifest.chunk_bytes;
            }
        }
        Ok(())
    }

    fn check_guard(&self, id: ChunkId) {
        if let Some(guard) = &self.guard {
            debug_assert!(guard(id), "{id} is outside this worker's owned range");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::NetworkProfile;
    use std::time::Duration;

    fn direct(dir: &Path, cache_chunks: u64) -> Pool {
        let chunk = PoolManifest::load(dir).unwrap().chunk_bytes;
        Pool::open(dir, cache_chunks * chunk, &BackendConfig::Direct).unwrap()
    }

    fn filled(chunk_bytes: u64, fill: u8) -> Vec<u8> {
        vec![fill; chunk_bytes as usize]
    }

    #[test]
    fn create_pool_lays_out_documented_sizes() {
        let dir = tempfile::tempdir().unwrap();
        // Sparse files: 2 GiB of state costs no real disk here.
        let m = create_pool(dir.path(), 27, 1 << 20, 2).unwrap();
        assert_eq!(m.total_bytes(), 2_147_483_648);
        for shard in &m.shards {
            let len = fs::metadata(dir.path().join(&shard.path)).unwrap().len();
            assert_eq!(len, 1 << 30);
        }

        let dir = tempfile::tempdir().unwrap();
        let m = create_pool(dir.path(), 24, 1 << 20, 2).unwrap();
        assert_eq!(m.total_bytes(), 256 << 20);
        assert_eq!(m.shards[0].bytes, 128 << 20);

        let dir = tempfile::tempdir().unwrap();
        let m = create_pool(dir.path(), 4, 32, 1).unwrap();
        assert_eq!(m.total_bytes(), 256);
        assert_eq!(m.chunk_count(), 8);
    }

    #[test]
    fn retain_drops_clean_chunks_but_never_dirty_ones() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 4, 64, 1).unwrap();
        let mut pool = direct(dir.path(), 4);
        for id in 0..4 {
            pool.read_chunk(ChunkId(id)).unwrap();
        }
        pool.write_chunk(ChunkId(2), &filled(64, 0x11)).unwrap();
        assert_eq!(pool.cache_resident_chunks(), 4);

        let dropped = pool.retain_cached(|id| id.0 == 0);
        // 1 and 3 go; 0 is kept, 2 is dirty and therefore immune.
        assert_eq!(dropped, 2);
        assert_eq!(pool.cache_resident_chunks(), 2);
        assert_eq!(pool.dirty_chunks(), 1);

        // A dropped chunk really is gone: reading it again is a miss.
        let before = pool.stats().bytes_read;
        pool.read_chunk(ChunkId(1)).unwrap();
        assert_eq!(pool.stats().bytes_read, before + 64);
        // A kept chunk is still a hit.
        let before = pool.stats().bytes_read;
        pool.read_chunk(ChunkId(0)).unwrap();
        assert_eq!(pool.stats().bytes_read, before);
    }

    #[test]
    fn create_pool_rejects_bad_geometry() {
        let dir = tempfile::tempdir().unwrap();
        assert!(create_pool(dir.path(), 0, 32, 1).is_err());
        assert!(create_pool(dir.path(), 4, 48, 1).is_err()); // not a power of two
        assert!(create_pool(dir.path(), 4, 16, 1).is_err()); // chunk below 32
        assert!(create_pool(dir.path(), 4, 512, 1).is_err()); // chunk above state
        assert!(create_pool(dir.path(), 4, 32, 3).is_err()); // shard count not a power of two
        assert!(create_pool(dir.path(), 4, 32, 16).is_err()); // more shards than chunks
    }

    #[test]
    fn create_pool_rejects_incompatible_existing_manifest() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 2).unwrap();
        let err = create_pool(dir.path(), 6, 128, 2).unwrap_err();
        assert!(matches!(err, StorageError::IncompatibleManifest { .. }));
        // Same geometry re-creates in place, zeroing the data.
        let mut pool = direct(dir.path(), 2);
        pool.write_chunk(ChunkId(0), &filled(64, 0xAB)).unwrap();
        pool.write_back().unwrap();
        drop(pool);
        create_pool(dir.path(), 6, 64, 2).unwrap();
        let mut pool = direct(dir.path(), 2);
        assert!(pool.read_chunk(ChunkId(0)).unwrap().iter().all(|&b| b == 0));
    }

    #[test]
    fn fresh_pool_reads_zeros() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 2).unwrap();
        let mut pool = direct(dir.path(), 4);
        for id in [0u64, 7, 15] {
            assert!(pool.read_chunk(ChunkId(id)).unwrap().iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn cache_hit_leaves_read_stats_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 1).unwrap();
        let mut pool = direct(dir.path(), 2);
        pool.read_chunk(ChunkId(3)).unwrap();
        let after_miss = pool.stats();
        assert_eq!(after_miss.bytes_read, 64);
        assert!(after_miss.read > Duration::ZERO);
        pool.read_chunk(ChunkId(3)).unwrap();
        let after_hit = pool.stats();
        assert_eq!(after_hit.read, after_miss.read);
        assert_eq!(after_hit.bytes_read, after_miss.bytes_read);
    }

    #[test]
    fn clean_eviction_is_free_dirty_eviction_writes_back() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 1).unwrap();

        // Clean traffic only: evictions move no bytes.
        let mut pool = direct(dir.path(), 2);
        for id in 0..5u64 {
            pool.read_chunk(ChunkId(id)).unwrap();
        }
        assert_eq!(pool.stats().bytes_written, 0);
        assert_eq!(pool.stats().writeback, Duration::ZERO);

        // Dirty chunks must be flushed before leaving the tier.
        let mut pool = direct(dir.path(), 2);
        for id in 0..3u64 {
            pool.write_chunk(ChunkId(id), &filled(64, id as u8 + 1)).unwrap();
        }
        let stats = pool.stats();
        assert_eq!(stats.bytes_written, 64); // exactly one eviction so far
        assert!(stats.writeback > Duration::ZERO);
        assert!(stats.write > Duration::ZERO);
        // The evicted chunk is already readable by a cold handle.
        let mut probe = direct(dir.path(), 1);
        assert_eq!(probe.read_chunk(ChunkId(0)).unwrap(), &filled(64, 1)[..]);
    }

    #[test]
    fn write_back_flushes_each_dirty_chunk_once() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 2).unwrap();
        let mut pool = direct(dir.path(), 8);
        for id in [4u64, 1, 6] {
            pool.write_chunk(ChunkId(id), &filled(64, id as u8)).unwrap();
        }
        assert_eq!(pool.dirty_chunks(), 3);
        pool.write_back().unwrap();
        assert_eq!(pool.stats().bytes_written, 3 * 64);
        assert_eq!(pool.dirty_chunks(), 0);
        // A second barrier with a clean tier moves nothing.
        pool.write_back().unwrap();
        assert_eq!(pool.stats().bytes_written, 3 * 64);
    }

    #[test]
    fn flushed_data_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 2).unwrap();
        let mut pool = direct(dir.path(), 4);
        for id in 0..16u64 {
            pool.write_chunk(ChunkId(id % 8), &filled(64, id as u8)).unwrap();
        }
        pool.write_back().unwrap();
        drop(pool);
        let mut pool = direct(dir.path(), 4);
        for id in 8..16u64 {
            assert_eq!(pool.read_chunk(ChunkId(id % 8)).unwrap(), &filled(64, id as u8)[..]);
        }
    }

    #[test]
    fn rewriting_resident_chunk_stays_one_flush() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 1).unwrap();
        let mut pool = direct(dir.path(), 2);
        pool.write_chunk(ChunkId(1), &filled(64, 1)).unwrap();
        pool.write_chunk(ChunkId(1), &filled(64, 2)).unwrap();
        pool.write_back().unwrap();
        assert_eq!(pool.stats().bytes_written, 64);
        assert_eq!(pool.read_chunk(ChunkId(1)).unwrap(), &filled(64, 2)[..]);
    }

    #[test]
    fn emulated_backend_writes_identical_bytes() {
        let fast = NetworkProfile {
            per_request_latency: Duration::ZERO,
            bandwidth_bytes_per_sec: f64::INFINITY,
            replication: 1,
        };
        let script: &[(u64, u8)] = &[(0, 10), (3, 20), (7, 30), (3, 40)];

        let mut shard_bytes = Vec::new();
        for config in [BackendConfig::Direct, BackendConfig::Emulated(fast)] {
            let dir = tempfile::tempdir().unwrap();
            create_pool(dir.path(), 6, 64, 2).unwrap();
            let mut pool = Pool::open(dir.path(), 2 * 64, &config).unwrap();
            for &(id, fill) in script {
                pool.read_chunk(ChunkId(id)).unwrap();
                pool.write_chunk(ChunkId(id), &filled(64, fill)).unwrap();
            }
            pool.write_back().unwrap();
            drop(pool);
            let m = PoolManifest::load(dir.path()).unwrap();
            let mut bytes = Vec::new();
            for shard in &m.shards {
                bytes.extend(fs::read(dir.path().join(&shard.path)).unwrap());
            }
            shard_bytes.push(bytes);
        }
        assert_eq!(shard_bytes[0], shard_bytes[1]);
    }

    #[test]
    fn emulated_miss_pays_latency_and_transfer() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 16, 1 << 20, 1).unwrap(); // 1 MiB chunks
        let profile = NetworkProfile::default(); // 1 ms + 1.25 GB/s
        let mut pool =
            Pool::open(dir.path(), 2 << 20, &BackendConfig::Emulated(profile)).unwrap();
        let started = Instant::now();
        pool.read_chunk(ChunkId(0)).unwrap();
        let miss = started.elapsed();
        assert!(miss >= Duration::from_micros(1838), "miss took {miss:?}");
        // The hit path pays nothing.
        let started = Instant::now();
        pool.read_chunk(ChunkId(0)).unwrap();
        assert!(started.elapsed() < Duration::from_micros(500));
    }

    #[test]
    fn replication_doubles_write_back_wire_bytes() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 1).unwrap();
        let profile = NetworkProfile {
            per_request_latency: Duration::ZERO,
            bandwidth_bytes_per_sec: f64::INFINITY,
            replication: 2,
        };
        let mut pool = Pool::open(dir.path(), 4 * 64, &BackendConfig::Emulated(profile)).unwrap();
        for id in 0..3u64 {
            pool.write_chunk(ChunkId(id), &filled(64, 1)).unwrap();
        }
        pool.write_back().unwrap();
        assert_eq!(pool.stats().bytes_written, 3 * 64); // logical
        assert_eq!(pool.wire().bytes_written, 2 * 3 * 64); // amplified
    }

    #[cfg(debug_assertions)]
    #[test]
    #[should_panic(expected = "outside this worker's owned range")]
    fn guard_catches_out_of_range_write() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 1).unwrap();
        let mut pool = direct(dir.path(), 2);
        pool.set_guard(Some(Box::new(|id: ChunkId| id.0 < 4)));
        pool.write_chunk(ChunkId(5), &filled(64, 1)).unwrap();
    }

    #[test]
    fn raw_reader_sees_flushed_state() {
        let dir = tempfile::tempdir().unwrap();
        create_pool(dir.path(), 6, 64, 2).unwrap();
        let mut pool = direct(dir.path(), 4);
        pool.write_chunk(ChunkId(5), &filled(64, 7)).unwrap();
        pool.write_back().unwrap();
        let mut reader = pool.raw_reader().unwrap();
        let mut buf = vec![0u8; 64];
        reader.read_chunk(ChunkId(5), &mut buf).unwrap();
        assert_eq!(buf, filled(64, 7));
    }
}
