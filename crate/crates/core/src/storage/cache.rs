//! Bounded LRU cache tier with dirty tracking.
//!
//! Purely mechanical: admission, recency, eviction choice, and residency
//! accounting. Timing, stats, and backend traffic are the pool's job, so
//! eviction hands the victim back instead of flushing it.

use super::ChunkId;
use std::collections::{BTreeMap, HashMap};

pub(super) struct CacheTier {
    chunk_bytes: usize,
    capacity_chunks: usize,
    slots: HashMap<ChunkId, Slot>,
    /// tick -> id, oldest first. Every slot holds its current tick.
    recency: BTreeMap<u64, ChunkId>,
    tick: u64,
}

struct Slot {
    data: Vec<u8>,
    dirty: bool,
    tick: u64,
}

impl CacheTier {
    /// `capacity_bytes` rounds down to whole chunks; it must fit at least
    /// one.
    pub fn new(capacity_bytes: u64, chunk_bytes: u64) -> Option<CacheTier> {
        let capacity_chunks = (capacity_bytes / chunk_bytes) as usize;
        if capacity_chunks == 0 {
            return None;
        }
        Some(CacheTier {
            chunk_bytes: chunk_bytes as usize,
            capacity_chunks,
            slots: HashMap::new(),
            recency: BTreeMap::new(),
            tick: 0,
        })
    }

    #[cfg(test)]
    pub fn capacity_chunks(&self) -> usize {
        self.capacity_chunks
    }

    pub fn resident_chunks(&self) -> usize {
        self.slots.len()
    }

    pub fn resident_bytes(&self) -> u64 {
        (self.slots.len() * self.chunk_bytes) as u64
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() >= self.capacity_chunks
    }

    pub fn contains(&self, id: ChunkId) -> bool {
        self.slots.contains_key(&id)
    }

    /// Read without touching recency.
    pub fn peek(&self, id: ChunkId) -> Option<&[u8]> {
        self.slots.get(&id).map(|s| s.data.as_slice())
    }

    /// Read and mark most recently used.
    pub fn get(&mut self, id: ChunkId) -> Option<&[u8]> {
        self.touch(id);
        self.peek(id)
    }

    /// Overwrite a resident chunk in place, marking it dirty and most
    /// recently used. Returns false when not resident.
    pub fn write_resident(&mut self, id: ChunkId, data: &[u8]) -> bool {
        let Some(slot) = self.slots.get_mut(&id) else {
            return false;
        };
        assert_eq!(data.len(), self.chunk_bytes);
        slot.data.copy_from_slice(data);
        slot.dirty = true;
        self.touch(id);
        true
    }

    /// Admit a non-resident chunk. Panics if full or already resident;
    /// the pool evicts first.
    pub fn insert(&mut self, id: ChunkId, data: Vec<u8>, dirty: bool) {
        assert!(!self.is_full(), "cache admission while full");
        assert_eq!(data.len(), self.chunk_bytes);
        self.tick += 1;
        let prev = self.slots.insert(id, Slot { data, dirty, tick: self.tick });
        assert!(prev.is_none(), "cache admission of a resident chunk");
        self.recency.insert(self.tick, id);
        debug_assert!(self.resident_bytes() <= self.capacity_chunks as u64 * self.chunk_bytes as u64);
    }

    /// Remove and return the least recently used chunk.
    pub fn pop_lru(&mut self) -> Option<(ChunkId, Vec<u8>, bool)> {
        let (&tick, &id) = self.recency.iter().next()?;
        self.recency.remove(&tick);
        let slot = self.slots.remove(&id).expect("recency entry without slot");
        Some((id, slot.data, slot.dirty))
    }

    pub fn mark_clean(&mut self, id: ChunkId) {
        if let Some(slot) = self.slots.get_mut(&id) {
            slot.dirty = false;
        }
    }

    /// Dirty chunk ids in ascending order, so flushes hit shards
    /// sequentially.
    pub fn dirty_ids_sorted(&self) -> Vec<ChunkId> {
        let mut ids: Vec<ChunkId> =
            self.slots.iter().filter(|(_, s)| s.dirty).map(|(&id, _)| id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn dirty_count(&self) -> usize {
        self.slots.values().filter(|s| s.dirty).count()
    }

    /// Drop every clean resident chunk `keep` rejects. Dirty chunks stay
    /// regardless; flush first when the goal is to keep only `keep`'s.
    /// Returns how many were dropped.
    pub fn retain_clean(&mut self, keep: impl Fn(ChunkId) -> bool) -> usize {
        let doomed: Vec<(u64, ChunkId)> = self
            .slots
            .iter()
            .filter(|(&id, slot)| !slot.dirty && !keep(id))
            .map(|(&id, slot)| (slot.tick, id))
            .collect();
        for (tick, id) in &doomed {
            self.recency.remove(tick);
            self.slots.remove(id);
        }
        doomed.len()
    }

    fn touch(&mut self, id: ChunkId) {
        let Some(slot) = self.slots.get_mut(&id) else {
            return;
        };
        self.recency.remove(&slot.tick);
        self.tick += 1;
        slot.tick = self.tick;
        self.recency.insert(self.tick, id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tier(capacity_chunks: u64) -> CacheTier {
        CacheTier::new(capacity_chunks * 64, 64).unwrap()
    }

    fn block(fill: u8) -> Vec<u8> {
        vec![fill; 64]
    }

    #[test]
    fn capacity_must_hold_a_chunk() {
        assert!(CacheTier::new(63, 64).is_none());
        assert_eq!(CacheTier::new(130, 64).unwrap().capacity_chunks(), 2);
    }

    #[test]
    fn evicts_least_recently_used() {
        let mut c = tier(2);
        c.insert(ChunkId(1), block(1), false);
        c.insert(ChunkId(2), block(2), false);
        c.get(ChunkId(1)); // 2 becomes LRU
        let (victim, _, dirty) = c.pop_lru().unwrap();
        assert_eq!(victim, ChunkId(2));
        assert!(!dirty);
    }

    #[test]
    fn write_resident_marks_dirty_and_touches() {
        let mut c = tier(2);
        c.insert(ChunkId(1), block(1), false);
        c.insert(ChunkId(2), block(2), false);
        assert!(c.write_resident(ChunkId(1), &block(9))); // 2 becomes LRU
        let (victim, _, _) = c.pop_lru().unwrap();
        assert_eq!(victim, ChunkId(2));
        assert_eq!(c.dirty_ids_sorted(), vec![ChunkId(1)]);
        assert_eq!(c.peek(ChunkId(1)).unwrap(), &block(9)[..]);
    }

    #[test]
    fn residency_never_exceeds_capacity() {
        let mut c = tier(3);
        for i in 0..10u64 {
            while c.is_full() {
                c.pop_lru();
            }
            c.insert(ChunkId(i), block(i as u8), i % 2 == 0);
            assert!(c.resident_bytes() <= 3 * 64);
        }
        assert_eq!(c.resident_chunks(), 3);
    }

    #[test]
    fn dirty_ids_come_out_sorted() {
        let mut c = tier(4);
        for &i in &[7u64, 2, 5, 3] {
            c.insert(ChunkId(i), block(i as u8), true);
        }
        c.mark_clean(ChunkId(5));
        assert_eq!(c.dirty_ids_sorted(), vec![ChunkId(2), ChunkId(3), ChunkId(7)]);
        assert_eq!(c.dirty_count(), 3);
    }
}
