//! Bounded cache of prepared faces keyed by upload content.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use lru::LruCache;
use serde::Serialize;
use sha2::{Digest, Sha256};

use amorph::{FieldMode, PreparedFace, WorkingGrid};

pub type CacheKey = [u8; 32];

type Slot = Arc<OnceLock<Result<Arc<PreparedFace>, amorph::Error>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
    pub capacity: usize,
}

/// LRU map from content hash to a per-key slot. The map lock is only held to
/// look up or insert slots; the preparation itself runs outside it, so a slow
/// key never blocks lookups of other keys. Concurrent requests for the same
/// key share one computation.
pub struct FaceCache {
    slots: Mutex<LruCache<CacheKey, Slot>>,
    capacity: usize,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl FaceCache {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("nonzero");
        Self { slots: Mutex::new(LruCache::new(cap)), capacity: cap.get(), hits: AtomicU64::new(0), misses: AtomicU64::new(0) }
    }

    pub fn key(parts: &[&[u8]], grid: WorkingGrid, mode: FieldMode) -> CacheKey {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        h.update((grid.height() as u64).to_le_bytes());
        h.update((grid.width() as u64).to_le_bytes());
        h.update([matches!(mode, FieldMode::Broadcast) as u8]);
        h.finalize().into()
    }

    /// Returns the cached face for `key`, computing it with `prepare` on a miss.
    /// Failed preparations are not kept.
    pub fn get_or_prepare(
        &self,
        key: CacheKey,
        prepare: impl FnOnce() -> Result<PreparedFace, amorph::Error>,
    ) -> Result<Arc<PreparedFace>, amorph::Error> {
        let slot = {
            let mut slots = self.slots.lock().expect("cache lock poisoned");
            match slots.get(&key) {
                Some(slot) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    slot.clone()
                }
                None => {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    let slot: Slot = Arc::default();
                    slots.put(key, slot.clone());
                    slot
                }
            }
        };
        match slot.get_or_init(|| prepare().map(Arc::new)) {
            Ok(face) => Ok(face.clone()),
            Err(e) => {
                self.slots.lock().expect("cache lock poisoned").pop(&key);
                Err(clone_error(e))
            }
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.slots.lock().expect("cache lock poisoned").len(),
            capacity: self.capacity,
        }
    }

    pub fn clear(&self) {
        self.slots.lock().expect("cache lock poisoned").clear();
    }
}

// Engine errors hold io/codec sources that are not `Clone`; a failed slot is
// dropped right away, so only the message and kind need to survive.
fn clone_error(e: &amorph::Error) -> amorph::Error {
    use amorph::Error as E;
    match e {
        E::EmptyFace => E::EmptyFace,
        E::LandmarkCount(n) => E::LandmarkCount(*n),
        E::UnknownLabel(l) => E::UnknownLabel(*l),
        E::InvalidWindow(w) => E::InvalidWindow(*w),
        E::DegenerateParams(s) => E::DegenerateParams(s.clone()),
        E::InvalidRequest(s) => E::InvalidRequest(s.clone()),
        E::LandmarkOutOfBounds { index, x, y, width, height } => {
            E::LandmarkOutOfBounds { index: *index, x: *x, y: *y, width: *width, height: *height }
        }
        E::DimensionMismatch { what, expected, found } => {
            E::DimensionMismatch { what, expected: expected.clone(), found: found.clone() }
        }
        other => E::InvalidRequest(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use amorph::synth::synth_face;
    use amorph::{Engine, FaceBundle, SynthParams};

    fn face(seed: u64) -> FaceBundle {
        synth_face(seed, &SynthParams { size: 64, ..Default::default() }).unwrap()
    }

    fn grid() -> WorkingGrid {
        WorkingGrid::square(16).unwrap()
    }

    #[test]
    fn hit_is_bit_identical_to_fresh_prepare() {
        let (engine, cache, b) = (Engine::default(), FaceCache::new(4), face(1));
        let key = FaceCache::key(&[b"x"], grid(), FieldMode::PerChannel);
        let first = cache.get_or_prepare(key, || engine.prepare(&b, grid(), FieldMode::PerChannel)).unwrap();
        let second = cache.get_or_prepare(key, || unreachable!("cached")).unwrap();
        assert!(Arc::ptr_eq(&first, &second));
        let fresh = engine.prepare(&b, grid(), FieldMode::PerChannel).unwrap();
        assert_eq!(second.field(), fresh.field());
        assert_eq!(second.features(), fresh.features());
        assert_eq!(cache.stats(), CacheStats { hits: 1, misses: 1, entries: 1, capacity: 4 });
    }

    #[test]
    fn failures_are_not_cached() {
        let cache = FaceCache::new(2);
        let key = FaceCache::key(&[b"bad"], grid(), FieldMode::PerChannel);
        assert!(cache.get_or_prepare(key, || Err(amorph::Error::EmptyFace)).is_err());
        assert_eq!(cache.stats().entries, 0);
        let engine = Engine::default();
        assert!(cache.get_or_prepare(key, || engine.prepare(&face(2), grid(), FieldMode::PerChannel)).is_ok());
    }

    #[test]
    fn least_recent_entry_is_evicted() {
        let (engine, cache) = (Engine::default(), FaceCache::new(2));
        let keys: Vec<CacheKey> = (0u8..3).map(|i| FaceCache::key(&[&[i]], grid(), FieldMode::PerChannel)).collect();
        for (i, k) in keys.iter().enumerate() {
            cache.get_or_prepare(*k, || engine.prepare(&face(i as u64), grid(), FieldMode::PerChannel)).unwrap();
        }
        assert_eq!(cache.stats().entries, 2);
        let mut recomputed = false;
        cache
            .get_or_prepare(keys[0], || {
                recomputed = true;
                engine.prepare(&face(0), grid(), FieldMode::PerChannel)
            })
            .unwrap();
        assert!(recomputed);
    }

    #[test]
    fn key_covers_parts_grid_and_mode() {
        let k = |parts: &[&[u8]], side, mode| FaceCache::key(parts, WorkingGrid::square(side).unwrap(), mode);
        let base = k(&[b"ab", b"c"], 32, FieldMode::PerChannel);
        assert_ne!(base, k(&[b"a", b"bc"], 32, FieldMode::PerChannel));
        assert_ne!(base, k(&[b"ab", b"c"], 64, FieldMode::PerChannel));
        assert_ne!(base, k(&[b"ab", b"c"], 32, FieldMode::Broadcast));
        assert_eq!(base, k(&[b"ab", b"c"], 32, FieldMode::PerChannel));
    }
}
