//! Response memoization held by the manager.
//!
//! Entries live until their TTL lapses or they are invalidated; an owner
//! state change invalidates the entry for that owner's name.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::Digest32;
use crate::gas::GasSchedule;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    /// `None` keeps entries until invalidated.
    pub ttl_blocks: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub x: u8,
    pub name: String,
    /// Hashed owner address.
    pub z: Digest32,
    pub d: Vec<u8>,
    pub created_at_block: u64,
    pub ttl_blocks: Option<u64>,
}

impl CacheEntry {
    pub fn expired_at(&self, height: u64) -> bool {
        self.ttl_blocks
            .is_some_and(|ttl| height >= self.created_at_block.saturating_add(ttl))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStat {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheBook {
    pub config: CacheConfig,
    entries: BTreeMap<String, CacheEntry>,
    stats: BTreeMap<String, CacheStat>,
}

impl CacheBook {
    pub fn new(config: CacheConfig) -> Self {
        CacheBook {
            config,
            ..CacheBook::default()
        }
    }

    pub fn entry(&self, name: &str) -> Option<&CacheEntry> {
        self.entries.get(name)
    }

    pub fn stats(&self) -> &BTreeMap<String, CacheStat> {
        &self.stats
    }

    /// Returns the cached payload, evicting the entry if its TTL lapsed.
    pub fn lookup(&mut self, name: &str, height: u64) -> Option<Vec<u8>> {
        let stat = self.stats.entry(name.to_string()).or_default();
        match self.entries.get(name) {
            Some(e) if e.expired_at(height) => {
                self.entries.remove(name);
                stat.evictions += 1;
                stat.misses += 1;
                None
            }
            Some(e) => {
                stat.hits += 1;
                Some(e.d.clone())
            }
            None => {
                stat.misses += 1;
                None
            }
        }
    }

    /// Stores `payload` for `name`; a later write replaces an earlier one.
    pub fn create(&mut self, name: &str, owner_hash: Digest32, payload: Vec<u8>, height: u64) {
        if let Some(old) = self.entries.get(name) {
            if old.created_at_block > height {
                return;
            }
        }
        self.entries.insert(
            name.to_string(),
            CacheEntry {
                x: 1,
                name: name.to_string(),
                z: owner_hash,
                d: payload,
                created_at_block: height,
                ttl_blocks: self.config.ttl_blocks,
            },
        );
    }

    pub fn invalidate(&mut self, name: &str) -> bool {
        let evicted = self.entries.remove(name).is_some();
        if evicted {
            self.stats.entry(name.to_string()).or_default().evictions += 1;
        }
        evicted
    }
}

pub const CACHE_CSV_HEADER: [&str; 5] = ["name", "hits", "misses", "evictions", "gasSavedEstimate"];

/// Each hit is credited the difference between a plain request and a hit.
pub fn write_cache_csv<W: std::io::Write>(
    stats: &BTreeMap<String, CacheStat>,
    schedule: &GasSchedule,
    out: W,
) -> csv::Result<()> {
    let per_hit = schedule
        .steady_request()
        .saturating_sub(schedule.cache_hit());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CACHE_CSV_HEADER)?;
    for (name, s) in stats {
        w.write_record([
            name.clone(),
            s.hits.to_string(),
            s.misses.to_string(),
            s.evictions.to_string(),
            (s.hits * per_hit).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hit_after_create() {
        let mut c = CacheBook::default();
        assert_eq!(c.lookup("v", 1), None);
        c.create("v", Digest32::ZERO, b"k".to_vec(), 1);
        assert_eq!(c.lookup("v", 2), Some(b"k".to_vec()));
        assert_eq!(
            c.stats()["v"],
            CacheStat {
                hits: 1,
                misses: 1,
                evictions: 0
            }
        );
    }

    #[test]
    fn ttl_expiry_evicts() {
        let mut c = CacheBook::new(CacheConfig {
            ttl_blocks: Some(5),
        });
        c.create("v", Digest32::ZERO, b"k".to_vec(), 10);
        assert!(c.lookup("v", 14).is_some());
        assert!(c.lookup("v", 15).is_none());
        assert!(c.entry("v").is_none());
        assert_eq!(c.stats()["v"].evictions, 1);
    }

    #[test]
    fn last_write_wins() {
        let mut c = CacheBook::default();
        c.create("v", Digest32::ZERO, b"a".to_vec(), 3);
        c.create("v", Digest32::ZERO, b"b".to_vec(), 4);
        c.create("v", Digest32::ZERO, b"stale".to_vec(), 2);
        assert_eq!(c.entry("v").unwrap().d, b"b");
    }

    #[test]
    fn invalidate_unknown_is_false() {
        let mut c = CacheBook::default();
        assert!(!c.invalidate("nope"));
        c.create("v", Digest32::ZERO, vec![], 0);
        assert!(c.invalidate("v"));
    }
}
