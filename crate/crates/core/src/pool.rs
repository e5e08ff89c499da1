//! Request pooling: same-name requests arriving within a block window are
//! forwarded once.
//!
//! A window opens at the block of its first request and covers
//! `[open, open + window_blocks)`. Windows for different names are
//! independent. A window is flushed at the first block boundary at or after
//! its close, or immediately once it reaches `max_batch` members.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::{Address, Digest32};
use crate::message::aggregate_hash;

pub const DEFAULT_WINDOW_BLOCKS: u64 = 3;
pub const DEFAULT_MAX_BATCH: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub window_blocks: u64,
    pub max_batch: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            window_blocks: DEFAULT_WINDOW_BLOCKS,
            max_batch: DEFAULT_MAX_BATCH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolMember {
    pub request_id: u64,
    pub requestor: Address,
    pub hash: Digest32,
    pub arrived_block: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolWindow {
    pub id: u64,
    pub owner_name: String,
    pub opened_at_block: u64,
    pub window_blocks: u64,
    pub members: Vec<PoolMember>,
}

impl PoolWindow {
    pub fn close_block(&self) -> u64 {
        self.opened_at_block + self.window_blocks
    }

    pub fn requestor_hashes(&self) -> Vec<Digest32> {
        self.members.iter().map(|m| m.hash).collect()
    }

    /// Keccak over member addresses in arrival order.
    pub fn aggregate(&self) -> Digest32 {
        let addrs: Vec<Address> = self.members.iter().map(|m| m.requestor).collect();
        aggregate_hash(&addrs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolAction {
    Opened(u64),
    Joined(u64),
    /// The window reached the batch cap and must be flushed now.
    Full(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowStat {
    pub window_id: u64,
    pub owner_name: String,
    pub batch_size: usize,
    pub open_block: u64,
    pub close_block: u64,
    pub total_gas: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolBook {
    pub config: PoolConfig,
    windows: BTreeMap<u64, PoolWindow>,
    next_id: u64,
}

impl PoolBook {
    pub fn new(config: PoolConfig) -> Self {
        PoolBook {
            config,
            windows: BTreeMap::new(),
            next_id: 0,
        }
    }

    pub fn open_windows(&self) -> impl Iterator<Item = &PoolWindow> {
        self.windows.values()
    }

    pub fn on_request(&mut self, name: &str, member: PoolMember, height: u64) -> PoolAction {
        let open = self
            .windows
            .values_mut()
            .find(|w| w.owner_name == name && height < w.close_block());
        let (id, action) = match open {
            Some(w) => {
                w.members.push(member);
                (w.id, PoolAction::Joined(w.id))
            }
            None => {
                let id = self.next_id;
                self.next_id += 1;
                self.windows.insert(
                    id,
                    PoolWindow {
                        id,
                        owner_name: name.to_string(),
                        opened_at_block: height,
                        window_blocks: self.config.window_blocks,
                        members: vec![member],
                    },
                );
                (id, PoolAction::Opened(id))
            }
        };
        if self.windows[&id].members.len() >= self.config.max_batch {
            PoolAction::Full(id)
        } else {
            action
        }
    }

    pub fn take(&mut self, id: u64) -> Option<PoolWindow> {
        self.windows.remove(&id)
    }

    /// Removes and returns windows closed at `height`, oldest first.
    pub fn take_expired(&mut self, height: u64) -> Vec<PoolWindow> {
        let ids: Vec<u64> = self
            .windows
            .values()
            .filter(|w| w.close_block() <= height)
            .map(|w| w.id)
            .collect();
        ids.into_iter()
            .filter_map(|id| self.windows.remove(&id))
            .collect()
    }

    /// Drops every window for `name`, returning the discarded members.
    pub fn clear(&mut self, name: &str) -> Vec<PoolMember> {
        let ids: Vec<u64> = self
            .windows
            .values()
            .filter(|w| w.owner_name == name)
            .map(|w| w.id)
            .collect();
        ids.into_iter()
            .filter_map(|id| self.windows.remove(&id))
            .flat_map(|w| w.members)
            .collect()
    }
}

pub const POOL_CSV_HEADER: [&str; 6] = [
    "windowId",
    "ownerName",
    "batchSize",
    "openBlock",
    "closeBlock",
    "totalGas",
];

pub fn write_pool_csv<W: std::io::Write>(stats: &[WindowStat], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POOL_CSV_HEADER)?;
    for s in stats {
        w.write_record([
            s.window_id.to_string(),
            s.owner_name.clone(),
            s.batch_size.to_string(),
            s.open_block.to_string(),
            s.close_block.to_string(),
            s.total_gas.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(i: u8, block: u64) -> PoolMember {
        let requestor = Address([i; 20]);
        PoolMember {
            request_id: i as u64,
            requestor,
            hash: requestor.hashed(),
            arrived_block: block,
        }
    }

    #[test]
    fn requests_inside_window_join() {
        let mut p = PoolBook::new(PoolConfig::default());
        assert_eq!(p.on_request("v", member(1, 10), 10), PoolAction::Opened(0));
        assert_eq!(p.on_request("v", member(2, 11), 11), PoolAction::Joined(0));
        assert_eq!(p.on_request("v", member(3, 12), 12), PoolAction::Joined(0));
        assert!(p.take_expired(12).is_empty());
        let w = p.take_expired(13);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].members.len(), 3);
        assert_eq!(
            w[0].aggregate(),
            aggregate_hash(&[Address([1; 20]), Address([2; 20]), Address([3; 20])])
        );
    }

    #[test]
    fn arrival_at_close_opens_new_window() {
        let mut p = PoolBook::new(PoolConfig::default());
        p.on_request("v", member(1, 10), 10);
        assert_eq!(p.on_request("v", member(2, 13), 13), PoolAction::Opened(1));
    }

    #[test]
    fn names_do_not_share_windows() {
        let mut p = PoolBook::new(PoolConfig::default());
        p.on_request("a", member(1, 1), 1);
        assert_eq!(p.on_request("b", member(2, 1), 1), PoolAction::Opened(1));
    }

    #[test]
    fn batch_cap_forces_flush() {
        let mut p = PoolBook::new(PoolConfig {
            window_blocks: 3,
            max_batch: 2,
        });
        p.on_request("v", member(1, 1), 1);
        assert_eq!(p.on_request("v", member(2, 1), 1), PoolAction::Full(0));
    }
}
