//! World state: accounts, contract storage and the flat state commitment.
//!
//! Contract storage is a typed state object owned by the contract's
//! behavior. Its commitment treats every top-level field as a storage slot
//! keyed by `keccak(field name)`, holding the digest of the field's canonical
//! JSON encoding. The world's state root is keccak over the sorted
//! `(address, nonce, balance, storage root, code hash)` records.

use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::{keccak256, Address, Digest32};

/// Typed contract storage.
pub trait ContractState: Any + Send + Sync + fmt::Debug {
    fn clone_box(&self) -> Box<dyn ContractState>;
    fn to_json(&self) -> serde_json::Value;
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

impl<T> ContractState for T
where
    T: Any + Clone + Send + Sync + fmt::Debug + Serialize,
{
    fn clone_box(&self) -> Box<dyn ContractState> {
        Box::new(self.clone())
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("contract state serializes to JSON")
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

#[derive(Debug)]
pub struct Code {
    pub behavior: String,
    pub state: Box<dyn ContractState>,
}

impl Clone for Code {
    fn clone(&self) -> Self {
        Code {
            behavior: self.behavior.clone(),
            state: self.state.clone_box(),
        }
    }
}

impl Code {
    pub fn code_hash(&self) -> Digest32 {
        keccak256(self.behavior.as_bytes())
    }

    pub fn storage_root(&self) -> Digest32 {
        storage_root(&self.state.to_json())
    }
}

/// Commitment over a JSON state value, slot per top-level field.
pub fn storage_root(value: &serde_json::Value) -> Digest32 {
    let mut slots: Vec<(Digest32, Digest32)> = match value {
        serde_json::Value::Object(map) => map
            .iter()
            .map(|(k, v)| (keccak256(k.as_bytes()), value_digest(v)))
            .collect(),
        other => vec![(Digest32::ZERO, value_digest(other))],
    };
    slots.sort();
    let mut buf = Vec::with_capacity(slots.len() * 64);
    for (k, v) in slots {
        buf.extend_from_slice(k.as_bytes());
        buf.extend_from_slice(v.as_bytes());
    }
    keccak256(&buf)
}

fn value_digest(v: &serde_json::Value) -> Digest32 {
    keccak256(&serde_json::to_vec(v).expect("json value encodes"))
}

/// The per-account tuple committed into the state root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountState {
    pub nonce: u64,
    pub balance: u128,
    pub storage_root: Digest32,
    /// All-zero for externally owned accounts.
    pub code_hash: Digest32,
}

#[derive(Clone, Debug, Default)]
pub struct Account {
    pub nonce: u64,
    pub balance: u128,
    pub public_key: Option<Vec<u8>>,
    pub code: Option<Code>,
}

impl Account {
    pub fn is_contract(&self) -> bool {
        self.code.is_some()
    }

    pub fn state(&self) -> AccountState {
        let (storage_root, code_hash) = match &self.code {
            Some(code) => (code.storage_root(), code.code_hash()),
            None => (Digest32::ZERO, Digest32::ZERO),
        };
        AccountState {
            nonce: self.nonce,
            balance: self.balance,
            storage_root,
            code_hash,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct World {
    accounts: BTreeMap<Address, Account>,
}

impl World {
    pub fn new() -> Self {
        World::default()
    }

    pub fn get(&self, addr: &Address) -> Option<&Account> {
        self.accounts.get(addr)
    }

    pub fn get_mut(&mut self, addr: &Address) -> Option<&mut Account> {
        self.accounts.get_mut(addr)
    }

    pub fn entry(&mut self, addr: Address) -> &mut Account {
        self.accounts.entry(addr).or_default()
    }

    pub fn insert(&mut self, addr: Address, account: Account) {
        self.accounts.insert(addr, account);
    }

    pub fn contains(&self, addr: &Address) -> bool {
        self.accounts.contains_key(addr)
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&Address, &Account)> {
        self.accounts.iter()
    }

    pub fn behavior_of(&self, addr: &Address) -> Option<&str> {
        self.accounts
            .get(addr)
            .and_then(|a| a.code.as_ref())
            .map(|c| c.behavior.as_str())
    }

    /// Downcasts a contract's storage to its concrete type.
    pub fn contract_state<T: 'static>(&self, addr: &Address) -> Option<&T> {
        self.accounts
            .get(addr)?
            .code
            .as_ref()?
            .state
            .as_any()
            .downcast_ref::<T>()
    }

    pub fn contract_state_mut<T: 'static>(&mut self, addr: &Address) -> Option<&mut T> {
        self.accounts
            .get_mut(addr)?
            .code
            .as_mut()?
            .state
            .as_any_mut()
            .downcast_mut::<T>()
    }

    pub fn total_balance(&self) -> u128 {
        self.accounts.values().map(|a| a.balance).sum()
    }

    pub fn state_root(&self) -> Digest32 {
        let mut buf = Vec::with_capacity(self.accounts.len() * 108);
        for (addr, account) in &self.accounts {
            let s = account.state();
            buf.extend_from_slice(addr.as_bytes());
            buf.extend_from_slice(&s.nonce.to_be_bytes());
            buf.extend_from_slice(&s.balance.to_be_bytes());
            buf.extend_from_slice(s.storage_root.as_bytes());
            buf.extend_from_slice(s.code_hash.as_bytes());
        }
        keccak256(&buf)
    }
}
