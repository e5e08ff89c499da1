//! The four-party data-feed protocol as contract behaviors.
//!
//! * [`manager`]: the routing front contract. Holds the center address,
//!   requestor bindings, pool windows, cache, committee and denylist.
//! * [`center`]: the logic contract. Holds the registry, audit log,
//!   subscriptions and owner state vectors. Every entry accepts only the
//!   manager.
//! * [`owner`]: publishes a payload and answers queries from the center.
//! * [`requestor`]: asks for data and receives deliveries.
//! * [`probe`]: relays arbitrary calls, used to exercise access control.
//!
//! A core-mode request is one chained call:
//! `requestor.request → manager.request → center.forward → owner.reply`,
//! then `center → requestor.receive` for each recipient.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crypto::{Address, Digest32};
use crate::gas::GasSchedule;
use crate::message::Body;
use crate::subscribe::{NotificationRecord, StateVector, SubscriptionRegistry};
use crate::vm::Vm;

pub mod center;
pub mod manager;
pub mod owner;
pub mod probe;
pub mod requestor;

pub use center::CenterState;
pub use manager::{ManagerConfig, ManagerInit, ManagerState};
pub use owner::OwnerState;
pub use requestor::RequestorState;

pub const MANAGER: &str = "defeed.manager";
pub const CENTER: &str = "defeed.center";
pub const OWNER: &str = "defeed.owner";
pub const REQUESTOR: &str = "defeed.requestor";
pub const PROBE: &str = "defeed.probe";

/// Function selectors of every protocol entry.
pub mod sel {
    use std::sync::LazyLock;

    use crate::crypto::{function_selector, Selector};

    macro_rules! selectors {
        ($($name:ident = $text:literal;)*) => {
            $(pub static $name: LazyLock<Selector> =
                LazyLock::new(|| function_selector($text).expect("non-empty signature"));)*
        };
    }

    selectors! {
        INITIALIZE = "initialize(address)";
        CENTER = "center()";
        REGISTER_OWNER = "registerOwner(string,int256[])";
        REQUEST = "request(string)";
        FLUSH = "flush(uint256)";
        PUBLISH = "publish(string,int256[])";
        SUBSCRIBE = "subscribe(string)";
        UNSUBSCRIBE = "unsubscribe(string)";
        PROPOSE = "propose(bytes,bytes)";
        APPROVE = "approve(uint256,address,bytes)";
        EXECUTE = "execute(uint256)";

        CENTER_REGISTER = "register(string,address,int256[],bool)";
        CENTER_VET_REGISTER = "vetRegister(string,address,int256[],bool)";
        CENTER_DEREGISTER = "deregister(string)";
        CENTER_FORWARD = "forward(string,bytes32[],bytes32)";
        CENTER_RECORD_DENIED = "recordDenied(string,bytes32)";
        CENTER_SUBSCRIBE = "subscribe(string,address)";
        CENTER_UNSUBSCRIBE = "unsubscribe(string,address)";
        CENTER_NOTIFY = "notify(string,address,int256[])";
        CENTER_EXPORT = "exportState()";
        CENTER_IMPORT = "importState(bytes)";
        CENTER_DEACTIVATE = "deactivate()";

        OWNER_REGISTER = "register(string)";
        OWNER_SET_PAYLOAD = "setPayload(bytes)";
        OWNER_SET_STATE = "setState(int256[])";
        OWNER_REPLY = "reply(string)";
        OWNER_RESPOND_DIRECT = "respondDirect(uint256)";

        REQUESTOR_RECEIVE = "receive(uint256,string,bytes)";
        REQUESTOR_ON_NOTIFY = "onNotify(string,uint256[],int256[])";
        REQUESTOR_REQUEST_DIRECT = "requestDirect(address)";
        REQUESTOR_SET_FAIL = "setFailNotifications(bool)";

        POKE = "poke(address,bytes4,bytes)";
    }
}

/// Entries of the center contract; each accepts only the manager.
pub fn center_entries() -> Vec<crate::crypto::Selector> {
    [
        &sel::CENTER_REGISTER,
        &sel::CENTER_VET_REGISTER,
        &sel::CENTER_DEREGISTER,
        &sel::CENTER_FORWARD,
        &sel::CENTER_RECORD_DENIED,
        &sel::CENTER_SUBSCRIBE,
        &sel::CENTER_UNSUBSCRIBE,
        &sel::CENTER_NOTIFY,
        &sel::CENTER_EXPORT,
        &sel::CENTER_IMPORT,
        &sel::CENTER_DEACTIVATE,
    ]
    .into_iter()
    .map(|s| **s)
    .collect()
}

/// A VM with every protocol behavior registered.
pub fn protocol_vm(schedule: GasSchedule) -> Vm {
    let mut vm = Vm::new(schedule);
    vm.register(Arc::new(manager::ManagerBehavior));
    vm.register(Arc::new(center::CenterBehavior));
    vm.register(Arc::new(owner::OwnerBehavior));
    vm.register(Arc::new(requestor::RequestorBehavior));
    vm.register(Arc::new(probe::ProbeBehavior));
    vm
}

/// Registry record `(x, y, z, t, d)`.
///
/// `t` is the pool delay in blocks (`-1` waits indefinitely) and is absent
/// outside pool mode; `d` is only populated on cache entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeTuple {
    pub x: u8,
    pub y: String,
    pub z: Digest32,
    pub t: Option<i64>,
    pub d: Option<Vec<u8>>,
}

impl AttributeTuple {
    pub fn registered(name: &str, owner: &Address, pooled: bool) -> Self {
        AttributeTuple {
            x: 1,
            y: name.to_string(),
            z: owner.hashed(),
            t: pooled.then_some(-1),
            d: None,
        }
    }

    /// Sentinel returned for names that are not registered.
    pub fn missing(name: &str) -> Self {
        AttributeTuple {
            x: 0,
            y: name.to_string(),
            z: Digest32::ZERO,
            t: None,
            d: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub tuple: AttributeTuple,
    /// Preimage of `tuple.z`, needed to dispatch queries.
    pub owner: Address,
    pub state: StateVector,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("name must not be empty")]
    EmptyName,
    #[error("name {0} is already registered")]
    Duplicate(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    entries: BTreeMap<String, RegistryEntry>,
}

impl Registry {
    /// Adds `name`. `overwrite` permits committee-approved re-registration.
    pub fn register(
        &mut self,
        name: &str,
        owner: Address,
        state: StateVector,
        pooled: bool,
        overwrite: bool,
    ) -> Result<&AttributeTuple, RegistryError> {
        if name.is_empty() {
            return Err(RegistryError::EmptyName);
        }
        if self.entries.contains_key(name) && !overwrite {
            return Err(RegistryError::Duplicate(name.to_string()));
        }
        self.entries.insert(
            name.to_string(),
            RegistryEntry {
                tuple: AttributeTuple::registered(name, &owner, pooled),
                owner,
                state,
            },
        );
        Ok(&self.entries[name].tuple)
    }

    pub fn lookup(&self, name: &str) -> AttributeTuple {
        self.entries
            .get(name)
            .map(|e| e.tuple.clone())
            .unwrap_or_else(|| AttributeTuple::missing(name))
    }

    pub fn entry(&self, name: &str) -> Option<&RegistryEntry> {
        self.entries.get(name)
    }

    pub fn entry_mut(&mut self, name: &str) -> Option<&mut RegistryEntry> {
        self.entries.get_mut(name)
    }

    pub fn deregister(&mut self, name: &str) -> bool {
        self.entries.remove(name).is_some()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Accepts a reply only from the owner the registry resolves `name` to.
pub fn check_reply_sender(entry: &RegistryEntry, sender: &Address) -> Result<(), Outcome> {
    if sender.hashed() == entry.tuple.z {
        Ok(())
    } else {
        Err(Outcome::Denied)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Served,
    NameMissing,
    Denied,
    /// The requestor's receive handler reverted.
    DeliveryFailed,
    /// A subscriber's notification handler reverted.
    NotifyFailed,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Served => "served",
            Outcome::NameMissing => "name-missing",
            Outcome::Denied => "denied",
            Outcome::DeliveryFailed => "delivery-failed",
            Outcome::NotifyFailed => "notify-failed",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub block_height: u64,
    pub requestor_hash: Digest32,
    pub owner_name: String,
    pub outcome: Outcome,
    pub gas_used: u64,
}

pub const AUDIT_CSV_HEADER: [&str; 5] = [
    "blockHeight",
    "requestorHash",
    "ownerName",
    "outcome",
    "gasUsed",
];

pub fn write_audit_csv<W: std::io::Write>(records: &[AuditRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AUDIT_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.block_height.to_string(),
            r.requestor_hash.to_hex(),
            r.owner_name.clone(),
            r.outcome.to_string(),
            r.gas_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Data handed to a requestor's receive entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub request_id: u64,
    pub name: String,
    pub body: Body,
}

/// A requestor to answer, as resolved by the manager's binding map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipient {
    pub request_id: u64,
    pub hash: Digest32,
    pub address: Address,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardArgs {
    pub name: String,
    pub recipients: Vec<Recipient>,
    /// Set on pooled forwards.
    pub aggregate: Option<Digest32>,
    /// Pool delay to record on the registry tuple.
    pub delay: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardReply {
    pub payload: Option<Vec<u8>>,
    pub owner_hash: Option<Digest32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequestOutcome {
    /// Answered within the same transaction.
    Served(u64),
    /// Queued in a pool window.
    Pending(u64),
    NameMissing(u64),
    Denied,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterArgs {
    pub name: String,
    pub owner: Address,
    pub state: Vec<i64>,
    pub pooled: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotifyArgs {
    pub name: String,
    pub owner: Address,
    pub state: Vec<i64>,
}

/// State carried from a retiring center to its replacement.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenterExport {
    pub registry: Registry,
    pub audit: Vec<AuditRecord>,
    pub subscriptions: SubscriptionRegistry,
    pub notifications: Vec<NotificationRecord>,
}
