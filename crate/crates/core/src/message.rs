//! Protocol messages exchanged between the requestor, manager, center and
//! owner contracts.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::{keccak256, Address, Digest32};

/// Error text returned for a name missing from the registry.
pub const NAME_MISSING: &str = "The name doesn't exist.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Interaction {
    Reg,
    Req,
    For,
    Query,
    Reply,
    Resp,
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Interaction::Reg => "reg",
            Interaction::Req => "req",
            Interaction::For => "for",
            Interaction::Query => "query",
            Interaction::Reply => "reply",
            Interaction::Resp => "resp",
        };
        f.write_str(s)
    }
}

/// Body of a message: nothing, the owner's opaque payload, or error text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Body {
    Empty,
    Data(Vec<u8>),
    Error(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    interaction: Interaction,
    pub name: String,
    pub requestor_hashes: Vec<Digest32>,
    /// Digest over the batch's requestor addresses in arrival order; only
    /// set on pooled forwards.
    pub aggregate_hash: Option<Digest32>,
    pub body: Body,
}

impl ProtocolMessage {
    pub fn new(interaction: Interaction, name: impl Into<String>) -> Self {
        ProtocolMessage {
            interaction,
            name: name.into(),
            requestor_hashes: Vec::new(),
            aggregate_hash: None,
            body: Body::Empty,
        }
    }

    pub fn with_requestors(mut self, hashes: Vec<Digest32>) -> Self {
        self.requestor_hashes = hashes;
        self
    }

    pub fn with_body(mut self, body: Body) -> Self {
        self.body = body;
        self
    }

    pub fn with_aggregate(mut self, aggregate: Digest32) -> Self {
        self.aggregate_hash = Some(aggregate);
        self
    }

    pub fn interaction(&self) -> Interaction {
        self.interaction
    }

    pub fn payload(&self) -> Option<&[u8]> {
        match &self.body {
            Body::Data(d) => Some(d),
            _ => None,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match &self.body {
            Body::Error(e) => Some(e),
            _ => None,
        }
    }
}

/// `K(A_1, ..., A_n)`: keccak over addresses concatenated in arrival order.
pub fn aggregate_hash(addresses: &[Address]) -> Digest32 {
    let mut buf = Vec::with_capacity(addresses.len() * 20);
    for a in addresses {
        buf.extend_from_slice(a.as_bytes());
    }
    keccak256(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_is_order_sensitive() {
        let a = Address([1; 20]);
        let b = Address([2; 20]);
        assert_ne!(aggregate_hash(&[a, b]), aggregate_hash(&[b, a]));
        assert_eq!(aggregate_hash(&[a]), a.hashed());
    }

    #[test]
    fn tag_is_fixed() {
        let m = ProtocolMessage::new(Interaction::Resp, "vehicle2")
            .with_body(Body::Error(NAME_MISSING.into()));
        assert_eq!(m.interaction(), Interaction::Resp);
        assert_eq!(m.error(), Some("The name doesn't exist."));
        assert_eq!(m.payload(), None);
    }
}
