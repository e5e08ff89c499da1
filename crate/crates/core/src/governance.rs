//! Committee proposals and majority approval.
//!
//! Members sign `(manager, proposal id, action)`. A proposal executes once it
//! carries valid signatures from `floor(n/2) + 1` distinct members, so no
//! coalition smaller than a strict majority can act alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::{verify, Address, KeyPair, Signature, SignatureScheme};
use crate::vm::encode;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub address: Address,
    pub public_key: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Committee {
    pub scheme: SignatureScheme,
    members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GovernanceError {
    #[error("committee must have at least one member")]
    Empty,
    #[error("duplicate member {0}")]
    DuplicateMember(Address),
    #[error("{0} is not a committee member")]
    NotMember(Address),
    #[error("signature from {0} does not verify")]
    BadSignature(Address),
    #[error("unknown proposal {0}")]
    UnknownProposal(u64),
    #[error("proposal {0} already executed")]
    AlreadyExecuted(u64),
    #[error("proposal {id} has {have} of {need} approvals")]
    BelowThreshold { id: u64, have: usize, need: usize },
}

impl Committee {
    pub fn new(scheme: SignatureScheme, members: Vec<Member>) -> Result<Self, GovernanceError> {
        if members.is_empty() {
            return Err(GovernanceError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &members {
            if !seen.insert(m.address) {
                return Err(GovernanceError::DuplicateMember(m.address));
            }
        }
        Ok(Committee { scheme, members })
    }

    pub fn from_keys(keys: &[KeyPair]) -> Result<Self, GovernanceError> {
        let scheme = keys
            .first()
            .map_or(SignatureScheme::default(), |k| k.scheme());
        Committee::new(
            scheme,
            keys.iter()
                .map(|k| Member {
                    address: k.address(),
                    public_key: k.public_key().to_vec(),
                })
                .collect(),
        )
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn threshold(&self) -> usize {
        approval_threshold(self.members.len())
    }

    pub fn is_member(&self, addr: &Address) -> bool {
        self.members.iter().any(|m| m.address == *addr)
    }

    pub fn check(
        &self,
        member: &Address,
        msg: &[u8],
        sig: &Signature,
    ) -> Result<(), GovernanceError> {
        let m = self
            .members
            .iter()
            .find(|m| m.address == *member)
            .ok_or(GovernanceError::NotMember(*member))?;
        if verify(self.scheme, &m.public_key, msg, sig) {
            Ok(())
        } else {
            Err(GovernanceError::BadSignature(*member))
        }
    }
}

pub fn approval_threshold(n: usize) -> usize {
    n / 2 + 1
}

/// Largest coalition that must never be able to act alone.
pub fn max_minority(n: usize) -> usize {
    n.saturating_sub(1) / 2
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// Route the manager to a new center contract.
    UpdateCenter(Address),
    /// Register (or re-register) `name` for `owner` with initial state.
    Register {
        name: String,
        owner: Address,
        state: Vec<i64>,
    },
    Deregister(String),
    /// Allow or deny a requestor at the forward stage.
    SetPermission {
        requestor: Address,
        allowed: bool,
    },
}

impl Action {
    pub fn label(&self) -> &'static str {
        match self {
            Action::UpdateCenter(_) => "update",
            Action::Register { .. } => "register",
            Action::Deregister(_) => "deregister",
            Action::SetPermission { .. } => "permission",
        }
    }
}

/// Bytes a member signs to approve `action` as proposal `id` on `manager`.
pub fn approval_message(manager: &Address, id: u64, action: &Action) -> Vec<u8> {
    encode(&("defeed.governance", manager, id, action))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u64,
    pub action: Action,
    pub approvals: BTreeMap<Address, Signature>,
    pub executed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalBook {
    proposals: BTreeMap<u64, Proposal>,
    next_id: u64,
}

impl ProposalBook {
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn get(&self, id: u64) -> Option<&Proposal> {
        self.proposals.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.values()
    }

    /// Opens a proposal carrying the proposer's approval.
    pub fn propose(
        &mut self,
        committee: &Committee,
        manager: &Address,
        proposer: Address,
        action: Action,
        sig: Signature,
    ) -> Result<u64, GovernanceError> {
        let id = self.next_id;
        committee.check(&proposer, &approval_message(manager, id, &action), &sig)?;
        let mut approvals = BTreeMap::new();
        approvals.insert(proposer, sig);
        self.proposals.insert(
            id,
            Proposal {
                id,
                action,
                approvals,
                executed: false,
            },
        );
        self.next_id += 1;
        Ok(id)
    }

    /// Records an approval; repeating one is a no-op. Returns the count.
    pub fn approve(
        &mut self,
        committee: &Committee,
        manager: &Address,
        id: u64,
        member: Address,
        sig: Signature,
    ) -> Result<usize, GovernanceError> {
        let p = self
            .proposals
            .get_mut(&id)
            .ok_or(GovernanceError::UnknownProposal(id))?;
        if p.executed {
            return Err(GovernanceError::AlreadyExecuted(id));
        }
        committee.check(&member, &approval_message(manager, id, &p.action), &sig)?;
        p.approvals.entry(member).or_insert(sig);
        Ok(p.approvals.len())
    }

    /// Marks `id` executed if it meets the threshold, returning its action.
    /// Every stored approval is re-verified against the current committee.
    pub fn execute(
        &mut self,
        committee: &Committee,
        manager: &Address,
        id: u64,
    ) -> Result<Action, GovernanceError> {
        let p = self
            .proposals
            .get_mut(&id)
            .ok_or(GovernanceError::UnknownProposal(id))?;
        if p.executed {
            return Err(GovernanceError::AlreadyExecuted(id));
        }
        let msg = approval_message(manager, id, &p.action);
        let valid = p
            .approvals
            .iter()
            .filter(|(m, s)| committee.check(m, &msg, s).is_ok())
            .count();
        let need = committee.threshold();
        if valid < need {
            return Err(GovernanceError::BelowThreshold {
                id,
                have: valid,
                need,
            });
        }
        p.executed = true;
        Ok(p.action.clone())
    }
}

/// One governance transaction as seen by the driver.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernanceRecord {
    pub block: u64,
    pub proposal_id: Option<u64>,
    pub action: String,
    pub member: Address,
    pub outcome: String,
}

pub const GOVERNANCE_CSV_HEADER: [&str; 5] = ["block", "proposalId", "action", "member", "outcome"];

pub fn write_governance_csv<W: std::io::Write>(
    records: &[GovernanceRecord],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GOVERNANCE_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.block.to_string(),
            r.proposal_id.map(|p| p.to_string()).unwrap_or_default(),
            r.action.clone(),
            r.member.to_hex(),
            r.outcome.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: u8) -> Vec<KeyPair> {
        (1..=n)
            .map(|i| KeyPair::from_secret(SignatureScheme::Secp256k1, [i; 32]).unwrap())
            .collect()
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(approval_threshold(5), 3);
        assert_eq!(approval_threshold(3), 2);
        assert_eq!(approval_threshold(4), 3);
        assert_eq!(max_minority(5), 2);
        for n in 1..20 {
            assert!(max_minority(n) < approval_threshold(n));
            assert!(2 * approval_threshold(n) > n);
        }
    }

    #[test]
    fn majority_executes() {
        let ks = keys(5);
        let c = Committee::from_keys(&ks).unwrap();
        let mgr = Address([9; 20]);
        let mut book = ProposalBook::default();
        let action = Action::UpdateCenter(Address([7; 20]));
        let sign = |k: &KeyPair, id| k.sign(&approval_message(&mgr, id, &action));
        let id = book
            .propose(&c, &mgr, ks[0].address(), action.clone(), sign(&ks[0], 0))
            .unwrap();
        assert_eq!(
            book.approve(&c, &mgr, id, ks[1].address(), sign(&ks[1], id)),
            Ok(2)
        );
        assert_eq!(
            book.approve(&c, &mgr, id, ks[1].address(), sign(&ks[1], id)),
            Ok(2)
        );
        assert!(matches!(
            book.execute(&c, &mgr, id),
            Err(GovernanceError::BelowThreshold {
                have: 2,
                need: 3,
                ..
            })
        ));
        book.approve(&c, &mgr, id, ks[2].address(), sign(&ks[2], id))
            .unwrap();
        assert_eq!(book.execute(&c, &mgr, id), Ok(action));
        assert_eq!(
            book.execute(&c, &mgr, id),
            Err(GovernanceError::AlreadyExecuted(id))
        );
    }

    #[test]
    fn forged_and_outsider_signatures_rejected() {
        let ks = keys(4);
        let c = Committee::from_keys(&ks[..3]).unwrap();
        let mgr = Address([9; 20]);
        let mut book = ProposalBook::default();
        let action = Action::Deregister("v".into());
        let msg = approval_message(&mgr, 0, &action);
        assert_eq!(
            book.propose(&c, &mgr, ks[3].address(), action.clone(), ks[3].sign(&msg)),
            Err(GovernanceError::NotMember(ks[3].address()))
        );
        assert_eq!(
            book.propose(&c, &mgr, ks[0].address(), action.clone(), ks[3].sign(&msg)),
            Err(GovernanceError::BadSignature(ks[0].address()))
        );
        let other = approval_message(&Address([8; 20]), 0, &action);
        assert!(book
            .propose(&c, &mgr, ks[0].address(), action, ks[0].sign(&other))
            .is_err());
    }
}
