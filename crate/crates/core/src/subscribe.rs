//! State vectors, deltas and the subscription registry.
//!
//! An owner's observable state is a vector of signed integers. A change from
//! `S` to `S'` notifies every subscriber with the non-zero component-wise
//! differences, indexed from 1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::crypto::{keccak256, Address};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<i64>);

impl StateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One-element vector standing in for an opaque payload: the first 8
    /// bytes of its keccak digest, so any payload change yields a delta.
    pub fn from_payload(payload: &[u8]) -> Self {
        let d = keccak256(payload);
        let mut word = [0u8; 8];
        word.copy_from_slice(&d.0[..8]);
        StateVector(vec![i64::from_be_bytes(word)])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("state vectors differ in length ({old} vs {new})")]
pub struct LengthMismatch {
    pub old: usize,
    pub new: usize,
}

/// `(index, delta)` pairs with 1-based indices and non-zero deltas.
pub type Changes = Vec<(u32, i128)>;

/// Deltas can exceed the 64-bit range JSON numbers carry, so they are
/// stored as decimal strings.
mod changes_text {
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(changes: &super::Changes, s: S) -> Result<S::Ok, S::Error> {
        let text: Vec<(u32, String)> = changes.iter().map(|(i, d)| (*i, d.to_string())).collect();
        text.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<super::Changes, D::Error> {
        let text = Vec::<(u32, String)>::deserialize(d)?;
        text.into_iter()
            .map(|(i, v)| v.parse().map(|d| (i, d)).map_err(D::Error::custom))
            .collect()
    }
}

pub fn compute_delta(old: &StateVector, new: &StateVector) -> Result<Changes, LengthMismatch> {
    if old.len() != new.len() {
        return Err(LengthMismatch {
            old: old.len(),
            new: new.len(),
        });
    }
    Ok(old
        .0
        .iter()
        .zip(&new.0)
        .enumerate()
        .filter_map(|(i, (a, b))| {
            let d = *b as i128 - *a as i128;
            (d != 0).then_some((i as u32 + 1, d))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub owner_name: String,
    #[serde(with = "changes_text")]
    pub changes: Changes,
    pub at_block: u64,
}

/// One delivery attempt, as kept in the notification log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationRecord {
    pub block: u64,
    pub owner_name: String,
    pub subscriber: Address,
    #[serde(with = "changes_text")]
    pub changes: Changes,
    pub delivered: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscriptionRegistry {
    subs: BTreeMap<String, BTreeSet<Address>>,
}

impl SubscriptionRegistry {
    /// Returns false if `who` was already subscribed.
    pub fn subscribe(&mut self, name: &str, who: Address) -> bool {
        self.subs.entry(name.to_string()).or_default().insert(who)
    }

    pub fn unsubscribe(&mut self, name: &str, who: &Address) -> bool {
        let Some(set) = self.subs.get_mut(name) else {
            return false;
        };
        let removed = set.remove(who);
        if set.is_empty() {
            self.subs.remove(name);
        }
        removed
    }

    pub fn clear(&mut self, name: &str) {
        self.subs.remove(name);
    }

    /// Subscribers in address order.
    pub fn subscribers(&self, name: &str) -> Vec<Address> {
        self.subs
            .get(name)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn is_subscribed(&self, name: &str, who: &Address) -> bool {
        self.subs.get(name).is_some_and(|s| s.contains(who))
    }
}

pub const NOTIFICATION_CSV_HEADER: [&str; 5] = [
    "block",
    "ownerName",
    "subscriber",
    "changedIndices",
    "deltas",
];

/// Indices and deltas are `;`-joined within their columns.
pub fn write_notifications_csv<W: std::io::Write>(
    records: &[NotificationRecord],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(NOTIFICATION_CSV_HEADER)?;
    for r in records {
        let idx: Vec<String> = r.changes.iter().map(|(i, _)| i.to_string()).collect();
        let deltas: Vec<String> = r.changes.iter().map(|(_, d)| d.to_string()).collect();
        w.write_record([
            r.block.to_string(),
            r.owner_name.clone(),
            r.subscriber.to_hex(),
            idx.join(";"),
            deltas.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_example() {
        let d = compute_delta(&StateVector(vec![3, 5, 7]), &StateVector(vec![3, 9, 6])).unwrap();
        assert_eq!(d, vec![(2, 4), (3, -1)]);
    }

    #[test]
    fn equal_vectors_have_no_changes() {
        let s = StateVector(vec![1, 2]);
        assert!(compute_delta(&s, &s).unwrap().is_empty());
    }

    #[test]
    fn length_mismatch_is_error() {
        let e = compute_delta(&StateVector(vec![1]), &StateVector(vec![1, 2])).unwrap_err();
        assert_eq!(e, LengthMismatch { old: 1, new: 2 });
    }

    #[test]
    fn extreme_values_do_not_overflow() {
        let d = compute_delta(&StateVector(vec![i64::MIN]), &StateVector(vec![i64::MAX])).unwrap();
        assert_eq!(d, vec![(1, i64::MAX as i128 - i64::MIN as i128)]);
        let note = Notification {
            owner_name: "o".into(),
            changes: d,
            at_block: 3,
        };
        let json = serde_json::to_string(&note).unwrap();
        assert_eq!(serde_json::from_str::<Notification>(&json).unwrap(), note);
    }

    #[test]
    fn set_semantics() {
        let mut r = SubscriptionRegistry::default();
        let a = Address([2; 20]);
        let b = Address([1; 20]);
        assert!(r.subscribe("v", a));
        assert!(!r.subscribe("v", a));
        r.subscribe("v", b);
        assert_eq!(r.subscribers("v"), vec![b, a]);
        assert!(r.unsubscribe("v", &a));
        assert!(!r.unsubscribe("v", &a));
        assert_eq!(r.subscribers("v"), vec![b]);
    }

    #[test]
    fn payload_vector_changes_with_payload() {
        let a = StateVector::from_payload(b"x");
        let b = StateVector::from_payload(b"y");
        assert_eq!(a.len(), 1);
        assert_eq!(compute_delta(&a, &b).unwrap().len(), 1);
    }
}
