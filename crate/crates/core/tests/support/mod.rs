//! Property checkers shared by the property suite and the acceptance runner.
//! Each takes a case count and returns a one-line summary or the minimal
//! failing input.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use defeed::bench::{execute, report, run_throughput, sweep, Mode, ScenarioSpec};
use defeed::crypto::{Address, Digest32, KeyPair, Selector};
use defeed::gas::GasSchedule;
use defeed::governance::{approval_message, approval_threshold, Action};
use defeed::message::{Body, Interaction, NAME_MISSING};
use defeed::network::{Network, NetworkConfig};
use defeed::pool::PoolConfig;
use defeed::protocol::{
    center_entries, sel, CenterExport, ForwardArgs, ManagerConfig, NotifyArgs, Recipient,
    RegisterArgs, RequestOutcome,
};
use defeed::subscribe::{compute_delta, StateVector};
use defeed::vm::{encode, TraceFrame};

pub type Check = Result<String, String>;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            max_shrink_iters: 256,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn fail(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn pooled_config(window_blocks: u64) -> NetworkConfig {
    NetworkConfig {
        manager: ManagerConfig {
            pool: Some(PoolConfig {
                window_blocks,
                ..PoolConfig::default()
            }),
            ..ManagerConfig::default()
        },
        ..NetworkConfig::default()
    }
}

fn kappa(name: &str) -> Vec<u8> {
    format!("kappa:{name}").into_bytes()
}

// ---------------------------------------------------------------------------
// Access control

#[derive(Clone, Debug)]
enum Target {
    Center,
    Owner(usize),
    Manager,
    Requestor(usize),
}

#[derive(Clone, Debug)]
enum AttackOp {
    Call {
        via_probe: bool,
        key: usize,
        target: Target,
        selector: usize,
        garbage: Option<Vec<u8>>,
    },
    Request {
        requestor: usize,
        name: usize,
    },
    Subscribe {
        requestor: usize,
        name: usize,
    },
    Publish {
        owner: usize,
        value: i64,
    },
}

const ATTACK_NAMES: [&str; 3] = ["a", "b", "ghost"];

struct AttackBase {
    net: Network,
    probe: Address,
    owners: Vec<Address>,
}

fn attack_base(pooled: bool) -> AttackBase {
    let mut net = Network::new(if pooled {
        pooled_config(2)
    } else {
        NetworkConfig::default()
    })
    .expect("network");
    let owners = ["a", "b"]
        .iter()
        .enumerate()
        .map(|(i, n)| {
            net.add_owner(n, kappa(n), vec![i as i64, 0])
                .expect("owner")
        })
        .collect();
    net.add_requestors(2).expect("requestors");
    let probe = net.deploy_probe().expect("probe");
    AttackBase { net, probe, owners }
}

fn selectors_for(target: &Target) -> Vec<Selector> {
    match target {
        Target::Center => center_entries(),
        Target::Owner(_) => vec![
            *sel::OWNER_REPLY,
            *sel::OWNER_RESPOND_DIRECT,
            *sel::OWNER_REGISTER,
            *sel::OWNER_SET_PAYLOAD,
            *sel::OWNER_SET_STATE,
        ],
        Target::Manager => vec![
            *sel::FLUSH,
            *sel::INITIALIZE,
            *sel::REGISTER_OWNER,
            *sel::PUBLISH,
            *sel::REQUEST,
            *sel::SUBSCRIBE,
        ],
        Target::Requestor(_) => vec![
            *sel::REQUESTOR_RECEIVE,
            *sel::REQUESTOR_ON_NOTIFY,
            *sel::REQUEST,
            *sel::SUBSCRIBE,
        ],
    }
}

/// Well-formed arguments for `selector`, so guards are reached past decoding.
fn plausible_args(selector: Selector, base: &AttackBase) -> Vec<u8> {
    let probe = base.probe;
    let owner = base.owners[0];
    if selector == *sel::CENTER_REGISTER || selector == *sel::CENTER_VET_REGISTER {
        encode(&RegisterArgs {
            name: "evil".into(),
            owner: probe,
            state: vec![],
            pooled: false,
        })
    } else if selector == *sel::CENTER_FORWARD {
        encode(&ForwardArgs {
            name: "a".into(),
            recipients: vec![Recipient {
                request_id: 99,
                hash: probe.hashed(),
                address: probe,
            }],
            aggregate: None,
            delay: None,
        })
    } else if selector == *sel::CENTER_RECORD_DENIED {
        encode(&("a".to_string(), probe.hashed()))
    } else if selector == *sel::CENTER_SUBSCRIBE || selector == *sel::CENTER_UNSUBSCRIBE {
        encode(&("a".to_string(), probe))
    } else if selector == *sel::CENTER_NOTIFY {
        encode(&NotifyArgs {
            name: "a".into(),
            owner,
            state: vec![7, 7],
        })
    } else if selector == *sel::CENTER_IMPORT {
        encode(&CenterExport::default())
    } else if selector == *sel::CENTER_EXPORT || selector == *sel::CENTER_DEACTIVATE {
        encode(&())
    } else if selector == *sel::FLUSH || selector == *sel::OWNER_RESPOND_DIRECT {
        encode(&0u64)
    } else if selector == *sel::INITIALIZE {
        encode(&probe)
    } else if selector == *sel::REGISTER_OWNER || selector == *sel::PUBLISH {
        encode(&("a".to_string(), vec![9i64, 9]))
    } else if selector == *sel::OWNER_SET_PAYLOAD {
        encode(&b"forged".to_vec())
    } else if selector == *sel::OWNER_SET_STATE {
        encode(&vec![5i64, 5])
    } else {
        encode(&"a".to_string())
    }
}

fn attack_op() -> impl Strategy<Value = AttackOp> {
    let target = prop_oneof![
        4 => Just(Target::Center),
        2 => (0..2usize).prop_map(Target::Owner),
        1 => Just(Target::Manager),
        1 => (0..2usize).prop_map(Target::Requestor),
    ];
    let garbage = proptest::option::weighted(0.3, proptest::collection::vec(any::<u8>(), 0..48));
    prop_oneof![
        6 => (any::<bool>(), 0..4usize, target, any::<usize>(), garbage).prop_map(
            |(via_probe, key, target, selector, garbage)| AttackOp::Call {
                via_probe,
                key,
                target,
                selector,
                garbage,
            }
        ),
        2 => (0..2usize, 0..3usize).prop_map(|(requestor, name)| AttackOp::Request { requestor, name }),
        1 => (0..2usize, 0..2usize).prop_map(|(requestor, name)| AttackOp::Subscribe { requestor, name }),
        1 => (0..2usize, -5i64..5).prop_map(|(owner, value)| AttackOp::Publish { owner, value }),
    ]
}

fn attack_key(net: &Network, i: usize) -> KeyPair {
    match i {
        0 => net.client().clone(),
        1 => net.publisher().clone(),
        2 => net.admin().clone(),
        _ => net.committee()[0].clone(),
    }
}

fn run_attack(base: &AttackBase, ops: &[AttackOp]) -> Result<Vec<TraceFrame>, String> {
    let mut net = base.net.clone();
    let start = net.ledger().height();
    let manager = net.manager();
    let requestors = net.requestors().to_vec();
    let mut digests = Vec::new();
    for op in ops {
        let d = match op {
            AttackOp::Call {
                via_probe,
                key,
                target,
                selector,
                garbage,
            } => {
                let addr = match target {
                    Target::Center => net.center(),
                    Target::Owner(i) => base.owners[*i],
                    Target::Manager => manager,
                    Target::Requestor(i) => requestors[*i],
                };
                let choices = selectors_for(target);
                let s = choices[selector % choices.len()];
                let args = garbage.clone().unwrap_or_else(|| plausible_args(s, base));
                let key = attack_key(&net, *key);
                if *via_probe {
                    net.submit(&key, base.probe, *sel::POKE, encode(&(addr, s, args)))
                } else {
                    net.submit(&key, addr, s, args)
                }
            }
            AttackOp::Request { requestor, name } => {
                net.submit_request(requestors[*requestor], ATTACK_NAMES[*name])
            }
            AttackOp::Subscribe { requestor, name } => {
                let key = net.client().clone();
                net.submit(
                    &key,
                    requestors[*requestor],
                    *sel::SUBSCRIBE,
                    encode(&ATTACK_NAMES[*name]),
                )
            }
            AttackOp::Publish { owner, value } => {
                let key = net.publisher().clone();
                net.submit(
                    &key,
                    base.owners[*owner],
                    *sel::OWNER_SET_STATE,
                    encode(&vec![*value, 0]),
                )
            }
        }
        .map_err(|e| e.to_string())?;
        digests.push(d);
    }
    for d in &digests {
        net.wait_for(*d).map_err(|e| e.to_string())?;
    }
    net.step_n(3).map_err(|e| e.to_string())?;
    let mut frames = Vec::new();
    for block in &net.ledger().blocks()[start as usize + 1..] {
        for r in &block.system_receipts {
            frames.extend(r.trace.iter().cloned());
        }
        for d in &block.transactions {
            if let Some(r) = net.receipt(d) {
                frames.extend(r.trace.iter().cloned());
            }
        }
    }
    Ok(frames)
}

/// Frames that break the access rules: returned as (attempts, successes).
fn access_violations(
    frames: &[TraceFrame],
    manager: Address,
    center: Address,
    owners: &[Address],
) -> (usize, Vec<TraceFrame>) {
    let entries = center_entries();
    let mut attempts = 0;
    let mut breaches = Vec::new();
    for f in frames {
        let center_breach =
            f.callee == center && entries.contains(&f.selector) && f.caller != manager;
        let reply_breach =
            owners.contains(&f.callee) && f.selector == *sel::OWNER_REPLY && f.caller != center;
        if center_breach || reply_breach {
            attempts += 1;
            if f.succeeded() {
                breaches.push(f.clone());
            }
        }
    }
    (attempts, breaches)
}

/// No frame enters a center entry from anyone but the manager, nor an
/// owner's reply from anyone but the center; every such attempt reverts.
pub fn access_control(cases: u32) -> Check {
    let bases = [attack_base(false), attack_base(true)];
    let attempts = AtomicUsize::new(0);
    let strategy = (any::<bool>(), proptest::collection::vec(attack_op(), 1..10));
    runner(cases)
        .run(&strategy, |(pooled, ops)| {
            let base = &bases[pooled as usize];
            let frames = run_attack(base, &ops).map_err(fail)?;
            let (n, breaches) =
                access_violations(&frames, base.net.manager(), base.net.center(), &base.owners);
            attempts.fetch_add(n, Ordering::Relaxed);
            prop_assert!(breaches.is_empty(), "unreverted frames: {breaches:?}");
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{cases} sequences, {} violation attempts, all reverted",
        attempts.into_inner()
    ))
}

// ---------------------------------------------------------------------------
// Service

#[derive(Clone, Debug)]
enum ServiceOp {
    Register(usize),
    Request { requestor: usize, name: usize },
    Step,
}

const SERVICE_NAMES: [&str; 4] = ["n0", "n1", "n2", "n3"];
const SERVICE_WINDOW: u64 = 3;

fn service_base(pooled: bool) -> Network {
    let mut net = Network::new(if pooled {
        pooled_config(SERVICE_WINDOW)
    } else {
        NetworkConfig::default()
    })
    .expect("network");
    net.add_requestors(3).expect("requestors");
    net
}

fn service_op() -> impl Strategy<Value = ServiceOp> {
    prop_oneof![
        2 => (0..4usize).prop_map(ServiceOp::Register),
        5 => (0..3usize, 0..4usize).prop_map(|(requestor, name)| ServiceOp::Request { requestor, name }),
        2 => Just(ServiceOp::Step),
    ]
}

fn check_service(base: &Network, pooled: bool, ops: &[ServiceOp]) -> Result<usize, TestCaseError> {
    let mut net = base.clone();
    let requestors = net.requestors().to_vec();
    let mut registered_at: BTreeMap<usize, u64> = BTreeMap::new();
    let mut sent = Vec::new();
    for op in ops {
        match op {
            ServiceOp::Register(n) => {
                if !registered_at.contains_key(n) {
                    let name = SERVICE_NAMES[*n];
                    net.add_owner(name, kappa(name), vec![]).map_err(fail)?;
                    registered_at.insert(*n, net.ledger().height());
                }
            }
            ServiceOp::Request { requestor, name } => {
                let h = net.ledger().height();
                let d = net
                    .submit_request(requestors[*requestor], SERVICE_NAMES[*name])
                    .map_err(fail)?;
                sent.push((d, *requestor, *name, h));
            }
            ServiceOp::Step => {
                net.step().map_err(fail)?;
            }
        }
    }
    net.step_n(SERVICE_WINDOW + 2).map_err(fail)?;
    let bound = if pooled { SERVICE_WINDOW + 1 } else { 2 };
    for (d, requestor, name, submitted_at) in &sent {
        let receipt = net.receipt(d).ok_or_else(|| fail("request not included"))?;
        prop_assert!(
            receipt.succeeded(),
            "request reverted: {:?}",
            receipt.revert
        );
        let id = match Network::request_outcome(receipt) {
            Some(
                RequestOutcome::Served(id)
                | RequestOutcome::Pending(id)
                | RequestOutcome::NameMissing(id),
            ) => id,
            other => return Err(fail(format!("unexpected outcome {other:?}"))),
        };
        let state = net.requestor_state(requestors[*requestor]);
        let got: Vec<_> = state
            .received
            .iter()
            .filter(|r| r.request_id == id)
            .collect();
        prop_assert_eq!(got.len(), 1, "request {} delivered {} times", id, got.len());
        let delivered = got[0];
        prop_assert!(
            delivered.block - submitted_at <= bound,
            "request {} took {} intervals",
            id,
            delivered.block - submitted_at
        );
        let n = SERVICE_NAMES[*name];
        let expected = match registered_at.get(name) {
            Some(&h) if h < delivered.block => Body::Data(kappa(n)),
            _ => Body::Error(NAME_MISSING.to_string()),
        };
        prop_assert_eq!(&delivered.body, &expected, "request {} for {}", id, n);
    }
    Ok(sent.len())
}

/// Requests to registered names are served the owner's payload within the
/// mode's bound; requests to unregistered names get exactly the error text.
pub fn service(cases: u32) -> Check {
    let bases = [service_base(false), service_base(true)];
    let served = AtomicUsize::new(0);
    let strategy = (
        any::<bool>(),
        proptest::collection::vec(service_op(), 1..14),
    );
    runner(cases)
        .run(&strategy, |(pooled, ops)| {
            let n = check_service(&bases[pooled as usize], pooled, &ops)?;
            served.fetch_add(n, Ordering::Relaxed);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{cases} interleavings, {} requests answered correctly",
        served.into_inner()
    ))
}

// ---------------------------------------------------------------------------
// Governance

pub const COMMITTEE_SIZES: [usize; 4] = [3, 5, 7, 9];

#[derive(Clone, Debug)]
enum GovOp {
    Propose {
        signer: usize,
        target: usize,
    },
    Approve {
        signer: usize,
        proposal: usize,
        forged: bool,
    },
    /// Consecutive signers approve the same proposal, then one executes it.
    Rally {
        from: usize,
        count: usize,
        proposal: usize,
        executor: usize,
    },
    Execute {
        signer: usize,
        proposal: usize,
    },
}

struct GovBase {
    net: Network,
    /// Fresh centers, then a non-center address, then the live center.
    targets: Vec<Address>,
}

fn gov_base(n: usize) -> GovBase {
    let mut net = Network::new(NetworkConfig {
        committee_size: n,
        ..NetworkConfig::default()
    })
    .expect("network");
    let mut targets: Vec<Address> = (0..3)
        .map(|_| net.deploy_center().expect("center"))
        .collect();
    targets.push(net.deploy_probe().expect("probe"));
    targets.push(net.center());
    GovBase { net, targets }
}

fn gov_op() -> impl Strategy<Value = GovOp> {
    prop_oneof![
        3 => (any::<usize>(), 0..5usize).prop_map(|(signer, target)| GovOp::Propose { signer, target }),
        3 => (any::<usize>(), any::<usize>(), proptest::bool::weighted(0.2))
            .prop_map(|(signer, proposal, forged)| GovOp::Approve { signer, proposal, forged }),
        4 => (any::<usize>(), 1..10usize, any::<usize>(), any::<usize>()).prop_map(
            |(from, count, proposal, executor)| GovOp::Rally { from, count, proposal, executor }
        ),
        2 => (any::<usize>(), any::<usize>()).prop_map(|(signer, proposal)| GovOp::Execute { signer, proposal }),
    ]
}

#[derive(Clone, Debug)]
struct GovCase {
    size_index: usize,
    /// When set, only these members (plus an outsider) ever sign or send.
    coalition: Option<Vec<usize>>,
    ops: Vec<GovOp>,
}

fn gov_case() -> impl Strategy<Value = GovCase> {
    (0..COMMITTEE_SIZES.len(), any::<bool>()).prop_flat_map(|(size_index, restricted)| {
        let n = COMMITTEE_SIZES[size_index];
        let coalition = if restricted {
            proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 0..=(n - 1) / 2)
                .prop_map(Some)
                .boxed()
        } else {
            Just(None).boxed()
        };
        let opening = (any::<usize>(), 0..3usize)
            .prop_map(|(signer, target)| GovOp::Propose { signer, target });
        (
            coalition,
            opening,
            proptest::collection::vec(gov_op(), 1..18),
        )
            .prop_map(move |(coalition, first, rest)| GovCase {
                size_index,
                coalition,
                ops: std::iter::once(first).chain(rest).collect(),
            })
    })
}

/// Runs one trace; returns how many times the center changed.
fn check_governance(base: &GovBase, case: &GovCase) -> Result<usize, TestCaseError> {
    let mut net = base.net.clone();
    let n = COMMITTEE_SIZES[case.size_index];
    let threshold = n / 2 + 1;
    prop_assert_eq!(approval_threshold(n), threshold);
    let manager = net.manager();
    let outsider = net.client().clone();
    // signer index n stands for the outsider
    let signers: Vec<usize> = match &case.coalition {
        Some(c) => c.iter().copied().chain([n]).collect(),
        None => (0..=n).collect(),
    };
    let pick = |s: usize| signers[s % signers.len()];
    let key_of = |net: &Network, s: usize| {
        if s < n {
            net.committee()[s].clone()
        } else {
            outsider.clone()
        }
    };

    let mut ids: Vec<u64> = Vec::new();
    let mut genuine: BTreeMap<u64, BTreeSet<usize>> = BTreeMap::new();
    let mut executed: BTreeSet<u64> = BTreeSet::new();
    let mut changes = 0;
    let original = net.center();
    let mut live: BTreeSet<Address> = BTreeSet::from([original]);
    let id_of = |ids: &[u64], p: usize| match ids.len() {
        0 => 10_000,
        _ if p.is_multiple_of(8) => 10_000,
        len => ids[(p / 8) % len],
    };

    let ops = case.ops.iter().flat_map(|op| match *op {
        GovOp::Rally {
            from,
            count,
            proposal,
            executor,
        } => (from..from + count)
            .map(|signer| GovOp::Approve {
                signer,
                proposal,
                forged: false,
            })
            .chain([GovOp::Execute {
                signer: executor,
                proposal,
            }])
            .collect(),
        ref other => vec![other.clone()],
    });
    for op in ops {
        let op = &op;
        let before = net.center();
        match *op {
            GovOp::Rally { .. } => unreachable!("expanded above"),
            GovOp::Propose { signer, target } => {
                let s = pick(signer);
                let key = key_of(&net, s);
                let target = base.targets[target];
                let id = net.manager_state().proposals.next_id();
                let action = Action::UpdateCenter(target);
                let sig = key.sign(&approval_message(&manager, id, &action));
                let r = net
                    .transact(&key, manager, *sel::PROPOSE, encode(&(action, sig)))
                    .map_err(fail)?;
                let valid_target = target != base.targets[3] && target != before;
                prop_assert_eq!(
                    r.succeeded(),
                    s < n && valid_target,
                    "propose {:?}",
                    r.revert
                );
                if r.succeeded() {
                    prop_assert_eq!(r.decode_output::<u64>().ok(), Some(id));
                    ids.push(id);
                    genuine.entry(id).or_default().insert(s);
                }
            }
            GovOp::Approve {
                signer,
                proposal,
                forged,
            } => {
                let s = pick(signer);
                let claimed = key_of(&net, s).address();
                let id = id_of(&ids, proposal);
                let action = net
                    .manager_state()
                    .proposals
                    .get(id)
                    .map(|p| p.action.clone())
                    .unwrap_or(Action::Deregister(String::new()));
                let signing = if forged {
                    outsider.clone()
                } else {
                    key_of(&net, s)
                };
                let sig = signing.sign(&approval_message(&manager, id, &action));
                let r = net
                    .transact(
                        &outsider,
                        manager,
                        *sel::APPROVE,
                        encode(&(id, claimed, sig)),
                    )
                    .map_err(fail)?;
                let live = genuine.contains_key(&id) && !executed.contains(&id);
                prop_assert_eq!(
                    r.succeeded(),
                    live && s < n && !forged,
                    "approve {:?}",
                    r.revert
                );
                if r.succeeded() {
                    genuine.entry(id).or_default().insert(s);
                }
            }
            GovOp::Execute { signer, proposal } => {
                let s = pick(signer);
                let key = key_of(&net, s);
                let id = id_of(&ids, proposal);
                let action = net
                    .manager_state()
                    .proposals
                    .get(id)
                    .map(|p| p.action.clone());
                let signed = genuine.get(&id).map_or(0, BTreeSet::len);
                let expected = s < n
                    && genuine.contains_key(&id)
                    && !executed.contains(&id)
                    && signed >= threshold;
                let r = net
                    .transact(&key, manager, *sel::EXECUTE, encode(&id))
                    .map_err(fail)?;
                let after = net.center();
                if after != before {
                    prop_assert!(r.succeeded());
                    prop_assert!(
                        signed >= threshold,
                        "center changed with {} of {} signatures",
                        signed,
                        n
                    );
                    prop_assert_eq!(&action, &Some(Action::UpdateCenter(after)));
                    changes += 1;
                }
                // moving back onto a center that already served is left unspecified
                let reused = matches!(action, Some(Action::UpdateCenter(t)) if live.contains(&t));
                if !reused {
                    prop_assert_eq!(r.succeeded(), expected, "execute {:?}", r.revert);
                }
                if r.succeeded() {
                    executed.insert(id);
                    live.insert(after);
                }
            }
        }
        if !matches!(op, GovOp::Execute { .. }) {
            prop_assert_eq!(net.center(), before, "center moved outside execute");
        }
    }
    if case.coalition.is_some() {
        prop_assert_eq!(
            net.center(),
            original,
            "a minority coalition moved the center"
        );
    }
    Ok(changes)
}

/// The center moves only with a majority of distinct valid signatures, and
/// no minority coalition can move it.
pub fn governance(cases: u32) -> Check {
    let bases: Vec<GovBase> = COMMITTEE_SIZES.iter().map(|&n| gov_base(n)).collect();
    let changes = AtomicUsize::new(0);
    runner(cases)
        .run(&gov_case(), |case| {
            let c = check_governance(&bases[case.size_index], &case)?;
            changes.fetch_add(c, Ordering::Relaxed);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{cases} traces over n in {COMMITTEE_SIZES:?}, {} authorized center changes",
        changes.into_inner()
    ))
}

// ---------------------------------------------------------------------------
// Deltas

fn brute_delta(old: &[i64], new: &[i64]) -> Vec<(u32, i128)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < old.len() {
        if old[i] != new[i] {
            out.push(((i + 1) as u32, i128::from(new[i]) - i128::from(old[i])));
        }
        i += 1;
    }
    out
}

fn state_pair() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
    let value = prop_oneof![3 => -4i64..4, 1 => any::<i64>()];
    (0..=100usize).prop_flat_map(move |len| {
        (
            proptest::collection::vec(value.clone(), len),
            proptest::collection::vec(value.clone(), len),
        )
    })
}

/// computeDelta agrees with an element-wise difference kept where non-zero.
pub fn delta_oracle(cases: u32) -> Check {
    runner(cases)
        .run(&state_pair(), |(old, new)| {
            let got = compute_delta(&StateVector(old.clone()), &StateVector(new.clone()))
                .map_err(fail)?;
            prop_assert_eq!(got, brute_delta(&old, &new));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{cases} vector pairs match the brute-force difference"
    ))
}

/// Summing the deltas of a walk gives the difference of its endpoints.
pub fn telescoping(cases: u32) -> Check {
    let walk = (1..=100usize).prop_flat_map(|len| {
        proptest::collection::vec(proptest::collection::vec(any::<i64>(), len), 101)
    });
    runner(cases)
        .run(&walk, |states| {
            let len = states[0].len();
            let mut sum = vec![0i128; len];
            for pair in states.windows(2) {
                let d = compute_delta(&StateVector(pair[0].clone()), &StateVector(pair[1].clone()))
                    .map_err(fail)?;
                for (index, change) in d {
                    sum[index as usize - 1] += change;
                }
            }
            let (first, last) = (&states[0], &states[100]);
            for i in 0..len {
                prop_assert_eq!(sum[i], i128::from(last[i]) - i128::from(first[i]));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{cases} walks of 100 steps telescope"))
}

// ---------------------------------------------------------------------------
// Pool batching

pub const POOL_NAMES: [&str; 3] = ["p0", "p1", "p2"];
const POOL_REQUESTORS: usize = 4;

fn pool_base(window: u64) -> Network {
    let mut net = Network::new(pooled_config(window)).expect("network");
    for n in POOL_NAMES {
        net.add_owner(n, kappa(n), vec![]).expect("owner");
    }
    net.add_requestors(POOL_REQUESTORS).expect("requestors");
    net
}

#[derive(Clone, Debug)]
struct Arrival {
    block: u64,
    name: usize,
    requestor: usize,
}

#[derive(Debug, PartialEq, Eq)]
struct ExpectedWindow {
    name: String,
    open: u64,
    close: u64,
    members: Vec<(u64, Address)>,
}

/// Discrete-event replay: a request joins its name's open window, or opens
/// one; windows close `window` blocks after opening, before that block's
/// transactions.
fn replay(arrivals: &[(u64, String, u64, Address)], window: u64) -> Vec<ExpectedWindow> {
    let mut open: BTreeMap<String, ExpectedWindow> = BTreeMap::new();
    let mut done = Vec::new();
    for (block, name, id, who) in arrivals {
        let expired: Vec<String> = open
            .iter()
            .filter(|(_, w)| w.close <= *block)
            .map(|(k, _)| k.clone())
            .collect();
        for k in expired {
            done.extend(open.remove(&k));
        }
        open.entry(name.clone())
            .or_insert_with(|| ExpectedWindow {
                name: name.clone(),
                open: *block,
                close: block + window,
                members: Vec::new(),
            })
            .members
            .push((*id, *who));
    }
    done.extend(open.into_values());
    done.sort_by(|a, b| (a.open, &a.name).cmp(&(b.open, &b.name)));
    done
}

fn check_pool(base: &Network, window: u64, arrivals: &[Arrival]) -> Result<usize, TestCaseError> {
    let mut net = base.clone();
    let requestors = net.requestors().to_vec();
    let start = net.ledger().height();
    let mut sorted = arrivals.to_vec();
    sorted.sort_by_key(|a| a.block);
    let mut digests = Vec::new();
    let mut next = 0;
    for b in 0..20u64 {
        while next < sorted.len() && sorted[next].block == b {
            let a = &sorted[next];
            digests.push((
                net.submit_request(requestors[a.requestor], POOL_NAMES[a.name])
                    .map_err(fail)?,
                a.requestor,
                a.name,
            ));
            next += 1;
        }
        net.step().map_err(fail)?;
    }
    for (d, ..) in &digests {
        net.wait_for(*d).map_err(fail)?;
    }
    net.step_n(window + 1).map_err(fail)?;

    let mut observed = Vec::new();
    for (d, requestor, name) in &digests {
        let r = net.receipt(d).expect("included");
        prop_assert!(r.succeeded(), "request reverted: {:?}", r.revert);
        let Some(RequestOutcome::Pending(id)) = Network::request_outcome(r) else {
            return Err(fail(format!("request not pooled: {:?}", r.output)));
        };
        let block = &net.ledger().blocks()[r.block_height as usize];
        let position = block
            .transactions
            .iter()
            .position(|t| t == d)
            .expect("in block");
        observed.push((
            r.block_height,
            position,
            POOL_NAMES[*name].to_string(),
            id,
            requestors[*requestor],
        ));
    }
    observed.sort_by_key(|o| (o.0, o.1));
    let arrivals: Vec<_> = observed
        .into_iter()
        .map(|(block, _, name, id, who)| (block, name, id, who))
        .collect();
    let expected = replay(&arrivals, window);

    let log: Vec<_> = net
        .manager_state()
        .pool_log
        .iter()
        .filter(|w| w.open_block > start)
        .map(|w| {
            (
                w.owner_name.clone(),
                w.open_block,
                w.close_block,
                w.batch_size,
            )
        })
        .collect();
    let mut log = log;
    log.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
    let want: Vec<_> = expected
        .iter()
        .map(|w| (w.name.clone(), w.open, w.close, w.members.len()))
        .collect();
    prop_assert_eq!(&log, &want);

    for w in &expected {
        let block = &net.ledger().blocks()[w.close as usize];
        let messages: Vec<_> = block
            .system_receipts
            .iter()
            .flat_map(|r| r.emitted_messages.iter())
            .filter(|m| m.name == w.name)
            .collect();
        let queries = messages
            .iter()
            .filter(|m| m.interaction() == Interaction::Query)
            .count();
        prop_assert_eq!(
            queries,
            1,
            "window {:?} queried {} times",
            (&w.name, w.open),
            queries
        );
        let forwards: Vec<_> = messages
            .iter()
            .filter(|m| m.interaction() == Interaction::For)
            .collect();
        prop_assert_eq!(forwards.len(), 1);
        let hashes: Vec<Digest32> = w.members.iter().map(|(_, a)| a.hashed()).collect();
        prop_assert_eq!(&forwards[0].requestor_hashes, &hashes);
        for (id, who) in &w.members {
            let got: Vec<_> = net
                .requestor_state(*who)
                .received
                .iter()
                .filter(|r| r.request_id == *id)
                .collect();
            prop_assert_eq!(got.len(), 1);
            prop_assert_eq!(got[0].block, w.close);
            prop_assert_eq!(&got[0].body, &Body::Data(kappa(&w.name)));
        }
    }
    Ok(expected.len())
}

fn arrivals() -> impl Strategy<Value = Vec<Arrival>> {
    proptest::collection::vec(
        (0..20u64, 0..POOL_NAMES.len(), 0..POOL_REQUESTORS).prop_map(|(block, name, requestor)| {
            Arrival {
                block,
                name,
                requestor,
            }
        }),
        1..=50,
    )
}

/// Windows, their membership, and the single owner query per window match
/// a discrete-event replay of the included requests.
pub fn pool_oracle(cases: u32) -> Check {
    let windows = [1u64, 3, 5];
    let bases: Vec<Network> = windows.iter().map(|&w| pool_base(w)).collect();
    let total = AtomicUsize::new(0);
    let strategy = (0..windows.len(), arrivals());
    runner(cases)
        .run(&strategy, |(w, arrivals)| {
            let n = check_pool(&bases[w], windows[w], &arrivals)?;
            total.fetch_add(n, Ordering::Relaxed);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{cases} schedules, {} windows matched the replay",
        total.into_inner()
    ))
}

// ---------------------------------------------------------------------------
// Determinism

/// Everything a run exports, concatenated.
fn fingerprint(spec: &ScenarioSpec, schedule: &GasSchedule) -> Result<(String, Digest32), String> {
    let run = execute(spec, schedule).map_err(|e| e.to_string())?;
    let rows = sweep(std::slice::from_ref(spec), schedule).map_err(|e| e.to_string())?;
    let t = run_throughput(spec, schedule).map_err(|e| e.to_string())?;
    let rep = report(&rows, &[t]).map_err(|e| e.to_string())?;
    let net = &run.network;
    let text = [
        rep.gas_curve_csv,
        rep.throughput_csv.unwrap_or_default(),
        rep.summary,
        net.audit_csv(),
        net.pool_csv(),
        net.cache_csv(),
        net.notifications_csv(),
        net.governance_csv(),
        net.trace_log(),
    ]
    .join("\n--\n");
    Ok((text, net.ledger().state_root()))
}

/// Two runs of each mode with the same seed export identical bytes and end
/// on the same state root.
pub fn determinism(seeds: &[u64], requestors: usize) -> Check {
    let schedule = GasSchedule::default();
    let mut runs = 0;
    for &seed in seeds {
        for mode in Mode::ALL {
            let spec = ScenarioSpec::new(mode, requestors, seed).with_jitter(true);
            let a = fingerprint(&spec, &schedule)?;
            let b = fingerprint(&spec, &schedule)?;
            if a.0 != b.0 {
                return Err(format!("{mode} seed {seed}: exports differ"));
            }
            if a.1 != b.1 {
                return Err(format!("{mode} seed {seed}: state roots differ"));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} scenario pairs byte-identical"))
}
