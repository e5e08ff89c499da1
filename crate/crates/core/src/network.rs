//! A deployed protocol instance on its own ledger, with the keys that drive
//! it and helpers for the common transactions.
//!
//! ```
//! use defeed::network::{Network, NetworkConfig};
//!
//! let mut net = Network::new(NetworkConfig::default()).unwrap();
//! net.add_owner("vehicle2", b"speed=42".to_vec(), vec![]).unwrap();
//! let r = net.add_requestor().unwrap();
//! let receipt = net.request(r, "vehicle2").unwrap();
//! assert!(receipt.succeeded());
//! assert_eq!(net.requestor_state(r).received[0].body.clone(),
//!            defeed::message::Body::Data(b"speed=42".to_vec()));
//! ```

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cache::write_cache_csv;
use crate::crypto::{Address, Digest32, KeyPair, Selector};
use crate::gas::GasSchedule;
use crate::governance::{
    approval_message, write_governance_csv, Action, Committee, GovernanceRecord,
};
use crate::ledger::{
    BlockClock, BlockHook, ChainConfig, CreatePayload, Ledger, LedgerError, Receipt, Transaction,
};
use crate::pool::write_pool_csv;
use crate::protocol::owner::OwnerInit;
use crate::protocol::{
    protocol_vm, sel, write_audit_csv, CenterState, ManagerConfig, ManagerInit, ManagerState,
    OwnerState, RequestOutcome, RequestorState, CENTER, MANAGER, OWNER, PROBE, REQUESTOR,
};
use crate::subscribe::write_notifications_csv;
use crate::vm::{encode, format_trace, Revert};

pub const DEFAULT_TX_GAS_LIMIT: u64 = 2_000_000;
const DEPLOY_GAS_LIMIT: u64 = 3_000_000;
const FUNDING: u128 = 10u128.pow(30);
/// Blocks [`Network::transact`] waits for inclusion before giving up.
const INCLUSION_PATIENCE: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("{what} reverted: {revert}")]
    Reverted { what: String, revert: Revert },
    #[error("transaction {0} was not included")]
    NotIncluded(Digest32),
    #[error(transparent)]
    Governance(#[from] crate::governance::GovernanceError),
}

#[derive(Clone, Debug)]
pub struct NetworkConfig {
    pub chain: ChainConfig,
    pub schedule: GasSchedule,
    pub manager: ManagerConfig,
    pub committee_size: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            chain: ChainConfig::default(),
            schedule: GasSchedule::default(),
            manager: ManagerConfig::default(),
            committee_size: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    ledger: Ledger,
    clock: BlockClock,
    now_ms: u64,
    admin: KeyPair,
    client: KeyPair,
    publisher: KeyPair,
    committee: Vec<KeyPair>,
    manager: Address,
    deploy_receipts: BTreeMap<&'static str, Receipt>,
    owners: BTreeMap<String, Address>,
    requestors: Vec<Address>,
    governance_log: Vec<GovernanceRecord>,
}

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self, NetworkError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scheme = config.chain.scheme;
        let mut ledger = Ledger::new(config.chain.clone(), protocol_vm(config.schedule.clone()));
        let mut key = || KeyPair::generate(scheme, &mut rng);
        let (admin, client, publisher) = (key(), key(), key());
        let committee: Vec<KeyPair> = (0..config.committee_size.max(1)).map(|_| key()).collect();
        for k in [&admin, &client, &publisher].into_iter().chain(&committee) {
            ledger.open_account(k.public_key(), FUNDING);
        }
        let clock = BlockClock::new(&config.chain, config.seed);
        let mut net = Network {
            ledger,
            clock,
            now_ms: 0,
            admin,
            client,
            publisher,
            committee,
            manager: Address::ZERO,
            deploy_receipts: BTreeMap::new(),
            owners: BTreeMap::new(),
            requestors: Vec::new(),
            governance_log: Vec::new(),
        };

        let init = ManagerInit {
            committee: Committee::from_keys(&net.committee)?,
            config: config.manager.clone(),
        };
        let admin = net.admin.clone();
        let (manager, receipt) = net.deploy_with(&admin, MANAGER, encode(&init))?;
        net.deploy_receipts.insert(MANAGER, receipt);
        net.manager = manager;
        let (center, receipt) = net.deploy_with(&admin, CENTER, encode(&manager))?;
        net.deploy_receipts.insert(CENTER, receipt);
        net.call_ok(
            &admin,
            manager,
            *sel::INITIALIZE,
            encode(&center),
            "initialize",
        )?;
        if config.manager.pool.is_some() {
            net.ledger.add_hook(BlockHook {
                target: manager,
                selector: *sel::FLUSH,
            });
        }
        Ok(net)
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn manager(&self) -> Address {
        self.manager
    }

    pub fn center(&self) -> Address {
        self.manager_state()
            .center
            .expect("initialized at construction")
    }

    pub fn client(&self) -> &KeyPair {
        &self.client
    }

    pub fn publisher(&self) -> &KeyPair {
        &self.publisher
    }

    pub fn admin(&self) -> &KeyPair {
        &self.admin
    }

    pub fn committee(&self) -> &[KeyPair] {
        &self.committee
    }

    pub fn owner(&self, name: &str) -> Option<Address> {
        self.owners.get(name).copied()
    }

    pub fn requestors(&self) -> &[Address] {
        &self.requestors
    }

    /// Receipt of the initial manager or center deployment.
    pub fn deploy_receipt(&self, behavior: &str) -> Option<&Receipt> {
        self.deploy_receipts.get(behavior)
    }

    pub fn manager_state(&self) -> &ManagerState {
        self.ledger
            .world()
            .contract_state::<ManagerState>(&self.manager)
            .expect("manager deployed")
    }

    pub fn center_state_at(&self, center: Address) -> &CenterState {
        self.ledger
            .world()
            .contract_state::<CenterState>(&center)
            .expect("center deployed")
    }

    pub fn center_state(&self) -> &CenterState {
        self.center_state_at(self.center())
    }

    pub fn requestor_state(&self, addr: Address) -> &RequestorState {
        self.ledger
            .world()
            .contract_state::<RequestorState>(&addr)
            .expect("requestor deployed")
    }

    pub fn owner_state(&self, addr: Address) -> &OwnerState {
        self.ledger
            .world()
            .contract_state::<OwnerState>(&addr)
            .expect("owner deployed")
    }

    pub fn governance_log(&self) -> &[GovernanceRecord] {
        &self.governance_log
    }

    /// Restarts block-interval sampling from `seed`, so runs with different
    /// setup lengths can share one interval sequence.
    pub fn reseed_clock(&mut self, seed: u64) {
        self.clock = BlockClock::new(self.ledger.config(), seed);
    }

    /// Mines the next block after a sampled interval.
    pub fn step(&mut self) -> Result<u64, NetworkError> {
        let next = self.now_ms + self.clock.next_interval_ms();
        self.ledger.mine_block(next)?;
        self.now_ms = next;
        Ok(self.ledger.height())
    }

    pub fn step_n(&mut self, n: u64) -> Result<(), NetworkError> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    /// Signs and queues a call without mining.
    pub fn submit(
        &mut self,
        key: &KeyPair,
        target: Address,
        selector: Selector,
        args: Vec<u8>,
    ) -> Result<Digest32, NetworkError> {
        self.submit_with_limit(key, Some(target), selector, args, DEFAULT_TX_GAS_LIMIT)
    }

    pub fn submit_with_limit(
        &mut self,
        key: &KeyPair,
        target: Option<Address>,
        selector: Selector,
        args: Vec<u8>,
        gas_limit: u64,
    ) -> Result<Digest32, NetworkError> {
        let nonce = self.ledger.next_nonce(&key.address());
        let base_fee = self.ledger.config().base_fee;
        let tx = Transaction::signed(key, nonce, target, selector, args, gas_limit, base_fee, 0);
        Ok(self.ledger.submit(tx, self.now_ms)?)
    }

    /// Mines until `digest` is included and returns its receipt.
    pub fn wait_for(&mut self, digest: Digest32) -> Result<Receipt, NetworkError> {
        for _ in 0..INCLUSION_PATIENCE {
            if let Some(r) = self.ledger.receipt(&digest) {
                return Ok(r.clone());
            }
            if self.ledger.was_dropped(&digest) {
                return Err(NetworkError::NotIncluded(digest));
            }
            self.step()?;
        }
        self.ledger
            .receipt(&digest)
            .cloned()
            .ok_or(NetworkError::NotIncluded(digest))
    }

    pub fn receipt(&self, digest: &Digest32) -> Option<&Receipt> {
        self.ledger.receipt(digest)
    }

    /// Submits a call and mines until it is included.
    pub fn transact(
        &mut self,
        key: &KeyPair,
        target: Address,
        selector: Selector,
        args: Vec<u8>,
    ) -> Result<Receipt, NetworkError> {
        let d = self.submit(key, target, selector, args)?;
        self.wait_for(d)
    }

    fn call_ok(
        &mut self,
        key: &KeyPair,
        target: Address,
        selector: Selector,
        args: Vec<u8>,
        what: &str,
    ) -> Result<Receipt, NetworkError> {
        let r = self.transact(key, target, selector, args)?;
        match &r.revert {
            None => Ok(r),
            Some(revert) => Err(NetworkError::Reverted {
                what: what.to_string(),
                revert: revert.clone(),
            }),
        }
    }

    fn deploy_with(
        &mut self,
        key: &KeyPair,
        behavior: &str,
        init: Vec<u8>,
    ) -> Result<(Address, Receipt), NetworkError> {
        let payload = CreatePayload {
            behavior: behavior.to_string(),
            endowment: 0,
            init,
        };
        let d = self.submit_with_limit(
            key,
            None,
            Selector([0; 4]),
            encode(&payload),
            DEPLOY_GAS_LIMIT,
        )?;
        let r = self.wait_for(d)?;
        match (&r.contract_address, &r.revert) {
            (Some(addr), _) => Ok((*addr, r)),
            (None, revert) => Err(NetworkError::Reverted {
                what: format!("deploy {behavior}"),
                revert: revert
                    .clone()
                    .unwrap_or_else(|| Revert::rejected("no address")),
            }),
        }
    }

    /// Deploys an owner contract and registers it under `name`.
    pub fn add_owner(
        &mut self,
        name: &str,
        payload: Vec<u8>,
        state: Vec<i64>,
    ) -> Result<Address, NetworkError> {
        let addr = self.deploy_owner(payload, state)?;
        let key = self.publisher.clone();
        self.call_ok(
            &key,
            addr,
            *sel::OWNER_REGISTER,
            encode(&name),
            "register owner",
        )?;
        self.owners.insert(name.to_string(), addr);
        Ok(addr)
    }

    /// Deploys an owner contract without registering it.
    pub fn deploy_owner(
        &mut self,
        payload: Vec<u8>,
        state: Vec<i64>,
    ) -> Result<Address, NetworkError> {
        let key = self.publisher.clone();
        let init = OwnerInit {
            manager: self.manager,
            payload,
            state,
        };
        Ok(self.deploy_with(&key, OWNER, encode(&init))?.0)
    }

    pub fn add_requestor(&mut self) -> Result<Address, NetworkError> {
        let key = self.client.clone();
        let manager = self.manager;
        let (addr, _) = self.deploy_with(&key, REQUESTOR, encode(&manager))?;
        self.requestors.push(addr);
        Ok(addr)
    }

    /// Deploys `n` requestors, batching the deployments into few blocks.
    pub fn add_requestors(&mut self, n: usize) -> Result<Vec<Address>, NetworkError> {
        let key = self.client.clone();
        let manager = self.manager;
        let mut digests = Vec::with_capacity(n);
        for _ in 0..n {
            let payload = CreatePayload {
                behavior: REQUESTOR.to_string(),
                endowment: 0,
                init: encode(&manager),
            };
            digests.push(self.submit_with_limit(
                &key,
                None,
                Selector([0; 4]),
                encode(&payload),
                DEPLOY_GAS_LIMIT,
            )?);
        }
        let mut out = Vec::with_capacity(n);
        for d in digests {
            let r = self.wait_for(d)?;
            let addr = r.contract_address.ok_or_else(|| NetworkError::Reverted {
                what: "deploy requestor".into(),
                revert: r
                    .revert
                    .clone()
                    .unwrap_or_else(|| Revert::rejected("no address")),
            })?;
            self.requestors.push(addr);
            out.push(addr);
        }
        Ok(out)
    }

    pub fn deploy_probe(&mut self) -> Result<Address, NetworkError> {
        let key = self.client.clone();
        Ok(self.deploy_with(&key, PROBE, vec![])?.0)
    }

    /// Deploys a fresh center bound to this network's manager.
    pub fn deploy_center(&mut self) -> Result<Address, NetworkError> {
        let key = self.admin.clone();
        let manager = self.manager;
        Ok(self.deploy_with(&key, CENTER, encode(&manager))?.0)
    }

    pub fn submit_request(
        &mut self,
        requestor: Address,
        name: &str,
    ) -> Result<Digest32, NetworkError> {
        let key = self.client.clone();
        self.submit(&key, requestor, *sel::REQUEST, encode(&name))
    }

    pub fn request(&mut self, requestor: Address, name: &str) -> Result<Receipt, NetworkError> {
        let d = self.submit_request(requestor, name)?;
        self.wait_for(d)
    }

    pub fn request_outcome(receipt: &Receipt) -> Option<RequestOutcome> {
        receipt.decode_output().ok()
    }

    pub fn request_direct(
        &mut self,
        requestor: Address,
        owner: Address,
    ) -> Result<Receipt, NetworkError> {
        let key = self.client.clone();
        self.transact(
            &key,
            requestor,
            *sel::REQUESTOR_REQUEST_DIRECT,
            encode(&owner),
        )
    }

    pub fn subscribe(&mut self, requestor: Address, name: &str) -> Result<Receipt, NetworkError> {
        let key = self.client.clone();
        self.transact(&key, requestor, *sel::SUBSCRIBE, encode(&name))
    }

    pub fn unsubscribe(&mut self, requestor: Address, name: &str) -> Result<Receipt, NetworkError> {
        let key = self.client.clone();
        self.transact(&key, requestor, *sel::UNSUBSCRIBE, encode(&name))
    }

    pub fn set_fail_notifications(
        &mut self,
        requestor: Address,
        fail: bool,
    ) -> Result<Receipt, NetworkError> {
        let key = self.client.clone();
        self.call_ok(
            &key,
            requestor,
            *sel::REQUESTOR_SET_FAIL,
            encode(&fail),
            "set fail flag",
        )
    }

    pub fn set_state(&mut self, name: &str, state: Vec<i64>) -> Result<Receipt, NetworkError> {
        let owner = self.owner(name).expect("known owner");
        let key = self.publisher.clone();
        self.transact(&key, owner, *sel::OWNER_SET_STATE, encode(&state))
    }

    pub fn set_payload(&mut self, name: &str, payload: Vec<u8>) -> Result<Receipt, NetworkError> {
        let owner = self.owner(name).expect("known owner");
        let key = self.publisher.clone();
        self.transact(&key, owner, *sel::OWNER_SET_PAYLOAD, encode(&payload))
    }

    /// Signature of committee member `member` approving `action` as `id`.
    pub fn sign_approval(
        &self,
        member: usize,
        id: u64,
        action: &Action,
    ) -> crate::crypto::Signature {
        self.committee[member].sign(&approval_message(&self.manager, id, action))
    }

    fn log_governance(&mut self, r: &Receipt, id: Option<u64>, action: &str, member: Address) {
        let outcome = match &r.revert {
            None => "ok".to_string(),
            Some(e) => format!("rejected: {e}"),
        };
        self.governance_log.push(GovernanceRecord {
            block: r.block_height,
            proposal_id: id,
            action: action.to_string(),
            member,
            outcome,
        });
    }

    /// Member `member` proposes `action`; returns the receipt and the id.
    pub fn propose(
        &mut self,
        member: usize,
        action: Action,
    ) -> Result<(Receipt, Option<u64>), NetworkError> {
        let id = self.manager_state().proposals.next_id();
        let sig = self.sign_approval(member, id, &action);
        let key = self.committee[member].clone();
        let label = format!("propose:{}", action.label());
        let r = self.transact(&key, self.manager, *sel::PROPOSE, encode(&(action, sig)))?;
        let assigned = r.decode_output::<u64>().ok();
        self.log_governance(&r, assigned.or(Some(id)), &label, key.address());
        Ok((r, assigned))
    }

    pub fn approve(&mut self, member: usize, id: u64) -> Result<Receipt, NetworkError> {
        let action = self
            .manager_state()
            .proposals
            .get(id)
            .map(|p| p.action.clone())
            .unwrap_or(Action::Deregister(String::new()));
        let sig = self.sign_approval(member, id, &action);
        let key = self.committee[member].clone();
        self.approve_with(&key, id, key.address(), sig)
    }

    /// Submits an approval claiming to be from `member`, signed however the
    /// caller chose.
    pub fn approve_with(
        &mut self,
        sender: &KeyPair,
        id: u64,
        member: Address,
        sig: crate::crypto::Signature,
    ) -> Result<Receipt, NetworkError> {
        let r = self.transact(
            sender,
            self.manager,
            *sel::APPROVE,
            encode(&(id, member, sig)),
        )?;
        self.log_governance(&r, Some(id), "approve", member);
        Ok(r)
    }

    pub fn execute(&mut self, member: usize, id: u64) -> Result<Receipt, NetworkError> {
        let key = self.committee[member].clone();
        let label = self
            .manager_state()
            .proposals
            .get(id)
            .map_or("execute", |p| match p.action.label() {
                "update" => "execute:update",
                "register" => "execute:register",
                "deregister" => "execute:deregister",
                _ => "execute:permission",
            });
        let r = self.transact(&key, self.manager, *sel::EXECUTE, encode(&id))?;
        self.log_governance(&r, Some(id), label, key.address());
        Ok(r)
    }

    /// Proposes `action` as member 0, gathers approvals from the next
    /// members up to the threshold, and executes. Returns the execution
    /// receipt.
    pub fn govern(&mut self, action: Action) -> Result<Receipt, NetworkError> {
        let (r, id) = self.propose(0, action)?;
        let id = id.ok_or_else(|| NetworkError::Reverted {
            what: "propose".into(),
            revert: r
                .revert
                .clone()
                .unwrap_or_else(|| Revert::rejected("no id")),
        })?;
        let threshold = self.manager_state().committee.threshold();
        for m in 1..threshold {
            self.approve(m, id)?;
        }
        self.execute(0, id)
    }

    pub fn audit_csv(&self) -> String {
        let mut buf = Vec::new();
        write_audit_csv(&self.center_state().audit, &mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn pool_csv(&self) -> String {
        let mut buf = Vec::new();
        write_pool_csv(&self.manager_state().pool_log, &mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn cache_csv(&self) -> String {
        let mut buf = Vec::new();
        write_cache_csv(
            self.manager_state().cache.stats(),
            self.ledger.vm().schedule(),
            &mut buf,
        )
        .expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn notifications_csv(&self) -> String {
        let mut buf = Vec::new();
        write_notifications_csv(&self.center_state().notifications, &mut buf)
            .expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn governance_csv(&self) -> String {
        let mut buf = Vec::new();
        write_governance_csv(&self.governance_log, &mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Call traces of every included transaction and block hook, one
    /// header line per receipt followed by its frames.
    pub fn trace_log(&self) -> String {
        let mut out = String::new();
        for block in self.ledger.blocks() {
            let receipts = block
                .transactions
                .iter()
                .filter_map(|d| self.ledger.receipt(d))
                .chain(&block.system_receipts);
            for r in receipts {
                out.push_str(&format!(
                    "# block {} tx {} gas {}\n",
                    block.height, r.tx_digest, r.gas_used
                ));
                out.push_str(&format_trace(&r.trace));
            }
        }
        out
    }

    /// Gas of all block-hook calls so far.
    pub fn system_gas(&self) -> u64 {
        self.ledger
            .blocks()
            .iter()
            .flat_map(|b| &b.system_receipts)
            .map(|r| r.gas_used)
            .sum()
    }
}
