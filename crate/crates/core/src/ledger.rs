//! A single-miner ledger: signed transactions, a fee-ordered mempool, block
//! production on a timed interval, and receipts.
//!
//! Fees follow EIP-1559 semantics: the sender escrows `gasLimit × (baseFee +
//! priorityFee)` up front and pays `gasUsed × (baseFee + priorityFee)` to the
//! miner account; the remainder is refunded. Timestamps are milliseconds.
//!
//! Contracts may register block hooks. Each hook is a fee-free call from
//! [`SYSTEM`] made at the start of every block, before user transactions;
//! pooled forwarding uses this to flush expired windows.
//!
//! # Snapshot format
//!
//! [`Ledger::export_snapshot`] writes pretty JSON with fields in this order:
//! `config`, `height`, `timestamp_ms`, `head`, `total_minted`, `miner`,
//! `accounts` (sorted by address; each `address`, `nonce`, `balance`,
//! `public_key`, `code` with `behavior` and `state`), `hooks`, `mempool`.
//! Balances are decimal strings.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::{
    derive_address, keccak256, keccak256_concat, verify, Address, Digest32, KeyPair, Selector,
    Signature, SignatureScheme,
};
use crate::gas::GasOp;
use crate::message::ProtocolMessage;
use crate::vm::{decode, encode, BlockEnv, Execution, Revert, TraceFrame, Vm, SYSTEM};
use crate::world::{Account, Code, World};

pub const DEFAULT_BLOCK_INTERVAL_MS: u64 = 12_000;
pub const DEFAULT_BLOCK_GAS_LIMIT: u64 = 30_000_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("signature does not verify for sender {0}")]
    BadSignature(Address),
    #[error("unknown sender {0}")]
    UnknownSender(Address),
    #[error("nonce {got} for {sender} is stale (next is {expected})")]
    StaleNonce {
        sender: Address,
        got: u64,
        expected: u64,
    },
    #[error("balance {balance} cannot cover {required}")]
    InsufficientBalance { balance: u128, required: u128 },
    #[error("base fee {offered} below chain base fee {required}")]
    FeeTooLow { offered: u128, required: u128 },
    #[error("gas limit {0} below intrinsic cost")]
    IntrinsicGas(u64),
    #[error("gas limit {limit} exceeds block gas limit {block}")]
    GasLimitTooHigh { limit: u64, block: u64 },
    #[error("block at {now_ms} ms is earlier than {earliest_ms} ms")]
    TooEarly { now_ms: u64, earliest_ms: u64 },
    #[error("transaction {0} not found")]
    NotFound(Digest32),
    #[error("unknown behavior {0}")]
    UnknownBehavior(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
}

/// Block interval model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Jitter {
    /// Every block lands exactly one interval after its parent.
    Fixed,
    /// Each slot's proposer misses with `miss_probability`; a block lands
    /// after 1 to `max_slots` slots.
    SlotMiss {
        miss_probability: f64,
        max_slots: u32,
    },
    /// Interval drawn uniformly from `[interval, max_ms]` at millisecond
    /// resolution.
    Uniform { max_ms: u64 },
}

impl Jitter {
    /// Slot-miss model whose intervals average 13.9 s with 12 s slots.
    pub fn testnet() -> Self {
        Jitter::SlotMiss {
            miss_probability: 0.1375,
            max_slots: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub block_interval_ms: u64,
    pub jitter: Jitter,
    pub block_gas_limit: u64,
    pub base_fee: u128,
    /// Blocks a transaction may wait in the mempool; bounds confirmation
    /// delay together with the longest interval.
    pub queue_depth_bound: u64,
    pub scheme: SignatureScheme,
    pub max_call_depth: u32,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            block_interval_ms: DEFAULT_BLOCK_INTERVAL_MS,
            jitter: Jitter::Fixed,
            block_gas_limit: DEFAULT_BLOCK_GAS_LIMIT,
            base_fee: 7,
            queue_depth_bound: 4,
            scheme: SignatureScheme::Secp256k1,
            max_call_depth: crate::vm::DEFAULT_MAX_DEPTH,
        }
    }
}

impl ChainConfig {
    pub fn max_interval_ms(&self) -> u64 {
        match self.jitter {
            Jitter::Fixed => self.block_interval_ms,
            Jitter::SlotMiss { max_slots, .. } => self.block_interval_ms * max_slots.max(1) as u64,
            Jitter::Uniform { max_ms } => max_ms.max(self.block_interval_ms),
        }
    }

    /// Upper bound on submission-to-inclusion delay.
    pub fn theta_ms(&self) -> u64 {
        self.max_interval_ms() * self.queue_depth_bound
    }
}

/// Samples block intervals from a [`Jitter`] model.
#[derive(Clone, Debug)]
pub struct BlockClock {
    interval_ms: u64,
    jitter: Jitter,
    rng: ChaCha8Rng,
}

impl BlockClock {
    pub fn new(config: &ChainConfig, seed: u64) -> Self {
        BlockClock {
            interval_ms: config.block_interval_ms,
            jitter: config.jitter,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_interval_ms(&mut self) -> u64 {
        match self.jitter {
            Jitter::Fixed => self.interval_ms,
            Jitter::SlotMiss {
                miss_probability,
                max_slots,
            } => {
                let mut slots = 1;
                while slots < max_slots && self.rng.gen_bool(miss_probability) {
                    slots += 1;
                }
                self.interval_ms * slots as u64
            }
            Jitter::Uniform { max_ms } => self
                .rng
                .gen_range(self.interval_ms..=max_ms.max(self.interval_ms)),
        }
    }
}

/// Payload of a contract-creation transaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatePayload {
    pub behavior: String,
    pub endowment: u128,
    pub init: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub nonce: u64,
    /// `None` creates a contract from a [`CreatePayload`] in `args`.
    pub target: Option<Address>,
    pub selector: Selector,
    pub args: Vec<u8>,
    pub gas_limit: u64,
    pub base_fee: u128,
    pub priority_fee: u128,
    pub signature: Signature,
}

#[derive(Serialize)]
struct UnsignedTx<'a> {
    sender: &'a Address,
    nonce: u64,
    target: &'a Option<Address>,
    selector: &'a Selector,
    args: &'a [u8],
    gas_limit: u64,
    base_fee: u128,
    priority_fee: u128,
}

impl Transaction {
    #[allow(clippy::too_many_arguments)]
    pub fn signed(
        key: &KeyPair,
        nonce: u64,
        target: Option<Address>,
        selector: Selector,
        args: Vec<u8>,
        gas_limit: u64,
        base_fee: u128,
        priority_fee: u128,
    ) -> Self {
        let mut tx = Transaction {
            sender: key.address(),
            nonce,
            target,
            selector,
            args,
            gas_limit,
            base_fee,
            priority_fee,
            signature: Signature(Vec::new()),
        };
        tx.signature = key.sign(&tx.signing_bytes());
        tx
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        encode(&UnsignedTx {
            sender: &self.sender,
            nonce: self.nonce,
            target: &self.target,
            selector: &self.selector,
            args: &self.args,
            gas_limit: self.gas_limit,
            base_fee: self.base_fee,
            priority_fee: self.priority_fee,
        })
    }

    pub fn digest(&self) -> Digest32 {
        keccak256_concat([&self.signing_bytes()[..], &self.signature.0[..]])
    }

    pub fn gas_price(&self) -> u128 {
        self.base_fee + self.priority_fee
    }

    pub fn max_fee(&self) -> u128 {
        self.gas_limit as u128 * self.gas_price()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxStatus {
    Success,
    Reverted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_digest: Digest32,
    pub sender: Address,
    pub block_height: u64,
    pub gas_used: u64,
    pub status: TxStatus,
    pub fee_paid: u128,
    pub output: Vec<u8>,
    pub revert: Option<Revert>,
    pub contract_address: Option<Address>,
    pub emitted_messages: Vec<ProtocolMessage>,
    pub trace: Vec<TraceFrame>,
    pub submitted_ms: u64,
    pub included_ms: u64,
}

impl Receipt {
    pub fn succeeded(&self) -> bool {
        self.status == TxStatus::Success
    }

    pub fn decode_output<T: serde::de::DeserializeOwned>(&self) -> Result<T, Revert> {
        decode(&self.output)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub timestamp_ms: u64,
    pub parent_digest: Digest32,
    pub transactions: Vec<Digest32>,
    pub state_root: Digest32,
    /// Receipts of the block hooks run before user transactions.
    pub system_receipts: Vec<Receipt>,
}

impl Block {
    pub fn digest(&self) -> Digest32 {
        let mut buf = Vec::new();
        buf.extend_from_slice(&self.height.to_be_bytes());
        buf.extend_from_slice(&self.timestamp_ms.to_be_bytes());
        buf.extend_from_slice(self.parent_digest.as_bytes());
        for tx in &self.transactions {
            buf.extend_from_slice(tx.as_bytes());
        }
        buf.extend_from_slice(self.state_root.as_bytes());
        keccak256(&buf)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHook {
    pub target: Address,
    pub selector: Selector,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Pending {
    tx: Transaction,
    seq: u64,
    submitted_ms: u64,
}

#[derive(Clone, Debug)]
pub struct Ledger {
    config: ChainConfig,
    vm: Vm,
    world: World,
    height: u64,
    timestamp_ms: u64,
    head: Digest32,
    miner: Address,
    total_minted: u128,
    mempool: Vec<Pending>,
    next_seq: u64,
    hooks: Vec<BlockHook>,
    blocks: Vec<Block>,
    receipts: BTreeMap<Digest32, Receipt>,
    dropped: BTreeSet<Digest32>,
}

impl Ledger {
    pub fn new(config: ChainConfig, vm: Vm) -> Self {
        let miner = derive_address(b"defeed/miner").expect("non-empty");
        let mut world = World::new();
        world.entry(miner);
        let genesis = Block {
            height: 0,
            timestamp_ms: 0,
            parent_digest: Digest32::ZERO,
            transactions: vec![],
            state_root: world.state_root(),
            system_receipts: vec![],
        };
        let head = genesis.digest();
        Ledger {
            config,
            vm,
            world,
            height: 0,
            timestamp_ms: 0,
            head,
            miner,
            total_minted: 0,
            mempool: Vec::new(),
            next_seq: 0,
            hooks: Vec::new(),
            blocks: vec![genesis],
            receipts: BTreeMap::new(),
            dropped: BTreeSet::new(),
        }
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn vm(&self) -> &Vm {
        &self.vm
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn timestamp_ms(&self) -> u64 {
        self.timestamp_ms
    }

    pub fn head(&self) -> Digest32 {
        self.head
    }

    pub fn miner(&self) -> Address {
        self.miner
    }

    pub fn total_minted(&self) -> u128 {
        self.total_minted
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn state_root(&self) -> Digest32 {
        self.world.state_root()
    }

    pub fn pending_count(&self) -> usize {
        self.mempool.len()
    }

    pub fn receipt(&self, digest: &Digest32) -> Option<&Receipt> {
        self.receipts.get(digest)
    }

    pub fn was_dropped(&self, digest: &Digest32) -> bool {
        self.dropped.contains(digest)
    }

    /// Registers an externally owned account for `public_key` and credits it.
    pub fn open_account(&mut self, public_key: &[u8], balance: u128) -> Address {
        let addr = derive_address(public_key).expect("public keys are non-empty");
        let acct = self.world.entry(addr);
        acct.public_key = Some(public_key.to_vec());
        acct.balance += balance;
        self.total_minted += balance;
        addr
    }

    pub fn balance(&self, addr: &Address) -> u128 {
        self.world.get(addr).map_or(0, |a| a.balance)
    }

    pub fn nonce(&self, addr: &Address) -> u64 {
        self.world.get(addr).map_or(0, |a| a.nonce)
    }

    /// Next nonce to sign with, counting transactions already pending.
    pub fn next_nonce(&self, addr: &Address) -> u64 {
        let pending = self
            .mempool
            .iter()
            .filter(|p| p.tx.sender == *addr)
            .map(|p| p.tx.nonce + 1)
            .max();
        pending.unwrap_or(0).max(self.nonce(addr))
    }

    pub fn add_hook(&mut self, hook: BlockHook) {
        if !self.hooks.contains(&hook) {
            self.hooks.push(hook);
        }
    }

    pub fn submit(&mut self, tx: Transaction, now_ms: u64) -> Result<Digest32, LedgerError> {
        let account = self
            .world
            .get(&tx.sender)
            .ok_or(LedgerError::UnknownSender(tx.sender))?;
        let public = account
            .public_key
            .as_ref()
            .ok_or(LedgerError::UnknownSender(tx.sender))?;
        if !verify(
            self.config.scheme,
            public,
            &tx.signing_bytes(),
            &tx.signature,
        ) {
            return Err(LedgerError::BadSignature(tx.sender));
        }
        let duplicate = self
            .mempool
            .iter()
            .any(|p| p.tx.sender == tx.sender && p.tx.nonce == tx.nonce);
        if tx.nonce < account.nonce || duplicate {
            return Err(LedgerError::StaleNonce {
                sender: tx.sender,
                got: tx.nonce,
                expected: account.nonce,
            });
        }
        if tx.base_fee < self.config.base_fee {
            return Err(LedgerError::FeeTooLow {
                offered: tx.base_fee,
                required: self.config.base_fee,
            });
        }
        if tx.gas_limit < self.vm.schedule().cost(GasOp::TxIntrinsic) {
            return Err(LedgerError::IntrinsicGas(tx.gas_limit));
        }
        if tx.gas_limit > self.config.block_gas_limit {
            return Err(LedgerError::GasLimitTooHigh {
                limit: tx.gas_limit,
                block: self.config.block_gas_limit,
            });
        }
        if account.balance < tx.max_fee() {
            return Err(LedgerError::InsufficientBalance {
                balance: account.balance,
                required: tx.max_fee(),
            });
        }
        let digest = tx.digest();
        self.mempool.push(Pending {
            tx,
            seq: self.next_seq,
            submitted_ms: now_ms,
        });
        self.next_seq += 1;
        Ok(digest)
    }

    pub fn earliest_next_block_ms(&self) -> u64 {
        self.timestamp_ms + self.config.block_interval_ms
    }

    /// Seals a block at `now_ms`: runs hooks, then pending transactions in
    /// (priority fee desc, arrival) order subject to nonces and the block
    /// gas limit.
    pub fn mine_block(&mut self, now_ms: u64) -> Result<&Block, LedgerError> {
        let earliest = self.earliest_next_block_ms();
        if self.height > 0 && now_ms < earliest {
            return Err(LedgerError::TooEarly {
                now_ms,
                earliest_ms: earliest,
            });
        }
        let height = self.height + 1;
        let env = BlockEnv {
            height,
            timestamp_ms: now_ms,
        };

        let mut system_receipts = Vec::new();
        for hook in self.hooks.clone() {
            system_receipts.push(self.run_system(&hook, env));
        }

        let mut queue = std::mem::take(&mut self.mempool);
        queue.sort_by(|a, b| {
            b.tx.priority_fee
                .cmp(&a.tx.priority_fee)
                .then(a.seq.cmp(&b.seq))
        });
        let mut included = Vec::new();
        let mut gas_reserved = 0u64;
        loop {
            let mut progress = false;
            let mut rest = Vec::with_capacity(queue.len());
            for p in queue {
                let expected = self.nonce(&p.tx.sender);
                if p.tx.nonce < expected {
                    self.dropped.insert(p.tx.digest());
                    progress = true;
                    continue;
                }
                if p.tx.nonce > expected
                    || gas_reserved + p.tx.gas_limit > self.config.block_gas_limit
                {
                    rest.push(p);
                    continue;
                }
                if self.balance(&p.tx.sender) < p.tx.max_fee() {
                    self.dropped.insert(p.tx.digest());
                    progress = true;
                    continue;
                }
                gas_reserved += p.tx.gas_limit;
                let receipt = self.execute(&p, env);
                gas_reserved -= p.tx.gas_limit - receipt.gas_used;
                included.push(receipt.tx_digest);
                self.receipts.insert(receipt.tx_digest, receipt);
                progress = true;
            }
            queue = rest;
            if !progress || queue.is_empty() {
                break;
            }
        }
        queue.sort_by_key(|p| p.seq);
        self.mempool = queue;

        let block = Block {
            height,
            timestamp_ms: now_ms,
            parent_digest: self.head,
            transactions: included,
            state_root: self.world.state_root(),
            system_receipts,
        };
        self.head = block.digest();
        self.height = height;
        self.timestamp_ms = now_ms;
        self.blocks.push(block);
        Ok(self.blocks.last().expect("just pushed"))
    }

    fn run_system(&mut self, hook: &BlockHook, env: BlockEnv) -> Receipt {
        let mut exec = Execution {
            world: std::mem::take(&mut self.world),
            env,
            trace: vec![],
            messages: vec![],
        };
        let result = self.vm.call(
            &mut exec,
            SYSTEM,
            hook.target,
            hook.selector,
            &encode(&env.height),
            self.config.block_gas_limit,
        );
        self.world = exec.world;
        let digest = keccak256_concat([
            &env.height.to_be_bytes()[..],
            hook.target.as_bytes(),
            &hook.selector.0[..],
        ]);
        let (status, output, revert) = match result.output {
            Ok(out) => (TxStatus::Success, out, None),
            Err(r) => (TxStatus::Reverted, vec![], Some(r)),
        };
        Receipt {
            tx_digest: digest,
            sender: SYSTEM,
            block_height: env.height,
            gas_used: result.gas_used,
            status,
            fee_paid: 0,
            output,
            revert,
            contract_address: None,
            emitted_messages: exec.messages,
            trace: exec.trace,
            submitted_ms: env.timestamp_ms,
            included_ms: env.timestamp_ms,
        }
    }

    fn execute(&mut self, p: &Pending, env: BlockEnv) -> Receipt {
        let tx = &p.tx;
        let price = tx.gas_price();
        let intrinsic = self.vm.schedule().cost(GasOp::TxIntrinsic);
        {
            let sender = self.world.entry(tx.sender);
            sender.balance -= tx.max_fee();
            sender.nonce += 1;
        }
        let budget = tx.gas_limit - intrinsic;
        let mut exec = Execution {
            world: std::mem::take(&mut self.world),
            env,
            trace: vec![],
            messages: vec![],
        };
        let (output, exec_gas, contract_address) = match tx.target {
            Some(target) => {
                let r = self
                    .vm
                    .call(&mut exec, tx.sender, target, tx.selector, &tx.args, budget);
                (r.output, r.gas_used, None)
            }
            None => {
                let addr = contract_address(&tx.sender, tx.nonce);
                let (out, gas) = self.create(&mut exec, tx, addr, budget);
                let created = out.is_ok().then_some(addr);
                (out, gas, created)
            }
        };
        self.world = exec.world;
        let gas_used = intrinsic + exec_gas;
        let fee = gas_used as u128 * price;
        self.world.entry(tx.sender).balance += tx.max_fee() - fee;
        self.world.entry(self.miner).balance += fee;
        let (status, output, revert) = match output {
            Ok(out) => (TxStatus::Success, out, None),
            Err(r) => (TxStatus::Reverted, vec![], Some(r)),
        };
        Receipt {
            tx_digest: tx.digest(),
            sender: tx.sender,
            block_height: env.height,
            gas_used,
            status,
            fee_paid: fee,
            output,
            revert,
            contract_address,
            emitted_messages: exec.messages,
            trace: exec.trace,
            submitted_ms: p.submitted_ms,
            included_ms: env.timestamp_ms,
        }
    }

    fn create(
        &self,
        exec: &mut Execution,
        tx: &Transaction,
        addr: Address,
        budget: u64,
    ) -> (Result<Vec<u8>, Revert>, u64) {
        let payload: CreatePayload = match decode(&tx.args) {
            Ok(p) => p,
            Err(e) => return (Err(e), 0),
        };
        let Some(behavior) = self.vm.behavior(&payload.behavior).cloned() else {
            return (
                Err(Revert::rejected(format!(
                    "unknown behavior {}",
                    payload.behavior
                ))),
                0,
            );
        };
        let cost = self.vm.schedule().cost(behavior.deploy_op());
        if cost > budget {
            return (Err(Revert::OutOfGas), budget);
        }
        if exec.world.get(&tx.sender).map_or(0, |a| a.balance) < payload.endowment {
            return (Err(Revert::rejected("endowment exceeds balance")), cost);
        }
        if exec.world.get(&addr).is_some_and(|a| a.is_contract()) {
            return (Err(Revert::rejected("address already in use")), cost);
        }
        let state = match behavior.init(tx.sender, &payload.init) {
            Ok(s) => s,
            Err(e) => return (Err(e), cost),
        };
        exec.world.entry(tx.sender).balance -= payload.endowment;
        let acct = exec.world.entry(addr);
        acct.balance += payload.endowment;
        acct.code = Some(Code {
            behavior: payload.behavior,
            state,
        });
        (Ok(addr.as_bytes().to_vec()), cost)
    }

    /// Inclusion time minus submission time.
    pub fn confirmation_delay_ms(&self, digest: &Digest32) -> Result<u64, LedgerError> {
        self.receipts
            .get(digest)
            .map(|r| r.included_ms - r.submitted_ms)
            .ok_or(LedgerError::NotFound(*digest))
    }

    /// Runs a read-only call against current state without committing it.
    pub fn view(
        &self,
        caller: Address,
        target: Address,
        selector: Selector,
        args: &[u8],
    ) -> Result<Vec<u8>, Revert> {
        let mut exec = Execution {
            world: self.world.clone(),
            env: BlockEnv {
                height: self.height,
                timestamp_ms: self.timestamp_ms,
            },
            trace: vec![],
            messages: vec![],
        };
        self.vm
            .call(
                &mut exec,
                caller,
                target,
                selector,
                args,
                self.config.block_gas_limit,
            )
            .output
    }

    pub fn export_snapshot(&self) -> String {
        let accounts = self
            .world
            .accounts()
            .map(|(addr, a)| SnapshotAccount {
                address: *addr,
                nonce: a.nonce,
                balance: a.balance.to_string(),
                public_key: a.public_key.as_ref().map(hex::encode),
                code: a.code.as_ref().map(|c| SnapshotCode {
                    behavior: c.behavior.clone(),
                    state: c.state.to_json(),
                }),
            })
            .collect();
        let snap = Snapshot {
            config: self.config.clone(),
            height: self.height,
            timestamp_ms: self.timestamp_ms,
            head: self.head,
            total_minted: self.total_minted.to_string(),
            miner: self.miner,
            accounts,
            hooks: self.hooks.clone(),
            mempool: self.mempool.clone(),
        };
        serde_json::to_string_pretty(&snap).expect("snapshot serializes")
    }

    /// Rebuilds a ledger head from a snapshot. Block history and receipts
    /// are not part of the snapshot.
    pub fn import_snapshot(text: &str, vm: Vm) -> Result<Self, LedgerError> {
        let snap: Snapshot =
            serde_json::from_str(text).map_err(|e| LedgerError::Snapshot(e.to_string()))?;
        let parse_u128 = |s: &str| {
            s.parse::<u128>()
                .map_err(|e| LedgerError::Snapshot(format!("bad amount {s}: {e}")))
        };
        let mut world = World::new();
        for a in snap.accounts {
            let code = match a.code {
                None => None,
                Some(c) => {
                    let behavior = vm
                        .behavior(&c.behavior)
                        .ok_or_else(|| LedgerError::UnknownBehavior(c.behavior.clone()))?;
                    let state = behavior
                        .decode_state(c.state)
                        .map_err(LedgerError::Snapshot)?;
                    Some(Code {
                        behavior: c.behavior,
                        state,
                    })
                }
            };
            let public_key = a
                .public_key
                .map(|h| hex::decode(h).map_err(|e| LedgerError::Snapshot(e.to_string())))
                .transpose()?;
            world.insert(
                a.address,
                Account {
                    nonce: a.nonce,
                    balance: parse_u128(&a.balance)?,
                    public_key,
                    code,
                },
            );
        }
        let next_seq = snap.mempool.iter().map(|p| p.seq + 1).max().unwrap_or(0);
        let tip = Block {
            height: snap.height,
            timestamp_ms: snap.timestamp_ms,
            parent_digest: Digest32::ZERO,
            transactions: vec![],
            state_root: world.state_root(),
            system_receipts: vec![],
        };
        Ok(Ledger {
            config: snap.config,
            vm,
            world,
            height: snap.height,
            timestamp_ms: snap.timestamp_ms,
            head: snap.head,
            miner: snap.miner,
            total_minted: parse_u128(&snap.total_minted)?,
            mempool: snap.mempool,
            next_seq,
            hooks: snap.hooks,
            blocks: vec![tip],
            receipts: BTreeMap::new(),
            dropped: BTreeSet::new(),
        })
    }
}

/// Address of a contract created by `sender` with `nonce`.
pub fn contract_address(sender: &Address, nonce: u64) -> Address {
    let d = keccak256_concat([&sender.as_bytes()[..], &nonce.to_be_bytes()[..]]);
    let mut out = [0u8; 20];
    out.copy_from_slice(&d.0[12..]);
    Address(out)
}

#[derive(Serialize, Deserialize)]
struct SnapshotCode {
    behavior: String,
    state: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct SnapshotAccount {
    address: Address,
    nonce: u64,
    balance: String,
    public_key: Option<String>,
    code: Option<SnapshotCode>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    config: ChainConfig,
    height: u64,
    timestamp_ms: u64,
    head: Digest32,
    total_minted: String,
    miner: Address,
    accounts: Vec<SnapshotAccount>,
    hooks: Vec<BlockHook>,
    mempool: Vec<Pending>,
}
