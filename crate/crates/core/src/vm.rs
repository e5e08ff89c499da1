//! Contract execution: behaviors registered under identifiers, metered call
//! frames, and the call trace.
//!
//! A contract is a host-side state machine (a [`Behavior`]) plus typed
//! storage kept in the [`World`]. Each frame snapshots the world on entry and
//! restores it if the frame reverts, so a failed call leaves no trace in
//! storage or balances. Nested calls receive all but 1/64 of the caller's
//! remaining gas; a frame's gas is its own charges plus its children's.
//!
//! The trace log is one line per frame, in call order:
//!
//! ```text
//! <depth> <caller> <callee> <selector> <gasUsed> <ok|reverted:reason>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::crypto::{Address, Selector};
use crate::gas::{GasOp, GasSchedule};
use crate::message::ProtocolMessage;
use crate::world::{ContractState, World};

/// Caller used for frames the ledger runs at block boundaries.
pub const SYSTEM: Address = Address::ZERO;

pub const DEFAULT_MAX_DEPTH: u32 = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum Revert {
    #[error("out of gas")]
    OutOfGas,
    #[error("access denied: caller {caller} is not {expected}")]
    AccessDenied { expected: Address, caller: Address },
    #[error("unknown selector {0}")]
    UnknownSelector(Selector),
    #[error("no contract at {0}")]
    NoContract(Address),
    #[error("call depth limit {0} exceeded")]
    MaxDepth(u32),
    #[error("contract is inactive")]
    Inactive,
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error("{0}")]
    Rejected(String),
}

impl Revert {
    pub fn rejected(msg: impl Into<String>) -> Self {
        Revert::Rejected(msg.into())
    }
}

pub fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    bincode::serialize(value).expect("argument encodes")
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, Revert> {
    bincode::deserialize(bytes).map_err(|e| Revert::BadArgs(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockEnv {
    pub height: u64,
    pub timestamp_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub depth: u32,
    pub caller: Address,
    pub callee: Address,
    pub selector: Selector,
    /// Own charges plus every child frame.
    pub gas_used: u64,
    pub own_gas: u64,
    pub revert: Option<Revert>,
}

impl TraceFrame {
    pub fn succeeded(&self) -> bool {
        self.revert.is_none()
    }
}

pub fn format_trace(frames: &[TraceFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        let status = match &f.revert {
            None => "ok".to_string(),
            Some(r) => format!("reverted:{}", r.to_string().replace(' ', "_")),
        };
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            f.depth, f.caller, f.callee, f.selector, f.gas_used, status
        );
    }
    out
}

pub trait Behavior: Send + Sync {
    fn id(&self) -> &'static str;
    fn deploy_op(&self) -> GasOp;
    fn init(&self, deployer: Address, args: &[u8]) -> Result<Box<dyn ContractState>, Revert>;
    fn decode_state(&self, value: serde_json::Value) -> Result<Box<dyn ContractState>, String>;
    fn dispatch(
        &self,
        ctx: &mut CallContext<'_>,
        selector: Selector,
        args: &[u8],
    ) -> Result<Vec<u8>, Revert>;
}

/// Shared mutable context threaded through a call tree.
pub struct Execution {
    pub world: World,
    pub env: BlockEnv,
    pub trace: Vec<TraceFrame>,
    pub messages: Vec<ProtocolMessage>,
}

pub struct CallResult {
    pub output: Result<Vec<u8>, Revert>,
    pub gas_used: u64,
}

#[derive(Clone)]
pub struct Vm {
    behaviors: BTreeMap<String, Arc<dyn Behavior>>,
    schedule: GasSchedule,
    max_depth: u32,
}

impl std::fmt::Debug for Vm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Vm")
            .field("behaviors", &self.behaviors.keys().collect::<Vec<_>>())
            .field("max_depth", &self.max_depth)
            .finish()
    }
}

impl Vm {
    pub fn new(schedule: GasSchedule) -> Self {
        Vm {
            behaviors: BTreeMap::new(),
            schedule,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    pub fn with_max_depth(mut self, depth: u32) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn register(&mut self, behavior: Arc<dyn Behavior>) {
        self.behaviors.insert(behavior.id().to_string(), behavior);
    }

    pub fn behavior(&self, id: &str) -> Option<&Arc<dyn Behavior>> {
        self.behaviors.get(id)
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.schedule
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// Runs a top-level frame from `caller` into `callee`.
    pub fn call(
        &self,
        exec: &mut Execution,
        caller: Address,
        callee: Address,
        selector: Selector,
        args: &[u8],
        gas_budget: u64,
    ) -> CallResult {
        let (output, gas_used) = self.frame(exec, caller, callee, selector, args, gas_budget, 1);
        CallResult { output, gas_used }
    }

    #[allow(clippy::too_many_arguments)]
    fn frame(
        &self,
        exec: &mut Execution,
        caller: Address,
        callee: Address,
        selector: Selector,
        args: &[u8],
        budget: u64,
        depth: u32,
    ) -> (Result<Vec<u8>, Revert>, u64) {
        let reject = |exec: &mut Execution, revert: Revert| {
            exec.trace.push(TraceFrame {
                depth,
                caller,
                callee,
                selector,
                gas_used: 0,
                own_gas: 0,
                revert: Some(revert.clone()),
            });
            (Err(revert), 0)
        };
        if depth > self.max_depth {
            return reject(exec, Revert::MaxDepth(self.max_depth));
        }
        let behavior = exec
            .world
            .behavior_of(&callee)
            .and_then(|id| self.behaviors.get(id))
            .cloned();
        let Some(behavior) = behavior else {
            return reject(exec, Revert::NoContract(callee));
        };

        let snapshot = exec.world.clone();
        let mark = exec.messages.len();
        let slot = exec.trace.len();
        exec.trace.push(TraceFrame {
            depth,
            caller,
            callee,
            selector,
            gas_used: 0,
            own_gas: 0,
            revert: None,
        });

        let mut ctx = CallContext {
            vm: self,
            exec,
            caller,
            this: callee,
            selector,
            depth,
            gas_limit: budget,
            gas_used: 0,
            own_gas: 0,
        };
        let result = behavior.dispatch(&mut ctx, selector, args);
        let (mut gas_used, own_gas) = (ctx.gas_used, ctx.own_gas);
        if matches!(result, Err(Revert::OutOfGas)) {
            gas_used = budget;
        }
        if result.is_err() {
            exec.world = snapshot;
            exec.messages.truncate(mark);
        }
        let frame = &mut exec.trace[slot];
        frame.gas_used = gas_used;
        frame.own_gas = own_gas;
        frame.revert = result.as_ref().err().cloned();
        (result, gas_used)
    }
}

/// Handle a behavior uses to meter gas, read its storage and make calls.
pub struct CallContext<'a> {
    vm: &'a Vm,
    exec: &'a mut Execution,
    caller: Address,
    this: Address,
    selector: Selector,
    depth: u32,
    gas_limit: u64,
    gas_used: u64,
    own_gas: u64,
}

impl<'a> CallContext<'a> {
    pub fn caller(&self) -> Address {
        self.caller
    }

    pub fn this(&self) -> Address {
        self.this
    }

    pub fn selector(&self) -> Selector {
        self.selector
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn env(&self) -> BlockEnv {
        self.exec.env
    }

    pub fn block_height(&self) -> u64 {
        self.exec.env.height
    }

    pub fn gas_used(&self) -> u64 {
        self.gas_used
    }

    pub fn gas_remaining(&self) -> u64 {
        self.gas_limit - self.gas_used
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.vm.schedule
    }

    pub fn charge(&mut self, op: GasOp) -> Result<(), Revert> {
        self.charge_gas(self.vm.schedule.cost(op))
    }

    pub fn charge_n(&mut self, op: GasOp, times: u64) -> Result<(), Revert> {
        self.charge_gas(self.vm.schedule.cost(op).saturating_mul(times))
    }

    fn charge_gas(&mut self, gas: u64) -> Result<(), Revert> {
        if gas > self.gas_remaining() {
            return Err(Revert::OutOfGas);
        }
        self.gas_used += gas;
        self.own_gas += gas;
        Ok(())
    }

    /// Passes iff the immediate caller is `allowed`.
    pub fn access_only(&self, allowed: Address) -> Result<(), Revert> {
        if self.caller == allowed {
            Ok(())
        } else {
            Err(Revert::AccessDenied {
                expected: allowed,
                caller: self.caller,
            })
        }
    }

    pub fn state<T: 'static>(&self) -> Result<&T, Revert> {
        self.exec
            .world
            .contract_state::<T>(&self.this)
            .ok_or_else(|| Revert::rejected("storage type mismatch"))
    }

    pub fn state_mut<T: 'static>(&mut self) -> Result<&mut T, Revert> {
        self.exec
            .world
            .contract_state_mut::<T>(&self.this)
            .ok_or_else(|| Revert::rejected("storage type mismatch"))
    }

    /// Behavior identifier of the code at `addr`, if it is a contract.
    pub fn code_of(&self, addr: &Address) -> Option<&str> {
        self.exec.world.behavior_of(addr)
    }

    pub fn emit(&mut self, msg: ProtocolMessage) {
        self.exec.messages.push(msg);
    }

    pub fn call(
        &mut self,
        callee: Address,
        selector: Selector,
        args: &[u8],
    ) -> Result<Vec<u8>, Revert> {
        let remaining = self.gas_remaining();
        let budget = remaining - remaining / 64;
        let (result, used) = self.vm.frame(
            self.exec,
            self.this,
            callee,
            selector,
            args,
            budget,
            self.depth + 1,
        );
        self.gas_used += used;
        result
    }

    /// Like [`call`](Self::call) with argument encoding and return decoding.
    pub fn call_typed<A: Serialize, R: DeserializeOwned>(
        &mut self,
        callee: Address,
        selector: Selector,
        args: &A,
    ) -> Result<R, Revert> {
        let out = self.call(callee, selector, &encode(args))?;
        decode(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::function_selector;
    use crate::world::Code;

    #[derive(Clone, Debug, Serialize, Deserialize, Default)]
    struct Cell {
        value: u64,
    }

    /// Test behavior: `set(u64)` stores, `relay(addr, u64)` calls another
    /// cell then optionally fails, `loop(addr)` recurses through `addr`.
    struct CellBehavior;

    fn sel(s: &str) -> Selector {
        function_selector(s).unwrap()
    }

    impl Behavior for CellBehavior {
        fn id(&self) -> &'static str {
            "test.cell"
        }
        fn deploy_op(&self) -> GasOp {
            GasOp::DeployProbe
        }
        fn init(&self, _: Address, _: &[u8]) -> Result<Box<dyn ContractState>, Revert> {
            Ok(Box::new(Cell::default()))
        }
        fn decode_state(&self, v: serde_json::Value) -> Result<Box<dyn ContractState>, String> {
            serde_json::from_value::<Cell>(v)
                .map(|c| Box::new(c) as Box<dyn ContractState>)
                .map_err(|e| e.to_string())
        }
        fn dispatch(
            &self,
            ctx: &mut CallContext<'_>,
            selector: Selector,
            args: &[u8],
        ) -> Result<Vec<u8>, Revert> {
            ctx.charge(GasOp::ProbeCall)?;
            if selector == sel("set(uint64)") {
                let v: u64 = decode(args)?;
                ctx.state_mut::<Cell>()?.value = v;
                Ok(vec![])
            } else if selector == sel("relay(address,uint64,bool)") {
                let (to, v, fail): (Address, u64, bool) = decode(args)?;
                ctx.state_mut::<Cell>()?.value = v;
                let _ = ctx.call(to, sel("set(uint64)"), &encode(&v));
                if fail {
                    return Err(Revert::rejected("relay failed"));
                }
                Ok(vec![])
            } else if selector == sel("loop(address)") {
                let to: Address = decode(args)?;
                ctx.call(to, sel("loop(address)"), &encode(&ctx.this()))
            } else if selector == sel("guarded(address)") {
                let allowed: Address = decode(args)?;
                ctx.access_only(allowed)?;
                Ok(vec![1])
            } else {
                Err(Revert::UnknownSelector(selector))
            }
        }
    }

    fn setup() -> (Vm, Execution, Address, Address) {
        let mut vm = Vm::new(GasSchedule::default());
        vm.register(Arc::new(CellBehavior));
        let mut world = World::new();
        let a = Address([0xa; 20]);
        let b = Address([0xb; 20]);
        for addr in [a, b] {
            world.entry(addr).code = Some(Code {
                behavior: "test.cell".into(),
                state: Box::new(Cell::default()),
            });
        }
        let exec = Execution {
            world,
            env: BlockEnv::default(),
            trace: vec![],
            messages: vec![],
        };
        (vm, exec, a, b)
    }

    fn cell(exec: &Execution, a: Address) -> u64 {
        exec.world.contract_state::<Cell>(&a).unwrap().value
    }

    #[test]
    fn reverted_frame_rolls_back_children() {
        let (vm, mut exec, a, b) = setup();
        let before = exec.world.state_root();
        let r = vm.call(
            &mut exec,
            SYSTEM,
            a,
            sel("relay(address,uint64,bool)"),
            &encode(&(b, 5u64, true)),
            1_000_000,
        );
        assert!(r.output.is_err());
        assert_eq!(cell(&exec, a), 0);
        assert_eq!(cell(&exec, b), 0);
        assert_eq!(exec.world.state_root(), before);

        let r = vm.call(
            &mut exec,
            SYSTEM,
            a,
            sel("relay(address,uint64,bool)"),
            &encode(&(b, 5u64, false)),
            1_000_000,
        );
        assert!(r.output.is_ok());
        assert_eq!((cell(&exec, a), cell(&exec, b)), (5, 5));
    }

    #[test]
    fn gas_is_additive_over_children() {
        let (vm, mut exec, a, b) = setup();
        vm.call(
            &mut exec,
            SYSTEM,
            a,
            sel("relay(address,uint64,bool)"),
            &encode(&(b, 1u64, false)),
            1_000_000,
        );
        let t = &exec.trace;
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].gas_used, t[0].own_gas + t[1].gas_used);
    }

    #[test]
    fn call_to_missing_contract_reverts() {
        let (vm, mut exec, _, _) = setup();
        let ghost = Address([0xee; 20]);
        let r = vm.call(
            &mut exec,
            SYSTEM,
            ghost,
            sel("set(uint64)"),
            &encode(&1u64),
            100_000,
        );
        assert_eq!(r.output, Err(Revert::NoContract(ghost)));
    }

    #[test]
    fn depth_limit_enforced() {
        let (vm, mut exec, a, b) = setup();
        let r = vm.call(
            &mut exec,
            SYSTEM,
            a,
            sel("loop(address)"),
            &encode(&b),
            10_000_000,
        );
        assert_eq!(r.output, Err(Revert::MaxDepth(DEFAULT_MAX_DEPTH)));
        assert_eq!(
            exec.trace.iter().map(|f| f.depth).max(),
            Some(DEFAULT_MAX_DEPTH + 1)
        );
    }

    #[test]
    fn out_of_gas_consumes_budget() {
        let (vm, mut exec, a, _) = setup();
        let r = vm.call(&mut exec, SYSTEM, a, sel("set(uint64)"), &encode(&1u64), 10);
        assert_eq!(r.output, Err(Revert::OutOfGas));
        assert_eq!(r.gas_used, 10);
        assert_eq!(cell(&exec, a), 0);
    }

    #[test]
    fn access_only_checks_immediate_caller() {
        let (vm, mut exec, a, _) = setup();
        let ok = vm.call(
            &mut exec,
            SYSTEM,
            a,
            sel("guarded(address)"),
            &encode(&SYSTEM),
            100_000,
        );
        assert_eq!(ok.output, Ok(vec![1]));
        let other = Address([1; 20]);
        let denied = vm.call(
            &mut exec,
            SYSTEM,
            a,
            sel("guarded(address)"),
            &encode(&other),
            100_000,
        );
        assert!(matches!(denied.output, Err(Revert::AccessDenied { .. })));
    }

    #[test]
    fn determinism_of_frames() {
        let (vm, mut e1, a, b) = setup();
        let (_, mut e2, _, _) = setup();
        let args = encode(&(b, 7u64, false));
        let r1 = vm.call(
            &mut e1,
            SYSTEM,
            a,
            sel("relay(address,uint64,bool)"),
            &args,
            500_000,
        );
        let r2 = vm.call(
            &mut e2,
            SYSTEM,
            a,
            sel("relay(address,uint64,bool)"),
            &args,
            500_000,
        );
        assert_eq!((r1.output, r1.gas_used), (r2.output, r2.gas_used));
        assert_eq!(e1.world.state_root(), e2.world.state_root());
    }

    #[test]
    fn trace_format_has_one_line_per_frame() {
        let (vm, mut exec, a, b) = setup();
        vm.call(
            &mut exec,
            SYSTEM,
            a,
            sel("relay(address,uint64,bool)"),
            &encode(&(b, 1u64, false)),
            1_000_000,
        );
        let text = format_trace(&exec.trace);
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().starts_with("1 0x0000"));
    }
}
