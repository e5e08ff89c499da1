//! Gas schedule, calibration against the published per-operation costs, and
//! the gas-to-USD conversion.
//!
//! Contracts charge [`GasOp`]s as they execute; a transaction receipt is the
//! sum of its intrinsic cost and every op charged by every frame it entered.
//! Calibration fixes a set of structural per-frame costs and solves the
//! remaining ops so the simulated receipts land exactly on the targets:
//!
//! | path                                   | receipt                                   |
//! |----------------------------------------|-------------------------------------------|
//! | request, warm name, known requestor    | `steady - binding`                        |
//! | request, warm name, new requestor      | `steady`                                  |
//! | request, cold name, known requestor    | `request` (Table-style "Request")         |
//! | request, cold name, new requestor      | `single_request`                          |
//! | pooled member (tx + its fan-out share) | `pool_member`                             |
//! | cache miss, cold name, new requestor   | `cache_initial`                           |
//! | cache hit, new requestor               | `cache_subsequent`                        |
//!
//! A name is *cold* until the first lookup against the current center; a
//! requestor is *new* until the manager has stored its hash binding.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const GAS_TO_ETHER: f64 = 2.42e-8;
pub const ETHER_TO_USD: f64 = 289.42;

pub fn gas_to_usd(gas: u64) -> f64 {
    gas as f64 * GAS_TO_ETHER * ETHER_TO_USD
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GasOp {
    TxIntrinsic,
    DeployManager,
    DeployCenter,
    DeployOwner,
    DeployRequestor,
    DeployProbe,
    ManagerInitialize,
    // request path
    RequestorRequest,
    ManagerRequest,
    RequestorBinding,
    RecordPending,
    ManagerDispatch,
    CenterForward,
    ColdNameLookup,
    OwnerReply,
    ManagerView,
    CenterRespond,
    RequestorReceive,
    CenterAudit,
    // cache
    CacheCheck,
    CacheWrite,
    CacheServe,
    // baseline direct call
    DirectRequest,
    DirectResponse,
    // registration
    OwnerRegister,
    ManagerRegister,
    CenterRegister,
    // subscribe
    RequestorSubscribe,
    ManagerSubscribe,
    CenterSubscribe,
    OwnerPublish,
    ManagerPublish,
    CenterNotify,
    NotifySubscriber,
    SubscriberNotified,
    // governance
    GovernancePropose,
    GovernanceApprove,
    GovernanceVet,
    CenterVet,
    UpdateExecute,
    CenterExport,
    CenterImport,
    CenterDeactivate,
    ProbeCall,
}

impl fmt::Display for GasOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    costs: BTreeMap<GasOp, u64>,
}

impl GasSchedule {
    pub fn cost(&self, op: GasOp) -> u64 {
        self.costs.get(&op).copied().unwrap_or(0)
    }

    pub fn set(&mut self, op: GasOp, gas: u64) {
        self.costs.insert(op, gas);
    }

    pub fn iter(&self) -> impl Iterator<Item = (GasOp, u64)> + '_ {
        self.costs.iter().map(|(k, v)| (*k, *v))
    }

    /// Cost of a core-mode request for a warm name and a requestor that
    /// must be bound, i.e. the steady-state per-request cost.
    pub fn steady_request(&self) -> u64 {
        self.pool_member() + self.window_overhead()
    }

    /// Gas a pooled member adds: its request transaction plus its share of
    /// the respond fan-out.
    pub fn pool_member(&self) -> u64 {
        use GasOp::*;
        [
            TxIntrinsic,
            RequestorRequest,
            ManagerRequest,
            RequestorBinding,
            RecordPending,
            CenterRespond,
            ManagerView,
            RequestorReceive,
        ]
        .iter()
        .map(|op| self.cost(*op))
        .sum()
    }

    /// One forward/query/reply triple, paid once per window.
    pub fn window_overhead(&self) -> u64 {
        use GasOp::*;
        [ManagerDispatch, CenterForward, OwnerReply, ManagerView]
            .iter()
            .map(|op| self.cost(*op))
            .sum()
    }

    pub fn cache_hit(&self) -> u64 {
        use GasOp::*;
        [
            TxIntrinsic,
            RequestorRequest,
            ManagerRequest,
            RequestorBinding,
            CacheCheck,
            CacheServe,
            RequestorReceive,
        ]
        .iter()
        .map(|op| self.cost(*op))
        .sum()
    }
}

impl Default for GasSchedule {
    fn default() -> Self {
        calibrate(&CalibrationTargets::default()).expect("default targets are consistent")
    }
}

/// Receipt-level gas targets the schedule is solved against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub deploy_manager: u64,
    pub deploy_center: u64,
    /// Request for a cold name from an already-bound requestor.
    pub request: u64,
    /// First request on a fresh deployment from a new requestor.
    pub single_request: u64,
    /// Request for a warm name from a new requestor.
    pub steady_request: u64,
    pub normal_request: u64,
    pub cache_initial: u64,
    pub cache_subsequent: u64,
    pub subscribe: u64,
    pub update: u64,
    pub pool_member: u64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            deploy_manager: 874_393,
            deploy_center: 1_427_517,
            request: 143_781,
            single_request: 149_524,
            steady_request: 137_000,
            normal_request: 75_000,
            cache_initial: 221_668,
            cache_subsequent: 60_145,
            subscribe: 50_094,
            update: 33_241,
            pool_member: 60_000,
        }
    }
}

/// Per-frame costs that calibration holds fixed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralCosts {
    pub costs: BTreeMap<GasOp, u64>,
}

impl Default for StructuralCosts {
    fn default() -> Self {
        use GasOp::*;
        let costs = [
            (TxIntrinsic, 21_000),
            (DeployOwner, 312_480),
            (DeployRequestor, 398_112),
            (DeployProbe, 120_000),
            (ManagerInitialize, 24_100),
            (RequestorRequest, 8_000),
            (ManagerRequest, 9_000),
            (ManagerDispatch, 2_400),
            (OwnerReply, 24_000),
            (ManagerView, 2_600),
            (CenterRespond, 7_000),
            (RequestorReceive, 6_500),
            (CenterAudit, 22_100),
            (CacheCheck, 2_100),
            (DirectResponse, 9_000),
            (OwnerRegister, 6_000),
            (ManagerRegister, 4_000),
            (CenterRegister, 66_300),
            (RequestorSubscribe, 5_000),
            (CenterSubscribe, 22_100),
            (OwnerPublish, 8_000),
            (ManagerPublish, 3_000),
            (CenterNotify, 12_000),
            (NotifySubscriber, 4_000),
            (SubscriberNotified, 6_000),
            (GovernancePropose, 48_000),
            (GovernanceApprove, 26_000),
            (GovernanceVet, 30_000),
            (CenterVet, 20_000),
            (CenterExport, 2_100),
            (CenterImport, 5_000),
            (CenterDeactivate, 2_900),
            (ProbeCall, 3_000),
        ]
        .into_iter()
        .collect();
        StructuralCosts { costs }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("inconsistent calibration targets: {}", violations.join("; "))]
pub struct CalibrationError {
    pub violations: Vec<String>,
}

pub fn calibrate(targets: &CalibrationTargets) -> Result<GasSchedule, CalibrationError> {
    calibrate_with(targets, &StructuralCosts::default())
}

pub fn calibrate_with(
    targets: &CalibrationTargets,
    structural: &StructuralCosts,
) -> Result<GasSchedule, CalibrationError> {
    use GasOp::*;
    let mut violations = Vec::new();
    let mut order = |ok: bool, what: &str| {
        if !ok {
            violations.push(what.to_string());
        }
    };
    order(
        targets.cache_subsequent < targets.cache_initial,
        "cache hit must cost less than cache miss",
    );
    order(
        targets.pool_member < targets.steady_request,
        "pooled marginal cost must be below the plain request cost",
    );
    order(
        targets.steady_request < targets.single_request,
        "steady-state request must be below the cold first request",
    );
    order(
        targets.request < targets.single_request,
        "request from a bound requestor must be below the first request",
    );

    let s = |op: GasOp| structural.costs.get(&op).copied().unwrap_or(0);
    let mut residual = |op: GasOp, target: u64, parts: &[GasOp]| -> (GasOp, u64) {
        let fixed: u64 = parts.iter().map(|p| s(*p)).sum();
        if target <= fixed {
            violations.push(format!(
                "{op}: target {target} leaves no room above fixed cost {fixed}"
            ));
            (op, 0)
        } else {
            (op, target - fixed)
        }
    };

    let binding = targets.single_request.saturating_sub(targets.request);
    let cold = targets
        .single_request
        .saturating_sub(targets.steady_request);
    let mut solved = vec![(RequestorBinding, binding), (ColdNameLookup, cold)];
    solved.push(residual(
        DeployManager,
        targets.deploy_manager,
        &[TxIntrinsic],
    ));
    solved.push(residual(
        DeployCenter,
        targets.deploy_center,
        &[TxIntrinsic],
    ));
    solved.push(residual(
        RecordPending,
        targets.pool_member.saturating_sub(binding),
        &[
            TxIntrinsic,
            RequestorRequest,
            ManagerRequest,
            CenterRespond,
            ManagerView,
            RequestorReceive,
        ],
    ));
    solved.push(residual(
        CenterForward,
        targets.steady_request.saturating_sub(targets.pool_member),
        &[ManagerDispatch, OwnerReply, ManagerView],
    ));
    solved.push(residual(
        CacheServe,
        targets.cache_subsequent.saturating_sub(binding),
        &[
            TxIntrinsic,
            RequestorRequest,
            ManagerRequest,
            CacheCheck,
            RequestorReceive,
        ],
    ));
    solved.push(residual(
        CacheWrite,
        targets.cache_initial.saturating_sub(targets.single_request),
        &[CacheCheck],
    ));
    solved.push(residual(
        DirectRequest,
        targets.normal_request,
        &[TxIntrinsic, DirectResponse, RequestorReceive],
    ));
    solved.push(residual(
        ManagerSubscribe,
        targets.subscribe,
        &[TxIntrinsic, RequestorSubscribe, CenterSubscribe],
    ));
    solved.push(residual(
        UpdateExecute,
        targets.update,
        &[TxIntrinsic, CenterExport, CenterImport, CenterDeactivate],
    ));
    if binding == 0 {
        violations.push("RequestorBinding: request must be below single_request".into());
    }
    if cold == 0 {
        violations.push("ColdNameLookup: steady_request must be below single_request".into());
    }

    if !violations.is_empty() {
        return Err(CalibrationError { violations });
    }
    let mut costs = structural.costs.clone();
    costs.extend(solved);
    Ok(GasSchedule { costs })
}
