//! The data-feed manager: the front contract requestors and owners talk to.
//!
//! It keeps the center's address and everything that must survive a center
//! replacement: requestor bindings, pool windows, the response cache, the
//! committee with its proposals, and the denylist.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    sel, Delivery, ForwardArgs, ForwardReply, Recipient, RegisterArgs, RequestOutcome, CENTER,
    MANAGER,
};
use crate::cache::{CacheBook, CacheConfig};
use crate::crypto::{Address, Digest32, Selector, Signature};
use crate::gas::GasOp;
use crate::governance::{Action, Committee, ProposalBook};
use crate::message::{Body, Interaction, ProtocolMessage};
use crate::pool::{PoolAction, PoolBook, PoolConfig, PoolMember, PoolWindow, WindowStat};
use crate::vm::{decode, encode, Behavior, CallContext, Revert, SYSTEM};
use crate::world::ContractState;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagerConfig {
    pub pool: Option<PoolConfig>,
    pub cache: Option<CacheConfig>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagerInit {
    pub committee: Committee,
    pub config: ManagerConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingRequest {
    pub name: String,
    pub requestor: Address,
    pub block: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagerState {
    pub deployer: Address,
    pub center: Option<Address>,
    pub config: ManagerConfig,
    /// Requestor hash to address, filled on each requestor's first request.
    pub bindings: BTreeMap<Digest32, Address>,
    pub pending: BTreeMap<u64, PendingRequest>,
    pub next_request: u64,
    pub pool: PoolBook,
    pub pool_log: Vec<WindowStat>,
    pub cache: CacheBook,
    pub committee: Committee,
    pub proposals: ProposalBook,
    pub denylist: BTreeSet<Digest32>,
}

pub struct ManagerBehavior;

type Handler = fn(&mut CallContext<'_>, &[u8]) -> Result<Vec<u8>, Revert>;

fn handler(selector: Selector) -> Option<Handler> {
    let table: [(Selector, Handler); 11] = [
        (*sel::INITIALIZE, initialize),
        (*sel::CENTER, center),
        (*sel::REGISTER_OWNER, register_owner),
        (*sel::REQUEST, request),
        (*sel::FLUSH, flush),
        (*sel::PUBLISH, publish),
        (*sel::SUBSCRIBE, subscribe),
        (*sel::UNSUBSCRIBE, unsubscribe),
        (*sel::PROPOSE, propose),
        (*sel::APPROVE, approve),
        (*sel::EXECUTE, execute),
    ];
    table
        .into_iter()
        .find(|(s, _)| *s == selector)
        .map(|(_, h)| h)
}

impl Behavior for ManagerBehavior {
    fn id(&self) -> &'static str {
        MANAGER
    }

    fn deploy_op(&self) -> GasOp {
        GasOp::DeployManager
    }

    fn init(&self, deployer: Address, args: &[u8]) -> Result<Box<dyn ContractState>, Revert> {
        let init: ManagerInit = decode(args)?;
        Ok(Box::new(ManagerState {
            deployer,
            center: None,
            pool: PoolBook::new(init.config.pool.clone().unwrap_or_default()),
            cache: CacheBook::new(init.config.cache.clone().unwrap_or_default()),
            config: init.config,
            bindings: BTreeMap::new(),
            pending: BTreeMap::new(),
            next_request: 0,
            pool_log: Vec::new(),
            committee: init.committee,
            proposals: ProposalBook::default(),
            denylist: BTreeSet::new(),
        }))
    }

    fn decode_state(&self, value: serde_json::Value) -> Result<Box<dyn ContractState>, String> {
        serde_json::from_value::<ManagerState>(value)
            .map(|s| Box::new(s) as Box<dyn ContractState>)
            .map_err(|e| e.to_string())
    }

    fn dispatch(
        &self,
        ctx: &mut CallContext<'_>,
        selector: Selector,
        args: &[u8],
    ) -> Result<Vec<u8>, Revert> {
        let handler = handler(selector).ok_or(Revert::UnknownSelector(selector))?;
        handler(ctx, args)
    }
}

fn st<'c>(ctx: &'c mut CallContext<'_>) -> Result<&'c mut ManagerState, Revert> {
    ctx.state_mut::<ManagerState>()
}

fn current_center(ctx: &CallContext<'_>) -> Result<Address, Revert> {
    ctx.state::<ManagerState>()?
        .center
        .ok_or_else(|| Revert::rejected("manager has no center"))
}

fn require_contract_caller(ctx: &CallContext<'_>) -> Result<(), Revert> {
    if ctx.code_of(&ctx.caller()).is_some() {
        Ok(())
    } else {
        Err(Revert::rejected("caller must be a contract"))
    }
}

fn initialize(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let center: Address = decode(args)?;
    let deployer = ctx.state::<ManagerState>()?.deployer;
    ctx.access_only(deployer)?;
    ctx.charge(GasOp::ManagerInitialize)?;
    if ctx.code_of(&center) != Some(CENTER) {
        return Err(Revert::rejected("center address holds no center contract"));
    }
    let s = st(ctx)?;
    if s.center.is_some() {
        return Err(Revert::rejected("already initialized"));
    }
    s.center = Some(center);
    Ok(vec![])
}

fn center(ctx: &mut CallContext<'_>, _args: &[u8]) -> Result<Vec<u8>, Revert> {
    ctx.charge(GasOp::ManagerView)?;
    Ok(encode(&current_center(ctx)?))
}

fn register_owner(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let (name, state): (String, Vec<i64>) = decode(args)?;
    ctx.charge(GasOp::ManagerRegister)?;
    require_contract_caller(ctx)?;
    let owner = ctx.caller();
    let pooled = st(ctx)?.config.pool.is_some();
    ctx.emit(ProtocolMessage::new(Interaction::Reg, &name).with_requestors(vec![owner.hashed()]));
    let center = current_center(ctx)?;
    ctx.call(
        center,
        *sel::CENTER_REGISTER,
        &encode(&RegisterArgs {
            name,
            owner,
            state,
            pooled,
        }),
    )
}

fn request(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let name: String = decode(args)?;
    ctx.charge(GasOp::ManagerRequest)?;
    if name.is_empty() {
        return Err(Revert::rejected("empty name"));
    }
    require_contract_caller(ctx)?;
    let requestor = ctx.caller();
    let hash = requestor.hashed();
    let height = ctx.block_height();
    ctx.emit(ProtocolMessage::new(Interaction::Req, &name).with_requestors(vec![hash]));

    if !st(ctx)?.bindings.contains_key(&hash) {
        ctx.charge(GasOp::RequestorBinding)?;
        st(ctx)?.bindings.insert(hash, requestor);
    }
    if st(ctx)?.denylist.contains(&hash) {
        let center = current_center(ctx)?;
        ctx.call(center, *sel::CENTER_RECORD_DENIED, &encode(&(name, hash)))?;
        return Ok(encode(&RequestOutcome::Denied));
    }

    let s = st(ctx)?;
    let id = s.next_request;
    s.next_request += 1;
    let cached = s.config.cache.is_some();
    let pooled = s.config.pool.is_some();

    if cached {
        ctx.charge(GasOp::CacheCheck)?;
        if let Some(payload) = st(ctx)?.cache.lookup(&name, height) {
            ctx.charge(GasOp::CacheServe)?;
            ctx.emit(
                ProtocolMessage::new(Interaction::Resp, &name)
                    .with_requestors(vec![hash])
                    .with_body(Body::Data(payload.clone())),
            );
            let delivery = Delivery {
                request_id: id,
                name,
                body: Body::Data(payload),
            };
            ctx.call(requestor, *sel::REQUESTOR_RECEIVE, &encode(&delivery))?;
            return Ok(encode(&RequestOutcome::Served(id)));
        }
    }

    ctx.charge(GasOp::RecordPending)?;
    st(ctx)?.pending.insert(
        id,
        PendingRequest {
            name: name.clone(),
            requestor,
            block: height,
        },
    );

    if pooled {
        let member = PoolMember {
            request_id: id,
            requestor,
            hash,
            arrived_block: height,
        };
        if let PoolAction::Full(wid) = st(ctx)?.pool.on_request(&name, member, height) {
            let window = st(ctx)?.pool.take(wid).expect("full window exists");
            flush_window(ctx, window)?;
            return Ok(encode(&RequestOutcome::Served(id)));
        }
        return Ok(encode(&RequestOutcome::Pending(id)));
    }

    let recipients = vec![Recipient {
        request_id: id,
        hash,
        address: requestor,
    }];
    let reply = dispatch(ctx, &name, recipients, None, None)?;
    Ok(encode(&match reply.payload {
        Some(_) => RequestOutcome::Served(id),
        None => RequestOutcome::NameMissing(id),
    }))
}

/// Forwards one batch to the center and settles its pending entries.
fn dispatch(
    ctx: &mut CallContext<'_>,
    name: &str,
    recipients: Vec<Recipient>,
    aggregate: Option<Digest32>,
    delay: Option<i64>,
) -> Result<ForwardReply, Revert> {
    ctx.charge(GasOp::ManagerDispatch)?;
    let center = current_center(ctx)?;
    let ids: Vec<u64> = recipients.iter().map(|r| r.request_id).collect();
    let args = ForwardArgs {
        name: name.to_string(),
        recipients,
        aggregate,
        delay,
    };
    let reply: ForwardReply = ctx.call_typed(center, *sel::CENTER_FORWARD, &args)?;
    let height = ctx.block_height();
    let s = st(ctx)?;
    for id in ids {
        s.pending.remove(&id);
    }
    if s.config.cache.is_some() {
        if let (Some(payload), Some(z)) = (&reply.payload, reply.owner_hash) {
            ctx.charge(GasOp::CacheWrite)?;
            st(ctx)?.cache.create(name, z, payload.clone(), height);
        }
    }
    Ok(reply)
}

fn flush_window(ctx: &mut CallContext<'_>, window: PoolWindow) -> Result<(), Revert> {
    let before = ctx.gas_used();
    let recipients = window
        .members
        .iter()
        .map(|m| Recipient {
            request_id: m.request_id,
            hash: m.hash,
            address: m.requestor,
        })
        .collect();
    let result = dispatch(
        ctx,
        &window.owner_name,
        recipients,
        Some(window.aggregate()),
        Some(window.window_blocks as i64),
    );
    let stat = WindowStat {
        window_id: window.id,
        owner_name: window.owner_name.clone(),
        batch_size: window.members.len(),
        open_block: window.opened_at_block,
        close_block: window.close_block(),
        total_gas: ctx.gas_used() - before,
    };
    let s = st(ctx)?;
    for m in &window.members {
        s.pending.remove(&m.request_id);
    }
    s.pool_log.push(stat);
    result.map(|_| ())
}

fn flush(ctx: &mut CallContext<'_>, _args: &[u8]) -> Result<Vec<u8>, Revert> {
    ctx.access_only(SYSTEM)?;
    let height = ctx.block_height();
    let expired = st(ctx)?.pool.take_expired(height);
    let n = expired.len() as u32;
    for window in expired {
        // a failed window is logged and dropped so later windows still flush
        if let Err(Revert::OutOfGas) = flush_window(ctx, window) {
            return Err(Revert::OutOfGas);
        }
    }
    Ok(encode(&n))
}

fn publish(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let (name, state): (String, Vec<i64>) = decode(args)?;
    ctx.charge(GasOp::ManagerPublish)?;
    require_contract_caller(ctx)?;
    let owner = ctx.caller();
    let center = current_center(ctx)?;
    let out = ctx.call(
        center,
        *sel::CENTER_NOTIFY,
        &encode(&super::NotifyArgs {
            name: name.clone(),
            owner,
            state,
        }),
    )?;
    if st(ctx)?.config.cache.is_some() {
        st(ctx)?.cache.invalidate(&name);
    }
    Ok(out)
}

fn subscribe(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let name: String = decode(args)?;
    ctx.charge(GasOp::ManagerSubscribe)?;
    require_contract_caller(ctx)?;
    let who = ctx.caller();
    if st(ctx)?.denylist.contains(&who.hashed()) {
        return Err(Revert::rejected("requestor is denied"));
    }
    let center = current_center(ctx)?;
    ctx.call(center, *sel::CENTER_SUBSCRIBE, &encode(&(name, who)))
}

fn unsubscribe(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let name: String = decode(args)?;
    ctx.charge(GasOp::ManagerSubscribe)?;
    let who = ctx.caller();
    let center = current_center(ctx)?;
    ctx.call(center, *sel::CENTER_UNSUBSCRIBE, &encode(&(name, who)))
}

fn governance_error(e: crate::governance::GovernanceError) -> Revert {
    Revert::rejected(e.to_string())
}

fn propose(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let (action, sig): (Action, Signature) = decode(args)?;
    ctx.charge(GasOp::GovernancePropose)?;
    if let Action::UpdateCenter(target) = &action {
        if ctx.code_of(target) != Some(CENTER) {
            return Err(Revert::rejected("update target holds no center contract"));
        }
        if Some(*target) == ctx.state::<ManagerState>()?.center {
            return Err(Revert::rejected("update target is the current center"));
        }
    }
    let (this, caller) = (ctx.this(), ctx.caller());
    let s = st(ctx)?;
    let id = s
        .proposals
        .propose(&s.committee, &this, caller, action, sig)
        .map_err(governance_error)?;
    Ok(encode(&id))
}

fn approve(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let (id, member, sig): (u64, Address, Signature) = decode(args)?;
    ctx.charge(GasOp::GovernanceApprove)?;
    let this = ctx.this();
    let s = st(ctx)?;
    let count = s
        .proposals
        .approve(&s.committee, &this, id, member, sig)
        .map_err(governance_error)?;
    Ok(encode(&(count as u64)))
}

fn execute(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let id: u64 = decode(args)?;
    let (this, caller) = (ctx.this(), ctx.caller());
    let s = st(ctx)?;
    if !s.committee.is_member(&caller) {
        return Err(Revert::rejected(format!(
            "{caller} is not a committee member"
        )));
    }
    let action = s
        .proposals
        .execute(&s.committee, &this, id)
        .map_err(governance_error)?;
    match action {
        Action::UpdateCenter(next) => {
            ctx.charge(GasOp::UpdateExecute)?;
            let old = current_center(ctx)?;
            let data = ctx.call(old, *sel::CENTER_EXPORT, &[])?;
            ctx.call(next, *sel::CENTER_IMPORT, &data)?;
            ctx.call(old, *sel::CENTER_DEACTIVATE, &[])?;
            st(ctx)?.center = Some(next);
        }
        Action::Register { name, owner, state } => {
            ctx.charge(GasOp::GovernanceVet)?;
            let pooled = st(ctx)?.config.pool.is_some();
            let center = current_center(ctx)?;
            ctx.call(
                center,
                *sel::CENTER_VET_REGISTER,
                &encode(&RegisterArgs {
                    name,
                    owner,
                    state,
                    pooled,
                }),
            )?;
        }
        Action::Deregister(name) => {
            ctx.charge(GasOp::GovernanceVet)?;
            let center = current_center(ctx)?;
            ctx.call(center, *sel::CENTER_DEREGISTER, &encode(&name))?;
            let s = st(ctx)?;
            for m in s.pool.clear(&name) {
                s.pending.remove(&m.request_id);
            }
            s.cache.invalidate(&name);
        }
        Action::SetPermission { requestor, allowed } => {
            ctx.charge(GasOp::GovernanceVet)?;
            let s = st(ctx)?;
            if allowed {
                s.denylist.remove(&requestor.hashed());
            } else {
                s.denylist.insert(requestor.hashed());
            }
        }
    }
    Ok(encode(&id))
}
