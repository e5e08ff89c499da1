//! The data-feed center: registry, query dispatch, response fan-out, audit
//! log and subscriptions. Only the manager may call it, and a retired center
//! rejects everything.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    check_reply_sender, sel, AuditRecord, CenterExport, Delivery, ForwardArgs, ForwardReply,
    NotifyArgs, Outcome, Recipient, RegisterArgs, Registry, CENTER,
};
use crate::crypto::{Address, Digest32, Selector};
use crate::gas::GasOp;
use crate::message::{Body, Interaction, ProtocolMessage, NAME_MISSING};
use crate::subscribe::{
    compute_delta, Notification, NotificationRecord, StateVector, SubscriptionRegistry,
};
use crate::vm::{decode, encode, Behavior, CallContext, Revert};
use crate::world::ContractState;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenterState {
    pub manager: Address,
    pub active: bool,
    pub registry: Registry,
    pub audit: Vec<AuditRecord>,
    pub subscriptions: SubscriptionRegistry,
    pub notifications: Vec<NotificationRecord>,
    /// Names this center has already looked up; the first lookup is dearer.
    pub warm: BTreeSet<String>,
}

pub struct CenterBehavior;

type Handler = fn(&mut CallContext<'_>, &[u8]) -> Result<Vec<u8>, Revert>;

fn handler(selector: Selector) -> Option<Handler> {
    let table: [(Selector, Handler); 11] = [
        (*sel::CENTER_REGISTER, |c, a| register(c, a, false)),
        (*sel::CENTER_VET_REGISTER, |c, a| register(c, a, true)),
        (*sel::CENTER_DEREGISTER, deregister),
        (*sel::CENTER_FORWARD, forward),
        (*sel::CENTER_RECORD_DENIED, record_denied),
        (*sel::CENTER_SUBSCRIBE, subscribe),
        (*sel::CENTER_UNSUBSCRIBE, unsubscribe),
        (*sel::CENTER_NOTIFY, notify),
        (*sel::CENTER_EXPORT, export),
        (*sel::CENTER_IMPORT, import),
        (*sel::CENTER_DEACTIVATE, deactivate),
    ];
    table
        .into_iter()
        .find(|(s, _)| *s == selector)
        .map(|(_, h)| h)
}

impl Behavior for CenterBehavior {
    fn id(&self) -> &'static str {
        CENTER
    }

    fn deploy_op(&self) -> GasOp {
        GasOp::DeployCenter
    }

    fn init(&self, _deployer: Address, args: &[u8]) -> Result<Box<dyn ContractState>, Revert> {
        let manager: Address = decode(args)?;
        Ok(Box::new(CenterState {
            manager,
            active: true,
            registry: Registry::default(),
            audit: Vec::new(),
            subscriptions: SubscriptionRegistry::default(),
            notifications: Vec::new(),
            warm: BTreeSet::new(),
        }))
    }

    fn decode_state(&self, value: serde_json::Value) -> Result<Box<dyn ContractState>, String> {
        serde_json::from_value::<CenterState>(value)
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
        let st = ctx.state::<CenterState>()?;
        let (manager, active) = (st.manager, st.active);
        ctx.access_only(manager)?;
        if !active {
            return Err(Revert::Inactive);
        }
        handler(ctx, args)
    }
}

fn st<'c>(ctx: &'c mut CallContext<'_>) -> Result<&'c mut CenterState, Revert> {
    ctx.state_mut::<CenterState>()
}

fn register(ctx: &mut CallContext<'_>, args: &[u8], vetted: bool) -> Result<Vec<u8>, Revert> {
    let a: RegisterArgs = decode(args)?;
    ctx.charge(if vetted {
        GasOp::CenterVet
    } else {
        GasOp::CenterRegister
    })?;
    let tuple = st(ctx)?
        .registry
        .register(&a.name, a.owner, StateVector(a.state), a.pooled, vetted)
        .map_err(|e| Revert::rejected(e.to_string()))?
        .clone();
    Ok(encode(&tuple))
}

fn deregister(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let name: String = decode(args)?;
    ctx.charge(GasOp::CenterVet)?;
    let s = st(ctx)?;
    let removed = s.registry.deregister(&name);
    s.subscriptions.clear(&name);
    Ok(encode(&removed))
}

fn respond_to(
    ctx: &mut CallContext<'_>,
    name: &str,
    r: &Recipient,
    body: Body,
    served: Outcome,
) -> Result<(), Revert> {
    let before = ctx.gas_used();
    ctx.charge(GasOp::CenterRespond)?;
    ctx.emit(
        ProtocolMessage::new(Interaction::Resp, name)
            .with_requestors(vec![r.hash])
            .with_body(body.clone()),
    );
    let delivery = Delivery {
        request_id: r.request_id,
        name: name.to_string(),
        body,
    };
    let delivered = ctx
        .call(r.address, *sel::REQUESTOR_RECEIVE, &encode(&delivery))
        .is_ok();
    let record = AuditRecord {
        block_height: ctx.block_height(),
        requestor_hash: r.hash,
        owner_name: name.to_string(),
        outcome: if delivered {
            served
        } else {
            Outcome::DeliveryFailed
        },
        gas_used: ctx.gas_used() - before,
    };
    st(ctx)?.audit.push(record);
    Ok(())
}

fn forward(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let a: ForwardArgs = decode(args)?;
    ctx.charge(GasOp::CenterForward)?;
    if st(ctx)?.warm.insert(a.name.clone()) {
        ctx.charge(GasOp::ColdNameLookup)?;
    }
    let hashes: Vec<Digest32> = a.recipients.iter().map(|r| r.hash).collect();
    let mut msg = ProtocolMessage::new(Interaction::For, &a.name).with_requestors(hashes);
    if let Some(agg) = a.aggregate {
        msg = msg.with_aggregate(agg);
    }
    ctx.emit(msg);

    let Some(entry) = st(ctx)?.registry.entry(&a.name).cloned() else {
        for r in &a.recipients {
            respond_to(
                ctx,
                &a.name,
                r,
                Body::Error(NAME_MISSING.into()),
                Outcome::NameMissing,
            )?;
        }
        return Ok(encode(&ForwardReply {
            payload: None,
            owner_hash: None,
        }));
    };
    if let Some(delay) = a.delay {
        if let Some(e) = st(ctx)?.registry.entry_mut(&a.name) {
            e.tuple.t = Some(delay);
        }
    }

    ctx.emit(ProtocolMessage::new(Interaction::Query, &a.name));
    let payload: Vec<u8> = ctx.call_typed(entry.owner, *sel::OWNER_REPLY, &a.name)?;
    if check_reply_sender(&entry, &entry.owner).is_err() {
        for r in &a.recipients {
            let record = AuditRecord {
                block_height: ctx.block_height(),
                requestor_hash: r.hash,
                owner_name: a.name.clone(),
                outcome: Outcome::Denied,
                gas_used: 0,
            };
            st(ctx)?.audit.push(record);
        }
        return Ok(encode(&ForwardReply {
            payload: None,
            owner_hash: None,
        }));
    }
    for r in &a.recipients {
        respond_to(
            ctx,
            &a.name,
            r,
            Body::Data(payload.clone()),
            Outcome::Served,
        )?;
    }
    Ok(encode(&ForwardReply {
        payload: Some(payload),
        owner_hash: Some(entry.tuple.z),
    }))
}

fn record_denied(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let (name, hash): (String, Digest32) = decode(args)?;
    ctx.charge(GasOp::CenterAudit)?;
    let record = AuditRecord {
        block_height: ctx.block_height(),
        requestor_hash: hash,
        owner_name: name,
        outcome: Outcome::Denied,
        gas_used: ctx.schedule().cost(GasOp::CenterAudit),
    };
    st(ctx)?.audit.push(record);
    Ok(vec![])
}

fn subscribe(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let (name, who): (String, Address) = decode(args)?;
    ctx.charge(GasOp::CenterSubscribe)?;
    let s = st(ctx)?;
    if s.registry.entry(&name).is_none() {
        return Err(Revert::rejected(NAME_MISSING));
    }
    Ok(encode(&s.subscriptions.subscribe(&name, who)))
}

fn unsubscribe(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let (name, who): (String, Address) = decode(args)?;
    ctx.charge(GasOp::CenterSubscribe)?;
    Ok(encode(&st(ctx)?.subscriptions.unsubscribe(&name, &who)))
}

fn notify(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let a: NotifyArgs = decode(args)?;
    ctx.charge(GasOp::CenterNotify)?;
    let height = ctx.block_height();
    let s = st(ctx)?;
    let entry = s
        .registry
        .entry_mut(&a.name)
        .ok_or_else(|| Revert::rejected(NAME_MISSING))?;
    if entry.owner != a.owner {
        return Err(Revert::rejected("publisher is not the registered owner"));
    }
    let new = StateVector(a.state);
    let changes = compute_delta(&entry.state, &new).map_err(|e| Revert::rejected(e.to_string()))?;
    entry.state = new;
    if changes.is_empty() {
        return Ok(encode(&0u32));
    }
    let subscribers = s.subscriptions.subscribers(&a.name);
    let note = Notification {
        owner_name: a.name.clone(),
        changes: changes.clone(),
        at_block: height,
    };
    let mut delivered = 0u32;
    for sub in subscribers {
        let before = ctx.gas_used();
        ctx.charge(GasOp::NotifySubscriber)?;
        let ok = ctx
            .call(sub, *sel::REQUESTOR_ON_NOTIFY, &encode(&note))
            .is_ok();
        let gas = ctx.gas_used() - before;
        let s = st(ctx)?;
        s.notifications.push(NotificationRecord {
            block: height,
            owner_name: a.name.clone(),
            subscriber: sub,
            changes: changes.clone(),
            delivered: ok,
        });
        if ok {
            delivered += 1;
        } else {
            s.audit.push(AuditRecord {
                block_height: height,
                requestor_hash: sub.hashed(),
                owner_name: a.name.clone(),
                outcome: Outcome::NotifyFailed,
                gas_used: gas,
            });
        }
    }
    Ok(encode(&delivered))
}

fn export(ctx: &mut CallContext<'_>, _args: &[u8]) -> Result<Vec<u8>, Revert> {
    ctx.charge(GasOp::CenterExport)?;
    let s = st(ctx)?;
    Ok(encode(&CenterExport {
        registry: s.registry.clone(),
        audit: s.audit.clone(),
        subscriptions: s.subscriptions.clone(),
        notifications: s.notifications.clone(),
    }))
}

fn import(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let data: CenterExport = decode(args)?;
    ctx.charge(GasOp::CenterImport)?;
    let s = st(ctx)?;
    s.registry = data.registry;
    s.audit = data.audit;
    s.subscriptions = data.subscriptions;
    s.notifications = data.notifications;
    Ok(vec![])
}

fn deactivate(ctx: &mut CallContext<'_>, _args: &[u8]) -> Result<Vec<u8>, Revert> {
    ctx.charge(GasOp::CenterDeactivate)?;
    st(ctx)?.active = false;
    Ok(vec![])
}
