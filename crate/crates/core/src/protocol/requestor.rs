//! A data requestor: asks the manager for a named owner's data and accepts
//! deliveries from the manager, the current center, or an owner it is
//! calling directly.

use serde::{Deserialize, Serialize};

use super::{sel, Delivery, RequestOutcome, REQUESTOR};
use crate::crypto::{Address, Selector};
use crate::gas::GasOp;
use crate::message::Body;
use crate::subscribe::Notification;
use crate::vm::{decode, encode, Behavior, CallContext, Revert};
use crate::world::ContractState;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Received {
    pub request_id: u64,
    pub name: String,
    pub body: Body,
    pub block: u64,
    pub from: Address,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestorState {
    pub operator: Address,
    pub manager: Address,
    pub received: Vec<Received>,
    pub notifications: Vec<Notification>,
    /// When set, notification handling reverts.
    pub fail_notifications: bool,
    pub direct_pending: Option<Address>,
    pub next_direct: u64,
}

pub struct RequestorBehavior;

impl Behavior for RequestorBehavior {
    fn id(&self) -> &'static str {
        REQUESTOR
    }

    fn deploy_op(&self) -> GasOp {
        GasOp::DeployRequestor
    }

    fn init(&self, deployer: Address, args: &[u8]) -> Result<Box<dyn ContractState>, Revert> {
        let manager: Address = decode(args)?;
        Ok(Box::new(RequestorState {
            operator: deployer,
            manager,
            received: Vec::new(),
            notifications: Vec::new(),
            fail_notifications: false,
            direct_pending: None,
            next_direct: 0,
        }))
    }

    fn decode_state(&self, value: serde_json::Value) -> Result<Box<dyn ContractState>, String> {
        serde_json::from_value::<RequestorState>(value)
            .map(|s| Box::new(s) as Box<dyn ContractState>)
            .map_err(|e| e.to_string())
    }

    fn dispatch(
        &self,
        ctx: &mut CallContext<'_>,
        selector: Selector,
        args: &[u8],
    ) -> Result<Vec<u8>, Revert> {
        if selector == *sel::REQUEST {
            request(ctx, args)
        } else if selector == *sel::REQUESTOR_RECEIVE {
            receive(ctx, args)
        } else if selector == *sel::SUBSCRIBE {
            relay_subscription(ctx, args, *sel::SUBSCRIBE)
        } else if selector == *sel::UNSUBSCRIBE {
            relay_subscription(ctx, args, *sel::UNSUBSCRIBE)
        } else if selector == *sel::REQUESTOR_ON_NOTIFY {
            on_notify(ctx, args)
        } else if selector == *sel::REQUESTOR_REQUEST_DIRECT {
            request_direct(ctx, args)
        } else if selector == *sel::REQUESTOR_SET_FAIL {
            let fail: bool = decode(args)?;
            operator_only(ctx)?;
            st(ctx)?.fail_notifications = fail;
            Ok(vec![])
        } else {
            Err(Revert::UnknownSelector(selector))
        }
    }
}

fn st<'c>(ctx: &'c mut CallContext<'_>) -> Result<&'c mut RequestorState, Revert> {
    ctx.state_mut::<RequestorState>()
}

fn operator_only(ctx: &mut CallContext<'_>) -> Result<(), Revert> {
    let operator = st(ctx)?.operator;
    ctx.access_only(operator)
}

fn request(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let name: String = decode(args)?;
    operator_only(ctx)?;
    ctx.charge(GasOp::RequestorRequest)?;
    if name.is_empty() {
        return Err(Revert::rejected("empty name"));
    }
    let manager = st(ctx)?.manager;
    let outcome: RequestOutcome = ctx.call_typed(manager, *sel::REQUEST, &name)?;
    Ok(encode(&outcome))
}

fn current_center(ctx: &mut CallContext<'_>) -> Result<Address, Revert> {
    let manager = st(ctx)?.manager;
    ctx.call_typed(manager, *sel::CENTER, &())
}

fn receive(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let d: Delivery = decode(args)?;
    ctx.charge(GasOp::RequestorReceive)?;
    let caller = ctx.caller();
    let s = st(ctx)?;
    let trusted = caller == s.manager || Some(caller) == s.direct_pending;
    if !trusted {
        let center = current_center(ctx)?;
        ctx.access_only(center)?;
    }
    let block = ctx.block_height();
    st(ctx)?.received.push(Received {
        request_id: d.request_id,
        name: d.name,
        body: d.body,
        block,
        from: caller,
    });
    Ok(vec![])
}

fn relay_subscription(
    ctx: &mut CallContext<'_>,
    args: &[u8],
    selector: Selector,
) -> Result<Vec<u8>, Revert> {
    let name: String = decode(args)?;
    operator_only(ctx)?;
    ctx.charge(GasOp::RequestorSubscribe)?;
    let manager = st(ctx)?.manager;
    ctx.call(manager, selector, &encode(&name))
}

fn on_notify(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let note: Notification = decode(args)?;
    ctx.charge(GasOp::SubscriberNotified)?;
    let center = current_center(ctx)?;
    ctx.access_only(center)?;
    let s = st(ctx)?;
    if s.fail_notifications {
        return Err(Revert::rejected("subscriber refused notification"));
    }
    s.notifications.push(note);
    Ok(vec![])
}

fn request_direct(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let owner: Address = decode(args)?;
    operator_only(ctx)?;
    ctx.charge(GasOp::DirectRequest)?;
    let s = st(ctx)?;
    let id = s.next_direct;
    s.next_direct += 1;
    s.direct_pending = Some(owner);
    ctx.call(owner, *sel::OWNER_RESPOND_DIRECT, &encode(&id))?;
    st(ctx)?.direct_pending = None;
    Ok(encode(&id))
}
