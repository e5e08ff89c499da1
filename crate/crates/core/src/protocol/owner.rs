//! A data owner: holds a payload and a state vector, answers the center's
//! queries and publishes changes through the manager.

use serde::{Deserialize, Serialize};

use super::{sel, Delivery, OWNER};
use crate::crypto::{Address, Selector};
use crate::gas::GasOp;
use crate::message::{Body, Interaction, ProtocolMessage};
use crate::subscribe::StateVector;
use crate::vm::{decode, encode, Behavior, CallContext, Revert};
use crate::world::ContractState;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnerInit {
    pub manager: Address,
    pub payload: Vec<u8>,
    /// Numeric state; leave empty to expose the payload digest instead.
    pub state: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnerState {
    pub operator: Address,
    pub manager: Address,
    pub name: Option<String>,
    pub payload: Vec<u8>,
    pub state: Vec<i64>,
}

impl OwnerState {
    /// The vector subscribers see.
    pub fn observable(&self) -> StateVector {
        if self.state.is_empty() {
            StateVector::from_payload(&self.payload)
        } else {
            StateVector(self.state.clone())
        }
    }
}

pub struct OwnerBehavior;

impl Behavior for OwnerBehavior {
    fn id(&self) -> &'static str {
        OWNER
    }

    fn deploy_op(&self) -> GasOp {
        GasOp::DeployOwner
    }

    fn init(&self, deployer: Address, args: &[u8]) -> Result<Box<dyn ContractState>, Revert> {
        let init: OwnerInit = decode(args)?;
        Ok(Box::new(OwnerState {
            operator: deployer,
            manager: init.manager,
            name: None,
            payload: init.payload,
            state: init.state,
        }))
    }

    fn decode_state(&self, value: serde_json::Value) -> Result<Box<dyn ContractState>, String> {
        serde_json::from_value::<OwnerState>(value)
            .map(|s| Box::new(s) as Box<dyn ContractState>)
            .map_err(|e| e.to_string())
    }

    fn dispatch(
        &self,
        ctx: &mut CallContext<'_>,
        selector: Selector,
        args: &[u8],
    ) -> Result<Vec<u8>, Revert> {
        if selector == *sel::OWNER_REPLY {
            reply(ctx, args)
        } else if selector == *sel::OWNER_RESPOND_DIRECT {
            respond_direct(ctx, args)
        } else if selector == *sel::OWNER_REGISTER {
            register(ctx, args)
        } else if selector == *sel::OWNER_SET_PAYLOAD {
            let payload: Vec<u8> = decode(args)?;
            update(ctx, |s| s.payload = payload)
        } else if selector == *sel::OWNER_SET_STATE {
            let state: Vec<i64> = decode(args)?;
            update(ctx, |s| s.state = state)
        } else {
            Err(Revert::UnknownSelector(selector))
        }
    }
}

fn st<'c>(ctx: &'c mut CallContext<'_>) -> Result<&'c mut OwnerState, Revert> {
    ctx.state_mut::<OwnerState>()
}

fn operator_only(ctx: &mut CallContext<'_>) -> Result<(), Revert> {
    let operator = st(ctx)?.operator;
    ctx.access_only(operator)
}

fn register(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let name: String = decode(args)?;
    operator_only(ctx)?;
    ctx.charge(GasOp::OwnerRegister)?;
    let s = st(ctx)?;
    let (manager, observable) = (s.manager, s.observable());
    s.name = Some(name.clone());
    ctx.call(
        manager,
        *sel::REGISTER_OWNER,
        &encode(&(name, observable.0)),
    )
}

fn update(
    ctx: &mut CallContext<'_>,
    apply: impl FnOnce(&mut OwnerState),
) -> Result<Vec<u8>, Revert> {
    operator_only(ctx)?;
    ctx.charge(GasOp::OwnerPublish)?;
    let s = st(ctx)?;
    apply(s);
    let (manager, name, observable) = (s.manager, s.name.clone(), s.observable());
    match name {
        Some(name) => ctx.call(manager, *sel::PUBLISH, &encode(&(name, observable.0))),
        None => Ok(encode(&0u32)),
    }
}

fn reply(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let name: String = decode(args)?;
    ctx.charge(GasOp::OwnerReply)?;
    let manager = st(ctx)?.manager;
    let center: Address = ctx.call_typed(manager, *sel::CENTER, &())?;
    ctx.access_only(center)?;
    let s = st(ctx)?;
    // owners registered by the committee never learn their name
    if s.name.as_ref().is_some_and(|held| *held != name) {
        return Err(Revert::rejected(
            "query for a name this owner does not hold",
        ));
    }
    let payload = s.payload.clone();
    ctx.emit(
        ProtocolMessage::new(Interaction::Reply, &name).with_body(Body::Data(payload.clone())),
    );
    Ok(encode(&payload))
}

fn respond_direct(ctx: &mut CallContext<'_>, args: &[u8]) -> Result<Vec<u8>, Revert> {
    let request_id: u64 = decode(args)?;
    ctx.charge(GasOp::DirectResponse)?;
    let s = st(ctx)?;
    let delivery = Delivery {
        request_id,
        name: s.name.clone().unwrap_or_default(),
        body: Body::Data(s.payload.clone()),
    };
    let caller = ctx.caller();
    ctx.call(caller, *sel::REQUESTOR_RECEIVE, &encode(&delivery))
}
