//! A contract that relays arbitrary calls, used to attack access control.

use serde::{Deserialize, Serialize};

use super::{sel, PROBE};
use crate::crypto::{Address, Selector};
use crate::gas::GasOp;
use crate::vm::{decode, Behavior, CallContext, Revert};
use crate::world::ContractState;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeState {
    pub relayed: u64,
}

pub struct ProbeBehavior;

impl Behavior for ProbeBehavior {
    fn id(&self) -> &'static str {
        PROBE
    }

    fn deploy_op(&self) -> GasOp {
        GasOp::DeployProbe
    }

    fn init(&self, _deployer: Address, _args: &[u8]) -> Result<Box<dyn ContractState>, Revert> {
        Ok(Box::new(ProbeState::default()))
    }

    fn decode_state(&self, value: serde_json::Value) -> Result<Box<dyn ContractState>, String> {
        serde_json::from_value::<ProbeState>(value)
            .map(|s| Box::new(s) as Box<dyn ContractState>)
            .map_err(|e| e.to_string())
    }

    fn dispatch(
        &self,
        ctx: &mut CallContext<'_>,
        selector: Selector,
        args: &[u8],
    ) -> Result<Vec<u8>, Revert> {
        if selector != *sel::POKE {
            return Err(Revert::UnknownSelector(selector));
        }
        let (target, inner, payload): (Address, Selector, Vec<u8>) = decode(args)?;
        ctx.charge(GasOp::ProbeCall)?;
        ctx.state_mut::<ProbeState>()?.relayed += 1;
        ctx.call(target, inner, &payload)
    }
}
