// Subscribers receive only the changed components of an owner's state.

use std::error::Error;

use defeed::network::{Network, NetworkConfig};
use defeed::subscribe::{compute_delta, StateVector};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut net = Network::new(NetworkConfig::default())?;
    net.add_owner("plant.sensors", vec![], vec![20, 55, 1013])?;
    let rs = net.add_requestors(2)?;
    for r in &rs {
        println!(
            "subscribe gas {}",
            net.subscribe(*r, "plant.sensors")?.gas_used
        );
    }

    net.set_state("plant.sensors", vec![21, 55, 1009])?;
    let expected = compute_delta(
        &StateVector(vec![20, 55, 1013]),
        &StateVector(vec![21, 55, 1009]),
    )?;
    for r in &rs {
        let note = &net.requestor_state(*r).notifications[0];
        assert_eq!(note.changes, expected);
        println!("{r} got {:?}", note.changes);
    }

    net.unsubscribe(rs[1], "plant.sensors")?;
    net.set_state("plant.sensors", vec![21, 56, 1009])?;
    assert_eq!(net.requestor_state(rs[1]).notifications.len(), 1);
    print!("{}", net.notifications_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
