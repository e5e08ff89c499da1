// Registers an owner, serves a request end to end, and shows the
// registry tuple, the message sequence and the audit log.

use std::error::Error;

use defeed::message::{Body, NAME_MISSING};
use defeed::network::{Network, NetworkConfig};
use defeed::protocol::RequestOutcome;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut net = Network::new(NetworkConfig::default())?;
    net.add_owner("weather.ams", b"wind=5bft".to_vec(), vec![])?;
    let tuple = net.center_state().registry.lookup("weather.ams");
    println!("registered: x={} y={} t={:?}", tuple.x, tuple.y, tuple.t);

    let r = net.add_requestor()?;
    let receipt = net.request(r, "weather.ams")?;
    println!(
        "outcome {:?}, gas {}",
        Network::request_outcome(&receipt),
        receipt.gas_used
    );
    for m in &receipt.emitted_messages {
        println!("  {:?} {}", m.interaction(), m.name);
    }
    let got = &net.requestor_state(r).received[0];
    assert_eq!(got.body, Body::Data(b"wind=5bft".to_vec()));

    let missing = net.request(r, "weather.nowhere")?;
    assert!(matches!(
        Network::request_outcome(&missing),
        Some(RequestOutcome::NameMissing(_))
    ));
    let last = net.requestor_state(r).received.last().expect("delivered");
    assert_eq!(last.body, Body::Error(NAME_MISSING.to_string()));
    println!("unregistered name answered with {NAME_MISSING:?}");

    print!("{}", net.audit_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
