// A committee majority swaps the center; the registry moves with it and
// the retired center refuses further protocol calls.

use std::error::Error;

use defeed::governance::Action;
use defeed::network::{Network, NetworkConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut net = Network::new(NetworkConfig {
        committee_size: 5,
        ..NetworkConfig::default()
    })?;
    net.add_owner("port.berths", b"free=3".to_vec(), vec![])?;
    let r = net.add_requestor()?;
    net.request(r, "port.berths")?;
    let old = net.center();
    let fresh = net.deploy_center()?;

    // two of five is a minority: execution is refused
    let (_, id) = net.propose(0, Action::UpdateCenter(fresh))?;
    let id = id.expect("proposal accepted");
    net.approve(1, id)?;
    let early = net.execute(0, id)?;
    println!("with 2/5 approvals: {:?}", early.revert);
    assert_eq!(net.center(), old);

    net.approve(2, id)?;
    let done = net.execute(0, id)?;
    println!("with 3/5 approvals: gas {}", done.gas_used);
    assert_eq!(net.center(), fresh);
    assert!(!net.center_state_at(old).active);
    assert!(net.center_state().registry.entry("port.berths").is_some());

    let again = net.request(r, "port.berths")?;
    println!("request through the new center: gas {}", again.gas_used);
    print!("{}", net.governance_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
