// A relaying contract tries to reach the center and an owner directly;
// both calls revert and the trace shows where.

use std::error::Error;

use defeed::network::{Network, NetworkConfig};
use defeed::protocol::{sel, ForwardArgs};
use defeed::vm::{encode, format_trace};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut net = Network::new(NetworkConfig::default())?;
    let owner = net.add_owner("lab.secret", b"k=42".to_vec(), vec![])?;
    let probe = net.deploy_probe()?;
    let center = net.center();
    let key = net.client().clone();

    let forward = ForwardArgs {
        name: "lab.secret".into(),
        recipients: vec![],
        aggregate: None,
        delay: None,
    };
    let to_center = net.transact(
        &key,
        probe,
        *sel::POKE,
        encode(&(center, *sel::CENTER_FORWARD, encode(&forward))),
    )?;
    println!("probe -> center.forward: {:?}", to_center.revert);
    print!("{}", format_trace(&to_center.trace));

    let to_owner = net.transact(
        &key,
        probe,
        *sel::POKE,
        encode(&(owner, *sel::OWNER_REPLY, encode(&"lab.secret"))),
    )?;
    println!("probe -> owner.reply: {:?}", to_owner.revert);
    print!("{}", format_trace(&to_owner.trace));
    assert!(!to_center.succeeded() && !to_owner.succeeded());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
