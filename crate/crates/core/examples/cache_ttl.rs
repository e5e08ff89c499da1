// The manager caches the first answer, serves later requests from it,
// evicts after the TTL and drops the entry when the owner publishes.

use std::error::Error;

use defeed::cache::CacheConfig;
use defeed::network::{Network, NetworkConfig};
use defeed::protocol::ManagerConfig;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut net = Network::new(NetworkConfig {
        manager: ManagerConfig {
            cache: Some(CacheConfig {
                ttl_blocks: Some(5),
            }),
            ..ManagerConfig::default()
        },
        ..NetworkConfig::default()
    })?;
    net.add_owner("fx.eurusd", b"1.0842".to_vec(), vec![])?;
    let rs = net.add_requestors(4)?;

    println!("miss  {}", net.request(rs[0], "fx.eurusd")?.gas_used);
    println!("hit   {}", net.request(rs[1], "fx.eurusd")?.gas_used);
    net.step_n(6)?;
    println!("after ttl {}", net.request(rs[2], "fx.eurusd")?.gas_used);
    net.set_payload("fx.eurusd", b"1.0851".to_vec())?;
    let fresh = net.request(rs[3], "fx.eurusd")?;
    println!("after publish {}", fresh.gas_used);
    assert_eq!(
        net.requestor_state(rs[3]).received[0].body,
        defeed::message::Body::Data(b"1.0851".to_vec())
    );
    print!("{}", net.cache_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
