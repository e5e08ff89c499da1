// Measures each protocol interaction's receipt gas and its dollar cost.

use std::error::Error;

use defeed::cache::CacheConfig;
use defeed::gas::gas_to_usd;
use defeed::governance::Action;
use defeed::network::{Network, NetworkConfig};
use defeed::protocol::{ManagerConfig, CENTER, MANAGER};

pub fn run_example() -> Result<Vec<(&'static str, u64)>, Box<dyn Error>> {
    let mut net = Network::new(NetworkConfig::default())?;
    let mut rows = vec![
        (
            "deploy manager",
            net.deploy_receipt(MANAGER).map_or(0, |r| r.gas_used),
        ),
        (
            "deploy center",
            net.deploy_receipt(CENTER).map_or(0, |r| r.gas_used),
        ),
    ];
    let a = net.add_owner("vehicle1", b"lat=52.1;lon=4.3".to_vec(), vec![])?;
    net.add_owner("vehicle2", b"speed=88".to_vec(), vec![3, 1])?;
    let r = net.add_requestors(2)?;
    rows.push(("first request", net.request(r[0], "vehicle1")?.gas_used));
    rows.push(("steady request", net.request(r[1], "vehicle1")?.gas_used));
    rows.push(("request", net.request(r[0], "vehicle2")?.gas_used));
    rows.push(("normal request", net.request_direct(r[0], a)?.gas_used));
    rows.push(("subscribe", net.subscribe(r[1], "vehicle2")?.gas_used));
    let fresh = net.deploy_center()?;
    rows.push(("update", net.govern(Action::UpdateCenter(fresh))?.gas_used));

    let mut cached = Network::new(NetworkConfig {
        manager: ManagerConfig {
            cache: Some(CacheConfig::default()),
            ..ManagerConfig::default()
        },
        ..NetworkConfig::default()
    })?;
    cached.add_owner("vehicle1", b"lat=52.1;lon=4.3".to_vec(), vec![])?;
    let c = cached.add_requestors(2)?;
    rows.push(("cache initial", cached.request(c[0], "vehicle1")?.gas_used));
    rows.push((
        "cache subsequent",
        cached.request(c[1], "vehicle1")?.gas_used,
    ));

    for (label, gas) in &rows {
        println!("{label:<18} {gas:>9}  ${:.2}", gas_to_usd(*gas));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
