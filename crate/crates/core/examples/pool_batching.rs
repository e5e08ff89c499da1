// Three requests for one owner inside a window are forwarded once and
// answered together when the window closes.

use std::error::Error;

use defeed::network::{Network, NetworkConfig};
use defeed::pool::PoolConfig;
use defeed::protocol::ManagerConfig;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut net = Network::new(NetworkConfig {
        manager: ManagerConfig {
            pool: Some(PoolConfig::default()),
            ..ManagerConfig::default()
        },
        ..NetworkConfig::default()
    })?;
    net.add_owner("grid.load", b"mw=412".to_vec(), vec![])?;
    let rs = net.add_requestors(3)?;
    println!(
        "pooled tuple t = {:?}",
        net.center_state().registry.lookup("grid.load").t
    );

    let mut digests = Vec::new();
    for r in &rs {
        digests.push(net.submit_request(*r, "grid.load")?);
        net.step()?;
    }
    net.step_n(3)?;
    for (r, d) in rs.iter().zip(&digests) {
        let receipt = net.receipt(d).expect("included");
        let got = &net.requestor_state(*r).received[0];
        println!(
            "requestor {r}: request gas {}, answered at block {}",
            receipt.gas_used, got.block
        );
    }
    let stat = &net.manager_state().pool_log[0];
    assert_eq!(stat.batch_size, 3);
    println!("window gas {} (fee-free flush)", net.system_gas());
    print!("{}", net.pool_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
