// Exports the chain to a structured-text snapshot, restores it, and checks
// that a replay with the same seed lands on the same blocks.

use std::error::Error;

use defeed::bench::{execute, Mode, ScenarioSpec};
use defeed::gas::GasSchedule;
use defeed::ledger::Ledger;
use defeed::protocol::protocol_vm;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let schedule = GasSchedule::default();
    let spec = ScenarioSpec::new(Mode::Pool, 8, 42).with_jitter(true);
    let first = execute(&spec, &schedule)?;
    let second = execute(&spec, &schedule)?;
    let (a, b) = (first.network.ledger(), second.network.ledger());
    assert_eq!(a.head(), b.head());
    println!("replayed head {} at height {}", a.head(), a.height());

    let text = a.export_snapshot();
    let restored = Ledger::import_snapshot(&text, protocol_vm(schedule))?;
    assert_eq!(restored.state_root(), a.state_root());
    println!(
        "snapshot of {} bytes restores root {}",
        text.len(),
        restored.state_root()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
