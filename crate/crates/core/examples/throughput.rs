// Sequential submission against a chain whose proposers sometimes miss
// their 12 s slot.

use std::error::Error;

use defeed::bench::{median_throughput, Mode, ScenarioSpec};
use defeed::gas::GasSchedule;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let schedule = GasSchedule::default();
    for mode in [Mode::Pool, Mode::Cache, Mode::Subscribe, Mode::Update] {
        let spec = ScenarioSpec::new(mode, 12, 1).with_jitter(true);
        let t = median_throughput(&spec, &schedule, 3)?;
        println!(
            "{mode:<9} tps {:.3}  latency {:.1}s  confirmation {:.0}-{:.0}s",
            t.tps,
            t.mean_latency_ms / 1000.0,
            t.min_confirmation_ms as f64 / 1000.0,
            t.max_confirmation_ms as f64 / 1000.0
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
