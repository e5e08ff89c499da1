// Total gas per mode for 1 to 100 requestors, with savings against plain
// protocol requests.

use std::error::Error;

use defeed::bench::{report, sweep, Mode, ScenarioSpec, CURVE_SIZES};
use defeed::gas::GasSchedule;

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let specs: Vec<ScenarioSpec> = [Mode::Defeed, Mode::Pool, Mode::Cache]
        .into_iter()
        .flat_map(|m| CURVE_SIZES.map(|n| ScenarioSpec::new(m, n, 0)))
        .collect();
    let rows = sweep(&specs, &GasSchedule::default())?;
    let rep = report(&rows, &[])?;
    print!("{}", rep.summary);
    Ok(rep.gas_curve_csv)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
