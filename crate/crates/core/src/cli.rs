//! Command-line front end: `run`, `bench`, `report` and `calibrate`.
//!
//! `DEFEED_SEED`, when set, replaces the `--seed` flag.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{
    self, load_scenarios, median_throughput, report, sweep, write_file, write_report, BenchError,
    GasRow, Mode, ScenarioSpec, ThroughputStats,
};
use crate::gas::{calibrate, gas_to_usd, CalibrationError, CalibrationTargets, GasSchedule};

pub const SEED_ENV: &str = "DEFEED_SEED";
const THROUGHPUT_REPS: u64 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("{SEED_ENV}={0:?} is not an unsigned integer")]
    BadSeed(String),
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("--mode and --requesters are required without --scenario")]
    MissingScenario,
    #[error("writing output: {0}")]
    Stdout(#[from] std::io::Error),
    #[error(transparent)]
    Clap(#[from] clap::Error),
}

#[derive(Debug, Parser)]
#[command(name = "defeed", version, about = "Cross-contract data feed simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenarios and export their logs, traces and final snapshot.
    Run(ScenarioArgs),
    /// Run the gas-curve sweep and throughput measurements.
    Bench(ScenarioArgs),
    /// Re-render the CSV and summary from saved bench results.
    Report {
        /// `results.json` written by `bench`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the gas schedule against receipt targets and print it.
    Calibrate {
        /// TOML file of receipt targets; the measured table when omitted.
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// File of `[[scenario]]` stanzas.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub requesters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub window_blocks: Option<u64>,
    #[arg(long)]
    pub ttl_blocks: Option<u64>,
    /// Sample block intervals with slot misses instead of a fixed 12 s.
    #[arg(long)]
    pub jitter: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: BenchError| e.to_string())
}

/// Seed from the environment if set, else the flag, else 0.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<u64, CliError> {
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::BadSeed(v.to_string())),
        None => Ok(flag.unwrap_or(0)),
    }
}

impl ScenarioArgs {
    /// Scenarios named by `--scenario`, or the single one the flags
    /// describe. Flags given alongside a file override each stanza.
    fn scenarios(&self, env_seed: Option<&str>) -> Result<Vec<ScenarioSpec>, CliError> {
        let seed_override = match (env_seed, self.seed) {
            (None, None) => None,
            (env, flag) => Some(resolve_seed(flag, env)?),
        };
        let mut specs = match &self.scenario {
            Some(path) => load_scenarios(path)?,
            None => {
                let (Some(mode), Some(n)) = (self.mode, self.requesters) else {
                    return Err(CliError::MissingScenario);
                };
                vec![ScenarioSpec::new(mode, n, 0)]
            }
        };
        for s in &mut specs {
            if let Some(seed) = seed_override {
                s.seed = seed;
            }
            if let Some(w) = self.window_blocks {
                s.window_blocks = w;
            }
            if self.ttl_blocks.is_some() {
                s.ttl_blocks = self.ttl_blocks;
            }
            s.jitter |= self.jitter;
            s.validate()?;
        }
        Ok(specs)
    }
}

/// Everything `bench` measured, saved for `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResults {
    pub rows: Vec<GasRow>,
    pub throughput: Vec<ThroughputStats>,
}

/// Parses `args` (including the program name) and runs the command,
/// writing human-readable output to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let env_seed = std::env::var(SEED_ENV).ok();
    execute(cli.command, env_seed.as_deref(), stdout)
}

pub fn execute(
    command: Command,
    env_seed: Option<&str>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let schedule = GasSchedule::default();
    match command {
        Command::Run(args) => run_command(&args, env_seed, &schedule, stdout),
        Command::Bench(args) => bench_command(&args, env_seed, &schedule, stdout),
        Command::Report { input, out } => {
            let text = std::fs::read_to_string(&input).map_err(|source| CliError::Read {
                path: input.clone(),
                source,
            })?;
            let results: BenchResults =
                serde_json::from_str(&text).map_err(|e| CliError::Decode {
                    path: input.clone(),
                    message: e.to_string(),
                })?;
            let rep = report(&results.rows, &results.throughput)?;
            if let Some(dir) = out {
                write_report(&dir, &rep)?;
            }
            stdout.write_all(rep.summary.as_bytes())?;
            Ok(())
        }
        Command::Calibrate { targets, out } => {
            let targets = match targets {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Read {
                        path: path.clone(),
                        source,
                    })?;
                    toml::from_str(&text).map_err(|e| CliError::Decode {
                        path: path.clone(),
                        message: e.to_string(),
                    })?
                }
                None => CalibrationTargets::default(),
            };
            let schedule = calibrate(&targets)?;
            writeln!(stdout, "{:<20} {:>9}", "operation", "gas")?;
            for (op, gas) in schedule.iter() {
                writeln!(stdout, "{:<20} {:>9}", op.to_string(), gas)?;
            }
            writeln!(stdout)?;
            writeln!(stdout, "{:<20} {:>9} {:>9}", "receipt", "gas", "usd")?;
            for (label, gas) in [
                ("deploy manager", targets.deploy_manager),
                ("deploy center", targets.deploy_center),
                ("request", targets.request),
                ("single request", targets.single_request),
                ("steady request", schedule.steady_request()),
                ("normal request", targets.normal_request),
                ("cache initial", targets.cache_initial),
                ("cache subsequent", schedule.cache_hit()),
                ("subscribe", targets.subscribe),
                ("update", targets.update),
                ("pool member", schedule.pool_member()),
            ] {
                writeln!(stdout, "{label:<20} {gas:>9} {:>9.2}", gas_to_usd(gas))?;
            }
            if let Some(dir) = out {
                let json = serde_json::to_string_pretty(&schedule).expect("schedule serializes");
                write_file(&dir.join("schedule.json"), &json)?;
            }
            Ok(())
        }
    }
}

fn scenario_dir(out: &Path, spec: &ScenarioSpec, index: usize, many: bool) -> PathBuf {
    if !many {
        return out.to_path_buf();
    }
    let name = spec
        .name
        .clone()
        .unwrap_or_else(|| format!("{index:02}-{}-{}", spec.mode, spec.requestors));
    out.join(name)
}

fn run_command(
    args: &ScenarioArgs,
    env_seed: Option<&str>,
    schedule: &GasSchedule,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let specs = args.scenarios(env_seed)?;
    let many = specs.len() > 1;
    for (i, spec) in specs.iter().enumerate() {
        let run = bench::execute(spec, schedule)?;
        let net = &run.network;
        writeln!(
            stdout,
            "{} n={} seed={} gas={} usd={:.4} blocks={} stateRoot={}",
            spec.mode,
            spec.requestors,
            spec.seed,
            run.total_gas,
            gas_to_usd(run.total_gas),
            net.ledger().height(),
            net.ledger().state_root()
        )?;
        if let Some(out) = &args.out {
            let dir = scenario_dir(out, spec, i, many);
            write_file(&dir.join("audit.csv"), &net.audit_csv())?;
            write_file(&dir.join("pool.csv"), &net.pool_csv())?;
            write_file(&dir.join("cache.csv"), &net.cache_csv())?;
            write_file(&dir.join("notifications.csv"), &net.notifications_csv())?;
            write_file(&dir.join("governance.csv"), &net.governance_csv())?;
            write_file(&dir.join("trace.txt"), &net.trace_log())?;
            write_file(&dir.join("snapshot.json"), &net.ledger().export_snapshot())?;
        }
    }
    Ok(())
}

fn bench_command(
    args: &ScenarioArgs,
    env_seed: Option<&str>,
    schedule: &GasSchedule,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let specs = if args.scenario.is_some() || args.mode.is_some() {
        args.scenarios(env_seed)?
    } else {
        let seed = resolve_seed(args.seed, env_seed)?;
        let mut specs = bench::default_sweep(seed);
        for s in &mut specs {
            s.jitter = args.jitter;
            if let Some(w) = args.window_blocks {
                s.window_blocks = w;
            }
            s.ttl_blocks = args.ttl_blocks;
        }
        specs
    };
    let rows = sweep(&specs, schedule)?;

    let mut modes: Vec<Mode> = specs.iter().map(|s| s.mode).collect();
    modes.sort();
    modes.dedup();
    let ops = args.requesters.unwrap_or(30);
    let base = specs.first().cloned().expect("sweep is non-empty");
    let throughput = modes
        .into_iter()
        .map(|mode| {
            let spec = ScenarioSpec {
                name: None,
                mode,
                requestors: ops,
                jitter: true,
                ..base.clone()
            };
            median_throughput(&spec, schedule, THROUGHPUT_REPS)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let rep = report(&rows, &throughput)?;
    if let Some(dir) = &args.out {
        write_report(dir, &rep)?;
        let results = BenchResults { rows, throughput };
        let json = serde_json::to_string_pretty(&results).expect("results serialize");
        write_file(&dir.join("results.json"), &json)?;
    }
    stdout.write_all(rep.summary.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_seed_overrides_flag() {
        assert_eq!(resolve_seed(Some(3), None).unwrap(), 3);
        assert_eq!(resolve_seed(Some(3), Some("9")).unwrap(), 9);
        assert_eq!(resolve_seed(None, None).unwrap(), 0);
        assert!(matches!(
            resolve_seed(None, Some("x")),
            Err(CliError::BadSeed(_))
        ));
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "defeed",
            "run",
            "--mode",
            "pool",
            "--requesters",
            "7",
            "--seed",
            "4",
            "--window-blocks",
            "5",
            "--ttl-blocks",
            "9",
            "--jitter",
            "--out",
            "x",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!("expected run");
        };
        let specs = args.scenarios(None).unwrap();
        assert_eq!(specs[0].mode, Mode::Pool);
        assert_eq!(specs[0].requestors, 7);
        assert_eq!(specs[0].seed, 4);
        assert_eq!(specs[0].window_blocks, 5);
        assert_eq!(specs[0].ttl_blocks, Some(9));
        assert!(specs[0].jitter);
        assert_eq!(args.scenarios(Some("11")).unwrap()[0].seed, 11);
    }

    #[test]
    fn unknown_mode_is_a_cli_error() {
        let err = Cli::try_parse_from(["defeed", "run", "--mode", "turbo", "--requesters", "1"]);
        assert!(err.is_err());
    }

    #[test]
    fn run_needs_a_scenario() {
        let mut sink = Vec::new();
        let err = execute(
            Command::Run(ScenarioArgs {
                scenario: None,
                mode: None,
                requesters: None,
                seed: None,
                window_blocks: None,
                ttl_blocks: None,
                jitter: false,
                out: None,
            }),
            None,
            &mut sink,
        );
        assert!(matches!(err, Err(CliError::MissingScenario)));
    }
}
