//! Experiment scenarios: gas curves per mode, throughput under a timed
//! chain, and the CSV/summary report.
//!
//! Gas-curve CSV columns, in order: `mode,n,totalGas,totalUSD,savingPct`.
//! Throughput CSV columns, in order: `mode,ops,txs,tps,meanLatencyMs,
//! medianLatencyMs,p95LatencyMs,minConfirmationMs,maxConfirmationMs,meanGas`.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::CacheConfig;
use crate::crypto::Address;
use crate::gas::{gas_to_usd, GasSchedule};
use crate::governance::Action;
use crate::ledger::{ChainConfig, Jitter, Receipt};
use crate::network::{Network, NetworkConfig, NetworkError};
use crate::pool::PoolConfig;
use crate::protocol::{sel, ManagerConfig};
use crate::vm::encode;

/// Requestor counts of the published gas curves.
pub const CURVE_SIZES: [usize; 6] = [1, 5, 10, 20, 50, 100];
/// Blocks over which pool-mode arrivals are spread.
pub const ARRIVAL_HORIZON_BLOCKS: u64 = 120;
const GOLDEN_STEP: f64 = 0.618_033_988_749_894_8;
const FEED_NAME: &str = "feed";
const FEED_PAYLOAD: &[u8] = b"temperature=21.5;humidity=40";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
    #[error("scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("report needs at least one scenario row")]
    EmptyReport,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Requestors call the owner directly, bypassing the protocol.
    Normal,
    Defeed,
    Pool,
    Cache,
    Subscribe,
    /// Plain requests with one committee-driven center replacement midway.
    Update,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Normal,
        Mode::Defeed,
        Mode::Pool,
        Mode::Cache,
        Mode::Subscribe,
        Mode::Update,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Normal => "normal",
            Mode::Defeed => "defeed",
            Mode::Pool => "pool",
            Mode::Cache => "cache",
            Mode::Subscribe => "subscribe",
            Mode::Update => "update",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| BenchError::UnknownMode(s.to_string()))
    }
}

fn default_window() -> u64 {
    PoolConfig::default().window_blocks
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mode: Mode,
    pub requestors: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jitter: bool,
    #[serde(default = "default_window")]
    pub window_blocks: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttl_blocks: Option<u64>,
}

impl ScenarioSpec {
    pub fn new(mode: Mode, requestors: usize, seed: u64) -> Self {
        ScenarioSpec {
            name: None,
            mode,
            requestors,
            seed,
            jitter: false,
            window_blocks: default_window(),
            ttl_blocks: None,
        }
    }

    pub fn with_jitter(mut self, jitter: bool) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.requestors == 0 {
            return Err(BenchError::InvalidSpec(
                "requestors must be at least 1".into(),
            ));
        }
        if self.window_blocks == 0 {
            return Err(BenchError::InvalidSpec(
                "window_blocks must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn network_config(&self, schedule: &GasSchedule) -> NetworkConfig {
        let manager = ManagerConfig {
            pool: (self.mode == Mode::Pool).then(|| PoolConfig {
                window_blocks: self.window_blocks,
                ..PoolConfig::default()
            }),
            cache: (self.mode == Mode::Cache).then_some(CacheConfig {
                ttl_blocks: self.ttl_blocks,
            }),
        };
        let chain = ChainConfig {
            jitter: if self.jitter {
                Jitter::testnet()
            } else {
                Jitter::Fixed
            },
            ..ChainConfig::default()
        };
        NetworkConfig {
            chain,
            schedule: schedule.clone(),
            manager,
            seed: self.seed,
            ..NetworkConfig::default()
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    scenario: Vec<ScenarioSpec>,
}

/// Parses `[[scenario]]` stanzas.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioSpec>, BenchError> {
    let file: ScenarioFile = toml::from_str(text)?;
    for s in &file.scenario {
        s.validate()?;
    }
    Ok(file.scenario)
}

pub fn load_scenarios(path: &Path) -> Result<Vec<ScenarioSpec>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenarios(&text)
}

/// Every mode at every published requestor count.
pub fn default_sweep(seed: u64) -> Vec<ScenarioSpec> {
    Mode::ALL
        .into_iter()
        .flat_map(|m| CURVE_SIZES.map(|n| ScenarioSpec::new(m, n, seed)))
        .collect()
}

/// Arrival block (relative to the start of the run) of each of `n`
/// requests: a golden-ratio low-discrepancy sequence with a seeded offset,
/// spread over [`ARRIVAL_HORIZON_BLOCKS`].
pub fn pool_arrivals(n: usize, seed: u64) -> Vec<u64> {
    let offset: f64 = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9).gen();
    (0..n)
        .map(|i| {
            let u = (offset + i as f64 * GOLDEN_STEP).fract();
            ((u * ARRIVAL_HORIZON_BLOCKS as f64) as u64).min(ARRIVAL_HORIZON_BLOCKS - 1)
        })
        .collect()
}

/// A finished scenario together with the network it ran on.
#[derive(Debug)]
pub struct ScenarioRun {
    pub spec: ScenarioSpec,
    pub total_gas: u64,
    /// Gas of each measured transaction, in submission order.
    pub tx_gas: Vec<u64>,
    /// Gas of fee-free block hooks (pool flushes).
    pub system_gas: u64,
    pub network: Network,
}

fn fail_on_revert(r: &Receipt, what: &str) -> Result<(), BenchError> {
    match &r.revert {
        None => Ok(()),
        Some(revert) => Err(NetworkError::Reverted {
            what: what.to_string(),
            revert: revert.clone(),
        }
        .into()),
    }
}

/// Submits one request per requestor, then mines until all are included.
fn request_all(net: &mut Network, requestors: &[Address]) -> Result<Vec<Receipt>, BenchError> {
    let digests = requestors
        .iter()
        .map(|r| net.submit_request(*r, FEED_NAME))
        .collect::<Result<Vec<_>, _>>()?;
    digests
        .into_iter()
        .map(|d| net.wait_for(d).map_err(BenchError::from))
        .collect()
}

/// Deploys the protocol and runs the mode's request pattern.
pub fn execute(spec: &ScenarioSpec, schedule: &GasSchedule) -> Result<ScenarioRun, BenchError> {
    spec.validate()?;
    let mut net = Network::new(spec.network_config(schedule))?;
    let owner = net.add_owner(FEED_NAME, FEED_PAYLOAD.to_vec(), vec![])?;
    let requestors = net.add_requestors(spec.requestors)?;
    let hooks_before = net.system_gas();
    let mut receipts = Vec::new();

    match spec.mode {
        Mode::Normal => {
            let key = net.client().clone();
            let digests = requestors
                .iter()
                .map(|r| net.submit(&key, *r, *sel::REQUESTOR_REQUEST_DIRECT, encode(&owner)))
                .collect::<Result<Vec<_>, _>>()?;
            for d in digests {
                receipts.push(net.wait_for(d)?);
            }
        }
        Mode::Defeed | Mode::Cache => receipts = request_all(&mut net, &requestors)?,
        Mode::Pool => {
            let start = net.ledger().height() + 1;
            let arrivals = pool_arrivals(spec.requestors, spec.seed);
            let mut digests = Vec::with_capacity(arrivals.len());
            for block in 0..ARRIVAL_HORIZON_BLOCKS {
                for (i, _) in arrivals.iter().enumerate().filter(|(_, b)| **b == block) {
                    digests.push(net.submit_request(requestors[i], FEED_NAME)?);
                }
                debug_assert_eq!(net.ledger().height() + 1, start + block);
                net.step()?;
            }
            net.step_n(spec.window_blocks + 1)?;
            for d in digests {
                receipts.push(net.wait_for(d)?);
            }
        }
        Mode::Subscribe => {
            let key = net.client().clone();
            let digests = requestors
                .iter()
                .map(|r| net.submit(&key, *r, *sel::SUBSCRIBE, encode(&FEED_NAME)))
                .collect::<Result<Vec<_>, _>>()?;
            for d in digests {
                receipts.push(net.wait_for(d)?);
            }
            receipts.push(net.set_payload(FEED_NAME, b"temperature=22.0;humidity=41".to_vec())?);
        }
        Mode::Update => {
            let fresh = net.deploy_center()?;
            let half = requestors.len() / 2;
            receipts.extend(request_all(&mut net, &requestors[..half])?);
            let (proposal, id) = net.propose(0, Action::UpdateCenter(fresh))?;
            fail_on_revert(&proposal, "propose update")?;
            let id = id.expect("successful proposal returns its id");
            receipts.push(proposal);
            let threshold = net.manager_state().committee.threshold();
            for m in 1..threshold {
                receipts.push(net.approve(m, id)?);
            }
            receipts.push(net.execute(0, id)?);
            receipts.extend(request_all(&mut net, &requestors[half..])?);
        }
    }

    for r in &receipts {
        fail_on_revert(r, spec.mode.as_str())?;
    }
    let tx_gas: Vec<u64> = receipts.iter().map(|r| r.gas_used).collect();
    let system_gas = net.system_gas() - hooks_before;
    Ok(ScenarioRun {
        spec: spec.clone(),
        total_gas: tx_gas.iter().sum::<u64>() + system_gas,
        tx_gas,
        system_gas,
        network: net,
    })
}

/// One gas-curve point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasRow {
    pub mode: Mode,
    pub n: usize,
    pub total_gas: u64,
    /// Total of plain protocol requests at the same `n`.
    pub baseline_gas: u64,
}

impl GasRow {
    pub fn total_usd(&self) -> f64 {
        gas_to_usd(self.total_gas)
    }

    pub fn saving_pct(&self) -> f64 {
        if self.baseline_gas == 0 {
            return 0.0;
        }
        (1.0 - self.total_gas as f64 / self.baseline_gas as f64) * 100.0
    }
}

/// The plain-protocol scenario a row's saving is measured against.
fn baseline_of(spec: &ScenarioSpec) -> ScenarioSpec {
    ScenarioSpec {
        name: None,
        mode: Mode::Defeed,
        window_blocks: default_window(),
        ttl_blocks: None,
        ..spec.clone()
    }
}

/// Runs a scenario and its plain-protocol baseline.
pub fn run_scenario(spec: &ScenarioSpec, schedule: &GasSchedule) -> Result<GasRow, BenchError> {
    Ok(sweep(std::slice::from_ref(spec), schedule)?.remove(0))
}

/// Runs independent scenarios in parallel, each baseline once; rows keep
/// input order.
pub fn sweep(specs: &[ScenarioSpec], schedule: &GasSchedule) -> Result<Vec<GasRow>, BenchError> {
    let mut jobs: Vec<ScenarioSpec> = specs.to_vec();
    for s in specs {
        let b = baseline_of(s);
        if !jobs.contains(&b) {
            jobs.push(b);
        }
    }
    let totals = jobs
        .par_iter()
        .map(|s| execute(s, schedule).map(|r| r.total_gas))
        .collect::<Result<Vec<u64>, _>>()?;
    Ok(specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let b = baseline_of(s);
            let j = jobs.iter().position(|j| *j == b).expect("baseline queued");
            GasRow {
                mode: s.mode,
                n: s.requestors,
                total_gas: totals[i],
                baseline_gas: totals[j],
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputStats {
    pub mode: Mode,
    /// Logical operations completed (a request, a subscribe-and-publish, a
    /// full governance update).
    pub ops: usize,
    pub txs: usize,
    /// Operations per second of wall-clock chain time.
    pub tps: f64,
    pub mean_latency_ms: f64,
    pub median_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub min_confirmation_ms: u64,
    pub max_confirmation_ms: u64,
    pub mean_gas: f64,
}

fn percentile(sorted: &[u64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank.min(sorted.len() - 1)] as f64
}

/// Submits each operation's transactions one at a time, waiting for
/// inclusion before the next, and measures confirmation delays.
///
/// The block clock is reseeded from `spec.seed` after setup, so runs of
/// different modes with equal seeds see the same interval sequence.
pub fn run_throughput(
    spec: &ScenarioSpec,
    schedule: &GasSchedule,
) -> Result<ThroughputStats, BenchError> {
    spec.validate()?;
    let mut net = Network::new(spec.network_config(schedule))?;
    let owner = net.add_owner(FEED_NAME, FEED_PAYLOAD.to_vec(), vec![])?;
    let requestors = net.add_requestors(spec.requestors)?;
    let mut centers = Vec::new();
    if spec.mode == Mode::Update {
        for _ in 0..spec.requestors {
            centers.push(net.deploy_center()?);
        }
    }
    net.reseed_clock(spec.seed);
    let threshold = net.manager_state().committee.threshold();

    let started_ms = net.now_ms();
    let mut receipts: Vec<Receipt> = Vec::new();
    for (i, r) in requestors.iter().enumerate() {
        match spec.mode {
            Mode::Normal => receipts.push(net.request_direct(*r, owner)?),
            Mode::Defeed | Mode::Pool | Mode::Cache => receipts.push(net.request(*r, FEED_NAME)?),
            Mode::Subscribe => {
                receipts.push(net.subscribe(*r, FEED_NAME)?);
                let payload = format!("temperature={i}").into_bytes();
                receipts.push(net.set_payload(FEED_NAME, payload)?);
            }
            Mode::Update => {
                let (proposal, id) = net.propose(0, Action::UpdateCenter(centers[i]))?;
                fail_on_revert(&proposal, "propose update")?;
                let id = id.expect("successful proposal returns its id");
                receipts.push(proposal);
                for m in 1..threshold {
                    receipts.push(net.approve(m, id)?);
                }
                receipts.push(net.execute(0, id)?);
            }
        }
    }
    for r in &receipts {
        fail_on_revert(r, spec.mode.as_str())?;
    }
    let finished_ms = receipts.last().map_or(started_ms, |r| r.included_ms);

    let mut delays: Vec<u64> = receipts
        .iter()
        .map(|r| r.included_ms - r.submitted_ms)
        .collect();
    delays.sort_unstable();
    let txs = receipts.len();
    let elapsed_s = (finished_ms - started_ms) as f64 / 1000.0;
    Ok(ThroughputStats {
        mode: spec.mode,
        ops: requestors.len(),
        txs,
        tps: if elapsed_s > 0.0 {
            requestors.len() as f64 / elapsed_s
        } else {
            0.0
        },
        mean_latency_ms: delays.iter().sum::<u64>() as f64 / txs.max(1) as f64,
        median_latency_ms: percentile(&delays, 0.5),
        p95_latency_ms: percentile(&delays, 0.95),
        min_confirmation_ms: delays.first().copied().unwrap_or(0),
        max_confirmation_ms: delays.last().copied().unwrap_or(0),
        mean_gas: receipts.iter().map(|r| r.gas_used).sum::<u64>() as f64 / txs.max(1) as f64,
    })
}

/// Repeats [`run_throughput`] over seeds `seed..seed + reps` and returns the
/// run with the median TPS.
pub fn median_throughput(
    spec: &ScenarioSpec,
    schedule: &GasSchedule,
    reps: u64,
) -> Result<ThroughputStats, BenchError> {
    let mut runs = (0..reps.max(1))
        .into_par_iter()
        .map(|k| {
            let s = ScenarioSpec {
                seed: spec.seed.wrapping_add(k),
                ..spec.clone()
            };
            run_throughput(&s, schedule)
        })
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|a, b| a.tps.total_cmp(&b.tps));
    Ok(runs.swap_remove(runs.len() / 2))
}

/// Rendered report files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub gas_curve_csv: String,
    pub throughput_csv: Option<String>,
    pub summary: String,
}

pub fn report(rows: &[GasRow], throughput: &[ThroughputStats]) -> Result<Report, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mode", "n", "totalGas", "totalUSD", "savingPct"])?;
    for r in rows {
        w.write_record([
            r.mode.to_string(),
            r.n.to_string(),
            r.total_gas.to_string(),
            format!("{:.4}", r.total_usd()),
            format!("{:.2}", r.saving_pct()),
        ])?;
    }
    let gas_curve_csv = csv_string(w)?;

    let throughput_csv = if throughput.is_empty() {
        None
    } else {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "mode",
            "ops",
            "txs",
            "tps",
            "meanLatencyMs",
            "medianLatencyMs",
            "p95LatencyMs",
            "minConfirmationMs",
            "maxConfirmationMs",
            "meanGas",
        ])?;
        for t in throughput {
            w.write_record([
                t.mode.to_string(),
                t.ops.to_string(),
                t.txs.to_string(),
                format!("{:.4}", t.tps),
                format!("{:.1}", t.mean_latency_ms),
                format!("{:.1}", t.median_latency_ms),
                format!("{:.1}", t.p95_latency_ms),
                t.min_confirmation_ms.to_string(),
                t.max_confirmation_ms.to_string(),
                format!("{:.1}", t.mean_gas),
            ])?;
        }
        Some(csv_string(w)?)
    };

    let mut summary = String::new();
    let _ = writeln!(summary, "{} scenario rows", rows.len());
    for r in rows {
        let _ = writeln!(
            summary,
            "{:<9} n={:<4} gas={:>10} usd={:>9.4} saving={:>6.2}%",
            r.mode.as_str(),
            r.n,
            r.total_gas,
            r.total_usd(),
            r.saving_pct()
        );
    }
    for t in throughput {
        let _ = writeln!(
            summary,
            "{:<9} tps={:.4} latency mean={:.1}s p95={:.1}s confirmation {:.1}-{:.1}s mean gas={:.0}",
            t.mode.as_str(),
            t.tps,
            t.mean_latency_ms / 1000.0,
            t.p95_latency_ms / 1000.0,
            t.min_confirmation_ms as f64 / 1000.0,
            t.max_confirmation_ms as f64 / 1000.0,
            t.mean_gas
        );
    }
    Ok(Report {
        gas_curve_csv,
        throughput_csv,
        summary,
    })
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, BenchError> {
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv fields are utf-8"))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), BenchError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| BenchError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `gas_curve.csv`, `throughput.csv` (when present) and
/// `summary.txt` into `dir`.
pub fn write_report(dir: &Path, report: &Report) -> Result<(), BenchError> {
    write_file(&dir.join("gas_curve.csv"), &report.gas_curve_csv)?;
    if let Some(t) = &report.throughput_csv {
        write_file(&dir.join("throughput.csv"), t)?;
    }
    write_file(&dir.join("summary.txt"), &report.summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_file_rejects_unknown_keys() {
        let ok = "[[scenario]]\nmode = \"pool\"\nrequestors = 5\n";
        let specs = parse_scenarios(ok).unwrap();
        assert_eq!(specs[0].mode, Mode::Pool);
        assert_eq!(specs[0].window_blocks, 3);
        let bad = "[[scenario]]\nmode = \"pool\"\nrequestors = 5\ncolour = 1\n";
        assert!(matches!(parse_scenarios(bad), Err(BenchError::Parse(_))));
        let zero = "[[scenario]]\nmode = \"pool\"\nrequestors = 0\n";
        assert!(matches!(
            parse_scenarios(zero),
            Err(BenchError::InvalidSpec(_))
        ));
        let mode = "[[scenario]]\nmode = \"turbo\"\nrequestors = 1\n";
        assert!(parse_scenarios(mode).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!(matches!(
            "x".parse::<Mode>(),
            Err(BenchError::UnknownMode(_))
        ));
    }

    #[test]
    fn arrivals_stay_in_horizon_and_extend_as_prefixes() {
        let a = pool_arrivals(100, 7);
        assert!(a.iter().all(|b| *b < ARRIVAL_HORIZON_BLOCKS));
        assert_eq!(&pool_arrivals(50, 7)[..], &a[..50]);
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(matches!(report(&[], &[]), Err(BenchError::EmptyReport)));
    }

    #[test]
    fn report_rows_and_usd() {
        let rows: Vec<GasRow> = [Mode::Defeed, Mode::Pool]
            .into_iter()
            .flat_map(|m| {
                CURVE_SIZES.map(|n| GasRow {
                    mode: m,
                    n,
                    total_gas: 143_781,
                    baseline_gas: 143_781,
                })
            })
            .collect();
        let rep = report(&rows, &[]).unwrap();
        let lines: Vec<&str> = rep.gas_curve_csv.lines().collect();
        assert_eq!(lines[0], "mode,n,totalGas,totalUSD,savingPct");
        assert_eq!(lines.len(), 13);
        let usd: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
        assert!((usd - 1.00).abs() <= 0.01, "{usd}");
    }
}
