//! Benchmark harness: executes the six-step control protocol against an
//! in-process device under test, drives seeded workloads through the
//! filter hook, and samples metrics in one-second windows.
//!
//! The device is a software stack — parse, hook, then a simulated
//! upper-layer cost per accepted packet — so dropping packets measurably
//! reduces the modeled CPU time. All metric accounting uses the
//! deterministic cost model below (virtual nanoseconds), which keeps every
//! campaign byte-reproducible from its seed: wall-clock jitter never leaks
//! into the CSV.

pub mod protocol;

pub use protocol::{
    accepts, channel_pair, udp_pair, ChannelTransport, Message, MsgTransport, ProtocolError,
    ProtocolState, UdpTransport, PROTOCOL_TIMEOUT,
};

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread;

use thiserror::Error;

use crate::filter::{t800_init, FilterCounters, FilterError, T800Config, Verdict};
use crate::packet::{parse_ipv4_tcp, serialize_header, tcp_flags, FeatureVector};
use crate::policy::{Policy, PolicyModel, POLICY_CODE_DISABLED};
use crate::rng::SplitMix64;
use crate::synth::{gen_benign, gen_scan, Intensity, ScanProfile, ScanTool, TrafficProfile};
use crate::trainer::{
    evaluate, split_stratified, train_dt, train_logistic, train_mlp, train_svm, EvalReport,
    LinearTrainConfig, MlpTrainConfig, SvmTrainConfig,
};
use crate::analysis::CampaignResponse;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("no policy registered for code {0}")]
    UnknownPolicyCode(u8),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("power csv line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },
    #[error("metrics csv: {0}")]
    MetricsCsv(String),
    #[error("device task failed: {0}")]
    DeviceFailed(String),
    #[error("harness i/o: {0}")]
    Io(#[from] io::Error),
}

/// One cell of the experiment grid for one replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    /// 0 = disabled, 1 = DT, 2 = LR, 3 = SVM, 4 = MLP.
    pub policy_code: u8,
    pub intensity: Intensity,
    pub malicious: bool,
    pub duration_s: f64,
    pub replica_index: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.duration_s <= 0.0 {
            return Err(HarnessError::InvalidScenario(
                "duration must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Traffic cell code, e.g. `I0M1`.
    pub fn cell_code(&self) -> String {
        format!(
            "{}M{}",
            self.intensity.code(),
            if self.malicious { 1 } else { 0 }
        )
    }

    pub fn windows(&self) -> usize {
        self.duration_s.ceil() as usize
    }
}

/// One one-second observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub window_index: usize,
    /// Modeled time in the parse + classify + accept path divided by the
    /// window length, saturated at 1.
    pub cpu_busy_fraction: f64,
    /// Mean modeled filter-path (parse + classify) nanoseconds per
    /// presented packet.
    pub ns_per_packet: f64,
    /// Peak working memory of the filter path.
    pub stack_bytes: u64,
    pub rx_mbps: f64,
    /// Cumulative counts at the end of the window (monotone across
    /// windows).
    pub accepted: u64,
    pub dropped: u64,
    /// Only present when imported from an external measurement file.
    pub power_mw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    Aborted(String),
}

/// One executed replica.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub scenario: Scenario,
    pub policy_name: String,
    pub samples: Vec<MetricSample>,
    pub outcome: RunOutcome,
    pub notes: Vec<String>,
}

/// Deterministic per-packet cost model of the device under test, in
/// nanoseconds. The constants are calibrated to microcontroller-class
/// ratios: full stack processing of a bulk data segment is tens of
/// microseconds; an unsolicited SYN that reaches the stack is far more
/// expensive (listening-socket work, reply generation and the half-open
/// state it leaves behind); the framework-interpreted classifiers cost
/// roughly a quarter of the stack path per packet while the compiled
/// decision tree is near free.
#[derive(Debug, Clone, Copy)]
pub struct CostModel {
    /// Header parse + buffer bookkeeping, paid by every packet.
    pub parse_ns: u64,
    /// Upper-layer cost of an accepted data/established segment.
    pub upper_data_ns: u64,
    /// Upper-layer cost of an accepted SYN-without-ACK packet.
    pub upper_syn_ns: u64,
    /// Extra stack bytes of the filter path before policy scratch.
    pub base_stack_bytes: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            parse_ns: 600,
            upper_data_ns: 60_000,
            upper_syn_ns: 1_000_000,
            base_stack_bytes: 3_664,
        }
    }
}

impl CostModel {
    /// Modeled classification cost per packet for a policy kind.
    pub fn classify_ns(&self, kind: &str) -> u64 {
        match kind {
            "disabled" => 0,
            "dt" => 1_200,
            "logreg" => 13_600,
            "svm" => 13_000,
            "mlp" => 12_100,
            "mlp_q8" => 8_000,
            _ => 10_000,
        }
    }

    /// Upper-layer cost of one accepted packet.
    pub fn upper_ns(&self, syn_only: bool) -> u64 {
        if syn_only {
            self.upper_syn_ns
        } else {
            self.upper_data_ns
        }
    }
}

/// Names of the grid policies by wire code.
pub fn policy_name_for_code(code: u8) -> &'static str {
    match code {
        0 => "disabled",
        1 => "dt",
        2 => "logreg",
        3 => "svm",
        4 => "mlp",
        _ => "unknown",
    }
}

/// The device's bank of loadable policies, keyed by wire code.
#[derive(Default)]
pub struct PolicyBank {
    entries: BTreeMap<u8, (String, Arc<dyn Policy>)>,
}

impl PolicyBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_model(&mut self, model: PolicyModel) {
        let name = model.kind().to_string();
        let policy = model.into_policy();
        self.entries.insert(policy.policy_code(), (name, policy));
    }

    pub fn insert(&mut self, code: u8, name: &str, policy: Arc<dyn Policy>) {
        self.entries.insert(code, (name.to_string(), policy));
    }

    pub fn codes(&self) -> Vec<u8> {
        self.entries.keys().copied().collect()
    }

    /// Filter configuration and kind name for a policy code.
    pub fn config_for(&self, code: u8) -> Result<(T800Config, String), HarnessError> {
        if code == POLICY_CODE_DISABLED {
            return Ok((T800Config::disabled(), "disabled".to_string()));
        }
        let (name, policy) = self
            .entries
            .get(&code)
            .ok_or(HarnessError::UnknownPolicyCode(code))?;
        let mut config = T800Config::stateless(policy.clone());
        // The bank key is authoritative for the wire code (a quantized MLP
        // registered under code 4 still reports code 4).
        config.policy_id = code;
        Ok((config, name.clone()))
    }
}

/// Per-window accounting accumulated by the device.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WindowTally {
    pub presented: u64,
    pub accepted: u64,
    pub dropped: u64,
    pub busy_ns: u64,
    pub hook_ns: u64,
    pub rx_bytes: u64,
}

/// What the device hands back after EndAck.
#[derive(Debug, Clone)]
pub struct DeviceReport {
    pub tallies: Vec<WindowTally>,
    pub counters: FilterCounters,
    pub policy_name: String,
    pub stack_bytes: u64,
}

/// The device side of one replica: announce, install the selected policy,
/// consume the packet stream through the hook with cost accounting, and
/// acknowledge the end of the experiment. Public so a datagram-mode peer
/// or a misbehaving-controller test can drive it directly.
pub fn run_device(
    transport: &mut dyn MsgTransport,
    packets: Receiver<(u64, Vec<u8>)>,
    bank: &PolicyBank,
    cost: &CostModel,
    n_windows: usize,
) -> Result<DeviceReport, HarnessError> {
    let handle = t800_init(T800Config::disabled())?;
    let mut state = ProtocolState::Start;

    transport.send(&Message::Begin)?;
    state = state.advance(&Message::Begin)?;

    let msg = transport.recv(PROTOCOL_TIMEOUT)?;
    state = state.advance(&msg)?;
    let Message::PolicySelect(code) = msg else {
        unreachable!("state machine admits only PolicySelect here");
    };
    let (config, policy_name) = bank.config_for(code)?;
    handle.swap_policy(config)?;
    let classify_ns = cost.classify_ns(&policy_name);
    let stack_bytes = cost.base_stack_bytes
        + std::mem::size_of::<FeatureVector>() as u64
        + handle.policy_scratch_bytes() as u64;

    transport.send(&Message::Ready)?;
    state = state.advance(&Message::Ready)?;

    let mut tallies = vec![WindowTally::default(); n_windows.max(1)];
    while let Ok((arrival_ns, bytes)) = packets.recv() {
        let window = ((arrival_ns / 1_000_000_000) as usize).min(tallies.len() - 1);
        let tally = &mut tallies[window];
        let Ok(pbuf) = parse_ipv4_tcp(&bytes, arrival_ns) else {
            // Malformed input costs the parse attempt and nothing else.
            tally.busy_ns += cost.parse_ns;
            tally.hook_ns += cost.parse_ns;
            continue;
        };
        let verdict = handle.input_hook(&pbuf);
        let syn_only =
            pbuf.header.flag(tcp_flags::SYN) && !pbuf.header.flag(tcp_flags::ACK);
        let hook_cost = cost.parse_ns + classify_ns;
        tally.presented += 1;
        tally.rx_bytes += pbuf.header.total_length as u64;
        tally.hook_ns += hook_cost;
        tally.busy_ns += hook_cost;
        match verdict {
            Verdict::Accept => {
                tally.accepted += 1;
                tally.busy_ns += cost.upper_ns(syn_only);
            }
            Verdict::Drop => tally.dropped += 1,
        }
    }

    let msg = transport.recv(PROTOCOL_TIMEOUT)?;
    state = state.advance(&msg)?;
    transport.send(&Message::EndAck)?;
    state = state.advance(&Message::EndAck)?;
    debug_assert_eq!(state, ProtocolState::Done);

    Ok(DeviceReport {
        tallies,
        counters: handle.counters(),
        policy_name,
        stack_bytes,
    })
}

/// Scan workload shape inside an M1 replica: the burst occupies the middle
/// 60% of the run ([0.2 T, 0.8 T)), so malicious traffic dominates the
/// median window while leaving quiet windows on both sides.
pub const SCAN_BURST_START_FRACTION: f64 = 0.2;
pub const SCAN_BURST_FRACTION: f64 = 0.6;

/// Campaign-level options.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub replicas: usize,
    pub duration_s: f64,
    pub seed: u64,
    /// Grid policies; the full grid is all five codes 0..=4.
    pub policy_codes: Vec<u8>,
    pub cost: CostModel,
    pub scan: ScanProfile,
    pub use_udp_transport: bool,
}

impl CampaignConfig {
    /// Desk-scale defaults: 5 replicas of 10-second runs over the full
    /// policy grid, nmap-profile scan at 20 probes per second.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            replicas: 5,
            duration_s: 10.0,
            seed,
            policy_codes: vec![0, 1, 2, 3, 4],
            cost: CostModel::default(),
            scan: ScanProfile {
                tool: ScanTool::Nmap,
                target_ports: (1..=1000).collect(),
                rate_pps: 20,
            },
            use_udp_transport: false,
        }
    }

    /// The reference protocol dimensions: 360-second runs, 30 replicas.
    pub fn paper_scale(seed: u64) -> Self {
        Self {
            replicas: 30,
            duration_s: 360.0,
            ..Self::desk_scale(seed)
        }
    }
}

/// Workload seed shared by every policy at the same grid cell and replica,
/// so factor A contrasts identical traffic.
fn workload_seed(master: u64, intensity: Intensity, malicious: bool, replica: usize) -> u64 {
    let tag = (matches!(intensity, Intensity::I1) as u64)
        | ((malicious as u64) << 1)
        | ((replica as u64) << 2);
    SplitMix64::new(master).fork(tag).next_u64()
}

/// Build the merged, serialized workload of one replica.
fn build_workload(
    scenario: &Scenario,
    scan: &ScanProfile,
    seed: u64,
) -> Vec<(u64, Vec<u8>)> {
    let benign = gen_benign(&TrafficProfile {
        intensity: scenario.intensity,
        malicious: scenario.malicious,
        duration_s: scenario.duration_s,
        seed,
    });
    let mut packets: Vec<(u64, Vec<u8>)> = benign
        .iter()
        .map(|p| (p.arrival_ns, serialize_header(&p.header)))
        .collect();
    if scenario.malicious {
        let burst_len = scenario.duration_s * SCAN_BURST_FRACTION;
        let offset_ns = (scenario.duration_s * SCAN_BURST_START_FRACTION * 1e9) as u64;
        let scan_seed = SplitMix64::new(seed).fork(0x5CA7).next_u64();
        for p in gen_scan(scan, burst_len, scan_seed) {
            packets.push((p.arrival_ns + offset_ns, serialize_header(&p.header)));
        }
    }
    packets.sort_by_key(|(t, _)| *t);
    packets
}

fn samples_from_tallies(tallies: &[WindowTally], stack_bytes: u64) -> Vec<MetricSample> {
    let mut samples = Vec::with_capacity(tallies.len());
    let mut cum_accepted = 0u64;
    let mut cum_dropped = 0u64;
    for (window_index, t) in tallies.iter().enumerate() {
        cum_accepted += t.accepted;
        cum_dropped += t.dropped;
        samples.push(MetricSample {
            window_index,
            cpu_busy_fraction: (t.busy_ns as f64 / 1e9).min(1.0),
            ns_per_packet: if t.presented > 0 {
                t.hook_ns as f64 / t.presented as f64
            } else {
                0.0
            },
            stack_bytes,
            rx_mbps: t.rx_bytes as f64 * 8.0 / 1e6,
            accepted: cum_accepted,
            dropped: cum_dropped,
            power_mw: None,
        });
    }
    samples
}

/// Execute one replica end to end: the six-step protocol against an
/// in-process device, the seeded workload through the hook, one metric
/// sample per second.
pub fn run_replica(
    scenario: Scenario,
    seed: u64,
    bank: Arc<PolicyBank>,
    cost: CostModel,
    scan: &ScanProfile,
    use_udp_transport: bool,
) -> Result<ExperimentRun, HarnessError> {
    scenario.validate()?;
    let n_windows = scenario.windows();

    let (mut controller_t, device_t): (Box<dyn MsgTransport>, Box<dyn MsgTransport>) =
        if use_udp_transport {
            let (a, b) = udp_pair()?;
            (Box::new(a), Box::new(b))
        } else {
            let (a, b) = channel_pair();
            (Box::new(a), Box::new(b))
        };
    let (packet_tx, packet_rx): (Sender<(u64, Vec<u8>)>, _) = mpsc::channel();

    let device_bank = bank.clone();
    let device = thread::spawn(move || {
        let mut transport = device_t;
        run_device(transport.as_mut(), packet_rx, &device_bank, &cost, n_windows)
    });

    let controller = || -> Result<(), HarnessError> {
        let mut state = ProtocolState::Start;
        let msg = controller_t.recv(PROTOCOL_TIMEOUT)?;
        state = state.advance(&msg)?;

        let select = Message::PolicySelect(scenario.policy_code);
        controller_t.send(&select)?;
        state = state.advance(&select)?;

        let msg = controller_t.recv(PROTOCOL_TIMEOUT)?;
        state = state.advance(&msg)?;

        for packet in build_workload(&scenario, scan, seed) {
            packet_tx.send(packet).map_err(|_| ProtocolError::Closed)?;
        }
        drop(packet_tx);

        controller_t.send(&Message::End)?;
        state = state.advance(&Message::End)?;
        let msg = controller_t.recv(PROTOCOL_TIMEOUT)?;
        state = state.advance(&msg)?;
        debug_assert_eq!(state, ProtocolState::Done);
        Ok(())
    };
    let controller_result = controller();

    let device_result = device
        .join()
        .map_err(|_| HarnessError::DeviceFailed("device thread panicked".into()))?;
    // A device-side failure is the root cause of any controller-side
    // Closed/Timeout, so it takes precedence.
    let report = device_result?;
    controller_result?;

    Ok(ExperimentRun {
        scenario,
        policy_name: report.policy_name,
        samples: samples_from_tallies(&report.tallies, report.stack_bytes),
        outcome: RunOutcome::Completed,
        notes: Vec::new(),
    })
}

/// Execute the full campaign: every policy over the 2x2 traffic grid,
/// `replicas` times each, with derived per-replica workload seeds shared
/// across policies. A failed replica is recorded as aborted and re-run
/// once.
pub fn run_campaign(
    cfg: &CampaignConfig,
    bank: Arc<PolicyBank>,
) -> Result<Vec<ExperimentRun>, HarnessError> {
    if cfg.replicas < 1 {
        return Err(HarnessError::InvalidScenario(
            "at least one replica required".into(),
        ));
    }
    let mut runs = Vec::new();
    for &policy_code in &cfg.policy_codes {
        for intensity in [Intensity::I0, Intensity::I1] {
            for malicious in [false, true] {
                for replica_index in 0..cfg.replicas {
                    let scenario = Scenario {
                        policy_code,
                        intensity,
                        malicious,
                        duration_s: cfg.duration_s,
                        replica_index,
                    };
                    let seed = workload_seed(cfg.seed, intensity, malicious, replica_index);
                    let attempt = run_replica(
                        scenario,
                        seed,
                        bank.clone(),
                        cfg.cost,
                        &cfg.scan,
                        cfg.use_udp_transport,
                    );
                    match attempt {
                        Ok(run) => runs.push(run),
                        Err(first_err) => {
                            runs.push(ExperimentRun {
                                scenario,
                                policy_name: policy_name_for_code(policy_code).to_string(),
                                samples: Vec::new(),
                                outcome: RunOutcome::Aborted(first_err.to_string()),
                                notes: vec!["re-running aborted replica".into()],
                            });
                            let run = run_replica(
                                scenario,
                                seed,
                                bank.clone(),
                                cfg.cost,
                                &cfg.scan,
                                cfg.use_udp_transport,
                            )?;
                            runs.push(run);
                        }
                    }
                }
            }
        }
    }
    Ok(runs)
}

/// Align externally measured power samples (rows of `timestamp_s,power_mw`)
/// to the run's windows by timestamp; windows without samples keep power
/// absent.
pub fn import_power_csv<R: Read>(
    run: &ExperimentRun,
    source: R,
) -> Result<ExperimentRun, HarnessError> {
    let mut per_window: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut rows = 0usize;
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(ts), Some(mw), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(HarnessError::MalformedRow {
                line: lineno,
                msg: "expected exactly `timestamp_s,power_mw`".into(),
            });
        };
        let ts: f64 = ts.trim().parse().map_err(|e| HarnessError::MalformedRow {
            line: lineno,
            msg: format!("bad timestamp `{ts}`: {e}"),
        })?;
        let mw: f64 = mw.trim().parse().map_err(|e| HarnessError::MalformedRow {
            line: lineno,
            msg: format!("bad power value `{mw}`: {e}"),
        })?;
        if ts < 0.0 {
            return Err(HarnessError::MalformedRow {
                line: lineno,
                msg: "negative timestamp".into(),
            });
        }
        per_window.entry(ts as usize).or_default().push(mw);
        rows += 1;
    }
    let mut out = run.clone();
    for sample in out.samples.iter_mut() {
        if let Some(values) = per_window.get(&sample.window_index) {
            sample.power_mw = Some(values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    out.notes.push(format!("power: imported {rows} samples"));
    Ok(out)
}

/// Metrics CSV header (normative column order).
pub const METRICS_CSV_HEADER: &str =
    "scenario,policy,replica,window,cpu_busy_fraction,ns_per_packet,stack_bytes,rx_mbps,accepted,dropped,power_mw";

/// Write every completed run as one row per window. Aborted runs carry no
/// samples and therefore no rows.
pub fn write_metrics_csv<W: Write>(runs: &[ExperimentRun], mut sink: W) -> Result<(), HarnessError> {
    writeln!(sink, "{METRICS_CSV_HEADER}")?;
    for run in runs {
        for s in &run.samples {
            let power = s.power_mw.map(|p| p.to_string()).unwrap_or_default();
            writeln!(
                sink,
                "{},{},{},{},{},{},{},{},{},{},{}",
                run.scenario.cell_code(),
                run.policy_name,
                run.scenario.replica_index,
                s.window_index,
                s.cpu_busy_fraction,
                s.ns_per_packet,
                s.stack_bytes,
                s.rx_mbps,
                s.accepted,
                s.dropped,
                power,
            )?;
        }
    }
    Ok(())
}

/// One parsed metrics CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scenario: String,
    pub policy: String,
    pub replica: usize,
    pub window: usize,
    pub cpu_busy_fraction: f64,
    pub ns_per_packet: f64,
    pub stack_bytes: f64,
    pub rx_mbps: f64,
    pub accepted: u64,
    pub dropped: u64,
    pub power_mw: Option<f64>,
}

pub fn read_metrics_csv<R: Read>(source: R) -> Result<Vec<MetricsRow>, HarnessError> {
    let mut lines = BufReader::new(source).lines();
    match lines.next() {
        Some(Ok(h)) if h == METRICS_CSV_HEADER => {}
        Some(Ok(other)) => {
            return Err(HarnessError::MetricsCsv(format!(
                "unexpected header `{other}`"
            )))
        }
        _ => return Err(HarnessError::MetricsCsv("missing header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(HarnessError::MetricsCsv(format!(
                "line {}: expected 11 fields, found {}",
                i + 2,
                f.len()
            )));
        }
        let parse_f64 = |s: &str, what: &str| -> Result<f64, HarnessError> {
            s.parse()
                .map_err(|e| HarnessError::MetricsCsv(format!("line {}: bad {what}: {e}", i + 2)))
        };
        let parse_u64 = |s: &str, what: &str| -> Result<u64, HarnessError> {
            s.parse()
                .map_err(|e| HarnessError::MetricsCsv(format!("line {}: bad {what}: {e}", i + 2)))
        };
        rows.push(MetricsRow {
            scenario: f[0].to_string(),
            policy: f[1].to_string(),
            replica: parse_u64(f[2], "replica")? as usize,
            window: parse_u64(f[3], "window")? as usize,
            cpu_busy_fraction: parse_f64(f[4], "cpu_busy_fraction")?,
            ns_per_packet: parse_f64(f[5], "ns_per_packet")?,
            stack_bytes: parse_f64(f[6], "stack_bytes")?,
            rx_mbps: parse_f64(f[7], "rx_mbps")?,
            accepted: parse_u64(f[8], "accepted")?,
            dropped: parse_u64(f[9], "dropped")?,
            power_mw: if f[10].is_empty() {
                None
            } else {
                Some(parse_f64(f[10], "power_mw")?)
            },
        });
    }
    Ok(rows)
}

/// Metric column selector for the factor analysis.
pub fn metric_value(row: &MetricsRow, metric: &str) -> Result<Option<f64>, HarnessError> {
    Ok(match metric {
        "cpu_busy_fraction" => Some(row.cpu_busy_fraction),
        "ns_per_packet" => Some(row.ns_per_packet),
        "stack_bytes" => Some(row.stack_bytes),
        "rx_mbps" => Some(row.rx_mbps),
        "power_mw" => row.power_mw,
        other => {
            return Err(HarnessError::MetricsCsv(format!(
                "unknown metric `{other}`"
            )))
        }
    })
}

/// Reduce metric rows to per-replica responses (the mean of the metric
/// over each replica's windows), the factorial analysis input.
pub fn responses_from_rows(
    rows: &[MetricsRow],
    metric: &str,
) -> Result<Vec<CampaignResponse>, HarnessError> {
    let mut acc: BTreeMap<(String, String, usize), (f64, usize)> = BTreeMap::new();
    for row in rows {
        let Some(value) = metric_value(row, metric)? else {
            continue;
        };
        let key = (row.policy.clone(), row.scenario.clone(), row.replica);
        let entry = acc.entry(key).or_insert((0.0, 0));
        entry.0 += value;
        entry.1 += 1;
    }
    let mut out = Vec::new();
    for ((policy, scenario, replica), (sum, n)) in acc {
        let intensity_high = match scenario.get(0..2) {
            Some("I0") => false,
            Some("I1") => true,
            _ => {
                return Err(HarnessError::MetricsCsv(format!(
                    "bad scenario code `{scenario}`"
                )))
            }
        };
        let malicious = match scenario.get(2..4) {
            Some("M0") => false,
            Some("M1") => true,
            _ => {
                return Err(HarnessError::MetricsCsv(format!(
                    "bad scenario code `{scenario}`"
                )))
            }
        };
        out.push(CampaignResponse {
            policy,
            intensity_high,
            malicious,
            replica,
            response: sum / n as f64,
        });
    }
    Ok(out)
}

/// Per-replica responses straight from in-memory runs.
pub fn responses_from_runs(
    runs: &[ExperimentRun],
    metric: &str,
) -> Result<Vec<CampaignResponse>, HarnessError> {
    let mut rows = Vec::new();
    for run in runs {
        if run.outcome != RunOutcome::Completed {
            continue;
        }
        for s in &run.samples {
            rows.push(MetricsRow {
                scenario: run.scenario.cell_code(),
                policy: run.policy_name.clone(),
                replica: run.scenario.replica_index,
                window: s.window_index,
                cpu_busy_fraction: s.cpu_busy_fraction,
                ns_per_packet: s.ns_per_packet,
                stack_bytes: s.stack_bytes as f64,
                rx_mbps: s.rx_mbps,
                accepted: s.accepted,
                dropped: s.dropped,
                power_mw: s.power_mw,
            });
        }
    }
    responses_from_rows(&rows, metric)
}

/// Synthetic training corpus for the grid policies: a long benign capture
/// salted with probes from every scanner tool. Stays under 20k packets.
pub fn make_training_dataset(seed: u64) -> crate::trainer::LabeledDataset {
    let mut rng = SplitMix64::new(seed);
    let benign = crate::synth::LabeledStream::benign(gen_benign(&TrafficProfile {
        intensity: Intensity::I0,
        malicious: false,
        duration_s: 18.0,
        seed: rng.next_u64(),
    }));
    let mut streams = vec![benign];
    for tool in ScanTool::ALL {
        let scan = gen_scan(
            &ScanProfile {
                tool,
                target_ports: (1..=1000).collect(),
                rate_pps: 60,
            },
            18.0,
            rng.next_u64(),
        );
        streams.push(crate::synth::LabeledStream::scan(scan));
    }
    crate::synth::export_dataset(&streams)
}

/// Everything `bench` needs to know about its self-trained policies.
pub struct TrainedBank {
    pub bank: PolicyBank,
    pub reports: BTreeMap<String, EvalReport>,
}

/// Train all four model families on a seeded synthetic train split and
/// evaluate them on the held-out split. The desk-scale recipe keeps the
/// MLP under 200 epochs.
pub fn train_policy_bank(seed: u64) -> TrainedBank {
    let dataset = make_training_dataset(seed);
    let (train, test) = split_stratified(&dataset, 0.3, seed ^ 0x511F7);
    let mut bank = PolicyBank::new();
    let mut reports = BTreeMap::new();

    let dt = PolicyModel::Dt(train_dt(&train, 12));
    reports.insert("dt".to_string(), evaluate(&dt, &test));
    bank.insert_model(dt);

    let logreg = PolicyModel::Linear(
        train_logistic(
            &train,
            &LinearTrainConfig {
                epochs: 60,
                lr: 0.5,
                batch_size: 64,
                seed,
            },
        )
        .expect("logistic training diverged"),
    );
    reports.insert("logreg".to_string(), evaluate(&logreg, &test));
    bank.insert_model(logreg);

    let svm = PolicyModel::Linear(
        train_svm(
            &train,
            &SvmTrainConfig {
                epochs: 80,
                lr: 0.05,
                c: 10.0,
                batch_size: 64,
                seed,
            },
        )
        .expect("svm training diverged"),
    );
    reports.insert("svm".to_string(), evaluate(&svm, &test));
    bank.insert_model(svm);

    let mlp = PolicyModel::Mlp(
        train_mlp(
            &train,
            &MlpTrainConfig {
                epochs: 150,
                lr: 5e-3,
                batch_size: 260,
                seed,
                hidden: 16,
            },
        )
        .expect("mlp training diverged"),
    );
    reports.insert("mlp".to_string(), evaluate(&mlp, &test));
    bank.insert_model(mlp);

    TrainedBank { bank, reports }
}
