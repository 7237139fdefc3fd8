//! The interception mechanism: every ingress packet passes the hook before
//! any further stack processing, the active policy decides accept or drop,
//! and the policy can be replaced at runtime without missing a packet.
//!
//! The hook is callable concurrently; counters are atomics and a policy
//! swap is linearizable with respect to hook calls (each call classifies
//! entirely under exactly one policy). A classifier fault never drops a
//! packet: the hook fails open, accepts, and counts the event.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use thiserror::Error;

use crate::packet::{extract_features, link_strip, parse_ipv4_tcp, PacketBuf, PcapError, PcapReader, PcapWriter};
use crate::policy::{Class, Policy, POLICY_CODE_DISABLED};

/// How the filter participates in packet processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkingMode {
    /// Per-packet verdicts from header fields only.
    Stateless,
    /// Flow-state tracking; represented but not implemented.
    Stateful,
    /// Pass-through: every packet accepted without touching a classifier.
    Disabled,
}

/// Verdict of the hook for one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Drop,
}

/// Initial or replacement configuration for the filter.
#[derive(Clone)]
pub struct T800Config {
    pub working_mode: WorkingMode,
    pub policy: Option<Arc<dyn Policy>>,
    /// Wire code of the policy: 0 = disabled, 1 = DT, 2 = LR, 3 = SVM,
    /// 4 = MLP.
    pub policy_id: u8,
}

impl T800Config {
    pub fn disabled() -> Self {
        Self {
            working_mode: WorkingMode::Disabled,
            policy: None,
            policy_id: POLICY_CODE_DISABLED,
        }
    }

    pub fn stateless(policy: Arc<dyn Policy>) -> Self {
        let policy_id = policy.policy_code();
        Self {
            working_mode: WorkingMode::Stateless,
            policy: Some(policy),
            policy_id,
        }
    }

    fn validate(&self) -> Result<(), FilterError> {
        match self.working_mode {
            WorkingMode::Stateful => Err(FilterError::NotImplemented("stateful working mode")),
            WorkingMode::Disabled => {
                if self.policy.is_some() || self.policy_id != POLICY_CODE_DISABLED {
                    Err(FilterError::InvalidConfig(
                        "disabled mode must carry no policy and code 0".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            WorkingMode::Stateless => {
                if self.policy.is_none() {
                    return Err(FilterError::InvalidConfig(
                        "stateless mode requires a policy".into(),
                    ));
                }
                if !(1..=4).contains(&self.policy_id) {
                    return Err(FilterError::InvalidConfig(format!(
                        "policy id {} outside 1..=4",
                        self.policy_id
                    )));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} is not implemented")]
    NotImplemented(&'static str),
}

/// Monotone counters of the hook. `accepted + dropped` equals the packets
/// presented; classifier faults are accepted and counted separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FilterCounters {
    pub accepted: u64,
    pub dropped: u64,
    pub classifier_errors: u64,
    pub classify_time_total_ns: u64,
    pub classify_time_max_ns: u64,
}

impl FilterCounters {
    pub fn presented(&self) -> u64 {
        self.accepted + self.dropped
    }
}

struct ActiveConfig {
    mode: WorkingMode,
    policy: Option<Arc<dyn Policy>>,
    policy_id: u8,
}

/// Handle to a running filter instance.
pub struct FilterHandle {
    active: RwLock<Arc<ActiveConfig>>,
    accepted: AtomicU64,
    dropped: AtomicU64,
    classifier_errors: AtomicU64,
    classify_time_total_ns: AtomicU64,
    classify_time_max_ns: AtomicU64,
}

/// Initialize the filter. The hook is usable immediately; counters start
/// at zero.
pub fn t800_init(config: T800Config) -> Result<FilterHandle, FilterError> {
    config.validate()?;
    Ok(FilterHandle {
        active: RwLock::new(Arc::new(ActiveConfig {
            mode: config.working_mode,
            policy: config.policy,
            policy_id: config.policy_id,
        })),
        accepted: AtomicU64::new(0),
        dropped: AtomicU64::new(0),
        classifier_errors: AtomicU64::new(0),
        classify_time_total_ns: AtomicU64::new(0),
        classify_time_max_ns: AtomicU64::new(0),
    })
}

impl FilterHandle {
    /// The ingress hook. Consults the active policy exactly once per call,
    /// so a concurrent swap never splits a packet between two policies.
    pub fn input_hook(&self, p: &PacketBuf) -> Verdict {
        let active = self.active.read().expect("filter lock poisoned").clone();
        let verdict = match active.mode {
            WorkingMode::Disabled => Verdict::Accept,
            WorkingMode::Stateful => Verdict::Accept,
            WorkingMode::Stateless => {
                let policy = active.policy.as_ref().expect("validated config");
                let features = extract_features(&p.header);
                let started = Instant::now();
                let outcome = policy.classify(features.as_slice());
                let elapsed = started.elapsed().as_nanos() as u64;
                self.classify_time_total_ns.fetch_add(elapsed, Ordering::Relaxed);
                self.classify_time_max_ns.fetch_max(elapsed, Ordering::Relaxed);
                match outcome {
                    Ok(Class::Malicious) => Verdict::Drop,
                    Ok(Class::Benign) => Verdict::Accept,
                    Err(_) => {
                        self.classifier_errors.fetch_add(1, Ordering::Relaxed);
                        Verdict::Accept
                    }
                }
            }
        };
        match verdict {
            Verdict::Accept => self.accepted.fetch_add(1, Ordering::Relaxed),
            Verdict::Drop => self.dropped.fetch_add(1, Ordering::Relaxed),
        };
        verdict
    }

    /// Replace the active policy. Atomic with respect to the hook: every
    /// packet is evaluated entirely under the old or the new policy. A
    /// rejected configuration leaves the old policy active. Returns the
    /// replaced policy id.
    pub fn swap_policy(&self, config: T800Config) -> Result<u8, FilterError> {
        config.validate()?;
        let mut guard = self.active.write().expect("filter lock poisoned");
        let previous = guard.policy_id;
        *guard = Arc::new(ActiveConfig {
            mode: config.working_mode,
            policy: config.policy,
            policy_id: config.policy_id,
        });
        Ok(previous)
    }

    pub fn policy_id(&self) -> u8 {
        self.active.read().expect("filter lock poisoned").policy_id
    }

    pub fn working_mode(&self) -> WorkingMode {
        self.active.read().expect("filter lock poisoned").mode
    }

    /// Scratch bytes of the active policy (0 when disabled).
    pub fn policy_scratch_bytes(&self) -> usize {
        let active = self.active.read().expect("filter lock poisoned");
        active.policy.as_ref().map_or(0, |p| p.scratch_bytes())
    }

    pub fn counters(&self) -> FilterCounters {
        FilterCounters {
            accepted: self.accepted.load(Ordering::Relaxed),
            dropped: self.dropped.load(Ordering::Relaxed),
            classifier_errors: self.classifier_errors.load(Ordering::Relaxed),
            classify_time_total_ns: self.classify_time_total_ns.load(Ordering::Relaxed),
            classify_time_max_ns: self.classify_time_max_ns.load(Ordering::Relaxed),
        }
    }
}

/// Offline replay: run a capture through the hook and keep the accepted
/// records, byte-identical and in input order. Records that are not
/// TCP-over-IPv4 never reach the hook and are omitted from the output.
pub fn filter_pcap<R: Read, W: Write>(
    input: R,
    config: T800Config,
    output: W,
) -> Result<FilterCounters, FilterPcapError> {
    let handle = t800_init(config)?;
    let mut reader = PcapReader::new(input)?;
    let mut writer = PcapWriter::new(output, reader.link_type())?;
    while let Some(rec) = reader.next_record()? {
        let Some(ip) = link_strip(reader.link_type(), &rec.data) else {
            continue;
        };
        let Ok(pbuf) = parse_ipv4_tcp(ip, rec.arrival_ns()) else {
            continue;
        };
        if handle.input_hook(&pbuf) == Verdict::Accept {
            writer.write_record(&rec)?;
        }
    }
    Ok(handle.counters())
}

#[derive(Debug, Error)]
pub enum FilterPcapError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Pcap(#[from] PcapError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{tcp_flags, PacketHeader, SYN_SLOT};
    use crate::policy::{DecisionTreeModel, PolicyError, TreeNode};
    use crate::synth::{gen_benign, gen_scan, Intensity, ScanProfile, ScanTool, TrafficProfile};

    struct ConstPolicy(Class);

    impl Policy for ConstPolicy {
        fn kind(&self) -> &'static str {
            "stub"
        }
        fn classify(&self, _x: &[f64]) -> Result<Class, PolicyError> {
            Ok(self.0)
        }
        fn policy_code(&self) -> u8 {
            1
        }
    }

    struct FaultyPolicy;

    impl Policy for FaultyPolicy {
        fn kind(&self) -> &'static str {
            "faulty"
        }
        fn classify(&self, _x: &[f64]) -> Result<Class, PolicyError> {
            Err(PolicyError::Fault("synthetic fault".into()))
        }
        fn policy_code(&self) -> u8 {
            1
        }
    }

    fn sample_packet(flags: u8) -> PacketBuf {
        let h = PacketHeader {
            ip_version: 4,
            ihl: 5,
            tos: 0,
            total_length: 40,
            identification: 0,
            flag_df: false,
            flag_mf: false,
            frag_offset: 0,
            ttl: 64,
            protocol: 6,
            src_addr: 1,
            dst_addr: 2,
            src_port: 1234,
            dst_port: 80,
            seq: 0,
            ack: 0,
            data_offset: 5,
            tcp_flags: flags,
            window: 100,
            urgent_ptr: 0,
        };
        PacketBuf::new(h, 0)
    }

    /// Tree that drops SYN-without-ACK probes.
    fn syn_flagging_tree() -> Arc<dyn Policy> {
        Arc::new(DecisionTreeModel {
            nodes: vec![
                TreeNode::Split {
                    feature: SYN_SLOT,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { class: Class::Benign },
                TreeNode::Split {
                    feature: 12, // ACK slot
                    threshold: 0.5,
                    left: 3,
                    right: 4,
                },
                TreeNode::Leaf { class: Class::Malicious },
                TreeNode::Leaf { class: Class::Benign },
            ],
            root: 0,
            max_depth: 2,
            feature_len: crate::packet::FEATURE_LEN,
        })
    }

    #[test]
    fn disabled_mode_accepts_everything() {
        let h = t800_init(T800Config::disabled()).unwrap();
        for _ in 0..10 {
            assert_eq!(h.input_hook(&sample_packet(tcp_flags::SYN)), Verdict::Accept);
        }
        let c = h.counters();
        assert_eq!(c.accepted, 10);
        assert_eq!(c.dropped, 0);
        assert_eq!(c.classify_time_total_ns, 0);
    }

    #[test]
    fn always_malicious_stub_drops_everything() {
        let h = t800_init(T800Config::stateless(Arc::new(ConstPolicy(Class::Malicious)))).unwrap();
        for _ in 0..7 {
            assert_eq!(h.input_hook(&sample_packet(0)), Verdict::Drop);
        }
        assert_eq!(h.counters().dropped, 7);
    }

    #[test]
    fn stateless_without_policy_is_invalid() {
        let config = T800Config {
            working_mode: WorkingMode::Stateless,
            policy: None,
            policy_id: 1,
        };
        assert!(matches!(
            t800_init(config),
            Err(FilterError::InvalidConfig(_))
        ));
    }

    #[test]
    fn stateful_mode_not_implemented() {
        let config = T800Config {
            working_mode: WorkingMode::Stateful,
            policy: None,
            policy_id: 0,
        };
        assert!(matches!(
            t800_init(config),
            Err(FilterError::NotImplemented(_))
        ));
    }

    #[test]
    fn syn_probe_dropped_established_segment_accepted() {
        let h = t800_init(T800Config::stateless(syn_flagging_tree())).unwrap();
        assert_eq!(h.input_hook(&sample_packet(tcp_flags::SYN)), Verdict::Drop);
        assert_eq!(h.input_hook(&sample_packet(tcp_flags::ACK)), Verdict::Accept);
        assert_eq!(
            h.input_hook(&sample_packet(tcp_flags::SYN | tcp_flags::ACK)),
            Verdict::Accept
        );
    }

    #[test]
    fn counters_conserve_presented_packets() {
        let h = t800_init(T800Config::stateless(syn_flagging_tree())).unwrap();
        let mut rng = crate::rng::SplitMix64::new(6);
        for _ in 0..1000 {
            let flags = if rng.next_f64() < 0.3 { tcp_flags::SYN } else { tcp_flags::ACK };
            h.input_hook(&sample_packet(flags));
        }
        let c = h.counters();
        assert_eq!(c.accepted + c.dropped, 1000);
    }

    #[test]
    fn classifier_fault_fails_open() {
        let h = t800_init(T800Config::stateless(Arc::new(FaultyPolicy))).unwrap();
        assert_eq!(h.input_hook(&sample_packet(tcp_flags::SYN)), Verdict::Accept);
        let c = h.counters();
        assert_eq!(c.accepted, 1);
        assert_eq!(c.classifier_errors, 1);
    }

    #[test]
    fn swap_returns_previous_policy_id() {
        let h = t800_init(T800Config::disabled()).unwrap();
        let prev = h
            .swap_policy(T800Config::stateless(Arc::new(ConstPolicy(Class::Benign))))
            .unwrap();
        assert_eq!(prev, 0);
        assert_eq!(h.policy_id(), 1);
        let prev = h.swap_policy(T800Config::disabled()).unwrap();
        assert_eq!(prev, 1);
        assert_eq!(h.input_hook(&sample_packet(tcp_flags::SYN)), Verdict::Accept);
    }

    #[test]
    fn rejected_swap_keeps_old_policy() {
        let h = t800_init(T800Config::stateless(Arc::new(ConstPolicy(Class::Malicious)))).unwrap();
        let bad = T800Config {
            working_mode: WorkingMode::Stateless,
            policy: None,
            policy_id: 2,
        };
        assert!(h.swap_policy(bad).is_err());
        assert_eq!(h.policy_id(), 1);
        assert_eq!(h.input_hook(&sample_packet(0)), Verdict::Drop);
    }

    /// Policy that tags each verdict with its identity.
    struct TaggingPolicy {
        tag: u8,
        log: Arc<std::sync::Mutex<Vec<u8>>>,
    }

    impl Policy for TaggingPolicy {
        fn kind(&self) -> &'static str {
            "tagging"
        }
        fn classify(&self, _x: &[f64]) -> Result<Class, PolicyError> {
            self.log.lock().unwrap().push(self.tag);
            Ok(Class::Benign)
        }
        fn policy_code(&self) -> u8 {
            1
        }
    }

    #[test]
    fn swap_mid_stream_never_mixes_policies() {
        let log = Arc::new(std::sync::Mutex::new(Vec::new()));
        let h = t800_init(T800Config::stateless(Arc::new(TaggingPolicy {
            tag: 1,
            log: log.clone(),
        })))
        .unwrap();
        for _ in 0..50 {
            h.input_hook(&sample_packet(tcp_flags::ACK));
        }
        h.swap_policy(T800Config::stateless(Arc::new(TaggingPolicy {
            tag: 2,
            log: log.clone(),
        })))
        .unwrap();
        for _ in 0..50 {
            h.input_hook(&sample_packet(tcp_flags::ACK));
        }
        let tags = log.lock().unwrap().clone();
        assert_eq!(tags.len(), 100);
        assert!(tags[..50].iter().all(|t| *t == 1));
        assert!(tags[50..].iter().all(|t| *t == 2));
    }

    #[test]
    fn fixed_policy_and_stream_give_identical_verdicts() {
        let packets: Vec<PacketBuf> = {
            let benign = gen_benign(&TrafficProfile {
                intensity: Intensity::I0,
                malicious: true,
                duration_s: 0.2,
                seed: 3,
            });
            let scan = gen_scan(&ScanProfile::new(ScanTool::Nmap), 0.2, 4);
            benign.into_iter().chain(scan).collect()
        };
        let run = || -> Vec<Verdict> {
            let h = t800_init(T800Config::stateless(syn_flagging_tree())).unwrap();
            packets.iter().map(|p| h.input_hook(p)).collect()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn filter_pcap_disabled_copies_tcp_records() {
        let stream = gen_benign(&TrafficProfile {
            intensity: Intensity::I0,
            malicious: false,
            duration_s: 0.05,
            seed: 5,
        });
        let mut pcap = Vec::new();
        crate::synth::write_pcap(&stream, &mut pcap).unwrap();
        let mut out = Vec::new();
        let counters = filter_pcap(pcap.as_slice(), T800Config::disabled(), &mut out).unwrap();
        assert_eq!(counters.accepted, stream.len() as u64);
        // Identical global header and records: byte-identical files.
        assert_eq!(pcap, out);
    }

    #[test]
    fn filter_pcap_always_malicious_empties_the_capture() {
        let stream = gen_benign(&TrafficProfile {
            intensity: Intensity::I0,
            malicious: false,
            duration_s: 0.05,
            seed: 5,
        });
        let mut pcap = Vec::new();
        crate::synth::write_pcap(&stream, &mut pcap).unwrap();
        let mut out = Vec::new();
        let config = T800Config::stateless(Arc::new(ConstPolicy(Class::Malicious)));
        let counters = filter_pcap(pcap.as_slice(), config, &mut out).unwrap();
        assert_eq!(counters.dropped, stream.len() as u64);
        let remaining = crate::packet::read_pcap(out.as_slice()).unwrap();
        assert!(remaining.is_empty());
    }

    #[test]
    fn filter_pcap_removes_syn_probes_only() {
        let benign = gen_benign(&TrafficProfile {
            intensity: Intensity::I0,
            malicious: true,
            duration_s: 0.3,
            seed: 8,
        });
        let scan = gen_scan(&ScanProfile::new(ScanTool::Hping3), 0.3, 9);
        let n_scan = scan.len();
        let merged = crate::synth::merge_streams(&[
            crate::synth::LabeledStream::benign(benign.clone()),
            crate::synth::LabeledStream::scan(scan),
        ]);
        let packets: Vec<PacketBuf> = merged.into_iter().map(|(p, _, _)| p).collect();
        let mut pcap = Vec::new();
        crate::synth::write_pcap(&packets, &mut pcap).unwrap();

        let mut out = Vec::new();
        let counters = filter_pcap(
            pcap.as_slice(),
            T800Config::stateless(syn_flagging_tree()),
            &mut out,
        )
        .unwrap();
        let kept = crate::packet::read_pcap(out.as_slice()).unwrap();
        for p in &kept {
            let syn_only =
                p.header.flag(tcp_flags::SYN) && !p.header.flag(tcp_flags::ACK);
            assert!(!syn_only, "SYN probe leaked through the filter");
        }
        // The benign handshake SYN is the one legitimate SYN-only packet.
        assert_eq!(counters.dropped as usize, n_scan + 1);
        assert_eq!(counters.presented() as usize, packets.len());
    }
}
