//! Synthetic workload generation: a benign iperf-style bulk TCP flow at a
//! controlled intensity and SYN port-scan traffic mimicking five scanner
//! tools at the header level.
//!
//! All randomness flows from the profile seed through [`SplitMix64`] and
//! timestamps are computed in integer nanoseconds, so a stream is
//! byte-identical for a given seed on every platform.

use crate::packet::{serialize_header, tcp_flags, PacketBuf, PacketHeader, PcapError, PcapWriter, LINKTYPE_RAW_IP};
use crate::rng::SplitMix64;
use crate::trainer::{LabeledDataset, Provenance};
use crate::Class;

use std::io::Write;

/// Address plan of the synthetic lab (documented constants, not routable).
pub const DEVICE_ADDR: u32 = u32::from_be_bytes([192, 168, 0, 1]);
pub const CLIENT_ADDR: u32 = u32::from_be_bytes([192, 168, 0, 2]);
pub const SCANNER_ADDR: u32 = u32::from_be_bytes([192, 168, 0, 66]);

/// Port of the bulk-transfer sink on the device.
pub const IPERF_PORT: u16 = 5001;

/// MSS of the benign flow; data segments are 1500-byte IP datagrams.
pub const BENIGN_MSS: usize = 1460;

/// Benign traffic intensity levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intensity {
    /// 8 Mbps
    I0,
    /// 16 Mbps
    I1,
}

impl Intensity {
    pub fn mbps(self) -> u64 {
        match self {
            Intensity::I0 => 8,
            Intensity::I1 => 16,
        }
    }

    pub fn bits_per_second(self) -> u64 {
        self.mbps() * 1_000_000
    }

    pub fn code(self) -> &'static str {
        match self {
            Intensity::I0 => "I0",
            Intensity::I1 => "I1",
        }
    }
}

/// Traffic specification of one experiment cell.
#[derive(Debug, Clone, Copy)]
pub struct TrafficProfile {
    pub intensity: Intensity,
    /// Whether malicious traffic accompanies the benign flow (M1) or not
    /// (M0). The benign generator ignores it; the harness consumes it.
    pub malicious: bool,
    pub duration_s: f64,
    pub seed: u64,
}

impl TrafficProfile {
    pub fn validate(&self) -> Result<(), String> {
        if self.duration_s <= 0.0 {
            return Err("duration must be positive".into());
        }
        Ok(())
    }
}

/// The five scanner tools whose header idiosyncrasies the generator mimics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanTool {
    Zmap,
    Masscan,
    Hping3,
    Unicornscan,
    Nmap,
}

impl ScanTool {
    pub const ALL: [ScanTool; 5] = [
        ScanTool::Zmap,
        ScanTool::Masscan,
        ScanTool::Hping3,
        ScanTool::Unicornscan,
        ScanTool::Nmap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanTool::Zmap => "zmap",
            ScanTool::Masscan => "masscan",
            ScanTool::Hping3 => "hping3",
            ScanTool::Unicornscan => "unicornscan",
            ScanTool::Nmap => "nmap",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

/// Fixed source port used by the unicornscan profile.
pub const UNICORNSCAN_SRC_PORT: u16 = 51234;
/// Fixed IP identification used by the zmap profile.
pub const ZMAP_IP_ID: u16 = 54321;

/// A port-scan workload: SYN probes over `target_ports` at `rate_pps`.
#[derive(Debug, Clone)]
pub struct ScanProfile {
    pub tool: ScanTool,
    pub target_ports: Vec<u16>,
    pub rate_pps: u64,
}

impl ScanProfile {
    /// Artifact defaults: the first 1000 ports at 100 probes per second.
    pub fn new(tool: ScanTool) -> Self {
        Self {
            tool,
            target_ports: (1..=1000).collect(),
            rate_pps: 100,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.target_ports.is_empty() {
            return Err("target port set must be nonempty".into());
        }
        if self.rate_pps == 0 {
            return Err("probe rate must be positive".into());
        }
        Ok(())
    }
}

fn base_header(src_addr: u32, dst_addr: u32) -> PacketHeader {
    PacketHeader {
        ip_version: 4,
        ihl: 5,
        tos: 0,
        total_length: 40,
        identification: 0,
        flag_df: true,
        flag_mf: false,
        frag_offset: 0,
        ttl: 64,
        protocol: 6,
        src_addr,
        dst_addr,
        src_port: 0,
        dst_port: 0,
        seq: 0,
        ack: 0,
        data_offset: 5,
        tcp_flags: 0,
        window: 65535,
        urgent_ptr: 0,
    }
}

/// Generate the benign workload: one long-lived TCP bulk flow. The
/// three-way handshake opens the stream, then MSS-sized data segments with
/// the ACK flag run at the profile intensity; timestamps are strictly
/// increasing and the byte rate over any full one-second window stays
/// within 5% of the profile intensity.
pub fn gen_benign(p: &TrafficProfile) -> Vec<PacketBuf> {
    p.validate().expect("profile invariants");
    let mut rng = SplitMix64::new(p.seed);
    let duration_ns = (p.duration_s * 1e9) as u64;
    let src_port = 49152 + rng.next_below(16384) as u16;
    let mut seq = rng.next_u32();
    let server_seq = rng.next_u32();
    let mut out = Vec::new();
    let mut ip_id: u16 = rng.next_u32() as u16;

    // Three-way handshake, 200 microseconds apart.
    let mut h = base_header(CLIENT_ADDR, DEVICE_ADDR);
    h.src_port = src_port;
    h.dst_port = IPERF_PORT;
    h.seq = seq;
    h.tcp_flags = tcp_flags::SYN;
    h.identification = ip_id;
    out.push(PacketBuf::new(h, 0));

    let mut synack = base_header(DEVICE_ADDR, CLIENT_ADDR);
    synack.src_port = IPERF_PORT;
    synack.dst_port = src_port;
    synack.seq = server_seq;
    synack.ack = seq.wrapping_add(1);
    synack.tcp_flags = tcp_flags::SYN | tcp_flags::ACK;
    out.push(PacketBuf::new(synack, 200_000));

    seq = seq.wrapping_add(1);
    let mut ack = base_header(CLIENT_ADDR, DEVICE_ADDR);
    ack.src_port = src_port;
    ack.dst_port = IPERF_PORT;
    ack.seq = seq;
    ack.ack = server_seq.wrapping_add(1);
    ack.tcp_flags = tcp_flags::ACK;
    ip_id = ip_id.wrapping_add(1);
    ack.identification = ip_id;
    out.push(PacketBuf::new(ack, 400_000));

    // Data segments: 1500-byte datagrams evenly spaced for the target rate,
    // with a small seeded start phase so replicas are not phase-locked.
    let datagram_len = (20 + 20 + BENIGN_MSS) as u64;
    let gap_ns = datagram_len * 8 * 1_000_000_000 / p.intensity.bits_per_second();
    let start_ns = 600_000 + rng.next_below(2_000_000);
    let mut t = start_ns;
    while t < duration_ns {
        let mut d = base_header(CLIENT_ADDR, DEVICE_ADDR);
        d.total_length = datagram_len as u16;
        d.src_port = src_port;
        d.dst_port = IPERF_PORT;
        d.seq = seq;
        d.ack = server_seq.wrapping_add(1);
        d.tcp_flags = tcp_flags::ACK;
        ip_id = ip_id.wrapping_add(1);
        d.identification = ip_id;
        out.push(PacketBuf::new(d, t));
        seq = seq.wrapping_add(BENIGN_MSS as u32);
        t += gap_ns;
    }
    out
}

fn masscan_seq(dst_addr: u32, port: u16) -> u32 {
    // The tool derives its sequence number from the target tuple so replies
    // can be validated statelessly; any fixed mixing function models that.
    let mut z = (dst_addr as u64) << 16 | port as u64;
    z = z.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    (z >> 32) as u32 ^ z as u32
}

/// Generate a SYN scan: probes across the target ports at the configured
/// rate with the tool's header idiosyncrasies. Every probe has SYN set and
/// ACK clear.
pub fn gen_scan(s: &ScanProfile, duration_s: f64, seed: u64) -> Vec<PacketBuf> {
    s.validate().expect("profile invariants");
    assert!(duration_s > 0.0, "duration must be positive");
    let mut rng = SplitMix64::new(seed);
    let duration_ns = (duration_s * 1e9) as u64;
    let gap_ns = 1_000_000_000 / s.rate_pps;
    let phase = rng.next_below(gap_ns.max(1));
    let mut out = Vec::new();
    let mut i = 0u64;
    loop {
        let t = phase + i * gap_ns;
        if t >= duration_ns {
            break;
        }
        let port = s.target_ports[(i % s.target_ports.len() as u64) as usize];
        let mut h = base_header(SCANNER_ADDR, DEVICE_ADDR);
        h.dst_port = port;
        h.tcp_flags = tcp_flags::SYN;
        h.flag_df = false;
        match s.tool {
            ScanTool::Nmap => {
                h.window = 1024;
                h.src_port = 49152 + rng.next_below(16384) as u16;
                h.seq = rng.next_u32();
                h.identification = rng.next_u32() as u16;
            }
            ScanTool::Hping3 => {
                h.window = 512;
                h.src_port = 49152 + rng.next_below(16384) as u16;
                h.seq = rng.next_u32();
                h.identification = rng.next_u32() as u16;
            }
            ScanTool::Zmap => {
                h.ttl = 255;
                h.identification = ZMAP_IP_ID;
                h.seq = h.dst_addr;
                h.src_port = 49152 + rng.next_below(16384) as u16;
            }
            ScanTool::Masscan => {
                h.ttl = 255;
                h.seq = masscan_seq(h.dst_addr, port);
                h.src_port = 49152 + rng.next_below(16384) as u16;
                h.identification = rng.next_u32() as u16;
            }
            ScanTool::Unicornscan => {
                h.src_port = UNICORNSCAN_SRC_PORT;
                h.window = 16384;
                h.seq = rng.next_u32();
                h.identification = rng.next_u32() as u16;
            }
        }
        out.push(PacketBuf::new(h, t));
        i += 1;
    }
    out
}

/// A generated stream together with its origin label.
#[derive(Debug, Clone)]
pub struct LabeledStream {
    pub packets: Vec<PacketBuf>,
    pub label: Class,
    pub source: Provenance,
}

impl LabeledStream {
    pub fn benign(packets: Vec<PacketBuf>) -> Self {
        Self {
            packets,
            label: Class::Benign,
            source: Provenance::SyntheticBenign,
        }
    }

    pub fn scan(packets: Vec<PacketBuf>) -> Self {
        Self {
            packets,
            label: Class::Malicious,
            source: Provenance::SyntheticScan,
        }
    }
}

/// Merge labeled streams into one timeline, stable-sorted by arrival time.
pub fn merge_streams(streams: &[LabeledStream]) -> Vec<(PacketBuf, Class, Provenance)> {
    let mut merged: Vec<(PacketBuf, Class, Provenance)> = streams
        .iter()
        .flat_map(|s| {
            s.packets
                .iter()
                .map(move |p| (p.clone(), s.label, s.source))
        })
        .collect();
    merged.sort_by_key(|(p, _, _)| p.arrival_ns);
    merged
}

/// Apply feature extraction to every packet of the merged timeline and
/// label each sample by its stream origin.
pub fn export_dataset(streams: &[LabeledStream]) -> LabeledDataset {
    let mut d = LabeledDataset::new(crate::packet::FEATURE_LEN);
    for (p, label, source) in merge_streams(streams) {
        let fv = crate::packet::extract_features(&p.header);
        d.push(fv.as_slice().to_vec(), label, source);
    }
    d
}

/// Serialize a stream to classic pcap (raw IP link type).
pub fn write_pcap<W: Write>(packets: &[PacketBuf], sink: W) -> Result<(), PcapError> {
    let mut w = PcapWriter::new(sink, LINKTYPE_RAW_IP)?;
    for p in packets {
        w.write_ip_packet(&serialize_header(&p.header), p.arrival_ns)?;
    }
    Ok(())
}
