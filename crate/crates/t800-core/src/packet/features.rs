//! Fixed-order numeric encoding of header fields.
//!
//! The 16-slot layout covers every header field the classifier may use and
//! deliberately contains nothing derived from `tcp.window`. ECE and CWR are
//! OR-combined into one slot to hold the length at 16. Numeric fields use
//! min-max scaling by their bit-width maximum, flags map to 0/1; the
//! constants are parameter-free so the encoding never depends on a model
//! file.

use super::{tcp_flags, PacketHeader};

pub const FEATURE_LEN: usize = 16;

/// Normative slot names, in order. Model files and dataset headers carry
/// exactly these names.
pub const FEATURE_ORDER: [&str; FEATURE_LEN] = [
    "ttl",
    "total_length",
    "flag_df",
    "flag_mf",
    "frag_offset",
    "src_port",
    "dst_port",
    "data_offset",
    "fin",
    "syn",
    "rst",
    "psh",
    "ack",
    "urg",
    "ece_cwr",
    "urgent_ptr",
];

/// Slot index of the SYN flag; used by tests and documentation examples.
pub const SYN_SLOT: usize = 9;

/// Fixed-length feature vector. Length is a compile-time constant, so every
/// policy loaded into the engine is checked against the same width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn flag01(on: bool) -> f64 {
    if on {
        1.0
    } else {
        0.0
    }
}

/// Total, deterministic encoding of a header. Constant in `tcp.window`.
pub fn extract_features(h: &PacketHeader) -> FeatureVector {
    FeatureVector([
        h.ttl as f64 / 255.0,
        h.total_length as f64 / 65535.0,
        flag01(h.flag_df),
        flag01(h.flag_mf),
        h.frag_offset as f64 / 8191.0,
        h.src_port as f64 / 65535.0,
        h.dst_port as f64 / 65535.0,
        h.data_offset as f64 / 15.0,
        flag01(h.flag(tcp_flags::FIN)),
        flag01(h.flag(tcp_flags::SYN)),
        flag01(h.flag(tcp_flags::RST)),
        flag01(h.flag(tcp_flags::PSH)),
        flag01(h.flag(tcp_flags::ACK)),
        flag01(h.flag(tcp_flags::URG)),
        flag01(h.flag(tcp_flags::ECE) || h.flag(tcp_flags::CWR)),
        h.urgent_ptr as f64 / 65535.0,
    ])
}
