//! Packet model: parsed IPv4/TCP headers, the chained packet buffer that
//! mirrors lwIP's pbuf, and the fixed-order feature encoding consumed by
//! every filtering policy.

mod features;
mod parse;
mod pcap;

pub use features::{extract_features, FeatureVector, FEATURE_LEN, FEATURE_ORDER, SYN_SLOT};
pub use parse::{parse_ipv4_tcp, serialize_header, ParseError};
pub use pcap::{
    link_strip, read_pcap, PcapError, PcapReader, PcapRecord, PcapWriter, LINKTYPE_ETHERNET,
    LINKTYPE_RAW_IP,
};

/// TCP flag bits in wire order (bit 0 = FIN .. bit 7 = CWR).
pub mod tcp_flags {
    pub const FIN: u8 = 0x01;
    pub const SYN: u8 = 0x02;
    pub const RST: u8 = 0x04;
    pub const PSH: u8 = 0x08;
    pub const ACK: u8 = 0x10;
    pub const URG: u8 = 0x20;
    pub const ECE: u8 = 0x40;
    pub const CWR: u8 = 0x80;
}

/// Parsed IPv4 + TCP header fields. This is the only input a filtering
/// policy ever sees; payload bytes never reach the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketHeader {
    pub ip_version: u8,
    /// IP header length in 32-bit words (>= 5).
    pub ihl: u8,
    pub tos: u8,
    /// Total datagram length in bytes, headers included.
    pub total_length: u16,
    pub identification: u16,
    pub flag_df: bool,
    pub flag_mf: bool,
    /// Fragment offset in 8-byte units (13 bits).
    pub frag_offset: u16,
    pub ttl: u8,
    /// IP protocol number; always 6 (TCP) for parsed packets.
    pub protocol: u8,
    pub src_addr: u32,
    pub dst_addr: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub ack: u32,
    /// TCP header length in 32-bit words (>= 5).
    pub data_offset: u8,
    /// Flag bitset, see [`tcp_flags`].
    pub tcp_flags: u8,
    pub window: u16,
    pub urgent_ptr: u16,
}

impl PacketHeader {
    pub fn flag(&self, bit: u8) -> bool {
        self.tcp_flags & bit != 0
    }

    /// Header bytes declared by ihl + data_offset.
    pub fn header_len(&self) -> usize {
        4 * self.ihl as usize + 4 * self.data_offset as usize
    }

    /// Payload length implied by total_length minus both headers.
    pub fn payload_len(&self) -> usize {
        self.total_length as usize - self.header_len()
    }

    /// Structural invariants of a well-formed header.
    pub fn is_valid(&self) -> bool {
        self.ip_version == 4
            && self.ihl >= 5
            && self.ihl <= 15
            && self.data_offset >= 5
            && self.data_offset <= 15
            && self.protocol == 6
            && self.frag_offset <= 0x1FFF
            && self.total_length as usize >= self.header_len()
    }
}

/// One packet in the interception path, mirroring lwIP's chained `pbuf`:
/// a header view, the payload length carried by this buffer, an arrival
/// timestamp and an optional link to the next buffer of a sequence. The
/// chain is owned (`Box`), so it is acyclic by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketBuf {
    pub header: PacketHeader,
    pub payload_len: usize,
    pub next: Option<Box<PacketBuf>>,
    /// Arrival time in nanoseconds since stream start.
    pub arrival_ns: u64,
}

impl PacketBuf {
    pub fn new(header: PacketHeader, arrival_ns: u64) -> Self {
        Self {
            payload_len: header.payload_len(),
            header,
            next: None,
            arrival_ns,
        }
    }

    /// Number of buffers in the chain starting at `self`.
    pub fn chain_len(&self) -> usize {
        let mut n = 1;
        let mut cur = self;
        while let Some(next) = cur.next.as_deref() {
            n += 1;
            cur = next;
        }
        n
    }

    /// Append a buffer at the end of the chain.
    pub fn chain_push(&mut self, tail: PacketBuf) {
        let mut cur = self;
        while cur.next.is_some() {
            cur = cur.next.as_deref_mut().unwrap();
        }
        cur.next = Some(Box::new(tail));
    }
}
