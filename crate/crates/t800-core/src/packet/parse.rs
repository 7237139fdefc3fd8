//! Wire-format decoding and encoding of IPv4/TCP headers.
//!
//! Input buffers start at the IP header (link layer already stripped).
//! Multi-byte fields are big-endian per the standard layout. Checksums are
//! carried on the wire but neither verified nor stored.

use thiserror::Error;

use super::{PacketBuf, PacketHeader};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    /// Buffer shorter than the headers it declares (or a length field that
    /// truncates its own headers).
    #[error("buffer too short for declared headers")]
    Truncated,
    /// Version nibble is not 4.
    #[error("not an IPv4 packet (version {0})")]
    NotIPv4(u8),
    /// IP protocol field is not TCP.
    #[error("not a TCP segment (protocol {0})")]
    NotTCP(u8),
}

fn be16(b: &[u8], off: usize) -> u16 {
    u16::from_be_bytes([b[off], b[off + 1]])
}

fn be32(b: &[u8], off: usize) -> u32 {
    u32::from_be_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

/// Decode one IPv4/TCP packet. The version nibble is checked before
/// anything else; every length-related defect maps to `Truncated` and an
/// unexpected transport protocol to `NotTCP`, so those three variants are
/// the complete failure surface.
pub fn parse_ipv4_tcp(bytes: &[u8], arrival_ns: u64) -> Result<PacketBuf, ParseError> {
    if bytes.is_empty() {
        return Err(ParseError::Truncated);
    }
    let version = bytes[0] >> 4;
    if version != 4 {
        return Err(ParseError::NotIPv4(version));
    }
    if bytes.len() < 20 {
        return Err(ParseError::Truncated);
    }
    let ihl = bytes[0] & 0x0F;
    if ihl < 5 {
        return Err(ParseError::Truncated);
    }
    let ip_header_len = 4 * ihl as usize;
    if bytes.len() < ip_header_len {
        return Err(ParseError::Truncated);
    }
    let protocol = bytes[9];
    if protocol != 6 {
        return Err(ParseError::NotTCP(protocol));
    }

    let tcp = &bytes[ip_header_len..];
    if tcp.len() < 20 {
        return Err(ParseError::Truncated);
    }
    let data_offset = tcp[12] >> 4;
    if data_offset < 5 {
        return Err(ParseError::Truncated);
    }
    if tcp.len() < 4 * data_offset as usize {
        return Err(ParseError::Truncated);
    }

    let total_length = be16(bytes, 2);
    let flags_frag = be16(bytes, 6);
    let header = PacketHeader {
        ip_version: 4,
        ihl,
        tos: bytes[1],
        total_length,
        identification: be16(bytes, 4),
        flag_df: flags_frag & 0x4000 != 0,
        flag_mf: flags_frag & 0x2000 != 0,
        frag_offset: flags_frag & 0x1FFF,
        ttl: bytes[8],
        protocol,
        src_addr: be32(bytes, 12),
        dst_addr: be32(bytes, 16),
        src_port: be16(tcp, 0),
        dst_port: be16(tcp, 2),
        seq: be32(tcp, 4),
        ack: be32(tcp, 8),
        data_offset,
        tcp_flags: tcp[13],
        window: be16(tcp, 14),
        urgent_ptr: be16(tcp, 18),
    };
    // A total_length that cuts into its own headers is a malformed packet.
    if (total_length as usize) < header.header_len() {
        return Err(ParseError::Truncated);
    }
    Ok(PacketBuf::new(header, arrival_ns))
}

/// Encode a header back to wire bytes. The produced buffer is
/// `total_length` bytes: both headers (option areas zero-filled), zeroed
/// checksums and a zero payload. Reparsing yields the identical header.
pub fn serialize_header(h: &PacketHeader) -> Vec<u8> {
    let mut out = vec![0u8; h.total_length as usize];
    out[0] = (h.ip_version << 4) | h.ihl;
    out[1] = h.tos;
    out[2..4].copy_from_slice(&h.total_length.to_be_bytes());
    out[4..6].copy_from_slice(&h.identification.to_be_bytes());
    let mut flags_frag = h.frag_offset & 0x1FFF;
    if h.flag_df {
        flags_frag |= 0x4000;
    }
    if h.flag_mf {
        flags_frag |= 0x2000;
    }
    out[6..8].copy_from_slice(&flags_frag.to_be_bytes());
    out[8] = h.ttl;
    out[9] = h.protocol;
    // bytes 10..12: header checksum, left zero
    out[12..16].copy_from_slice(&h.src_addr.to_be_bytes());
    out[16..20].copy_from_slice(&h.dst_addr.to_be_bytes());

    let t = 4 * h.ihl as usize;
    out[t..t + 2].copy_from_slice(&h.src_port.to_be_bytes());
    out[t + 2..t + 4].copy_from_slice(&h.dst_port.to_be_bytes());
    out[t + 4..t + 8].copy_from_slice(&h.seq.to_be_bytes());
    out[t + 8..t + 12].copy_from_slice(&h.ack.to_be_bytes());
    out[t + 12] = h.data_offset << 4;
    out[t + 13] = h.tcp_flags;
    out[t + 14..t + 16].copy_from_slice(&h.window.to_be_bytes());
    // bytes t+16..t+18: TCP checksum, left zero
    out[t + 18..t + 20].copy_from_slice(&h.urgent_ptr.to_be_bytes());
    out
}
