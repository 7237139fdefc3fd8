//! Classic pcap file support.
//!
//! Layout is the original libpcap format: a 24-byte global header whose
//! magic is 0xa1b2c3d4 in either byte order, then per-record 16-byte headers
//! (ts_sec, ts_usec, incl_len, orig_len) followed by incl_len data bytes.
//! Supported link types are Ethernet (14-byte frame stripped, only
//! ethertype 0x0800 considered) and raw IP. pcapng is out of scope.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{parse_ipv4_tcp, PacketBuf};

pub const PCAP_MAGIC: u32 = 0xA1B2_C3D4;
pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_RAW_IP: u32 = 101;

#[derive(Debug, Error)]
pub enum PcapError {
    /// The stream does not start with a recognized pcap magic number.
    #[error("unrecognized pcap magic number")]
    BadMagic,
    /// A record header or its declared data extends past the end of the
    /// stream.
    #[error("pcap record exceeds remaining stream")]
    CorruptRecord,
    /// Transport-level read/write failure; never produced by in-memory
    /// streams.
    #[error("pcap i/o error")]
    Io(#[from] io::Error),
}

/// One raw capture record: timestamps plus the exact bytes on file.
#[derive(Debug, Clone)]
pub struct PcapRecord {
    pub ts_sec: u32,
    pub ts_usec: u32,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

impl PcapRecord {
    pub fn arrival_ns(&self) -> u64 {
        self.ts_sec as u64 * 1_000_000_000 + self.ts_usec as u64 * 1_000
    }
}

/// Streaming reader over the records of a classic pcap file.
pub struct PcapReader<R: Read> {
    src: R,
    swapped: bool,
    link_type: u32,
    eof: bool,
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut src: R) -> Result<Self, PcapError> {
        let mut magic = [0u8; 4];
        if read_exact_or_eof(&mut src, &mut magic)? != 4 {
            return Err(PcapError::BadMagic);
        }
        let native = u32::from_le_bytes(magic);
        let swapped = if native == PCAP_MAGIC {
            false
        } else if native.swap_bytes() == PCAP_MAGIC {
            true
        } else {
            return Err(PcapError::BadMagic);
        };
        let mut rest = [0u8; 20];
        if read_exact_or_eof(&mut src, &mut rest)? != 20 {
            return Err(PcapError::CorruptRecord);
        }
        let link_type = read_u32(&rest[16..20], swapped);
        Ok(Self {
            src,
            swapped,
            link_type,
            eof: false,
        })
    }

    pub fn link_type(&self) -> u32 {
        self.link_type
    }

    /// Next raw record, or `None` at a clean end of stream.
    pub fn next_record(&mut self) -> Result<Option<PcapRecord>, PcapError> {
        if self.eof {
            return Ok(None);
        }
        let mut head = [0u8; 16];
        let got = read_exact_or_eof(&mut self.src, &mut head)?;
        if got == 0 {
            self.eof = true;
            return Ok(None);
        }
        if got != 16 {
            return Err(PcapError::CorruptRecord);
        }
        let ts_sec = read_u32(&head[0..4], self.swapped);
        let ts_usec = read_u32(&head[4..8], self.swapped);
        let incl_len = read_u32(&head[8..12], self.swapped);
        let orig_len = read_u32(&head[12..16], self.swapped);
        // 256 MiB guard: a length near u32::MAX would otherwise attempt a
        // matching allocation before the short read is detected.
        if incl_len > 0x1000_0000 {
            return Err(PcapError::CorruptRecord);
        }
        let mut data = vec![0u8; incl_len as usize];
        if read_exact_or_eof(&mut self.src, &mut data)? != data.len() {
            return Err(PcapError::CorruptRecord);
        }
        Ok(Some(PcapRecord {
            ts_sec,
            ts_usec,
            orig_len,
            data,
        }))
    }

    /// The IP bytes of a record under this file's link type, if any.
    pub fn ip_slice<'a>(&self, rec: &'a PcapRecord) -> Option<&'a [u8]> {
        link_strip(self.link_type, &rec.data)
    }
}

/// Strip the link layer; `None` when the record cannot carry IPv4.
pub fn link_strip(link_type: u32, data: &[u8]) -> Option<&[u8]> {
    match link_type {
        LINKTYPE_RAW_IP => Some(data),
        LINKTYPE_ETHERNET => {
            if data.len() < 14 {
                return None;
            }
            let ethertype = u16::from_be_bytes([data[12], data[13]]);
            if ethertype == 0x0800 {
                Some(&data[14..])
            } else {
                None
            }
        }
        _ => None,
    }
}

fn read_u32(b: &[u8], swapped: bool) -> u32 {
    let v = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
    if swapped {
        v.swap_bytes()
    } else {
        v
    }
}

/// Like `read_exact` but distinguishes clean EOF (0 bytes) and short reads.
fn read_exact_or_eof<R: Read>(src: &mut R, buf: &mut [u8]) -> Result<usize, PcapError> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = src.read(&mut buf[filled..])?;
        if n == 0 {
            return Ok(filled);
        }
        filled += n;
    }
    Ok(filled)
}

/// Read a whole capture, yielding one `PacketBuf` per TCP-over-IPv4 record.
/// Non-TCP records (UDP, ARP frames, unsupported link types) are skipped
/// silently; record timestamps become arrival times.
pub fn read_pcap<R: Read>(src: R) -> Result<Vec<PacketBuf>, PcapError> {
    let mut reader = PcapReader::new(src)?;
    let mut out = Vec::new();
    while let Some(rec) = reader.next_record()? {
        if let Some(ip) = reader.ip_slice(&rec) {
            if let Ok(p) = parse_ipv4_tcp(ip, rec.arrival_ns()) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Writer producing little-endian classic pcap with snaplen 65535.
pub struct PcapWriter<W: Write> {
    dst: W,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut dst: W, link_type: u32) -> Result<Self, PcapError> {
        dst.write_all(&PCAP_MAGIC.to_le_bytes())?;
        dst.write_all(&2u16.to_le_bytes())?; // version major
        dst.write_all(&4u16.to_le_bytes())?; // version minor
        dst.write_all(&0i32.to_le_bytes())?; // thiszone
        dst.write_all(&0u32.to_le_bytes())?; // sigfigs
        dst.write_all(&65535u32.to_le_bytes())?; // snaplen
        dst.write_all(&link_type.to_le_bytes())?;
        Ok(Self { dst })
    }

    pub fn write_record(&mut self, rec: &PcapRecord) -> Result<(), PcapError> {
        self.dst.write_all(&rec.ts_sec.to_le_bytes())?;
        self.dst.write_all(&rec.ts_usec.to_le_bytes())?;
        self.dst.write_all(&(rec.data.len() as u32).to_le_bytes())?;
        self.dst.write_all(&rec.orig_len.to_le_bytes())?;
        self.dst.write_all(&rec.data)?;
        Ok(())
    }

    /// Convenience for raw-IP captures: one record per byte buffer.
    pub fn write_ip_packet(&mut self, bytes: &[u8], arrival_ns: u64) -> Result<(), PcapError> {
        let rec = PcapRecord {
            ts_sec: (arrival_ns / 1_000_000_000) as u32,
            ts_usec: ((arrival_ns % 1_000_000_000) / 1_000) as u32,
            orig_len: bytes.len() as u32,
            data: bytes.to_vec(),
        };
        self.write_record(&rec)
    }

    pub fn into_inner(self) -> W {
        self.dst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::serialize_header;
    use crate::packet::tcp_flags;
    use crate::packet::PacketHeader;
    use std::io::Cursor;

    fn tcp_packet_bytes() -> Vec<u8> {
        let h = PacketHeader {
            ip_version: 4,
            ihl: 5,
            tos: 0,
            total_length: 40,
            identification: 9,
            flag_df: false,
            flag_mf: false,
            frag_offset: 0,
            ttl: 63,
            protocol: 6,
            src_addr: 0x0A00_0001,
            dst_addr: 0x0A00_0002,
            src_port: 5555,
            dst_port: 443,
            seq: 1,
            ack: 2,
            data_offset: 5,
            tcp_flags: tcp_flags::SYN,
            window: 512,
            urgent_ptr: 0,
        };
        serialize_header(&h)
    }

    /// Build a classic pcap stream by hand, byte by byte.
    fn hand_built_pcap(records: &[(u32, u32, &[u8])], link_type: u32) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&PCAP_MAGIC.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&65535u32.to_le_bytes());
        out.extend_from_slice(&link_type.to_le_bytes());
        for (sec, usec, data) in records {
            out.extend_from_slice(&sec.to_le_bytes());
            out.extend_from_slice(&usec.to_le_bytes());
            out.extend_from_slice(&(data.len() as u32).to_le_bytes());
            out.extend_from_slice(&(data.len() as u32).to_le_bytes());
            out.extend_from_slice(data);
        }
        out
    }

    #[test]
    fn single_tcp_record_round_trips() {
        let pkt = tcp_packet_bytes();
        let stream = hand_built_pcap(&[(3, 250, &pkt)], LINKTYPE_RAW_IP);
        let parsed = read_pcap(Cursor::new(stream)).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].header.src_port, 5555);
        assert_eq!(parsed[0].header.dst_port, 443);
        assert_eq!(parsed[0].arrival_ns, 3_000_250_000);
    }

    #[test]
    fn udp_record_skipped_silently() {
        let mut pkt = tcp_packet_bytes();
        pkt[9] = 17; // UDP
        let stream = hand_built_pcap(&[(0, 0, &pkt)], LINKTYPE_RAW_IP);
        assert!(read_pcap(Cursor::new(stream)).unwrap().is_empty());
    }

    #[test]
    fn bad_magic_rejected() {
        let stream = [0xDEu8, 0xAD, 0xBE, 0xEF, 0, 0, 0, 0];
        assert!(matches!(
            read_pcap(Cursor::new(stream.to_vec())),
            Err(PcapError::BadMagic)
        ));
    }

    #[test]
    fn record_past_end_is_corrupt() {
        let pkt = tcp_packet_bytes();
        let mut stream = hand_built_pcap(&[(0, 0, &pkt)], LINKTYPE_RAW_IP);
        stream.truncate(stream.len() - 10);
        assert!(matches!(
            read_pcap(Cursor::new(stream)),
            Err(PcapError::CorruptRecord)
        ));
    }

    #[test]
    fn swapped_endianness_accepted() {
        let pkt = tcp_packet_bytes();
        let mut out = Vec::new();
        out.extend_from_slice(&PCAP_MAGIC.to_be_bytes());
        out.extend_from_slice(&2u16.to_be_bytes());
        out.extend_from_slice(&4u16.to_be_bytes());
        out.extend_from_slice(&0u32.to_be_bytes());
        out.extend_from_slice(&0u32.to_be_bytes());
        out.extend_from_slice(&65535u32.to_be_bytes());
        out.extend_from_slice(&LINKTYPE_RAW_IP.to_be_bytes());
        out.extend_from_slice(&1u32.to_be_bytes());
        out.extend_from_slice(&0u32.to_be_bytes());
        out.extend_from_slice(&(pkt.len() as u32).to_be_bytes());
        out.extend_from_slice(&(pkt.len() as u32).to_be_bytes());
        out.extend_from_slice(&pkt);
        let parsed = read_pcap(Cursor::new(out)).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].arrival_ns, 1_000_000_000);
    }

    #[test]
    fn ethernet_frames_stripped() {
        let pkt = tcp_packet_bytes();
        let mut frame = vec![0u8; 14];
        frame[12] = 0x08;
        frame[13] = 0x00;
        frame.extend_from_slice(&pkt);
        let stream = hand_built_pcap(&[(0, 1, &frame)], LINKTYPE_ETHERNET);
        let parsed = read_pcap(Cursor::new(stream)).unwrap();
        assert_eq!(parsed.len(), 1);

        // ARP ethertype skipped
        let mut arp = vec![0u8; 14];
        arp[12] = 0x08;
        arp[13] = 0x06;
        let stream = hand_built_pcap(&[(0, 1, &arp)], LINKTYPE_ETHERNET);
        assert!(read_pcap(Cursor::new(stream)).unwrap().is_empty());
    }

    #[test]
    fn writer_output_reads_back() {
        let pkt = tcp_packet_bytes();
        let mut w = PcapWriter::new(Vec::new(), LINKTYPE_RAW_IP).unwrap();
        w.write_ip_packet(&pkt, 1_500_000_000).unwrap();
        w.write_ip_packet(&pkt, 2_500_000_000).unwrap();
        let bytes = w.into_inner();
        let parsed = read_pcap(Cursor::new(bytes)).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].arrival_ns, 1_500_000_000);
        assert_eq!(parsed[1].arrival_ns, 2_500_000_000);
    }
}
