//! The six-step experiment control protocol.
//!
//! One replica exchange is `Begin -> PolicySelect -> Ready -> (workload)
//! -> End -> EndAck`: the device announces itself, the controller selects
//! the filtering policy (which the device installs at runtime), the device
//! reports ready, the workload runs, and the controller closes the
//! experiment. Messages are single byte codes — `Begin=0x01`,
//! `PolicySelect=0x02` followed by the policy code byte, `Ready=0x03`,
//! `End=0x04`, `EndAck=0x05` — carried over an in-process channel by
//! default or a UDP socket pair for two-process runs.

use std::io;
use std::net::UdpSocket;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use thiserror::Error;

/// Step timeout: a protocol peer that stays silent this long aborts the
/// replica.
pub const PROTOCOL_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Message {
    Begin,
    PolicySelect(u8),
    Ready,
    End,
    EndAck,
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            Message::Begin => vec![0x01],
            Message::PolicySelect(code) => vec![0x02, *code],
            Message::Ready => vec![0x03],
            Message::End => vec![0x04],
            Message::EndAck => vec![0x05],
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, ProtocolError> {
        match bytes {
            [0x01] => Ok(Message::Begin),
            [0x02, code] => Ok(Message::PolicySelect(*code)),
            [0x03] => Ok(Message::Ready),
            [0x04] => Ok(Message::End),
            [0x05] => Ok(Message::EndAck),
            _ => Err(ProtocolError::Malformed),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Message::Begin => "Begin",
            Message::PolicySelect(_) => "PolicySelect",
            Message::Ready => "Ready",
            Message::End => "End",
            Message::EndAck => "EndAck",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("protocol violation: unexpected {got} in state {state}")]
    Violation {
        state: &'static str,
        got: &'static str,
    },
    #[error("timeout waiting for {0}")]
    Timeout(&'static str),
    #[error("peer closed the control channel")]
    Closed,
    #[error("malformed protocol datagram")]
    Malformed,
}

/// Position inside one replica exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolState {
    Start,
    Begun,
    PolicyChosen,
    ReadyToRun,
    Ended,
    Done,
}

impl ProtocolState {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolState::Start => "Start",
            ProtocolState::Begun => "Begun",
            ProtocolState::PolicyChosen => "PolicyChosen",
            ProtocolState::ReadyToRun => "ReadyToRun",
            ProtocolState::Ended => "Ended",
            ProtocolState::Done => "Done",
        }
    }

    /// Advance by one observed message; any out-of-order message is a
    /// violation.
    pub fn advance(self, msg: &Message) -> Result<ProtocolState, ProtocolError> {
        use ProtocolState::*;
        let next = match (self, msg) {
            (Start, Message::Begin) => Begun,
            (Begun, Message::PolicySelect(_)) => PolicyChosen,
            (PolicyChosen, Message::Ready) => ReadyToRun,
            (ReadyToRun, Message::End) => Ended,
            (Ended, Message::EndAck) => Done,
            _ => {
                return Err(ProtocolError::Violation {
                    state: self.name(),
                    got: msg.kind_name(),
                })
            }
        };
        Ok(next)
    }
}

/// Full-sequence acceptance: exactly the legal five-message exchange.
pub fn accepts(sequence: &[Message]) -> bool {
    let mut state = ProtocolState::Start;
    for msg in sequence {
        match state.advance(msg) {
            Ok(next) => state = next,
            Err(_) => return false,
        }
    }
    state == ProtocolState::Done
}

/// Transport carrying encoded protocol messages between the controller and
/// the device under test.
pub trait MsgTransport: Send {
    fn send(&mut self, msg: &Message) -> Result<(), ProtocolError>;
    fn recv(&mut self, timeout: Duration) -> Result<Message, ProtocolError>;
}

/// Default in-process transport: one mpsc queue per direction, carrying
/// the same byte encoding as the datagram mode.
pub struct ChannelTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// Connected pair of in-process endpoints.
pub fn channel_pair() -> (ChannelTransport, ChannelTransport) {
    let (atx, brx) = mpsc::channel();
    let (btx, arx) = mpsc::channel();
    (
        ChannelTransport { tx: atx, rx: arx },
        ChannelTransport { tx: btx, rx: brx },
    )
}

impl MsgTransport for ChannelTransport {
    fn send(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        self.tx.send(msg.encode()).map_err(|_| ProtocolError::Closed)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, ProtocolError> {
        match self.rx.recv_timeout(timeout) {
            Ok(bytes) => Message::decode(&bytes),
            Err(RecvTimeoutError::Timeout) => Err(ProtocolError::Timeout("control message")),
            Err(RecvTimeoutError::Disconnected) => Err(ProtocolError::Closed),
        }
    }
}

/// Datagram transport for two-process runs; same byte encoding.
pub struct UdpTransport {
    socket: UdpSocket,
}

impl UdpTransport {
    pub fn new(socket: UdpSocket) -> Self {
        Self { socket }
    }
}

/// Connected localhost UDP socket pair.
pub fn udp_pair() -> io::Result<(UdpTransport, UdpTransport)> {
    let a = UdpSocket::bind("127.0.0.1:0")?;
    let b = UdpSocket::bind("127.0.0.1:0")?;
    a.connect(b.local_addr()?)?;
    b.connect(a.local_addr()?)?;
    Ok((UdpTransport::new(a), UdpTransport::new(b)))
}

impl MsgTransport for UdpTransport {
    fn send(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        self.socket
            .send(&msg.encode())
            .map(|_| ())
            .map_err(|_| ProtocolError::Closed)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, ProtocolError> {
        self.socket
            .set_read_timeout(Some(timeout))
            .map_err(|_| ProtocolError::Closed)?;
        let mut buf = [0u8; 16];
        match self.socket.recv(&mut buf) {
            Ok(n) => Message::decode(&buf[..n]),
            Err(e) if e.kind() == io::ErrorKind::WouldBlock || e.kind() == io::ErrorKind::TimedOut => {
                Err(ProtocolError::Timeout("control datagram"))
            }
            Err(_) => Err(ProtocolError::Closed),
        }
    }
}
