use std::io::{ErrorKind, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use super::{BridgeError, MAX_FRAME_BYTES};

/// Moves whole length-prefixed frames between two endpoints.
pub trait Transport: Send {
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), BridgeError>;
    /// Blocks up to `timeout`; `Ok(None)` on timeout.
    fn recv_frame(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, BridgeError>;
}

pub struct LoopbackTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// Two connected in-process endpoints.
pub fn loopback_pair() -> (LoopbackTransport, LoopbackTransport) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    (LoopbackTransport { tx: a_tx, rx: a_rx }, LoopbackTransport { tx: b_tx, rx: b_rx })
}

impl Transport for LoopbackTransport {
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), BridgeError> {
        self.tx.send(frame.to_vec()).map_err(|_| BridgeError::Disconnected)
    }

    fn recv_frame(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, BridgeError> {
        match self.rx.recv_timeout(timeout) {
            Ok(f) => Ok(Some(f)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(BridgeError::Disconnected),
        }
    }
}

pub struct TcpTransport {
    stream: TcpStream,
}

impl TcpTransport {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, BridgeError> {
        Self::from_stream(TcpStream::connect(addr)?)
    }

    pub fn from_stream(stream: TcpStream) -> Result<Self, BridgeError> {
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }
}

impl Transport for TcpTransport {
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), BridgeError> {
        self.stream.write_all(frame).map_err(io_error)?;
        self.stream.flush().map_err(io_error)
    }

    fn recv_frame(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, BridgeError> {
        self.stream.set_read_timeout(Some(timeout.max(Duration::from_millis(1))))?;
        let mut prefix = [0u8; 4];
        match self.stream.read_exact(&mut prefix) {
            Ok(()) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => return Ok(None),
            Err(e) => return Err(io_error(e)),
        }
        let len = u32::from_be_bytes(prefix) as usize;
        if len > MAX_FRAME_BYTES {
            return Err(BridgeError::Malformed { offset: 0, reason: format!("announced length {len} exceeds limit") });
        }
        let mut frame = prefix.to_vec();
        frame.resize(len + 4, 0);
        // Once a prefix arrived the body follows; a stall here is a broken peer.
        self.stream.read_exact(&mut frame[4..]).map_err(io_error)?;
        Ok(Some(frame))
    }
}

fn io_error(e: std::io::Error) -> BridgeError {
    match e.kind() {
        ErrorKind::UnexpectedEof | ErrorKind::BrokenPipe | ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted => {
            BridgeError::Disconnected
        }
        _ => BridgeError::Io(e),
    }
}
