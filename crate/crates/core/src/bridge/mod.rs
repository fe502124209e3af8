//! Lockstep co-simulation protocol between the simulator and the system
//! under test. Frames are a 4-byte big-endian length followed by a JSON body.
//! The schema is documented in `docs/bridge-protocol.md`.

mod session;
mod transport;

pub use session::{serve, ClientSession, Endpoint, FrameSource, TranscriptEntry};
pub use transport::{loopback_pair, LoopbackTransport, TcpTransport, Transport};

use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

use crate::autonomy::VehicleCommand;
use crate::environment::Weather;
use crate::sensors::SensorFrame;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);
/// 0 lets the OS pick a free port for each session.
pub const DEFAULT_PORT: u16 = 0;
pub const PORT_ENV: &str = "OFFROAD_VV_PORT";
pub const TIMEOUT_ENV: &str = "OFFROAD_VV_TIMEOUT";

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("payload of {0} bytes exceeds the 16 MiB frame limit")]
    Oversize(usize),
    #[error("malformed frame at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("no message within {timeout:?} (waiting after tick {tick})")]
    Timeout { tick: u64, timeout: Duration },
    #[error("peer disconnected")]
    Disconnected,
    #[error("protocol version {got} refused, expected {expected}")]
    VersionMismatch { got: u32, expected: u32 },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("peer fault: {0}")]
    Remote(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub version: u32,
    pub scenario_id: String,
    /// Physics step, s.
    pub dt: f64,
    /// Interval between sensor frames, s.
    pub control_period: f64,
    pub seed: u64,
    pub time_of_day: f64,
    pub weather: Weather,
    /// Makes the simulator fault when it reaches this frame; for testing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_at_tick: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvCommand {
    pub time_of_day: f64,
    pub weather: Weather,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandMessage {
    /// Tick of the frame this command answers.
    pub frame_tick: u64,
    pub command: VehicleCommand,
    /// Ends the session after this message.
    #[serde(default)]
    pub finish: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "msg_type", content = "payload", rename_all = "snake_case")]
pub enum Payload {
    Handshake(Handshake),
    Ack { message: String },
    Fault { reason: String },
    SensorFrame(Box<SensorFrame>),
    VehicleCommand(CommandMessage),
    EnvCommand(EnvCommand),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Handshake(_) => "handshake",
            Payload::Ack { .. } => "ack",
            Payload::Fault { .. } => "fault",
            Payload::SensorFrame(_) => "sensor_frame",
            Payload::VehicleCommand(_) => "vehicle_command",
            Payload::EnvCommand(_) => "env_command",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeMessage {
    pub session_id: u64,
    /// Per-direction sequence number, starting at 0.
    pub tick_index: u64,
    #[serde(flatten)]
    pub payload: Payload,
}

pub fn encode_body(msg: &BridgeMessage) -> Result<Vec<u8>, BridgeError> {
    let body = serde_json::to_vec(msg).map_err(|e| BridgeError::Protocol(e.to_string()))?;
    if body.len() > MAX_FRAME_BYTES {
        return Err(BridgeError::Oversize(body.len()));
    }
    Ok(body)
}

pub fn encode(msg: &BridgeMessage) -> Result<Vec<u8>, BridgeError> {
    let body = encode_body(msg)?;
    let mut frame = Vec::with_capacity(body.len() + 4);
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

/// Parses a JSON body. `base` is added to error offsets.
pub fn decode_body(body: &[u8], base: usize) -> Result<BridgeMessage, BridgeError> {
    serde_json::from_slice(body).map_err(|e| BridgeError::Malformed {
        offset: base + line_col_offset(body, e.line(), e.column()),
        reason: e.to_string(),
    })
}

fn line_col_offset(body: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in body.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len() + 1;
    }
    body.len()
}

/// Decodes exactly one length-prefixed frame.
pub fn decode(frame: &[u8]) -> Result<BridgeMessage, BridgeError> {
    let Some(len) = frame_len(frame)? else {
        return Err(BridgeError::Malformed { offset: frame.len(), reason: "truncated length prefix".into() });
    };
    if frame.len() != len + 4 {
        return Err(BridgeError::Malformed {
            offset: frame.len().min(len + 4),
            reason: format!("prefix announces {len} bytes, frame carries {}", frame.len() - 4),
        });
    }
    decode_body(&frame[4..], 4)
}

fn frame_len(buf: &[u8]) -> Result<Option<usize>, BridgeError> {
    if buf.len() < 4 {
        return Ok(None);
    }
    let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(BridgeError::Malformed { offset: 0, reason: format!("announced length {len} exceeds limit") });
    }
    Ok(Some(len))
}

/// Reassembles frames from arbitrarily split stream chunks.
#[derive(Debug, Default)]
pub struct FrameBuffer {
    buf: Vec<u8>,
    consumed: usize,
}

impl FrameBuffer {
    pub fn push(&mut self, chunk: &[u8]) -> Result<Vec<BridgeMessage>, BridgeError> {
        self.buf.extend_from_slice(chunk);
        let mut out = Vec::new();
        let mut start = 0;
        while let Some(len) = frame_len(&self.buf[start..]).map_err(|e| shift(e, self.consumed + start))? {
            if self.buf.len() - start < len + 4 {
                break;
            }
            let body = &self.buf[start + 4..start + 4 + len];
            out.push(decode_body(body, self.consumed + start + 4)?);
            start += len + 4;
        }
        self.buf.drain(..start);
        self.consumed += start;
        Ok(out)
    }

    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}

fn shift(e: BridgeError, by: usize) -> BridgeError {
    match e {
        BridgeError::Malformed { offset, reason } => BridgeError::Malformed { offset: offset + by, reason },
        other => other,
    }
}

/// Port and timeout with environment overrides applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSettings {
    pub port: u16,
    pub timeout: Duration,
}

impl Default for BridgeSettings {
    fn default() -> Self {
        Self { port: DEFAULT_PORT, timeout: DEFAULT_TIMEOUT }
    }
}

impl BridgeSettings {
    /// Reads `OFFROAD_VV_PORT` and `OFFROAD_VV_TIMEOUT` (seconds). Unparsable
    /// values are ignored with a warning.
    pub fn from_env() -> Self {
        let mut s = Self::default();
        if let Ok(v) = std::env::var(PORT_ENV) {
            match v.parse() {
                Ok(p) => s.port = p,
                Err(_) => log::warn!("ignoring {PORT_ENV}={v}"),
            }
        }
        if let Ok(v) = std::env::var(TIMEOUT_ENV) {
            match v.parse::<f64>() {
                Ok(t) if t > 0.0 && t.is_finite() => s.timeout = Duration::from_secs_f64(t),
                _ => log::warn!("ignoring {TIMEOUT_ENV}={v}"),
            }
        }
        s
    }
}
