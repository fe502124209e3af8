use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    decode, encode, BridgeError, BridgeMessage, CommandMessage, EnvCommand, Handshake, Payload, Transport,
    PROTOCOL_VERSION,
};
use crate::autonomy::VehicleCommand;
use crate::sensors::SensorFrame;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub outgoing: bool,
    /// JSON body as it crossed the wire.
    pub body: String,
}

/// One side of a session: numbers outgoing messages and checks incoming ones.
pub struct Endpoint {
    transport: Box<dyn Transport>,
    session_id: u64,
    timeout: Duration,
    next_out: u64,
    last_in: Option<u64>,
    /// Latest frame tick seen or sent, for diagnostics.
    pub tick: u64,
    transcript: Option<Vec<TranscriptEntry>>,
}

impl Endpoint {
    pub fn new(transport: Box<dyn Transport>, session_id: u64, timeout: Duration) -> Self {
        Self { transport, session_id, timeout, next_out: 0, last_in: None, tick: 0, transcript: None }
    }

    pub fn record_transcript(mut self) -> Self {
        self.transcript = Some(Vec::new());
        self
    }

    pub fn take_transcript(&mut self) -> Vec<TranscriptEntry> {
        self.transcript.take().unwrap_or_default()
    }

    pub fn session_id(&self) -> u64 {
        self.session_id
    }

    pub fn send(&mut self, payload: Payload) -> Result<(), BridgeError> {
        let msg = BridgeMessage { session_id: self.session_id, tick_index: self.next_out, payload };
        let frame = encode(&msg)?;
        self.note(true, &frame);
        self.transport.send_frame(&frame)?;
        self.next_out += 1;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Payload, BridgeError> {
        let frame = self
            .transport
            .recv_frame(self.timeout)?
            .ok_or(BridgeError::Timeout { tick: self.tick, timeout: self.timeout })?;
        let msg = decode(&frame)?;
        self.note(false, &frame);
        if msg.session_id != self.session_id {
            return Err(BridgeError::Protocol(format!(
                "session {} on a {} session",
                msg.session_id, self.session_id
            )));
        }
        if self.last_in.is_some_and(|last| msg.tick_index <= last) {
            return Err(BridgeError::Protocol(format!("tick_index {} not increasing", msg.tick_index)));
        }
        self.last_in = Some(msg.tick_index);
        Ok(msg.payload)
    }

    fn note(&mut self, outgoing: bool, frame: &[u8]) {
        if let Some(t) = self.transcript.as_mut() {
            t.push(TranscriptEntry { outgoing, body: String::from_utf8_lossy(&frame[4..]).into_owned() });
        }
    }

    /// Best-effort fault notice before giving up on the session.
    fn fault(&mut self, reason: &str) {
        let _ = self.send(Payload::Fault { reason: reason.to_string() });
    }
}

/// The simulator side of a session.
pub trait FrameSource {
    /// Prepares a run and returns frame 0.
    fn start(&mut self, handshake: &Handshake) -> Result<SensorFrame, String>;
    /// Takes effect from the next frame.
    fn apply_env(&mut self, env: &EnvCommand) -> Result<(), String>;
    /// Applies the command for one control period and returns the next frame.
    fn advance(&mut self, command: &VehicleCommand) -> Result<SensorFrame, String>;
}

/// Runs the simulator end of one session until the client finishes.
/// Returns the number of frames sent.
pub fn serve<S: FrameSource>(ep: &mut Endpoint, source: &mut S) -> Result<u64, BridgeError> {
    let handshake = match ep.recv()? {
        Payload::Handshake(h) => h,
        other => {
            let msg = format!("expected handshake, got {}", other.kind());
            ep.fault(&msg);
            return Err(BridgeError::Protocol(msg));
        }
    };
    if handshake.version != PROTOCOL_VERSION {
        ep.fault("version mismatch");
        return Err(BridgeError::VersionMismatch { got: handshake.version, expected: PROTOCOL_VERSION });
    }
    let mut frame = match source.start(&handshake) {
        Ok(f) => f,
        Err(e) => {
            ep.fault(&e);
            return Err(BridgeError::Remote(e));
        }
    };
    ep.send(Payload::Ack { message: format!("v{PROTOCOL_VERSION}") })?;
    let mut sent = 0;
    loop {
        ep.tick = frame.tick;
        ep.send(Payload::SensorFrame(Box::new(frame)))?;
        sent += 1;
        let command = loop {
            let payload = match ep.recv() {
                Ok(p) => p,
                Err(e) => {
                    ep.fault(&e.to_string());
                    return Err(e);
                }
            };
            match payload {
                Payload::EnvCommand(env) => {
                    if let Err(e) = source.apply_env(&env) {
                        ep.fault(&e);
                        return Err(BridgeError::Remote(e));
                    }
                }
                Payload::VehicleCommand(c) => break c,
                Payload::Fault { reason } => return Err(BridgeError::Remote(reason)),
                other => {
                    let msg = format!("unexpected {} inside a tick", other.kind());
                    ep.fault(&msg);
                    return Err(BridgeError::Protocol(msg));
                }
            }
        };
        if command.frame_tick != ep.tick {
            let msg = format!("command answers frame {} but frame {} is pending", command.frame_tick, ep.tick);
            ep.fault(&msg);
            return Err(BridgeError::Protocol(msg));
        }
        if command.finish {
            ep.send(Payload::Ack { message: "finished".into() })?;
            return Ok(sent);
        }
        frame = match source.advance(&command.command) {
            Ok(f) => f,
            Err(e) => {
                ep.fault(&e);
                return Err(BridgeError::Remote(e));
            }
        };
    }
}

/// The SUT side of a session.
pub struct ClientSession {
    pub endpoint: Endpoint,
    pending_tick: Option<u64>,
}

impl ClientSession {
    /// Sends the handshake and waits for the acknowledgement.
    pub fn connect(mut endpoint: Endpoint, handshake: Handshake) -> Result<Self, BridgeError> {
        endpoint.send(Payload::Handshake(handshake))?;
        match endpoint.recv()? {
            Payload::Ack { .. } => Ok(Self { endpoint, pending_tick: None }),
            Payload::Fault { reason } if reason == "version mismatch" => {
                Err(BridgeError::Remote("handshake refused: version mismatch".into()))
            }
            Payload::Fault { reason } => Err(BridgeError::Remote(reason)),
            other => Err(BridgeError::Protocol(format!("expected ack, got {}", other.kind()))),
        }
    }

    pub fn recv_frame(&mut self) -> Result<SensorFrame, BridgeError> {
        match self.endpoint.recv()? {
            Payload::SensorFrame(f) => {
                self.endpoint.tick = f.tick;
                self.pending_tick = Some(f.tick);
                Ok(*f)
            }
            Payload::Fault { reason } => Err(BridgeError::Remote(reason)),
            other => Err(BridgeError::Protocol(format!("expected sensor_frame, got {}", other.kind()))),
        }
    }

    /// Only valid while a frame is awaiting its command.
    pub fn send_env(&mut self, env: EnvCommand) -> Result<(), BridgeError> {
        if self.pending_tick.is_none() {
            return Err(BridgeError::Protocol("env_command outside a tick".into()));
        }
        self.endpoint.send(Payload::EnvCommand(env))
    }

    pub fn send_command(&mut self, command: VehicleCommand, finish: bool) -> Result<(), BridgeError> {
        let frame_tick = self
            .pending_tick
            .take()
            .ok_or_else(|| BridgeError::Protocol("vehicle_command without a pending frame".into()))?;
        self.endpoint.send(Payload::VehicleCommand(CommandMessage { frame_tick, command, finish }))?;
        if finish {
            match self.endpoint.recv()? {
                Payload::Ack { .. } => {}
                Payload::Fault { reason } => return Err(BridgeError::Remote(reason)),
                other => return Err(BridgeError::Protocol(format!("expected ack, got {}", other.kind()))),
            }
        }
        Ok(())
    }
}
