//! Session wire format, version 1. Transport-independent encode/decode.
//!
//! The client opens with a JSON text handshake; everything after that is
//! binary and little-endian:
//!
//! ```text
//! ACTION  client  [0x01][i16 x 7][u16 num_steps]                      17 bytes
//! RESET   client  [0x03][u64 seed]                                      9 bytes
//! FRAME   server  [0x02][u32 tick][f32 step_reward][f32 episode_score]
//!                 [u16 width][u16 height][u8 channels][pixels]
//!                 [f32 x 3 vel_trans][f32 x 3 vel_rot][u8 episode_done]
//! ```
//!
//! The FRAME pixel payload is the first pixel observation in handshake
//! order (`channels` = 0 and no payload if none was requested). Velocity
//! fields are zero unless the matching observation was requested.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, EnvConfig, EnvError, ObservationName, ObservationSpec, ObservationValue};
use crate::sim::ActionVector;
use crate::tasks::TaskOverrides;
use crate::PROTOCOL_VERSION;

pub const MSG_ACTION: u8 = 0x01;
pub const MSG_FRAME: u8 = 0x02;
pub const MSG_RESET: u8 = 0x03;

pub const ACTION_LEN: usize = 1 + 7 * 2 + 2;
pub const RESET_LEN: usize = 1 + 8;
/// Largest binary message a client may send.
pub const MAX_CLIENT_MESSAGE: usize = 64;
/// Largest handshake text a client may send.
pub const MAX_HANDSHAKE: usize = 4096;
pub const HANDSHAKE_TIMEOUT_SECS: u64 = 5;

/// WebSocket close codes for protocol violations.
pub mod close {
    pub const BAD_HANDSHAKE: u16 = 4000;
    pub const BAD_MAGIC: u16 = 4001;
    pub const OVERSIZE: u16 = 4002;
    pub const HANDSHAKE_TIMEOUT: u16 = 4003;
    pub const MALFORMED_LENGTH: u16 = 4004;
    pub const EPISODE_FINISHED: u16 = 4005;
    pub const UNSUPPORTED_VERSION: u16 = 4006;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("bad handshake: {0}")]
    BadHandshake(String),
    #[error("unknown message type 0x{0:02x}")]
    BadMagic(u8),
    #[error("message of {0} bytes exceeds the limit")]
    Oversize(usize),
    #[error("message type 0x{kind:02x} needs {expected} bytes, got {got}")]
    MalformedLength { kind: u8, expected: usize, got: usize },
    #[error("num_steps must be at least 1")]
    ZeroSteps,
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u32),
    #[error("empty message")]
    Empty,
}

impl ProtocolError {
    pub fn close_code(&self) -> u16 {
        match self {
            ProtocolError::BadHandshake(_) => close::BAD_HANDSHAKE,
            ProtocolError::BadMagic(_) | ProtocolError::Empty => close::BAD_MAGIC,
            ProtocolError::Oversize(_) => close::OVERSIZE,
            ProtocolError::MalformedLength { .. } | ProtocolError::ZeroSteps => close::MALFORMED_LENGTH,
            ProtocolError::UnsupportedVersion(_) => close::UNSUPPORTED_VERSION,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pacing {
    /// The world advances only when an ACTION arrives.
    #[default]
    LockStep,
    /// The world advances at fps, repeating the latest ACTION.
    RealTime,
}

fn default_fps() -> u32 {
    60
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: u32,
    pub level: String,
    pub width: usize,
    pub height: usize,
    pub observations: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    /// Server default when absent.
    #[serde(default)]
    pub pacing: Option<Pacing>,
    #[serde(default = "default_fps")]
    pub fps: u32,
    /// Task overrides as `key = value` strings.
    #[serde(default)]
    pub overrides: Vec<String>,
}

impl Handshake {
    pub fn new(config: &EnvConfig, pacing: Pacing) -> Self {
        Handshake {
            protocol: PROTOCOL_VERSION,
            level: config.level_name.clone(),
            width: config.width,
            height: config.height,
            observations: config.observations.iter().map(|o| o.as_str().to_string()).collect(),
            seed: config.seed,
            pacing: Some(pacing),
            fps: config.fps,
            overrides: config.overrides.entries().iter().map(|(k, v)| format!("{k} = {v}")).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Handshake, ProtocolError> {
        if text.len() > MAX_HANDSHAKE {
            return Err(ProtocolError::Oversize(text.len()));
        }
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ProtocolError::BadHandshake(e.to_string()))?;
        // Check the version before the rest so old clients get a clear answer.
        match value.get("protocol").and_then(|v| v.as_u64()) {
            Some(v) if v == PROTOCOL_VERSION as u64 => {}
            Some(v) => return Err(ProtocolError::UnsupportedVersion(v as u32)),
            None => return Err(ProtocolError::BadHandshake("missing protocol".into())),
        }
        serde_json::from_value(value).map_err(|e| ProtocolError::BadHandshake(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("handshake serializes")
    }

    pub fn env_config(&self) -> Result<EnvConfig, EnvError> {
        let observations = self
            .observations
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<ObservationName>, _>>()?;
        let mut overrides = TaskOverrides::new();
        for line in &self.overrides {
            overrides.push_assignment(line)?;
        }
        let config = EnvConfig {
            level_name: self.level.clone(),
            observations,
            width: self.width,
            height: self.height,
            fps: self.fps,
            seed: self.seed,
            overrides,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HandshakeReply {
    Ok { ok: bool, spec: Vec<ObservationSpec> },
    Error { error: String },
}

impl HandshakeReply {
    pub fn ok(spec: Vec<ObservationSpec>) -> Self {
        HandshakeReply::Ok { ok: true, spec }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reply serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClientMessage {
    Action { action: ActionVector, num_steps: u16 },
    Reset { seed: u64 },
}

impl ClientMessage {
    pub fn encode(&self) -> Vec<u8> {
        match *self {
            ClientMessage::Action { action, num_steps } => {
                let mut out = Vec::with_capacity(ACTION_LEN);
                out.push(MSG_ACTION);
                for v in action.clamped().to_array() {
                    out.extend_from_slice(&(v as i16).to_le_bytes());
                }
                out.extend_from_slice(&num_steps.to_le_bytes());
                out
            }
            ClientMessage::Reset { seed } => {
                let mut out = Vec::with_capacity(RESET_LEN);
                out.push(MSG_RESET);
                out.extend_from_slice(&seed.to_le_bytes());
                out
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<ClientMessage, ProtocolError> {
        if bytes.len() > MAX_CLIENT_MESSAGE {
            return Err(ProtocolError::Oversize(bytes.len()));
        }
        let (&kind, body) = bytes.split_first().ok_or(ProtocolError::Empty)?;
        let expect = |n: usize| {
            if bytes.len() == n {
                Ok(())
            } else {
                Err(ProtocolError::MalformedLength {
                    kind,
                    expected: n,
                    got: bytes.len(),
                })
            }
        };
        match kind {
            MSG_ACTION => {
                expect(ACTION_LEN)?;
                let mut a = [0i32; 7];
                for (i, v) in a.iter_mut().enumerate() {
                    *v = i16::from_le_bytes([body[2 * i], body[2 * i + 1]]) as i32;
                }
                let num_steps = u16::from_le_bytes([body[14], body[15]]);
                if num_steps == 0 {
                    return Err(ProtocolError::ZeroSteps);
                }
                Ok(ClientMessage::Action {
                    action: ActionVector::from_array(a),
                    num_steps,
                })
            }
            MSG_RESET => {
                expect(RESET_LEN)?;
                Ok(ClientMessage::Reset {
                    seed: u64::from_le_bytes(body.try_into().unwrap()),
                })
            }
            other => Err(ProtocolError::BadMagic(other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub tick: u32,
    pub step_reward: f32,
    pub episode_score: f32,
    pub width: u16,
    pub height: u16,
    pub channels: u8,
    pub pixels: Vec<u8>,
    pub vel_trans: [f32; 3],
    pub vel_rot: [f32; 3],
    pub episode_done: bool,
}

impl Frame {
    const FIXED_LEN: usize = 1 + 4 + 4 + 4 + 2 + 2 + 1 + 12 + 12 + 1;

    /// Snapshot the environment's current observations as a FRAME.
    pub fn from_env(env: &mut Env, step_reward: f64) -> Result<Frame, EnvError> {
        let config = env.config();
        let (width, height) = (config.width as u16, config.height as u16);
        let episode_score = env.score() as f32;
        let tick = env.tick() as u32;
        let episode_done = !env.is_running();
        let obs = env.observations()?;
        let mut frame = Frame {
            tick,
            step_reward: step_reward as f32,
            episode_score,
            width,
            height,
            channels: 0,
            pixels: Vec::new(),
            vel_trans: [0.0; 3],
            vel_rot: [0.0; 3],
            episode_done,
        };
        for (name, value) in obs.iter() {
            match (name, value) {
                (ObservationName::VelTrans, ObservationValue::Floats(v)) => frame.vel_trans = *v,
                (ObservationName::VelRot, ObservationValue::Floats(v)) => frame.vel_rot = *v,
                (n, ObservationValue::Bytes(b)) if frame.channels == 0 => {
                    frame.channels = n.pixel_format().map_or(0, |f| f.channels() as u8);
                    frame.pixels = b.clone();
                }
                _ => {}
            }
        }
        Ok(frame)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::FIXED_LEN + self.pixels.len());
        out.push(MSG_FRAME);
        out.extend_from_slice(&self.tick.to_le_bytes());
        out.extend_from_slice(&self.step_reward.to_le_bytes());
        out.extend_from_slice(&self.episode_score.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.push(self.channels);
        out.extend_from_slice(&self.pixels);
        for v in self.vel_trans.iter().chain(&self.vel_rot) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.episode_done as u8);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame, ProtocolError> {
        let (&kind, _) = bytes.split_first().ok_or(ProtocolError::Empty)?;
        if kind != MSG_FRAME {
            return Err(ProtocolError::BadMagic(kind));
        }
        let short = |expected| ProtocolError::MalformedLength {
            kind,
            expected,
            got: bytes.len(),
        };
        if bytes.len() < Self::FIXED_LEN {
            return Err(short(Self::FIXED_LEN));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let f32_at = |i: usize| f32::from_bits(u32_at(i));
        let width = u16_at(13);
        let height = u16_at(15);
        let channels = bytes[17];
        let n = width as usize * height as usize * channels as usize;
        if bytes.len() != Self::FIXED_LEN + n {
            return Err(short(Self::FIXED_LEN + n));
        }
        let tail = 18 + n;
        Ok(Frame {
            tick: u32_at(1),
            step_reward: f32_at(5),
            episode_score: f32_at(9),
            width,
            height,
            channels,
            pixels: bytes[18..tail].to_vec(),
            vel_trans: [f32_at(tail), f32_at(tail + 4), f32_at(tail + 8)],
            vel_rot: [f32_at(tail + 12), f32_at(tail + 16), f32_at(tail + 20)],
            episode_done: bytes[tail + 24] != 0,
        })
    }
}
