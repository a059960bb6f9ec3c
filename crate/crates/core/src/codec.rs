//! Byte-frame codecs between symbolic commands and register payloads.
//!
//! Each actuator speaks fixed-length frames. A compound command encodes to
//! the concatenation of its atoms' frames.
//!
//! | codec         | frame | layout                                                |
//! |---------------|-------|-------------------------------------------------------|
//! | `servo-pulse` | 4     | `[on & 0xFF, on >> 8, x & 0xFF, x >> 8]`, `on = 0`     |
//! | `rover-motor` | 5     | `[opcode, b1, b2, b3, b4]`, speed in `b1`             |
//! | `switch`      | 1     | `[0x01]` for `ON`, `[0x00]` for `OFF`                 |

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Command, CommandExpr};

pub const ROVER_FWD: u8 = 0x01;
pub const ROVER_LFT: u8 = 0x02;
pub const ROVER_RHT: u8 = 0x03;
pub const ROVER_SET_SPEED: u8 = 0x04;

/// Name of the parametric raw-pulse command of the servo codec.
pub const PULSE: &str = "pulse";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("parameter {value} of `{command}` is outside [{lo}, {hi}]")]
    ParameterOutOfRange { command: String, value: i64, lo: i64, hi: i64 },
    #[error("`{0}` takes a parameter")]
    MissingParameter(String),
    #[error("`{0}` takes no parameter")]
    UnexpectedParameter(String),
    #[error("payload {0} matches no declared command")]
    UnrecognizedPayload(String),
    #[error("payload of {got} bytes is not a whole number of {frame}-byte frames")]
    BadFrameLength { frame: usize, got: usize },
    #[error("empty command")]
    Empty,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Codec {
    /// Servo PWM registers: named pulse widths plus `pulse(x)` for any 16-bit width.
    ServoPulse { named: BTreeMap<String, u16> },
    /// Rover motor controller: `fwd`, `lft`, `rht`, `st_sp(0..=255)`.
    RoverMotor,
    /// Single-bit output such as a buzzer: `ON`, `OFF`.
    Switch,
}

pub fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn parse_hex(text: &str) -> Option<Vec<u8>> {
    let t = text.trim();
    if !t.len().is_multiple_of(2) {
        return None;
    }
    (0..t.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(t.get(i..i + 2)?, 16).ok())
        .collect()
}

impl Codec {
    /// The robot-arm gripper codec: `grip_open` = 577, `grip_close` = 420.
    pub fn robot_arm() -> Self {
        let mut named = BTreeMap::new();
        named.insert("grip_open".to_string(), 577);
        named.insert("grip_close".to_string(), 420);
        Codec::ServoPulse { named }
    }

    pub fn frame_len(&self) -> usize {
        match self {
            Codec::ServoPulse { .. } => 4,
            Codec::RoverMotor => 5,
            Codec::Switch => 1,
        }
    }

    pub fn encode(&self, command: &Command) -> Result<Vec<u8>, CodecError> {
        let no_arg = |c: &Command| match c.arg {
            Some(_) => Err(CodecError::UnexpectedParameter(c.name.clone())),
            None => Ok(()),
        };
        let ranged = |c: &Command, lo: i64, hi: i64| match c.arg {
            None => Err(CodecError::MissingParameter(c.name.clone())),
            Some(v) if v < lo || v > hi => Err(CodecError::ParameterOutOfRange {
                command: c.name.clone(),
                value: v,
                lo,
                hi,
            }),
            Some(v) => Ok(v),
        };
        match self {
            Codec::ServoPulse { named } => {
                let x = if command.name == PULSE {
                    ranged(command, 0, i64::from(u16::MAX))? as u16
                } else {
                    let x = *named
                        .get(&command.name)
                        .ok_or_else(|| CodecError::UnknownCommand(command.name.clone()))?;
                    no_arg(command)?;
                    x
                };
                // ON time register is always zero; the pulse width goes in OFF.
                let on: u16 = 0;
                Ok(vec![(on & 0xFF) as u8, (on >> 8) as u8, (x & 0xFF) as u8, (x >> 8) as u8])
            }
            Codec::RoverMotor => {
                let op = match command.name.as_str() {
                    "fwd" => ROVER_FWD,
                    "lft" => ROVER_LFT,
                    "rht" => ROVER_RHT,
                    "st_sp" => {
                        let d = ranged(command, 0, 255)?;
                        return Ok(vec![ROVER_SET_SPEED, d as u8, 0, 0, 0]);
                    }
                    other => return Err(CodecError::UnknownCommand(other.to_string())),
                };
                no_arg(command)?;
                Ok(vec![op, 0, 0, 0, 0])
            }
            Codec::Switch => {
                let b = match command.name.as_str() {
                    "ON" => 1,
                    "OFF" => 0,
                    other => return Err(CodecError::UnknownCommand(other.to_string())),
                };
                no_arg(command)?;
                Ok(vec![b])
            }
        }
    }

    pub fn decode_frame(&self, frame: &[u8]) -> Result<Command, CodecError> {
        if frame.len() != self.frame_len() {
            return Err(CodecError::BadFrameLength { frame: self.frame_len(), got: frame.len() });
        }
        let unrecognized = || CodecError::UnrecognizedPayload(hex(frame));
        match self {
            Codec::ServoPulse { named } => {
                if frame[0] != 0 || frame[1] != 0 {
                    return Err(unrecognized());
                }
                let x = u16::from(frame[2]) | (u16::from(frame[3]) << 8);
                Ok(named
                    .iter()
                    .find(|(_, &p)| p == x)
                    .map(|(n, _)| Command::new(n.clone()))
                    .unwrap_or_else(|| Command::with_arg(PULSE, i64::from(x))))
            }
            Codec::RoverMotor => {
                if frame[2..].iter().any(|&b| b != 0) {
                    return Err(unrecognized());
                }
                match (frame[0], frame[1]) {
                    (ROVER_FWD, 0) => Ok(Command::new("fwd")),
                    (ROVER_LFT, 0) => Ok(Command::new("lft")),
                    (ROVER_RHT, 0) => Ok(Command::new("rht")),
                    (ROVER_SET_SPEED, d) => Ok(Command::with_arg("st_sp", i64::from(d))),
                    _ => Err(unrecognized()),
                }
            }
            Codec::Switch => match frame[0] {
                1 => Ok(Command::new("ON")),
                0 => Ok(Command::new("OFF")),
                _ => Err(unrecognized()),
            },
        }
    }

    pub fn encode_expr(&self, expr: &CommandExpr) -> Result<Vec<u8>, CodecError> {
        if expr.0.is_empty() {
            return Err(CodecError::Empty);
        }
        let mut out = Vec::with_capacity(expr.0.len() * self.frame_len());
        for c in &expr.0 {
            out.extend(self.encode(c)?);
        }
        Ok(out)
    }

    pub fn decode(&self, payload: &[u8]) -> Result<CommandExpr, CodecError> {
        let n = self.frame_len();
        if payload.is_empty() || !payload.len().is_multiple_of(n) {
            return Err(CodecError::BadFrameLength { frame: n, got: payload.len() });
        }
        payload.chunks(n).map(|f| self.decode_frame(f)).collect::<Result<_, _>>().map(CommandExpr)
    }

    /// Normal form of a command: `decode(encode(c))`. Two commands drive the
    /// device identically iff their canonical forms are equal.
    pub fn canonicalize(&self, expr: &CommandExpr) -> Result<CommandExpr, CodecError> {
        self.decode(&self.encode_expr(expr)?)
    }

    /// Whether `name` is a command of this codec (parameter not checked).
    pub fn knows(&self, name: &str) -> bool {
        match self {
            Codec::ServoPulse { named } => name == PULSE || named.contains_key(name),
            Codec::RoverMotor => matches!(name, "fwd" | "lft" | "rht" | "st_sp"),
            Codec::Switch => matches!(name, "ON" | "OFF"),
        }
    }

    /// Every canonical single command of the codec.
    pub fn vocabulary(&self) -> Vec<Command> {
        match self {
            Codec::ServoPulse { named } => {
                let mut v: Vec<Command> = named.keys().map(|n| Command::new(n.clone())).collect();
                v.extend(
                    (0..=u16::MAX)
                        .filter(|x| !named.values().any(|p| p == x))
                        .map(|x| Command::with_arg(PULSE, i64::from(x))),
                );
                v
            }
            Codec::RoverMotor => {
                let mut v = vec![Command::new("fwd"), Command::new("lft"), Command::new("rht")];
                v.extend((0..=255).map(|d| Command::with_arg("st_sp", d)));
                v
            }
            Codec::Switch => vec![Command::new("ON"), Command::new("OFF")],
        }
    }
}
