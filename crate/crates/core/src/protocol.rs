//! Line-based host/device wire protocol.
//!
//! Every message is one ASCII line of single-space separated fields ending in
//! `\n`. Host commands are prefixed with their sequence number:
//!
//! ```text
//! 7 PICKUP sword
//! 8 RELEASE
//! 42 SET_TARGET 50.0 60.0
//! 3 VIBRATE 40.0 8.0 314.159 0.0 500
//! ```
//!
//! Device reports carry no sequence number of their own:
//!
//! ```text
//! ACK 42
//! STATE Filling 12.5 0.0
//! ERR 2 centre of gravity outside span
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so
//! `decode(encode(m)) == m` holds bit-for-bit for every finite value.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::controller::Mode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("cannot encode message: {0}")]
    Encode(String),
    #[error("parse error at `{token}`: {reason}")]
    Parse { token: String, reason: String },
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

fn parse_err(token: &str, reason: impl Into<String>) -> ProtocolError {
    ProtocolError::Parse {
        token: token.to_string(),
        reason: reason.into(),
    }
}

/// Burst parameters as carried on the wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibrateParams {
    pub amplitude: f64,
    pub decay: f64,
    pub angular_frequency: f64,
    pub phase: f64,
    pub duration_ms: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HostCommand {
    Pickup { object_id: String },
    Release,
    SetTarget { mass: f64, com: f64 },
    Vibrate(VibrateParams),
}

impl HostCommand {
    pub fn verb(&self) -> &'static str {
        match self {
            HostCommand::Pickup { .. } => "PICKUP",
            HostCommand::Release => "RELEASE",
            HostCommand::SetTarget { .. } => "SET_TARGET",
            HostCommand::Vibrate(_) => "VIBRATE",
        }
    }
}

/// Error codes carried by `ERR` reports.
pub mod err_code {
    pub const MALFORMED: u16 = 1;
    pub const INFEASIBLE: u16 = 2;
    pub const ENVELOPE: u16 = 3;
    pub const UNRESOLVED_OBJECT: u16 = 4;
    pub const INVALID_BURST: u16 = 5;
    pub const ACTUATOR_FAULT: u16 = 6;
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceReport {
    Ack { seq: u64 },
    State { mode: Mode, near: f64, far: f64 },
    Err { code: u16, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Host { seq: u64, command: HostCommand },
    Device(DeviceReport),
}

impl From<DeviceReport> for Message {
    fn from(r: DeviceReport) -> Self {
        Message::Device(r)
    }
}

impl fmt::Display for Message {
    /// The wire line without its terminating newline.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match encode(self) {
            Ok(bytes) => f.write_str(String::from_utf8_lossy(&bytes[..bytes.len() - 1]).as_ref()),
            Err(_) => write!(f, "<invalid {self:?}>"),
        }
    }
}

fn is_valid_object_id(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_graphic())
}

fn is_valid_detail(detail: &str) -> bool {
    detail.bytes().all(|b| b.is_ascii_graphic() || b == b' ')
}

fn push_float(out: &mut String, name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(ProtocolError::Encode(format!("{name} is not finite ({v})")));
    }
    write!(out, " {v:?}").expect("write to String");
    Ok(())
}

/// Serialises `message` to a single newline-terminated ASCII line.
pub fn encode(message: &Message) -> Result<Vec<u8>> {
    let mut out = String::new();
    match message {
        Message::Host { seq, command } => {
            write!(out, "{seq} {}", command.verb()).expect("write to String");
            match command {
                HostCommand::Pickup { object_id } => {
                    if !is_valid_object_id(object_id) {
                        return Err(ProtocolError::Encode(format!(
                            "object id {object_id:?} must be non-empty printable ASCII without whitespace"
                        )));
                    }
                    out.push(' ');
                    out.push_str(object_id);
                }
                HostCommand::Release => {}
                HostCommand::SetTarget { mass, com } => {
                    push_float(&mut out, "mass", *mass)?;
                    push_float(&mut out, "com", *com)?;
                }
                HostCommand::Vibrate(p) => {
                    push_float(&mut out, "amplitude", p.amplitude)?;
                    push_float(&mut out, "decay", p.decay)?;
                    push_float(&mut out, "angular_frequency", p.angular_frequency)?;
                    push_float(&mut out, "phase", p.phase)?;
                    write!(out, " {}", p.duration_ms).expect("write to String");
                }
            }
        }
        Message::Device(report) => match report {
            DeviceReport::Ack { seq } => write!(out, "ACK {seq}").expect("write to String"),
            DeviceReport::State { mode, near, far } => {
                write!(out, "STATE {}", mode.as_str()).expect("write to String");
                push_float(&mut out, "near", *near)?;
                push_float(&mut out, "far", *far)?;
            }
            DeviceReport::Err { code, detail } => {
                if !is_valid_detail(detail) {
                    return Err(ProtocolError::Encode(format!(
                        "error detail {detail:?} must be printable ASCII"
                    )));
                }
                write!(out, "ERR {code}").expect("write to String");
                if !detail.is_empty() {
                    out.push(' ');
                    out.push_str(detail);
                }
            }
        },
    }
    out.push('\n');
    Ok(out.into_bytes())
}

fn parse_float(token: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| parse_err(token, "expected a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(token, "number must be finite"))
    }
}

fn parse_int<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(parse_err(token, format!("expected {what}")));
    }
    token
        .parse()
        .map_err(|_| parse_err(token, format!("{what} out of range")))
}

fn expect_arity(verb: &str, args: &[&str], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        let token = args.get(n).copied().unwrap_or(verb);
        Err(parse_err(
            token,
            format!("{verb} takes {n} argument(s), got {}", args.len()),
        ))
    }
}

/// Parses one line produced by [`encode`]. A single trailing `\n` is allowed.
pub fn decode(line: &[u8]) -> Result<Message> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    if line.is_empty() {
        return Err(parse_err("", "empty line"));
    }
    if let Some(pos) = line.iter().position(|b| !(b.is_ascii_graphic() || *b == b' ')) {
        let shown = String::from_utf8_lossy(&line[pos..pos + 1]).into_owned();
        return Err(parse_err(&shown, "non-printable or non-ASCII byte"));
    }
    let text = std::str::from_utf8(line).expect("checked ASCII");

    // ERR keeps its detail verbatim, spaces included.
    if let Some(rest) = text.strip_prefix("ERR ") {
        let (code, detail) = rest.split_once(' ').unwrap_or((rest, ""));
        let code = parse_int::<u16>(code, "an error code")?;
        return Ok(Message::Device(DeviceReport::Err {
            code,
            detail: detail.to_string(),
        }));
    }

    let tokens: Vec<&str> = text.split(' ').collect();
    if let Some(empty) = tokens.iter().position(|t| t.is_empty()) {
        let near = tokens.get(empty.saturating_sub(1)).copied().unwrap_or("");
        return Err(parse_err(near, "fields must be separated by exactly one space"));
    }

    let head = tokens[0];
    if head.bytes().all(|b| b.is_ascii_digit()) {
        let seq = parse_int::<u64>(head, "a sequence number")?;
        let verb = *tokens
            .get(1)
            .ok_or_else(|| parse_err(head, "missing verb after sequence number"))?;
        let args = &tokens[2..];
        let command = match verb {
            "PICKUP" => {
                expect_arity(verb, args, 1)?;
                HostCommand::Pickup {
                    object_id: args[0].to_string(),
                }
            }
            "RELEASE" => {
                expect_arity(verb, args, 0)?;
                HostCommand::Release
            }
            "SET_TARGET" => {
                expect_arity(verb, args, 2)?;
                HostCommand::SetTarget {
                    mass: parse_float(args[0])?,
                    com: parse_float(args[1])?,
                }
            }
            "VIBRATE" => {
                expect_arity(verb, args, 5)?;
                HostCommand::Vibrate(VibrateParams {
                    amplitude: parse_float(args[0])?,
                    decay: parse_float(args[1])?,
                    angular_frequency: parse_float(args[2])?,
                    phase: parse_float(args[3])?,
                    duration_ms: parse_int(args[4], "a duration in milliseconds")?,
                })
            }
            other => return Err(parse_err(other, "unknown host verb")),
        };
        return Ok(Message::Host { seq, command });
    }

    let args = &tokens[1..];
    let report = match head {
        "ACK" => {
            expect_arity(head, args, 1)?;
            DeviceReport::Ack {
                seq: parse_int(args[0], "a sequence number")?,
            }
        }
        "STATE" => {
            expect_arity(head, args, 3)?;
            DeviceReport::State {
                mode: Mode::parse(args[0]).ok_or_else(|| parse_err(args[0], "unknown mode"))?,
                near: parse_float(args[1])?,
                far: parse_float(args[2])?,
            }
        }
        "ERR" => {
            return Err(parse_err(head, "ERR requires an error code"));
        }
        other => return Err(parse_err(other, "unknown verb")),
    };
    Ok(Message::Device(report))
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    bytes: Vec<u8>,
    sent_at: f64,
}

/// Host-side reliability bookkeeping: sequence numbering, outstanding
/// messages and retransmission. Owned by one connection.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    next_seq: u64,
    pending: BTreeMap<u64, Pending>,
    retransmit_interval: f64,
    unknown_acks: u64,
    retransmissions: u64,
}

impl Default for Session {
    fn default() -> Self {
        Self::new(Self::DEFAULT_RETRANSMIT_INTERVAL)
    }
}

impl Session {
    pub const DEFAULT_RETRANSMIT_INTERVAL: f64 = 0.2;

    pub fn new(retransmit_interval: f64) -> Self {
        Self {
            next_seq: 1,
            pending: BTreeMap::new(),
            retransmit_interval,
            unknown_acks: 0,
            retransmissions: 0,
        }
    }

    /// Assigns the next sequence number and returns it with the wire bytes.
    pub fn send(&mut self, command: HostCommand, now: f64) -> Result<(u64, Vec<u8>)> {
        let seq = self.next_seq;
        let bytes = encode(&Message::Host { seq, command })?;
        self.next_seq += 1;
        self.pending.insert(
            seq,
            Pending {
                bytes: bytes.clone(),
                sent_at: now,
            },
        );
        Ok((seq, bytes))
    }

    /// Returns `true` if `seq` was outstanding.
    pub fn on_ack(&mut self, seq: u64) -> bool {
        if self.pending.remove(&seq).is_some() {
            true
        } else {
            self.unknown_acks += 1;
            false
        }
    }

    /// Byte-identical copies of every message unacknowledged for at least the
    /// retransmission interval, oldest sequence first.
    pub fn tick(&mut self, now: f64) -> Vec<(u64, Vec<u8>)> {
        // Tolerate f64 noise in `now - sent_at` on virtual clocks.
        let interval = self.retransmit_interval - 1e-9;
        let mut out = Vec::new();
        for (&seq, p) in self.pending.iter_mut() {
            if now - p.sent_at >= interval {
                p.sent_at = now;
                out.push((seq, p.bytes.clone()));
            }
        }
        self.retransmissions += out.len() as u64;
        out
    }

    pub fn unacknowledged(&self) -> impl Iterator<Item = u64> + '_ {
        self.pending.keys().copied()
    }

    pub fn is_settled(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn unknown_acks(&self) -> u64 {
        self.unknown_acks
    }

    pub fn retransmissions(&self) -> u64 {
        self.retransmissions
    }
}
