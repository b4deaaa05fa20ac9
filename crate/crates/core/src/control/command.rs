//! Command-channel wire format: newline-delimited JSON objects
//! `{"seq": u64, "verb": string, "args": {...}}`, each answered by exactly one
//! `{"seq": u64, "status": "accepted"|"rejected", "reason"?: string}`.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::geometry::{Joint, Point3};
use crate::plant::InstrumentChannels;
use crate::trajectory::ActuationMode;

/// A command exactly as it travels on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandMessage {
    pub seq: u64,
    pub verb: String,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub args: Map<String, Value>,
}

impl CommandMessage {
    pub fn new(seq: u64, verb: &str, args: Value) -> Self {
        let args = match args {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        CommandMessage { seq, verb: verb.to_string(), args }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("serialisable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CartesianAxis {
    X,
    Y,
    Z,
}

impl CartesianAxis {
    pub fn unit(self) -> Point3 {
        match self {
            CartesianAxis::X => Point3::new(1.0, 0.0, 0.0),
            CartesianAxis::Y => Point3::new(0.0, 1.0, 0.0),
            CartesianAxis::Z => Point3::new(0.0, 0.0, 1.0),
        }
    }
}

/// Partial instrument update; missing channels keep their current target.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InstrumentUpdate {
    pub pitch: Option<f64>,
    pub yaw: Option<f64>,
    pub roll: Option<f64>,
    pub grasp: Option<f64>,
}

impl InstrumentUpdate {
    pub fn apply(&self, base: InstrumentChannels) -> InstrumentChannels {
        InstrumentChannels {
            pitch: self.pitch.unwrap_or(base.pitch),
            yaw: self.yaw.unwrap_or(base.yaw),
            roll: self.roll.unwrap_or(base.roll),
            grasp: self.grasp.unwrap_or(base.grasp),
        }
    }
}

/// A validated command.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Home { axes: Vec<Joint> },
    JogJoint { joint: Joint, delta: f64 },
    JogCartesian { axis: CartesianAxis, delta: f64 },
    MoveTo { goal: Point3, mode: ActuationMode },
    SetInstrument(InstrumentUpdate),
    EStop,
    Reset,
    Query,
}

fn number(args: &Map<String, Value>, key: &str) -> Result<f64, String> {
    let v = args.get(key).ok_or_else(|| format!("missing argument {key:?}"))?;
    let x = v.as_f64().ok_or_else(|| format!("argument {key:?} must be a number"))?;
    if !x.is_finite() {
        return Err(format!("argument {key:?} must be finite"));
    }
    Ok(x)
}

fn optional_number(args: &Map<String, Value>, key: &str) -> Result<Option<f64>, String> {
    match args.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(_) => number(args, key).map(Some),
    }
}

fn string<'a>(args: &'a Map<String, Value>, key: &str) -> Result<&'a str, String> {
    args.get(key)
        .ok_or_else(|| format!("missing argument {key:?}"))?
        .as_str()
        .ok_or_else(|| format!("argument {key:?} must be a string"))
}

impl Command {
    pub fn parse(msg: &CommandMessage) -> Result<Command, String> {
        let a = &msg.args;
        let cmd = match msg.verb.as_str() {
            "home" => {
                let axes = match a.get("axes") {
                    None | Some(Value::Null) => Joint::ALL.to_vec(),
                    Some(Value::String(s)) if s == "all" => Joint::ALL.to_vec(),
                    Some(Value::Array(items)) if !items.is_empty() => {
                        let mut axes = Vec::new();
                        for item in items {
                            let j = item
                                .as_str()
                                .and_then(Joint::parse)
                                .ok_or_else(|| format!("unknown axis {item}"))?;
                            if !axes.contains(&j) {
                                axes.push(j);
                            }
                        }
                        axes
                    }
                    Some(other) => return Err(format!("invalid axes {other}")),
                };
                Command::Home { axes }
            }
            "jog_joint" => {
                let name = string(a, "joint")?;
                let joint = Joint::parse(name).ok_or_else(|| format!("unknown joint {name:?}"))?;
                Command::JogJoint { joint, delta: number(a, "delta")? }
            }
            "jog_cartesian" => {
                let axis = match string(a, "axis")?.to_ascii_lowercase().as_str() {
                    "x" => CartesianAxis::X,
                    "y" => CartesianAxis::Y,
                    "z" => CartesianAxis::Z,
                    other => return Err(format!("unknown axis {other:?}")),
                };
                Command::JogCartesian { axis, delta: number(a, "delta")? }
            }
            "move_to" => {
                let goal = Point3::new(number(a, "x")?, number(a, "y")?, number(a, "z")?);
                let mode = match a.get("mode") {
                    None => ActuationMode::Simultaneous,
                    Some(v) => v
                        .as_str()
                        .ok_or("argument \"mode\" must be a string")?
                        .parse()
                        .map_err(|e: crate::trajectory::TrajectoryError| e.to_string())?,
                };
                Command::MoveTo { goal, mode }
            }
            "set_instrument" => Command::SetInstrument(InstrumentUpdate {
                pitch: optional_number(a, "pitch")?,
                yaw: optional_number(a, "yaw")?,
                roll: optional_number(a, "roll")?,
                grasp: optional_number(a, "grasp")?,
            }),
            "estop" => Command::EStop,
            "reset" => Command::Reset,
            "query" => Command::Query,
            other => return Err(format!("unknown verb {other:?}")),
        };
        Ok(cmd)
    }
}

/// Machine-readable rejection reasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    NotHomed,
    Faulted,
    EStopped,
    OutOfWorkspace,
    AlignmentRequired,
    BadArgument,
    /// A motion or homing sequence is already running.
    Busy,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AckStatus {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
    pub status: AckStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Ack {
    pub fn accepted(seq: u64) -> Self {
        Ack { seq, status: AckStatus::Accepted, reason: None, detail: None }
    }

    pub fn rejected(seq: u64, reason: RejectReason) -> Self {
        Ack { seq, status: AckStatus::Rejected, reason: Some(reason), detail: None }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn is_accepted(&self) -> bool {
        self.status == AckStatus::Accepted
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("serialisable")
    }
}

/// Decodes one line of the command channel. Undecodable input yields the
/// rejection to send back (with `seq` 0 when not even that was readable).
pub fn decode_line(line: &str) -> Result<CommandMessage, Ack> {
    match serde_json::from_str::<CommandMessage>(line) {
        Ok(msg) => Ok(msg),
        Err(e) => {
            let seq = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("seq").and_then(Value::as_u64))
                .unwrap_or(0);
            Err(Ack::rejected(seq, RejectReason::BadArgument).with_detail(format!("malformed command: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(line: &str) -> Result<Command, String> {
        Command::parse(&decode_line(line).unwrap())
    }

    #[test]
    fn decodes_move_to() {
        let cmd = parse(r#"{"seq":7,"verb":"move_to","args":{"x":1,"y":2.5,"z":-3,"mode":"sequential"}}"#).unwrap();
        assert_eq!(cmd, Command::MoveTo { goal: Point3::new(1.0, 2.5, -3.0), mode: ActuationMode::Sequential });
    }

    #[test]
    fn home_defaults_to_all_axes() {
        assert_eq!(parse(r#"{"seq":1,"verb":"home"}"#).unwrap(), Command::Home { axes: Joint::ALL.to_vec() });
        assert_eq!(
            parse(r#"{"seq":1,"verb":"home","args":{"axes":["M3","q3"]}}"#).unwrap(),
            Command::Home { axes: vec![Joint::Q3] }
        );
        assert!(parse(r#"{"seq":1,"verb":"home","args":{"axes":["m9"]}}"#).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(parse(r#"{"seq":1,"verb":"jog_joint","args":{"joint":"q4","delta":1}}"#).is_err());
        assert!(parse(r#"{"seq":1,"verb":"jog_joint","args":{"joint":"q1"}}"#).is_err());
        assert!(parse(r#"{"seq":1,"verb":"jog_joint","args":{"joint":"q1","delta":"big"}}"#).is_err());
        assert!(parse(r#"{"seq":1,"verb":"move_to","args":{"x":1,"y":2,"z":3,"mode":"zigzag"}}"#).is_err());
        assert!(parse(r#"{"seq":1,"verb":"dance"}"#).is_err());
    }

    #[test]
    fn malformed_lines_get_a_rejection() {
        let ack = decode_line("not json").unwrap_err();
        assert_eq!(ack.seq, 0);
        assert_eq!(ack.reason, Some(RejectReason::BadArgument));
        let ack = decode_line(r#"{"seq": 42}"#).unwrap_err();
        assert_eq!(ack.seq, 42);
        let ack = decode_line(r#"{"seq": -1, "verb": "query"}"#).unwrap_err();
        assert_eq!(ack.seq, 0);
    }

    #[test]
    fn ack_wire_format() {
        assert_eq!(Ack::accepted(3).to_line(), r#"{"seq":3,"status":"accepted"}"#);
        assert_eq!(
            Ack::rejected(4, RejectReason::NotHomed).to_line(),
            r#"{"seq":4,"status":"rejected","reason":"NotHomed"}"#
        );
    }

    #[test]
    fn message_round_trip() {
        let msg = CommandMessage::new(9, "set_instrument", json!({"pitch": 0.5}));
        assert_eq!(decode_line(&msg.to_line()).unwrap(), msg);
        let cmd = Command::parse(&msg).unwrap();
        let Command::SetInstrument(u) = cmd else { panic!() };
        let out = u.apply(InstrumentChannels { pitch: 0.0, yaw: 0.1, roll: 0.2, grasp: 0.3 });
        assert_eq!(out, InstrumentChannels { pitch: 0.5, yaw: 0.1, roll: 0.2, grasp: 0.3 });
    }
}
