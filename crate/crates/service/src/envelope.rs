//! Client socket messages: `{"type": ..., "payload": ...}`, one per text
//! frame. Clients may add `"v"`; the server always sends it.

use gestibot_core::robot::TelemetryMsg;
use gestibot_core::session::{Mode, SessionEvent};
use gestibot_core::{AccelSample, GestureClass};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const ENVELOPE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UiGestureKind {
    LeftStart,
    LeftStop,
    #[serde(untagged)]
    Class(GestureClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UiGesture {
    pub kind: UiGestureKind,
    #[serde(default = "default_intensity")]
    pub intensity: f64,
}

fn default_intensity() -> f64 {
    1.0
}

impl UiGesture {
    pub fn validate(&self) -> Result<(), String> {
        if self.kind == UiGestureKind::Class(GestureClass::Unknown) {
            return Err("UNKNOWN is not a gesture".into());
        }
        if !(0.5..=1.5).contains(&self.intensity) {
            return Err(format!("intensity {} outside [0.5, 1.5]", self.intensity));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    Telemetry,
    SessionEvent,
    ClassScores,
    EvalProgress,
}

impl Topic {
    pub const ALL: [Topic; 4] = [
        Topic::Telemetry,
        Topic::SessionEvent,
        Topic::ClassScores,
        Topic::EvalProgress,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subscribe {
    pub topics: Vec<Topic>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClientMsg {
    SensorFrame(AccelSample),
    UiGesture(UiGesture),
    Subscribe(Subscribe),
}

#[derive(Debug, Deserialize)]
struct RawEnvelope {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    payload: Value,
    #[serde(default)]
    v: Option<u32>,
}

impl ClientMsg {
    pub fn parse(text: &str) -> Result<Self, String> {
        let raw: RawEnvelope = serde_json::from_str(text).map_err(|e| format!("malformed envelope: {e}"))?;
        if let Some(v) = raw.v {
            if v != ENVELOPE_VERSION {
                return Err(format!("unsupported envelope version {v}"));
            }
        }
        let bad = |e: serde_json::Error| format!("bad {} payload: {e}", raw.kind);
        match raw.kind.as_str() {
            "sensor_frame" => Ok(ClientMsg::SensorFrame(
                serde_json::from_value(raw.payload.clone()).map_err(bad)?,
            )),
            "ui_gesture" => {
                let g: UiGesture = serde_json::from_value(raw.payload.clone()).map_err(bad)?;
                g.validate()?;
                Ok(ClientMsg::UiGesture(g))
            }
            "subscribe" => Ok(ClientMsg::Subscribe(
                serde_json::from_value(raw.payload.clone()).map_err(bad)?,
            )),
            other => Err(format!("unknown message type {other:?}")),
        }
    }

    pub fn to_text(&self) -> String {
        let (kind, payload) = match self {
            ClientMsg::SensorFrame(s) => ("sensor_frame", serde_json::to_value(s)),
            ClientMsg::UiGesture(g) => ("ui_gesture", serde_json::to_value(g)),
            ClientMsg::Subscribe(s) => ("subscribe", serde_json::to_value(s)),
        };
        envelope(kind, payload.expect("client payload serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryPayload {
    #[serde(flatten)]
    pub robot: TelemetryMsg,
    pub mode: Mode,
    /// Samples the session dropped as out of order or non-finite.
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEventPayload {
    /// Timestamp of the sample or watchdog tick that caused the event.
    pub t: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
    /// Activation-frame receipt to IMOV written, for the latest move.
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScoresPayload {
    pub t: u64,
    pub scores: Vec<f64>,
    pub class: GestureClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProgressPayload {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ServerMsg {
    Telemetry(TelemetryPayload),
    SessionEvent(SessionEventPayload),
    ClassScores(ClassScoresPayload),
    EvalProgress(EvalProgressPayload),
    Error(ErrorPayload),
}

impl ServerMsg {
    /// `None` for messages addressed to one client.
    pub fn topic(&self) -> Option<Topic> {
        match self {
            ServerMsg::Telemetry(_) => Some(Topic::Telemetry),
            ServerMsg::SessionEvent(_) => Some(Topic::SessionEvent),
            ServerMsg::ClassScores(_) => Some(Topic::ClassScores),
            ServerMsg::EvalProgress(_) => Some(Topic::EvalProgress),
            ServerMsg::Error(_) => None,
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        ServerMsg::Error(ErrorPayload {
            message: message.into(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut v = serde_json::to_value(self).expect("server message serializes");
        v["v"] = ENVELOPE_VERSION.into();
        v.to_string()
    }

    pub fn parse(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn envelope(kind: &str, payload: Value) -> String {
    serde_json::json!({ "type": kind, "payload": payload, "v": ENVELOPE_VERSION }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use gestibot_core::robot::WirePose;
    use gestibot_core::session::StopReason;
    use gestibot_core::Arm;

    #[test]
    fn client_messages_round_trip() {
        let msgs = [
            ClientMsg::SensorFrame(AccelSample::new(10, Arm::Left, -1.0, 0.0, 0.1)),
            ClientMsg::UiGesture(UiGesture {
                kind: UiGestureKind::Class(GestureClass::Rzp),
                intensity: 0.7,
            }),
            ClientMsg::UiGesture(UiGesture {
                kind: UiGestureKind::LeftStart,
                intensity: 1.0,
            }),
            ClientMsg::Subscribe(Subscribe {
                topics: vec![Topic::Telemetry],
            }),
        ];
        for m in msgs {
            assert_eq!(ClientMsg::parse(&m.to_text()).unwrap(), m);
        }
    }

    #[test]
    fn wire_shapes() {
        let g = ClientMsg::parse(r#"{"type":"ui_gesture","payload":{"kind":"XP"}}"#).unwrap();
        assert_eq!(
            g,
            ClientMsg::UiGesture(UiGesture {
                kind: UiGestureKind::Class(GestureClass::Xp),
                intensity: 1.0
            })
        );
        let f = ClientMsg::parse(r#"{"type":"sensor_frame","payload":{"t":5,"arm":"R","ax":0,"ay":0,"az":1}}"#);
        assert!(matches!(f, Ok(ClientMsg::SensorFrame(s)) if s.arm == Arm::Right && s.t == 5));
        let left = serde_json::to_string(&UiGestureKind::LeftStop).unwrap();
        assert_eq!(left, r#""LEFT_STOP""#);
    }

    #[test]
    fn rejections() {
        assert!(ClientMsg::parse("not json").unwrap_err().contains("malformed"));
        assert!(ClientMsg::parse(r#"{"type":"dance","payload":{}}"#)
            .unwrap_err()
            .contains("unknown"));
        assert!(ClientMsg::parse(r#"{"type":"sensor_frame","payload":{"t":1}}"#).is_err());
        assert!(ClientMsg::parse(r#"{"type":"ui_gesture","payload":{"kind":"XP","intensity":3}}"#).is_err());
        assert!(ClientMsg::parse(r#"{"type":"ui_gesture","payload":{"kind":"UNKNOWN"}}"#).is_err());
        assert!(ClientMsg::parse(r#"{"type":"subscribe","payload":{"topics":[]},"v":9}"#).is_err());
    }

    #[test]
    fn server_envelopes_carry_type_and_version() {
        let m = ServerMsg::SessionEvent(SessionEventPayload {
            t: 40,
            event: SessionEvent::StopRequested {
                reason: StopReason::Watchdog,
            },
            latency_ms: None,
        });
        let v: Value = serde_json::from_str(&m.to_text()).unwrap();
        assert_eq!(v["type"], "session_event");
        assert_eq!(v["v"], 1);
        assert_eq!(v["payload"]["event"], "stop_requested");
        assert_eq!(v["payload"]["reason"], "WATCHDOG");
        assert_eq!(ServerMsg::parse(&m.to_text()).unwrap(), m);

        let t = ServerMsg::Telemetry(TelemetryPayload {
            robot: TelemetryMsg {
                t: 1,
                pose: WirePose {
                    xyz: [1000.0, 0.0, 0.0],
                    rpy: [0.0; 3],
                },
                moving: false,
                last_stop_reason: None,
            },
            mode: Mode::Idle,
            dropped: 0,
        });
        let v: Value = serde_json::from_str(&t.to_text()).unwrap();
        assert_eq!(v["payload"]["pose"]["xyz"][0], 1000.0);
        assert_eq!(v["payload"]["mode"], "IDLE");
        assert_eq!(ServerMsg::parse(&t.to_text()).unwrap(), t);
    }
}
