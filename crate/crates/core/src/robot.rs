//! Simulated manipulator driven by incremental linear moves.
//!
//! Wire protocol, one JSON object per line:
//!
//! ```text
//! → {"cmd":"IMOV","inc":[i1,i2,i3,i4,i5,i6]}
//! → {"cmd":"STOP"}            (optional "reason")
//! → {"cmd":"GETPOS"}
//! ← {"ok":true}
//! ← {"ok":true,"pose":{"xyz":[x,y,z],"rpy":[rx,ry,rz]}}
//! ← {"ok":false,"err":"<code>"}
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Axis, Pose, PoseIncrement, Vec3, Workspace};

/// Slack (deg) allowed when checking a rotation target against its limits.
const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolError {
    #[error("request is not a valid command")]
    BadRequest,
    #[error("increment moves more than one axis")]
    MultiAxis,
    #[error("increment contains a non-finite value")]
    NonFinite,
    #[error("target leaves the field of operation")]
    OutsideWorkspace,
    #[error("target exceeds a rotation limit")]
    RotationLimit,
}

impl ProtocolError {
    pub fn code(self) -> &'static str {
        match self {
            ProtocolError::BadRequest => "bad_request",
            ProtocolError::MultiAxis => "multi_axis",
            ProtocolError::NonFinite => "non_finite",
            ProtocolError::OutsideWorkspace => "outside_workspace",
            ProtocolError::RotationLimit => "rotation_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "UPPERCASE")]
pub enum Command {
    Imov {
        inc: [f64; 6],
    },
    Stop {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Getpos,
}

impl Command {
    pub fn imov(inc: PoseIncrement) -> Self {
        Command::Imov { inc: inc.0 }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("command serializes")
    }
}

/// Pose as it travels on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WirePose {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

impl From<Pose> for WirePose {
    fn from(p: Pose) -> Self {
        WirePose {
            xyz: p.position.to_array(),
            rpy: p.rotation,
        }
    }
}

impl From<WirePose> for Pose {
    fn from(w: WirePose) -> Self {
        Pose::new(Vec3::from_array(w.xyz), w.rpy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Ok,
    Pose(Pose),
    Error(ProtocolError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplyMsg {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<WirePose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err: Option<String>,
}

impl From<&Reply> for ReplyMsg {
    fn from(r: &Reply) -> Self {
        match r {
            Reply::Ok => ReplyMsg {
                ok: true,
                pose: None,
                err: None,
            },
            Reply::Pose(p) => ReplyMsg {
                ok: true,
                pose: Some((*p).into()),
                err: None,
            },
            Reply::Error(e) => ReplyMsg {
                ok: false,
                pose: None,
                err: Some(e.code().to_string()),
            },
        }
    }
}

impl Reply {
    pub fn to_line(&self) -> String {
        serde_json::to_string(&ReplyMsg::from(self)).expect("reply serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TelemetryMsg {
    pub t: u64,
    pub pose: WirePose,
    pub moving: bool,
    pub last_stop_reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    /// mm/s
    pub lin_speed: f64,
    /// deg/s
    pub rot_speed: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            lin_speed: 200.0,
            rot_speed: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub target: Option<Pose>,
    /// Pose at which the current move began.
    pub segment_start: Option<Pose>,
    pub lin_speed: f64,
    pub rot_speed: f64,
    pub last_stop_reason: Option<String>,
}

impl RobotState {
    pub fn moving(&self) -> bool {
        self.target.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct RobotSim {
    state: RobotState,
    workspace: Workspace,
}

pub const DEFAULT_HOME: Vec3 = Vec3::new(1000.0, 0.0, 0.0);

impl RobotSim {
    /// Returns `None` when `home` is not a valid resting pose for `workspace`.
    pub fn new(workspace: Workspace, cfg: RobotConfig, home: Pose) -> Option<Self> {
        let rot_ok = Axis::ALL
            .iter()
            .all(|a| workspace.rotation_within_limits(*a, home.rotation[a.index()]));
        let speeds_ok = cfg.lin_speed > 0.0 && cfg.rot_speed > 0.0;
        if !(home.is_finite() && workspace.contains(home.position) && rot_ok && speeds_ok) {
            return None;
        }
        Some(Self {
            state: RobotState {
                pose: home,
                target: None,
                segment_start: None,
                lin_speed: cfg.lin_speed,
                rot_speed: cfg.rot_speed,
                last_stop_reason: None,
            },
            workspace,
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(Workspace::default(), RobotConfig::default(), Pose::at(DEFAULT_HOME)).expect("default home is valid")
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn pose(&self) -> Pose {
        self.state.pose
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn apply(&mut self, cmd: &Command) -> Reply {
        match cmd {
            Command::Getpos => Reply::Pose(self.state.pose),
            Command::Stop { reason } => {
                self.state.target = None;
                self.state.segment_start = None;
                self.state.last_stop_reason = Some(reason.clone().unwrap_or_else(|| "STOP".into()));
                Reply::Ok
            }
            Command::Imov { inc } => match self.begin_move(PoseIncrement(*inc)) {
                Ok(()) => Reply::Ok,
                Err(e) => Reply::Error(e),
            },
        }
    }

    fn begin_move(&mut self, inc: PoseIncrement) -> Result<(), ProtocolError> {
        if !inc.is_finite() {
            return Err(ProtocolError::NonFinite);
        }
        if inc.nonzero_count() > 1 {
            return Err(ProtocolError::MultiAxis);
        }
        let start = self.state.pose;
        let target = start.offset_by(&inc);
        if !self.workspace.segment_inside(start.position, target.position) {
            return Err(ProtocolError::OutsideWorkspace);
        }
        for axis in Axis::ALL {
            let (lo, hi) = self.workspace.rot_limits()[axis.index()];
            let r = target.rotation[axis.index()];
            if r < lo - ROTATION_TOLERANCE || r > hi + ROTATION_TOLERANCE {
                return Err(ProtocolError::RotationLimit);
            }
        }
        if inc.nonzero_count() == 0 {
            self.state.target = None;
            self.state.segment_start = None;
        } else {
            // Replaces any move in progress.
            self.state.target = Some(target);
            self.state.segment_start = Some(start);
        }
        Ok(())
    }

    /// Parses one request line and returns the reply line.
    pub fn handle_line(&mut self, line: &str) -> String {
        match serde_json::from_str::<Command>(line.trim()) {
            Ok(cmd) => self.apply(&cmd).to_line(),
            Err(_) => Reply::Error(ProtocolError::BadRequest).to_line(),
        }
    }

    /// Advances the pose toward the target at constant speed for `dt` seconds.
    pub fn tick(&mut self, dt: f64) {
        let Some(target) = self.state.target else {
            return;
        };
        if dt.is_nan() || dt <= 0.0 {
            return;
        }
        let pose = &mut self.state.pose;

        let remaining = target.position - pose.position;
        let dist = remaining.norm();
        let step = self.state.lin_speed * dt;
        let pos_done = if step >= dist {
            pose.position = target.position;
            true
        } else {
            pose.position = pose.position + remaining * (step / dist);
            false
        };

        let rot_remaining: [f64; 3] = std::array::from_fn(|i| target.rotation[i] - pose.rotation[i]);
        let rot_dist = rot_remaining.iter().map(|r| r * r).sum::<f64>().sqrt();
        let rot_step = self.state.rot_speed * dt;
        let rot_done = if rot_step >= rot_dist {
            pose.rotation = target.rotation;
            true
        } else {
            for (r, d) in pose.rotation.iter_mut().zip(rot_remaining) {
                *r += d * (rot_step / rot_dist);
            }
            false
        };

        if pos_done && rot_done {
            self.state.target = None;
            self.state.segment_start = None;
        }
    }

    pub fn telemetry(&self, t: u64) -> TelemetryMsg {
        TelemetryMsg {
            t,
            pose: self.state.pose.into(),
            moving: self.state.moving(),
            last_stop_reason: self.state.last_stop_reason.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim() -> RobotSim {
        RobotSim::with_defaults()
    }

    #[test]
    fn imov_sets_target() {
        let mut r = sim();
        assert_eq!(
            r.apply(&Command::Imov {
                inc: [500.0, 0.0, 0.0, 0.0, 0.0, 0.0]
            }),
            Reply::Ok
        );
        assert!(r.state().moving());
        assert_eq!(r.state().target.unwrap().position, Vec3::new(1500.0, 0.0, 0.0));
    }

    #[test]
    fn stop_clears_target_immediately() {
        let mut r = sim();
        r.apply(&Command::Imov {
            inc: [500.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        });
        r.tick(0.5);
        let before = r.pose();
        assert_eq!(r.apply(&Command::Stop { reason: None }), Reply::Ok);
        assert!(!r.state().moving());
        assert_eq!(r.pose(), before);
        r.tick(1.0);
        assert_eq!(r.pose(), before);
    }

    #[test]
    fn getpos_is_pure() {
        let mut r = sim();
        let before = r.state().clone();
        assert_eq!(r.apply(&Command::Getpos), Reply::Pose(before.pose));
        assert_eq!(r.state(), &before);
    }

    #[test]
    fn tick_examples() {
        let mut r = sim();
        r.apply(&Command::Imov {
            inc: [500.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        });
        r.tick(1.0);
        assert_eq!(r.pose().position, Vec3::new(1200.0, 0.0, 0.0));
        r.tick(1.0);
        assert_eq!(r.pose().position, Vec3::new(1400.0, 0.0, 0.0));
        r.tick(1.0);
        assert_eq!(r.pose().position, Vec3::new(1500.0, 0.0, 0.0));
        assert!(!r.state().moving());

        let mut idle = sim();
        idle.tick(1.0);
        assert_eq!(idle.pose().position, DEFAULT_HOME);
    }

    #[test]
    fn rotation_moves_at_rot_speed() {
        let mut r = sim();
        assert_eq!(
            r.apply(&Command::Imov {
                inc: [0.0, 0.0, 0.0, 0.0, 0.0, -170.0]
            }),
            Reply::Ok
        );
        r.tick(1.0);
        assert_eq!(r.pose().rotation, [0.0, 0.0, -90.0]);
        r.tick(1.0);
        assert_eq!(r.pose().rotation, [0.0, 0.0, -170.0]);
        assert!(!r.state().moving());
    }

    #[test]
    fn rejects_bad_increments() {
        let mut r = sim();
        assert_eq!(
            r.apply(&Command::Imov {
                inc: [1.0, 1.0, 0.0, 0.0, 0.0, 0.0]
            }),
            Reply::Error(ProtocolError::MultiAxis)
        );
        assert_eq!(
            r.apply(&Command::Imov {
                inc: [f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0]
            }),
            Reply::Error(ProtocolError::NonFinite)
        );
        assert_eq!(
            r.apply(&Command::Imov {
                inc: [1500.0, 0.0, 0.0, 0.0, 0.0, 0.0]
            }),
            Reply::Error(ProtocolError::OutsideWorkspace)
        );
        // Straight through the inner sphere.
        assert_eq!(
            r.apply(&Command::Imov {
                inc: [-2000.0, 0.0, 0.0, 0.0, 0.0, 0.0]
            }),
            Reply::Error(ProtocolError::OutsideWorkspace)
        );
        assert_eq!(
            r.apply(&Command::Imov {
                inc: [0.0, 0.0, 0.0, 171.0, 0.0, 0.0]
            }),
            Reply::Error(ProtocolError::RotationLimit)
        );
        assert!(!r.state().moving());
    }

    #[test]
    fn imov_while_moving_replaces_target() {
        let mut r = sim();
        r.apply(&Command::Imov {
            inc: [500.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        });
        r.tick(1.0);
        r.apply(&Command::Imov {
            inc: [0.0, 100.0, 0.0, 0.0, 0.0, 0.0],
        });
        assert_eq!(r.state().target.unwrap().position, Vec3::new(1200.0, 100.0, 0.0));
    }

    #[test]
    fn wire_format() {
        let mut r = sim();
        assert_eq!(
            r.handle_line(r#"{"cmd":"GETPOS"}"#),
            r#"{"ok":true,"pose":{"xyz":[1000.0,0.0,0.0],"rpy":[0.0,0.0,0.0]}}"#
        );
        assert_eq!(
            r.handle_line(r#"{"cmd":"IMOV","inc":[10,0,0,0,0,0]}"#),
            r#"{"ok":true}"#
        );
        assert_eq!(
            r.handle_line(r#"{"cmd":"IMOV","inc":[10,0,5,0,0,0]}"#),
            r#"{"ok":false,"err":"multi_axis"}"#
        );
        assert_eq!(
            r.handle_line(r#"{"cmd":"IMOV","inc":[10,0]}"#),
            r#"{"ok":false,"err":"bad_request"}"#
        );
        assert_eq!(
            r.handle_line(r#"{"cmd":"JUMP"}"#),
            r#"{"ok":false,"err":"bad_request"}"#
        );
        assert_eq!(r.handle_line("not json"), r#"{"ok":false,"err":"bad_request"}"#);
        assert_eq!(r.handle_line(r#"{"cmd":"STOP","reason":"WATCHDOG"}"#), r#"{"ok":true}"#);
        assert_eq!(r.state().last_stop_reason.as_deref(), Some("WATCHDOG"));
        assert_eq!(
            Command::imov(PoseIncrement([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])).to_line(),
            r#"{"cmd":"IMOV","inc":[1.0,0.0,0.0,0.0,0.0,0.0]}"#
        );
        assert_eq!(Command::Stop { reason: None }.to_line(), r#"{"cmd":"STOP"}"#);
    }

    #[test]
    fn invalid_home_rejected() {
        assert!(RobotSim::new(Workspace::default(), RobotConfig::default(), Pose::at(Vec3::ZERO)).is_none());
        assert!(RobotSim::new(
            Workspace::default(),
            RobotConfig {
                lin_speed: 0.0,
                rot_speed: 1.0
            },
            Pose::at(DEFAULT_HOME)
        )
        .is_none());
    }
}
