//! Live control loop: left-arm start/stop postures gate a three-sample
//! right-arm window, the window is classified, and the recognised class is
//! turned into a single pose increment. A heartbeat watchdog on the left-arm
//! stream forces a stop when that stream goes quiet.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rotation_increment, translation_increment, GeometryError, Pose, PoseIncrement, Workspace};
use crate::gesture::{GestureClass, Motion};
use crate::mlp::{classify_outputs, FeatureVector, GestureClassifier, OUTPUTS, THRESHOLD};
use crate::sensor::{AccelSample, Arm};

/// Dominant-axis level (g) a posture reading must reach.
pub const POSTURE_DOMINANT: f64 = 0.7;
/// Largest magnitude (g) tolerated on the off-axes of a posture.
pub const POSTURE_OFF_AXIS: f64 = 0.4;

pub const WINDOW_LEN: usize = 3;
pub const SAMPLE_PERIOD_MS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("expected a {expected:?}-arm sample")]
    WrongArm { expected: Arm },
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LeftPosture {
    Stop,
    Start,
    Indeterminate,
}

/// Left arm held horizontally stops the robot; rotated about Y (gravity on
/// −X) starts it. STOP is checked first.
pub fn classify_left(s: &AccelSample) -> Result<LeftPosture, SessionError> {
    if s.arm != Arm::Left {
        return Err(SessionError::WrongArm { expected: Arm::Left });
    }
    Ok(left_posture(s.accel()))
}

pub(crate) fn left_posture([ax, ay, az]: [f64; 3]) -> LeftPosture {
    if az >= POSTURE_DOMINANT && ax.abs() <= POSTURE_OFF_AXIS && ay.abs() <= POSTURE_OFF_AXIS {
        LeftPosture::Stop
    } else if ax <= -POSTURE_DOMINANT && ay.abs() <= POSTURE_OFF_AXIS && az.abs() <= POSTURE_OFF_AXIS {
        LeftPosture::Start
    } else {
        LeftPosture::Indeterminate
    }
}

/// Gravity-direction reading of a static right-arm posture. Only used as a
/// diagnostic cross-check; the network is authoritative.
///
/// Sign convention: RXN ↔ `ay ≤ −0.7`, RXP ↔ `ay ≥ +0.7`.
pub fn classify_right_static(s: &AccelSample) -> Result<Option<GestureClass>, SessionError> {
    if s.arm != Arm::Right {
        return Err(SessionError::WrongArm { expected: Arm::Right });
    }
    let (ax, ay) = (s.ax, s.ay);
    let along_x = ax.abs() >= POSTURE_DOMINANT;
    let along_y = ay.abs() >= POSTURE_DOMINANT;
    Ok(match (along_x, along_y) {
        (false, false) => None,
        (true, true) if ay.abs() > ax.abs() => Some(static_y(ay)),
        (true, _) => Some(if ax < 0.0 { GestureClass::Ryn } else { GestureClass::Ryp }),
        (false, true) => Some(static_y(ay)),
    })
}

fn static_y(ay: f64) -> GestureClass {
    if ay < 0.0 {
        GestureClass::Rxn
    } else {
        GestureClass::Rxp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Idle,
    Capturing,
    Moving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    Operator,
    Watchdog,
    UnknownGesture,
    /// The recognised motion could not be turned into an increment from the
    /// current pose (pose outside the workspace or limits).
    Fault,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Operator => "OPERATOR",
            StopReason::Watchdog => "WATCHDOG",
            StopReason::UnknownGesture => "UNKNOWN_GESTURE",
            StopReason::Fault => "FAULT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    /// `increment` is the command to send: translations are already scaled
    /// by the workspace back-off.
    MoveRequested {
        class: GestureClass,
        increment: PoseIncrement,
    },
    StopRequested {
        reason: StopReason,
    },
    StateChanged {
        mode: Mode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Consecutive START readings required before activation fires.
    pub start_hold: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { start_hold: 3 }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.start_hold == 0 {
            return Err(SessionError::InvalidConfig("start_hold must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatchdogConfig {
    pub heartbeat_timeout_ms: u64,
}

impl Default for WatchdogConfig {
    fn default() -> Self {
        Self {
            heartbeat_timeout_ms: 200,
        }
    }
}

impl WatchdogConfig {
    pub fn validate(&self, sample_period_ms: u64) -> Result<(), SessionError> {
        if self.heartbeat_timeout_ms <= sample_period_ms {
            return Err(SessionError::InvalidConfig(format!(
                "heartbeat timeout {} ms must exceed the sample period {} ms",
                self.heartbeat_timeout_ms, sample_period_ms
            )));
        }
        Ok(())
    }
}

/// Result of classifying one capture window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub window: [AccelSample; WINDOW_LEN],
    pub features: FeatureVector,
    pub scores: [f64; OUTPUTS],
    pub class: GestureClass,
}

#[derive(Debug, Clone)]
pub struct Session {
    cfg: SessionConfig,
    mode: Mode,
    window: Vec<AccelSample>,
    active_class: Option<GestureClass>,
    last_left_t: Option<u64>,
    last_t: [Option<u64>; 2],
    start_run: usize,
    start_latched: bool,
    dropped: u64,
    last_classification: Option<Classification>,
}

impl Default for Session {
    fn default() -> Self {
        Self::new(SessionConfig::default())
    }
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Self {
        Self {
            cfg,
            mode: Mode::Idle,
            window: Vec::with_capacity(WINDOW_LEN),
            active_class: None,
            last_left_t: None,
            last_t: [None; 2],
            start_run: 0,
            start_latched: false,
            dropped: 0,
            last_classification: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn active_class(&self) -> Option<GestureClass> {
        self.active_class
    }

    pub fn window(&self) -> &[AccelSample] {
        &self.window
    }

    pub fn last_left_t(&self) -> Option<u64> {
        self.last_left_t
    }

    /// Samples dropped for arriving out of order or with a repeated timestamp.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn last_classification(&self) -> Option<&Classification> {
        self.last_classification.as_ref()
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    /// Applies one sample; returns the events it caused, in order.
    pub fn ingest<C: GestureClassifier + ?Sized>(
        &mut self,
        s: &AccelSample,
        classifier: &C,
        w: &Workspace,
        current: &Pose,
    ) -> Vec<SessionEvent> {
        let slot = match s.arm {
            Arm::Left => 0,
            Arm::Right => 1,
        };
        if !s.is_finite() || self.last_t[slot].is_some_and(|prev| s.t <= prev) {
            self.dropped += 1;
            log::debug!(
                "dropping {:?} sample at t={} (total dropped {})",
                s.arm,
                s.t,
                self.dropped
            );
            return Vec::new();
        }
        self.last_t[slot] = Some(s.t);

        match s.arm {
            Arm::Left => self.ingest_left(s),
            Arm::Right => self.ingest_right(s, classifier, w, current),
        }
    }

    fn ingest_left(&mut self, s: &AccelSample) -> Vec<SessionEvent> {
        self.last_left_t = Some(s.t);
        match left_posture(s.accel()) {
            LeftPosture::Stop => {
                self.start_run = 0;
                self.start_latched = false;
                // Stop acts on the first reading, without hysteresis.
                if self.mode != Mode::Idle {
                    return self.stop(StopReason::Operator);
                }
                Vec::new()
            }
            LeftPosture::Indeterminate => {
                self.start_run = 0;
                self.start_latched = false;
                Vec::new()
            }
            LeftPosture::Start => {
                self.start_run += 1;
                if self.start_latched || self.start_run < self.cfg.start_hold {
                    return Vec::new();
                }
                self.start_latched = true;
                if self.mode != Mode::Idle {
                    return Vec::new();
                }
                self.window.clear();
                self.mode = Mode::Capturing;
                vec![SessionEvent::StateChanged { mode: Mode::Capturing }]
            }
        }
    }

    fn ingest_right<C: GestureClassifier + ?Sized>(
        &mut self,
        s: &AccelSample,
        classifier: &C,
        w: &Workspace,
        current: &Pose,
    ) -> Vec<SessionEvent> {
        if self.mode != Mode::Capturing {
            return Vec::new();
        }
        self.window.push(*s);
        if self.window.len() < WINDOW_LEN {
            return Vec::new();
        }
        let window: [AccelSample; WINDOW_LEN] = [self.window[0], self.window[1], self.window[2]];
        self.window.clear();
        let features = FeatureVector::from_raw(window.map(|s| s.accel()));
        let scores = classifier.scores(&features);
        let class = classify_outputs(&scores, THRESHOLD);
        self.last_classification = Some(Classification {
            window,
            features,
            scores,
            class,
        });
        if class == GestureClass::Unknown {
            return self.stop(StopReason::UnknownGesture);
        }
        match increment_for(class, current, w) {
            Ok(increment) => {
                self.mode = Mode::Moving;
                self.active_class = Some(class);
                vec![
                    SessionEvent::StateChanged { mode: Mode::Moving },
                    SessionEvent::MoveRequested { class, increment },
                ]
            }
            Err(e) => {
                log::warn!("cannot move for {class}: {e}");
                self.stop(StopReason::Fault)
            }
        }
    }

    /// Forces a stop when the left-arm stream has been silent for longer than
    /// the heartbeat timeout. `now` is on the sample clock.
    pub fn watchdog_tick(&mut self, now: u64, cfg: &WatchdogConfig) -> Vec<SessionEvent> {
        if self.mode == Mode::Idle {
            return Vec::new();
        }
        let silent_for = self.last_left_t.map_or(u64::MAX, |t| now.saturating_sub(t));
        if silent_for > cfg.heartbeat_timeout_ms {
            return self.stop(StopReason::Watchdog);
        }
        Vec::new()
    }

    fn stop(&mut self, reason: StopReason) -> Vec<SessionEvent> {
        self.mode = Mode::Idle;
        self.window.clear();
        self.active_class = None;
        vec![
            SessionEvent::StopRequested { reason },
            SessionEvent::StateChanged { mode: Mode::Idle },
        ]
    }
}

/// The increment commanded for `class` from `current`.
pub fn increment_for(class: GestureClass, current: &Pose, w: &Workspace) -> Result<PoseIncrement, GeometryError> {
    match class.to_motion() {
        Ok(Motion::Translation(d)) => Ok(translation_increment(current, d, w)?.scaled(w.backoff())),
        Ok(Motion::Rotation(axis, sign)) => rotation_increment(current, axis, sign, w),
        Err(_) => Err(GeometryError::NoBoundaryHit),
    }
}

/// Classifier that never reaches the threshold.
struct Abstain;

impl GestureClassifier for Abstain {
    fn scores(&self, _: &FeatureVector) -> [f64; OUTPUTS] {
        [0.0; OUTPUTS]
    }
}

/// The first capture window a session would classify when fed `samples` in
/// order, or `None` if no window completes.
pub fn first_window(samples: &[AccelSample], cfg: SessionConfig) -> Option<[AccelSample; WINDOW_LEN]> {
    let mut session = Session::new(cfg);
    let w = Workspace::default();
    let pose = Pose::default();
    for s in samples {
        session.ingest(s, &Abstain, &w, &pose);
        if let Some(c) = session.last_classification() {
            return Some(c.window);
        }
    }
    None
}
