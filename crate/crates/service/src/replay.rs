//! Offline replay of recorded sensor frames through a session and a fresh
//! simulated robot.

use std::time::{Duration, Instant};

use gestibot_core::robot::{Command, Reply, RobotSim, TelemetryMsg};
use gestibot_core::session::{Mode, SessionEvent};
use gestibot_core::{AccelSample, GestureClassifier, Pose, Session, WatchdogConfig};
use serde::Serialize;

use crate::config::ServeConfig;

/// Robot command a session event calls for, if any.
pub fn command_for(event: &SessionEvent) -> Option<Command> {
    match event {
        SessionEvent::MoveRequested { increment, .. } => Some(Command::imov(*increment)),
        SessionEvent::StopRequested { reason } => Some(Command::Stop {
            reason: Some(reason.as_str().to_string()),
        }),
        SessionEvent::StateChanged { .. } => None,
    }
}

/// Paces replay against simulated milliseconds.
pub trait Clock {
    fn wait_until(&mut self, sim_ms: u64);
}

/// Runs as fast as possible.
pub struct NoWait;

impl Clock for NoWait {
    fn wait_until(&mut self, _: u64) {}
}

/// Wall-clock pacing, `speed` times faster than real time.
pub struct Paced {
    origin: Option<(Instant, u64)>,
    speed: f64,
}

impl Paced {
    pub fn new(speed: f64) -> Self {
        Self { origin: None, speed }
    }
}

impl Clock for Paced {
    fn wait_until(&mut self, sim_ms: u64) {
        let (start, base) = *self.origin.get_or_insert((Instant::now(), sim_ms));
        let due = start + Duration::from_secs_f64(sim_ms.saturating_sub(base) as f64 / 1000.0 / self.speed);
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
    }
}

pub fn clock_for_speed(speed: f64) -> Box<dyn Clock> {
    if speed.is_infinite() {
        Box::new(NoWait)
    } else {
        Box::new(Paced::new(speed))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TimedEvent {
    pub t: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub events: Vec<TimedEvent>,
    pub telemetry: Vec<TelemetryMsg>,
    pub final_pose: Pose,
    pub final_mode: Mode,
    pub dropped: u64,
    /// Robot replies that were errors, with the command that caused them.
    pub robot_errors: Vec<String>,
    pub end_t: u64,
}

pub struct Replay<'a, C: ?Sized> {
    cfg: &'a ServeConfig,
    classifier: &'a C,
    /// Simulated time allowed after the last frame for motion to finish.
    pub settle_ms: u64,
}

impl<'a, C: GestureClassifier + ?Sized> Replay<'a, C> {
    pub fn new(cfg: &'a ServeConfig, classifier: &'a C) -> Self {
        Self {
            cfg,
            classifier,
            settle_ms: 30_000,
        }
    }

    pub fn run(&self, frames: &[AccelSample], clock: &mut dyn Clock) -> ReplayOutcome {
        let ws = self.cfg.workspace().expect("validated config");
        let robot = RobotSim::new(ws, self.cfg.robot(), self.cfg.home_pose()).expect("validated home");
        let mut r = Runner {
            robot,
            session: Session::new(self.cfg.session()),
            watchdog: self.cfg.watchdog(),
            tick_ms: u64::from(1000 / self.cfg.tick_hz).max(1),
            telemetry_every: u64::from(self.cfg.tick_hz / self.cfg.telemetry_hz).max(1),
            next_tick: 0,
            ticks: 0,
            out: ReplayOutcome {
                events: Vec::new(),
                telemetry: Vec::new(),
                final_pose: self.cfg.home_pose(),
                final_mode: Mode::Idle,
                dropped: 0,
                robot_errors: Vec::new(),
                end_t: 0,
            },
            clock,
        };
        let Some(first) = frames.first() else {
            return r.out;
        };
        r.next_tick = first.t + r.tick_ms;

        let mut last_t = first.t;
        for s in frames {
            r.advance_to(s.t);
            r.clock.wait_until(s.t);
            let pose = r.robot.pose();
            let evs = r.session.ingest(s, self.classifier, &ws, &pose);
            r.dispatch(evs, s.t);
            last_t = last_t.max(s.t);
        }
        let deadline = last_t + self.settle_ms;
        let mut t = last_t;
        while t < deadline && (r.robot.state().moving() || r.session.mode() != Mode::Idle) {
            t = (t + r.tick_ms).min(deadline);
            r.advance_to(t);
        }

        r.out.final_pose = r.robot.pose();
        r.out.final_mode = r.session.mode();
        r.out.dropped = r.session.dropped();
        r.out.end_t = t;
        r.out
    }
}

struct Runner<'c> {
    robot: RobotSim,
    session: Session,
    watchdog: WatchdogConfig,
    tick_ms: u64,
    telemetry_every: u64,
    next_tick: u64,
    ticks: u64,
    out: ReplayOutcome,
    clock: &'c mut dyn Clock,
}

impl Runner<'_> {
    /// Runs every robot and watchdog tick due at or before `until`.
    fn advance_to(&mut self, until: u64) {
        while self.next_tick <= until {
            let t = self.next_tick;
            self.clock.wait_until(t);
            self.robot.tick(self.tick_ms as f64 / 1000.0);
            let evs = self.session.watchdog_tick(t, &self.watchdog);
            self.dispatch(evs, t);
            self.ticks += 1;
            if self.ticks.is_multiple_of(self.telemetry_every) {
                self.out.telemetry.push(self.robot.telemetry(t));
            }
            self.next_tick += self.tick_ms;
        }
    }

    fn dispatch(&mut self, events: Vec<SessionEvent>, t: u64) {
        for event in events {
            if let Some(cmd) = command_for(&event) {
                if let Reply::Error(e) = self.robot.apply(&cmd) {
                    self.out.robot_errors.push(format!("{} -> {}", cmd.to_line(), e.code()));
                }
            }
            self.out.events.push(TimedEvent { t, event });
        }
    }
}
