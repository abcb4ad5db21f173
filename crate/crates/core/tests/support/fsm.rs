use gestibot_core::mlp::{FeatureVector, OUTPUTS};
use gestibot_core::session::{Mode, SessionEvent, StopReason};
use gestibot_core::{AccelSample, GestureClassifier, Pose, Session, SessionConfig, Vec3, WatchdogConfig, Workspace};

#[derive(Debug, Clone, Copy)]
pub enum Input {
    Start,
    Stop,
    RightKnown,
    RightUnknown,
    Silence,
}

pub const ALPHABET: [Input; 5] = [
    Input::Start,
    Input::Stop,
    Input::RightKnown,
    Input::RightUnknown,
    Input::Silence,
];
pub const STEP_MS: u64 = 10;

/// X+ for a positive ax, nothing otherwise.
pub struct Stub;

impl GestureClassifier for Stub {
    fn scores(&self, x: &FeatureVector) -> [f64; OUTPUTS] {
        let mut s = [0.0; OUTPUTS];
        if x.0[0] > 0.0 {
            s[0] = 1.0;
        }
        s
    }
}

#[derive(Clone)]
pub struct State {
    pub session: Session,
    pub t: u64,
    /// An activation happened since the last stop or move.
    pub armed: bool,
    pub trace: Vec<Input>,
}

impl State {
    pub fn new(start_hold: usize) -> Self {
        Self {
            session: Session::new(SessionConfig { start_hold }),
            t: 0,
            armed: false,
            trace: Vec::new(),
        }
    }
}

pub fn step(st: &mut State, input: Input, wd: &WatchdogConfig) -> Result<(), String> {
    st.t += STEP_MS;
    st.trace.push(input);
    let t = st.t;
    let sample = match input {
        Input::Start => Some(AccelSample::left(t, [-1.0, 0.0, 0.0])),
        Input::Stop => Some(AccelSample::left(t, [0.0, 0.0, 1.0])),
        Input::RightKnown => Some(AccelSample::right(t, [0.8, 0.0, 1.0])),
        Input::RightUnknown => Some(AccelSample::right(t, [-0.8, 0.0, 1.0])),
        Input::Silence => None,
    };
    let before = st.session.mode();
    let mut events = Vec::new();
    if let Some(s) = sample {
        let w = Workspace::default();
        events.extend(st.session.ingest(&s, &Stub, &w, &Pose::at(Vec3::new(1000.0, 0.0, 0.0))));
    }
    events.extend(st.session.watchdog_tick(t, wd));

    let fail = |m: &str| Err(format!("{m} after {:?}", st.trace));
    for (i, ev) in events.iter().enumerate() {
        match ev {
            SessionEvent::StateChanged { mode: Mode::Capturing } => st.armed = true,
            SessionEvent::MoveRequested { .. } => {
                if !st.armed || before != Mode::Capturing {
                    return fail("move without a fresh START");
                }
                st.armed = false;
            }
            SessionEvent::StopRequested { reason } => {
                if before == Mode::Idle {
                    return fail("stop event while idle");
                }
                if events.get(i + 1) != Some(&SessionEvent::StateChanged { mode: Mode::Idle }) {
                    return fail("stop not followed by Idle");
                }
                if *reason == StopReason::Watchdog {
                    let silent = t - st.session.last_left_t().unwrap_or(0);
                    if silent <= wd.heartbeat_timeout_ms {
                        return fail("watchdog fired early");
                    }
                }
                st.armed = false;
            }
            _ => {}
        }
    }
    if st.session.mode() != Mode::Idle {
        let silent = t - st.session.last_left_t().unwrap_or(0);
        if silent > wd.heartbeat_timeout_ms {
            return fail("watchdog late");
        }
    }
    if matches!(input, Input::Stop) && st.session.mode() != Mode::Idle {
        return fail("STOP did not stop");
    }
    Ok(())
}

pub fn explore(st: &State, depth: usize, wd: &WatchdogConfig, visited: &mut u64) -> Result<(), String> {
    if depth == 0 {
        *visited += 1;
        return Ok(());
    }
    for input in ALPHABET {
        let mut next = st.clone();
        step(&mut next, input, wd)?;
        explore(&next, depth - 1, wd, visited)?;
    }
    Ok(())
}

/// Every input sequence of length `depth`, watchdog at 25 ms. Returns the
/// number of sequences explored or the first violation.
pub fn check(start_hold: usize, depth: usize) -> Result<u64, String> {
    let wd = WatchdogConfig {
        heartbeat_timeout_ms: 25,
    };
    let root = State::new(start_hold);
    let mut visited = 0;
    explore(&root, depth, &wd, &mut visited)?;
    Ok(visited)
}
