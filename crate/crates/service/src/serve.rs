//! Live service: a hosted robot simulator on its protocol port, a session
//! actor that drives it as an ordinary protocol client, and a WebSocket
//! client socket that carries sensor frames in and state out.
//!
//! Actors talk only through channels. The session and the robot each have a
//! single writer; everything clients see goes through one broadcast channel.

use std::collections::{HashSet, VecDeque};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use gestibot_core::mlp::{MlpError, MlpModel};
use gestibot_core::robot::{Command, ReplyMsg, RobotSim};
use gestibot_core::session::{LeftPosture, Mode, SessionEvent, SAMPLE_PERIOD_MS, WINDOW_LEN};
use gestibot_core::synth::{left_vector, synth_gesture, synth_left, synth_scenario, ScenarioConfig, SynthParams};
use gestibot_core::{AccelSample, Arm, Pose, Session, WatchdogConfig, Workspace};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;

use crate::config::ServeConfig;
use crate::envelope::{
    ClassScoresPayload, ClientMsg, ServerMsg, SessionEventPayload, TelemetryPayload, Topic, UiGesture, UiGestureKind,
};
use crate::replay::command_for;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("no model configured")]
    NoModel,
    #[error("cannot read model {path}: {source}")]
    ModelIo { path: String, source: std::io::Error },
    #[error("model {path}: {source}")]
    Model { path: String, source: MlpError },
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("cannot reach robot at {addr}: {source}")]
    RobotConnect { addr: SocketAddr, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub fn load_model(path: &Path) -> Result<MlpModel, ServeError> {
    let bytes = std::fs::read(path).map_err(|source| ServeError::ModelIo {
        path: path.display().to_string(),
        source,
    })?;
    MlpModel::from_bytes(&bytes).map_err(|source| ServeError::Model {
        path: path.display().to_string(),
        source,
    })
}

/// A server message, serialized once and fanned out to every client.
#[derive(Debug)]
struct Outgoing {
    topic: Option<Topic>,
    text: String,
}

#[derive(Clone)]
struct Fanout(broadcast::Sender<Arc<Outgoing>>);

impl Fanout {
    fn publish(&self, msg: &ServerMsg) {
        // No receivers just means no client is connected.
        let _ = self.0.send(Arc::new(Outgoing {
            topic: msg.topic(),
            text: msg.to_text(),
        }));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Status {
    mode: Mode,
    dropped: u64,
}

#[derive(Debug)]
struct Frame {
    sample: AccelSample,
    received: Instant,
}

pub struct ServeHandle {
    pub client_addr: SocketAddr,
    pub robot_addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServeHandle {
    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
    }
}

/// Binds every socket, connects the session to the robot and returns once
/// the service is accepting clients.
pub async fn start(cfg: ServeConfig) -> Result<ServeHandle, ServeError> {
    cfg.validate().map_err(|e| ServeError::Config(e.to_string()))?;
    let model = load_model(cfg.model.as_deref().ok_or(ServeError::NoModel)?)?;
    let workspace = cfg.workspace().map_err(|e| ServeError::Config(e.to_string()))?;
    let epoch = Instant::now();
    let (shutdown, shutdown_rx) = watch::channel(false);
    let (out_tx, _) = broadcast::channel(1024);
    let fanout = Fanout(out_tx);
    let (status_tx, status_rx) = watch::channel(Status {
        mode: Mode::Idle,
        dropped: 0,
    });
    let mut tasks = Vec::new();

    let robot_addr = match cfg.robot_connect {
        Some(addr) => addr,
        None => {
            let listener = TcpListener::bind(cfg.robot_listen)
                .await
                .map_err(|source| ServeError::Bind {
                    addr: cfg.robot_listen,
                    source,
                })?;
            let addr = listener.local_addr().expect("bound listener");
            let sim = RobotSim::new(workspace, cfg.robot(), cfg.home_pose())
                .ok_or_else(|| ServeError::Config("home pose is not valid".into()))?;
            let (req_tx, req_rx) = mpsc::channel(64);
            let robot = RobotActor {
                sim,
                tick: cfg.tick_period(),
                telemetry_every: u64::from((cfg.tick_hz / cfg.telemetry_hz).max(1)),
                epoch,
                status: status_rx.clone(),
                fanout: fanout.clone(),
            };
            tasks.push(tokio::spawn(robot.run(req_rx, shutdown_rx.clone())));
            tasks.push(tokio::spawn(robot_listener(listener, req_tx, shutdown_rx.clone())));
            addr
        }
    };

    let client_listener = TcpListener::bind(cfg.listen).await.map_err(|source| ServeError::Bind {
        addr: cfg.listen,
        source,
    })?;
    let client_addr = client_listener.local_addr().expect("bound listener");

    let link = RobotLink::connect(robot_addr).await?;
    let (frame_tx, frame_rx) = mpsc::channel(1024);
    let session = SessionActor {
        session: Session::new(cfg.session()),
        model,
        workspace,
        watchdog: cfg.watchdog(),
        link,
        pose: cfg.home_pose(),
        activation: None,
        last_latency: None,
        last_left: None,
        fanout: fanout.clone(),
        status: status_tx,
    };
    tasks.push(tokio::spawn(session.run(
        frame_rx,
        cfg.tick_period(),
        shutdown_rx.clone(),
    )));

    let (gesture_tx, gesture_rx) = mpsc::channel(64);
    let bridge = Bridge::new(&cfg, frame_tx.clone());
    tasks.push(tokio::spawn(bridge.run(gesture_rx, shutdown_rx.clone())));

    tasks.push(tokio::spawn(accept_clients(
        client_listener,
        fanout,
        frame_tx,
        gesture_tx,
        shutdown_rx,
    )));
    log::info!("client socket on ws://{client_addr}, robot protocol on {robot_addr}");
    Ok(ServeHandle {
        client_addr,
        robot_addr,
        shutdown,
        tasks,
    })
}

struct RobotRequest {
    line: String,
    reply: oneshot::Sender<String>,
}

struct RobotActor {
    sim: RobotSim,
    tick: Duration,
    telemetry_every: u64,
    epoch: Instant,
    status: watch::Receiver<Status>,
    fanout: Fanout,
}

impl RobotActor {
    async fn run(mut self, mut requests: mpsc::Receiver<RobotRequest>, mut shutdown: watch::Receiver<bool>) {
        let mut ticker = tokio::time::interval(self.tick);
        ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
        let dt = self.tick.as_secs_f64();
        let mut ticks = 0u64;
        loop {
            tokio::select! {
                Some(req) = requests.recv() => {
                    let _ = req.reply.send(self.sim.handle_line(&req.line));
                }
                _ = ticker.tick() => {
                    self.sim.tick(dt);
                    ticks += 1;
                    if ticks.is_multiple_of(self.telemetry_every) {
                        let status = *self.status.borrow();
                        let t = self.epoch.elapsed().as_millis() as u64;
                        self.fanout.publish(&ServerMsg::Telemetry(TelemetryPayload {
                            robot: self.sim.telemetry(t),
                            mode: status.mode,
                            dropped: status.dropped,
                        }));
                    }
                }
                _ = shutdown.changed() => break,
            }
        }
    }
}

async fn robot_listener(
    listener: TcpListener,
    requests: mpsc::Sender<RobotRequest>,
    mut shutdown: watch::Receiver<bool>,
) {
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    log::debug!("robot client {peer} connected");
                    tokio::spawn(robot_connection(stream, requests.clone(), shutdown.clone()));
                }
                Err(e) => log::warn!("robot accept failed: {e}"),
            },
            _ = shutdown.changed() => break,
        }
    }
}

async fn robot_connection(
    stream: TcpStream,
    requests: mpsc::Sender<RobotRequest>,
    mut shutdown: watch::Receiver<bool>,
) {
    let _ = stream.set_nodelay(true);
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    loop {
        let line = tokio::select! {
            l = lines.next_line() => l,
            _ = shutdown.changed() => break,
        };
        let Ok(Some(line)) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let (tx, rx) = oneshot::channel();
        if requests.send(RobotRequest { line, reply: tx }).await.is_err() {
            break;
        }
        let Ok(mut reply) = rx.await else { break };
        reply.push('\n');
        if write.write_all(reply.as_bytes()).await.is_err() || write.flush().await.is_err() {
            break;
        }
    }
}

/// Newline-delimited protocol client for the robot.
struct RobotLink {
    lines: tokio::io::Lines<BufReader<OwnedReadHalf>>,
    write: OwnedWriteHalf,
}

impl RobotLink {
    async fn connect(addr: SocketAddr) -> Result<Self, ServeError> {
        let stream = TcpStream::connect(addr)
            .await
            .map_err(|source| ServeError::RobotConnect { addr, source })?;
        let _ = stream.set_nodelay(true);
        let (read, write) = stream.into_split();
        Ok(Self {
            lines: BufReader::new(read).lines(),
            write,
        })
    }

    async fn send(&mut self, cmd: &Command) -> std::io::Result<()> {
        let mut line = cmd.to_line();
        line.push('\n');
        self.write.write_all(line.as_bytes()).await?;
        self.write.flush().await
    }

    async fn reply(&mut self) -> std::io::Result<ReplyMsg> {
        let line = self
            .lines
            .next_line()
            .await?
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "robot closed the connection"))?;
        serde_json::from_str(&line).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

struct SessionActor {
    session: Session,
    model: MlpModel,
    workspace: Workspace,
    watchdog: WatchdogConfig,
    link: RobotLink,
    /// Robot pose as last reported; refreshed on every activation.
    pose: Pose,
    /// Receipt time of the frame that activated the current capture.
    activation: Option<Instant>,
    last_latency: Option<f64>,
    /// Sample time and receipt time of the newest accepted left-arm frame.
    last_left: Option<(u64, Instant)>,
    fanout: Fanout,
    status: watch::Sender<Status>,
}

impl SessionActor {
    async fn run(mut self, mut frames: mpsc::Receiver<Frame>, tick: Duration, mut shutdown: watch::Receiver<bool>) {
        let mut ticker = tokio::time::interval(tick);
        ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
        loop {
            let result = tokio::select! {
                Some(f) = frames.recv() => self.on_frame(f).await,
                _ = ticker.tick() => self.on_tick().await,
                _ = shutdown.changed() => break,
            };
            if let Err(e) = result {
                log::error!("robot link failed: {e}");
                self.fanout
                    .publish(&ServerMsg::error(format!("robot link failed: {e}")));
                break;
            }
        }
    }

    async fn on_frame(&mut self, f: Frame) -> std::io::Result<()> {
        let seen = self.session.last_classification().map(|c| c.window[WINDOW_LEN - 1].t);
        let left_before = self.session.last_left_t();
        let events = self.session.ingest(&f.sample, &self.model, &self.workspace, &self.pose);
        if self.session.last_left_t() != left_before {
            self.last_left = Some((f.sample.t, f.received));
        }
        if let Some(c) = self.session.last_classification() {
            if Some(c.window[WINDOW_LEN - 1].t) != seen {
                self.fanout.publish(&ServerMsg::ClassScores(ClassScoresPayload {
                    t: f.sample.t,
                    scores: c.scores.to_vec(),
                    class: c.class,
                }));
            }
        }
        self.apply(events, f.sample.t, Some(f.received)).await
    }

    async fn on_tick(&mut self) -> std::io::Result<()> {
        // Sample clock extrapolated by the wall time since the newest left frame.
        let Some((t, at)) = self.last_left else {
            return Ok(());
        };
        let now = t + at.elapsed().as_millis() as u64;
        let events = self.session.watchdog_tick(now, &self.watchdog);
        self.apply(events, now, None).await
    }

    async fn apply(&mut self, events: Vec<SessionEvent>, t: u64, received: Option<Instant>) -> std::io::Result<()> {
        for event in events {
            match event {
                SessionEvent::StateChanged { mode: Mode::Capturing } => {
                    self.activation = received;
                    self.link.send(&Command::Getpos).await?;
                    match self.link.reply().await?.pose {
                        Some(p) => self.pose = p.into(),
                        None => log::warn!("GETPOS reply carried no pose"),
                    }
                }
                SessionEvent::MoveRequested { .. } => {
                    debug_assert_eq!(self.session.mode(), Mode::Moving);
                    let cmd = command_for(&event).expect("moves map to IMOV");
                    self.link.send(&cmd).await?;
                    self.last_latency = self.activation.map(|a| a.elapsed().as_secs_f64() * 1000.0);
                    let reply = self.link.reply().await?;
                    self.check(reply, &cmd);
                }
                SessionEvent::StopRequested { .. } => {
                    let cmd = command_for(&event).expect("stops map to STOP");
                    self.link.send(&cmd).await?;
                    let reply = self.link.reply().await?;
                    self.check(reply, &cmd);
                }
                SessionEvent::StateChanged { .. } => {}
            }
            self.fanout.publish(&ServerMsg::SessionEvent(SessionEventPayload {
                t,
                event,
                latency_ms: self.last_latency,
            }));
        }
        self.status.send_replace(Status {
            mode: self.session.mode(),
            dropped: self.session.dropped(),
        });
        Ok(())
    }

    fn check(&self, reply: ReplyMsg, cmd: &Command) {
        if !reply.ok {
            let msg = format!("robot rejected {}: {}", cmd.to_line(), reply.err.unwrap_or_default());
            log::warn!("{msg}");
            self.fanout.publish(&ServerMsg::error(msg));
        }
    }
}

/// Turns UI gesture intents into a 100 Hz stream of synthetic frames. The left
/// arm streams continuously once the first gesture arrives; the right arm
/// streams only while a gesture plays.
struct Bridge {
    frames: mpsc::Sender<Frame>,
    noise: f64,
    seed: u64,
    left_hold: Option<[f64; 3]>,
    left_posture: LeftPosture,
    left: VecDeque<[f64; 3]>,
    right: VecDeque<[f64; 3]>,
    t: u64,
}

impl Bridge {
    fn new(cfg: &ServeConfig, frames: mpsc::Sender<Frame>) -> Self {
        Self {
            frames,
            noise: cfg.noise,
            seed: cfg.seed,
            left_hold: None,
            left_posture: LeftPosture::Stop,
            left: VecDeque::new(),
            right: VecDeque::new(),
            t: 0,
        }
    }

    async fn run(mut self, mut gestures: mpsc::Receiver<UiGesture>, mut shutdown: watch::Receiver<bool>) {
        let mut ticker = tokio::time::interval(Duration::from_millis(SAMPLE_PERIOD_MS));
        loop {
            tokio::select! {
                Some(g) = gestures.recv() => self.queue(g),
                _ = ticker.tick() => {
                    if !self.emit().await {
                        break;
                    }
                }
                _ = shutdown.changed() => break,
            }
        }
    }

    fn params(&mut self, intensity: f64) -> SynthParams {
        self.seed = self.seed.wrapping_add(1);
        SynthParams {
            peak_accel: intensity,
            noise_sigma: self.noise,
            seed: self.seed,
            ..SynthParams::default()
        }
    }

    fn queue(&mut self, g: UiGesture) {
        let p = self.params(g.intensity);
        match g.kind {
            UiGestureKind::LeftStart | UiGestureKind::LeftStop => {
                let posture = if g.kind == UiGestureKind::LeftStart {
                    LeftPosture::Start
                } else {
                    LeftPosture::Stop
                };
                let trace = synth_left(posture, &p).expect("valid params");
                self.left = trace.samples.iter().map(|s| s.accel()).collect();
                self.left_hold = left_vector(posture);
                self.left_posture = posture;
                self.right.clear();
            }
            UiGestureKind::Class(class) if self.left_posture == LeftPosture::Start => {
                // Already active: play the gesture from where a capture
                // window would normally begin.
                let trace = synth_gesture(class, &p).expect("trainable class");
                let lag = p.activation_lag_ms as u64;
                self.right = trace.samples.iter().filter(|s| s.t >= lag).map(|s| s.accel()).collect();
            }
            UiGestureKind::Class(class) => {
                let sc = synth_scenario(class, &p, &ScenarioConfig::default()).expect("trainable class");
                self.left.clear();
                self.right.clear();
                for s in &sc.samples {
                    match s.arm {
                        Arm::Left => self.left.push_back(s.accel()),
                        Arm::Right => self.right.push_back(s.accel()),
                    }
                }
                self.left_hold = left_vector(LeftPosture::Stop);
            }
        }
    }

    /// Sends this tick's frames; false once the session has gone away.
    async fn emit(&mut self) -> bool {
        let Some(hold) = self.left_hold else {
            return true;
        };
        self.t += SAMPLE_PERIOD_MS;
        let left = self.left.pop_front().unwrap_or(hold);
        let mut out = vec![AccelSample::left(self.t, left)];
        if let Some(r) = self.right.pop_front() {
            out.push(AccelSample::right(self.t, r));
        }
        for sample in out {
            let frame = Frame {
                sample,
                received: Instant::now(),
            };
            if self.frames.send(frame).await.is_err() {
                return false;
            }
        }
        true
    }
}

async fn accept_clients(
    listener: TcpListener,
    fanout: Fanout,
    frames: mpsc::Sender<Frame>,
    gestures: mpsc::Sender<UiGesture>,
    mut shutdown: watch::Receiver<bool>,
) {
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    let client = Client {
                        out: fanout.0.subscribe(),
                        frames: frames.clone(),
                        gestures: gestures.clone(),
                        topics: Topic::ALL.into_iter().collect(),
                    };
                    let stop = shutdown.clone();
                    tokio::spawn(async move {
                        if let Err(e) = client.run(stream, stop).await {
                            log::debug!("client {peer}: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("client accept failed: {e}"),
            },
            _ = shutdown.changed() => break,
        }
    }
}

struct Client {
    out: broadcast::Receiver<Arc<Outgoing>>,
    frames: mpsc::Sender<Frame>,
    gestures: mpsc::Sender<UiGesture>,
    topics: HashSet<Topic>,
}

impl Client {
    async fn run(
        mut self,
        stream: TcpStream,
        mut shutdown: watch::Receiver<bool>,
    ) -> Result<(), tokio_tungstenite::tungstenite::Error> {
        let _ = stream.set_nodelay(true);
        let ws = tokio_tungstenite::accept_async(stream).await?;
        let (mut sink, mut source) = ws.split();
        loop {
            tokio::select! {
                msg = source.next() => {
                    let text = match msg {
                        Some(Ok(Message::Text(t))) => t,
                        Some(Ok(Message::Binary(_))) => {
                            sink.send(Message::Text(ServerMsg::error("binary frames are not supported").to_text())).await?;
                            continue;
                        }
                        Some(Ok(Message::Close(_))) | None => break,
                        Some(Ok(_)) => continue,
                        Some(Err(e)) => return Err(e),
                    };
                    let received = Instant::now();
                    match ClientMsg::parse(&text) {
                        Ok(ClientMsg::SensorFrame(sample)) => {
                            if self.frames.send(Frame { sample, received }).await.is_err() {
                                break;
                            }
                        }
                        Ok(ClientMsg::UiGesture(g)) => {
                            if self.gestures.send(g).await.is_err() {
                                break;
                            }
                        }
                        Ok(ClientMsg::Subscribe(s)) => self.topics = s.topics.into_iter().collect(),
                        Err(e) => sink.send(Message::Text(ServerMsg::error(e).to_text())).await?,
                    }
                }
                out = self.out.recv() => match out {
                    Ok(m) => {
                        if m.topic.is_none_or(|t| self.topics.contains(&t)) {
                            sink.send(Message::Text(m.text.clone())).await?;
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("client fell behind, {n} messages skipped"),
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                _ = shutdown.changed() => break,
            }
        }
        let _ = sink.close().await;
        Ok(())
    }
}
