use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gestibot_core::dataset::{read_dataset, write_dataset, DatasetError};
use gestibot_core::eval::evaluate_with_progress;
use gestibot_core::mlp::{self, MlpError, TrainingConfig};
use gestibot_core::sensor::{read_frames, write_frames};
use gestibot_core::synth::{synth_scenario, synth_windows, ScenarioConfig, SynthError, SynthParams, TRAINING_STREAM};
use gestibot_core::GestureClass;
use thiserror::Error;

use crate::config::{ConfigError, ServeConfig};
use crate::envelope::{EvalProgressPayload, ServerMsg};
use crate::replay::{clock_for_speed, Replay};
use crate::serve::{self, load_model, ServeError};

#[derive(Debug, Parser)]
#[command(
    name = "gestibot",
    version,
    about = "Accelerometer gesture control for a simulated robot"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate a labelled dataset and/or a two-arm replay file.
    Synth(SynthArgs),
    /// Train the gesture network on a dataset file.
    Train(TrainArgs),
    /// Measure per-class recognition rates on fresh synthetic trials.
    Eval(EvalArgs),
    /// Feed a replay file through the session and a simulated robot.
    Replay(ReplayArgs),
    /// Run the live service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dataset output path.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Replay output path (needs --class).
    #[arg(long, requires = "class")]
    pub replay: Option<PathBuf>,
    /// Gesture played in the replay file.
    #[arg(long)]
    pub class: Option<GestureClass>,
    #[arg(long, default_value_t = 30)]
    pub n_per_class: usize,
    /// Gaussian noise, g.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replay only: peak acceleration, g.
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
    /// Replay only: rise time, ms.
    #[arg(long, default_value_t = 300.0)]
    pub rise_ms: f64,
    /// Replay only: gesture onset to activation, ms.
    #[arg(long, default_value_t = SynthParams::default().activation_lag_ms)]
    pub lag_ms: f64,
    /// Replay only: activation time, ms.
    #[arg(long, default_value_t = ScenarioConfig::default().edge_ms)]
    pub edge_ms: u64,
    /// Replay only: how long the left arm holds START.
    #[arg(long, default_value_t = ScenarioConfig::default().hold_ms)]
    pub hold_ms: u64,
    #[arg(long, default_value_t = ScenarioConfig::default().tail_ms)]
    pub tail_ms: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Model output path.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub lr: f64,
    /// Total example presentations.
    #[arg(long, default_value_t = 100_000)]
    pub cycles: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub momentum: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Trials come from a stream of this seed that training never draws from.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// JSON report output path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write eval_progress envelopes to stderr.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Service config for workspace, speeds and timeouts.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Clock multiplier; `inf` runs without waiting.
    #[arg(long, default_value_t = f64::INFINITY)]
    pub speed: f64,
    /// Simulated time after the last frame for motion to finish, ms.
    #[arg(long, default_value_t = 30_000)]
    pub settle_ms: u64,
    /// Robot telemetry output path (newline-delimited JSON).
    #[arg(long)]
    pub telemetry: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config file's model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Overrides the client socket address.
    #[arg(long)]
    pub listen: Option<std::net::SocketAddr>,
    /// Overrides the robot protocol address.
    #[arg(long)]
    pub robot_listen: Option<std::net::SocketAddr>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Dataset { path: PathBuf, source: DatasetError },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Serve(#[from] ServeError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }

    /// Output was cut short by the reader, as in `gestibot eval | head`.
    pub fn is_broken_pipe(&self) -> bool {
        matches!(self, CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::BrokenPipe)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One line to stdout; a closed pipe surfaces as an error instead of a panic.
fn say(line: std::fmt::Arguments) -> Result<(), CliError> {
    writeln!(std::io::stdout().lock(), "{line}").map_err(io_err(Path::new("stdout")))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Synth(a) => cmd_synth(&a),
        Cmd::Train(a) => cmd_train(&a),
        Cmd::Eval(a) => cmd_eval(&a),
        Cmd::Replay(a) => cmd_replay(&a),
        Cmd::Serve(a) => cmd_serve(a),
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    if a.dataset.is_none() && a.replay.is_none() {
        return Err(CliError::Usage("synth needs --dataset and/or --replay".into()));
    }
    let params = SynthParams {
        peak_accel: a.peak,
        rise_time_ms: a.rise_ms,
        noise_sigma: a.noise,
        activation_lag_ms: a.lag_ms,
        seed: a.seed,
        ..SynthParams::default()
    };
    if let Some(path) = &a.dataset {
        let windows = synth_windows(a.n_per_class, &params, TRAINING_STREAM)?;
        let mut w = create(path)?;
        write_dataset(&mut w, &windows)
            .and_then(|_| w.flush())
            .map_err(io_err(path))?;
        say(format_args!("wrote {} examples to {}", windows.len(), path.display()))?;
    }
    if let Some(path) = &a.replay {
        let class = a.class.expect("clap enforces --class");
        let sc = ScenarioConfig {
            edge_ms: a.edge_ms,
            hold_ms: a.hold_ms,
            tail_ms: a.tail_ms,
        };
        let scenario = synth_scenario(class, &params, &sc)?;
        let mut w = create(path)?;
        write_frames(&mut w, &scenario.samples)
            .and_then(|_| w.flush())
            .map_err(io_err(path))?;
        say(format_args!(
            "wrote {} frames of {} to {}",
            scenario.samples.len(),
            class,
            path.display()
        ))?;
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let file = File::open(&a.dataset).map_err(io_err(&a.dataset))?;
    let windows = read_dataset(BufReader::new(file)).map_err(|source| CliError::Dataset {
        path: a.dataset.clone(),
        source,
    })?;
    let data: Vec<_> = windows.iter().map(|w| w.to_example()).collect();
    let cfg = TrainingConfig {
        learning_rate: a.lr,
        cycles: a.cycles,
        seed: a.seed,
        momentum: a.momentum,
        ..TrainingConfig::default()
    };
    let (model, report) = mlp::train(&data, &cfg)?;
    std::fs::write(&a.model, model.to_bytes()).map_err(io_err(&a.model))?;
    say(format_args!(
        "trained on {} examples, {} presentations in {:.2?}",
        data.len(),
        report.cycles,
        report.duration
    ))?;
    say(format_args!("mse {:.6} -> {:.6}", report.initial_mse, report.final_mse))?;
    say(format_args!("training accuracy per class:"))?;
    for (c, acc) in GestureClass::ALL.iter().zip(report.per_class_accuracy) {
        match acc {
            Some(v) => say(format_args!("  {:<4} {:>6.1}%", c.display_name(), 100.0 * v))?,
            None => say(format_args!("  {:<4}      -", c.display_name()))?,
        }
    }
    say(format_args!("model written to {}", a.model.display()))?;
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let params = SynthParams {
        noise_sigma: a.noise,
        seed: a.seed,
        ..SynthParams::default()
    };
    let progress = |done: usize, total: usize| {
        if a.progress && (done.is_multiple_of(a.trials.max(1)) || done == total) {
            let msg = ServerMsg::EvalProgress(EvalProgressPayload { done, total });
            eprintln!("{}", msg.to_text());
        }
    };
    let report = evaluate_with_progress(&model, a.trials, &params, progress)?;
    if let Some(path) = &a.report {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(io_err(path))?;
    }
    say(format_args!(
        "{}\n{}",
        report.table(),
        report.confusion_table().trim_end()
    ))
}

fn cmd_replay(a: &ReplayArgs) -> Result<(), CliError> {
    if a.speed.is_nan() || a.speed <= 0.0 {
        return Err(CliError::Usage(format!("--speed must be positive, got {}", a.speed)));
    }
    let cfg = match &a.config {
        Some(p) => ServeConfig::load(p)?,
        None => ServeConfig::default(),
    };
    let model = load_model(&a.model)?;
    let file = File::open(&a.file).map_err(io_err(&a.file))?;
    let frames = read_frames(BufReader::new(file)).map_err(io_err(&a.file))?;
    if frames.malformed > 0 {
        log::warn!("skipped {} malformed frames", frames.malformed);
    }

    let mut replay = Replay::new(&cfg, &model);
    replay.settle_ms = a.settle_ms;
    let mut clock = clock_for_speed(a.speed);
    let out = replay.run(&frames.samples, clock.as_mut());

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for e in &out.events {
        writeln!(w, "{}", serde_json::to_string(e).expect("event serializes")).map_err(io_err(Path::new("stdout")))?;
    }
    let p = out.final_pose;
    writeln!(
        w,
        "final pose xyz=[{:.3}, {:.3}, {:.3}] rpy=[{:.3}, {:.3}, {:.3}] mode={:?} t={} dropped={} malformed={}",
        p.position.x,
        p.position.y,
        p.position.z,
        p.rotation[0],
        p.rotation[1],
        p.rotation[2],
        out.final_mode,
        out.end_t,
        out.dropped,
        frames.malformed
    )
    .map_err(io_err(Path::new("stdout")))?;
    for e in &out.robot_errors {
        log::warn!("robot error: {e}");
    }
    if let Some(path) = &a.telemetry {
        let mut tw = create(path)?;
        for t in &out.telemetry {
            writeln!(tw, "{}", serde_json::to_string(t).expect("telemetry serializes")).map_err(io_err(path))?;
        }
        tw.flush().map_err(io_err(path))?;
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => ServeConfig::load(p)?,
        None => ServeConfig::default(),
    };
    if let Some(m) = a.model {
        cfg.model = Some(m);
    }
    if let Some(l) = a.listen {
        cfg.listen = l;
    }
    if let Some(l) = a.robot_listen {
        cfg.robot_listen = l;
    }
    if cfg.model.is_none() {
        return Err(CliError::Usage(
            "serve needs a model (--model or model = ... in the config)".into(),
        ));
    }
    let rt = tokio::runtime::Runtime::new().map_err(io_err(Path::new("tokio runtime")))?;
    rt.block_on(async {
        let handle = serve::start(cfg).await?;
        say(format_args!("client socket ws://{}", handle.client_addr))?;
        say(format_args!("robot protocol tcp://{}", handle.robot_addr))?;
        let _ = tokio::signal::ctrl_c().await;
        log::info!("shutting down");
        handle.shutdown().await;
        Ok(())
    })
}
