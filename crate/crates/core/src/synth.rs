//! Seeded generator of labelled accelerometer traces.
//!
//! All readings are in g with gravity on the world Z axis. Translations follow
//! one period of `peak·sin(π·t / (2·rise))`: the arm accelerates, crosses zero
//! acceleration at maximum speed after `2·rise`, then brakes. Only the rising
//! quarter is ever seen by the classifier, since the capture window is three
//! samples long. Rx±/Ry± postures tilt the gravity vector; Rz± twists leave
//! gravity alone and show up as a diagonal signature in the horizontal plane.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gesture::{ClassKind, GestureClass};
use crate::mlp::{FeatureVector, TrainingExample};
use crate::sensor::{AccelSample, Arm};
use crate::session::{first_window, left_posture, LeftPosture, SessionConfig, SAMPLE_PERIOD_MS, WINDOW_LEN};

pub const PEAK_RANGE: (f64, f64) = (0.5, 1.5);
pub const RISE_RANGE: (f64, f64) = (200.0, 400.0);
/// Delay from gesture onset to the activation edge.
pub const LAG_RANGE: (f64, f64) = (140.0, 180.0);
pub const GRAVITY: f64 = 1.0;
/// Duration of a posture change (right-arm tilt or left-arm start/stop).
pub const TRANSITION_MS: f64 = 100.0;
/// How long a standalone posture trace holds after its transition.
pub const POSTURE_HOLD_MS: f64 = 300.0;
/// Twist amplitude relative to the translation peak.
pub const TWIST_GAIN: f64 = 0.6;

const REST: [f64; 3] = [0.0, 0.0, GRAVITY];
const LEFT_START: [f64; 3] = [-GRAVITY, 0.0, 0.0];

/// Random streams used for independent purposes under one seed.
pub const TRAINING_STREAM: u64 = 1;
pub const EVAL_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("{0} is not valid for this generator")]
    WrongClass(GestureClass),
    #[error("left-arm traces are generated for START or STOP only")]
    WrongPosture,
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub peak_accel: f64,
    pub rise_time_ms: f64,
    pub noise_sigma: f64,
    pub activation_lag_ms: f64,
    /// START readings the consuming session needs before it activates.
    pub start_hold: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            peak_accel: 1.0,
            rise_time_ms: 300.0,
            noise_sigma: 0.05,
            activation_lag_ms: 160.0,
            start_hold: SessionConfig::default().start_hold,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn noiseless() -> Self {
        Self {
            noise_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidParams(m));
        if !(self.peak_accel > 0.0 && self.peak_accel.is_finite()) {
            return bad(format!("peak_accel must be positive, got {}", self.peak_accel));
        }
        if !(self.rise_time_ms > 0.0 && self.rise_time_ms.is_finite()) {
            return bad(format!("rise_time_ms must be positive, got {}", self.rise_time_ms));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        if !(self.activation_lag_ms >= 0.0 && self.activation_lag_ms.is_finite()) {
            return bad(format!(
                "activation_lag_ms must be non-negative, got {}",
                self.activation_lag_ms
            ));
        }
        if self.start_hold == 0 {
            return bad("start_hold must be at least 1".into());
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceLabel {
    Gesture(GestureClass),
    Left(LeftPosture),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub label: TraceLabel,
    pub samples: Vec<AccelSample>,
}

/// Raw three-sample window in g with its label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledWindow {
    pub label: GestureClass,
    pub samples: [[f64; 3]; WINDOW_LEN],
}

impl LabeledWindow {
    pub fn features(&self) -> FeatureVector {
        FeatureVector::from_raw(self.samples)
    }

    pub fn to_example(&self) -> TrainingExample {
        TrainingExample {
            input: self.features(),
            label: self.label,
        }
    }
}

struct Noise {
    dist: Option<Normal<f64>>,
}

impl Noise {
    fn new(sigma: f64) -> Self {
        Self {
            dist: (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("validated sigma")),
        }
    }

    fn apply<R: Rng>(&self, rng: &mut R, a: [f64; 3]) -> [f64; 3] {
        match &self.dist {
            Some(d) => a.map(|v| v + d.sample(rng)),
            None => a,
        }
    }
}

/// One period of the translation acceleration profile; zero outside it.
pub fn translation_profile(t_ms: f64, peak: f64, rise_ms: f64) -> f64 {
    if (0.0..=4.0 * rise_ms).contains(&t_ms) {
        peak * (PI * t_ms / (2.0 * rise_ms)).sin()
    } else {
        0.0
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Spherical interpolation between unit vectors.
fn slerp(a: [f64; 3], b: [f64; 3], u: f64) -> [f64; 3] {
    let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    let theta = dot.acos();
    if theta < 1e-12 {
        return a;
    }
    let s = theta.sin();
    let wa = ((1.0 - u) * theta).sin() / s;
    let wb = (u * theta).sin() / s;
    std::array::from_fn(|i| wa * a[i] + wb * b[i])
}

fn tilt(from: [f64; 3], to: [f64; 3], t_ms: f64) -> [f64; 3] {
    if t_ms <= 0.0 {
        from
    } else {
        slerp(from, to, smoothstep(t_ms / TRANSITION_MS))
    }
}

/// Resting gravity reading of a right-arm posture class.
pub fn posture_vector(class: GestureClass) -> Option<[f64; 3]> {
    match class {
        GestureClass::Ryn => Some([-GRAVITY, 0.0, 0.0]),
        GestureClass::Ryp => Some([GRAVITY, 0.0, 0.0]),
        GestureClass::Rxn => Some([0.0, -GRAVITY, 0.0]),
        GestureClass::Rxp => Some([0.0, GRAVITY, 0.0]),
        _ => None,
    }
}

pub fn left_vector(p: LeftPosture) -> Option<[f64; 3]> {
    match p {
        LeftPosture::Stop => Some(REST),
        LeftPosture::Start => Some(LEFT_START),
        LeftPosture::Indeterminate => None,
    }
}

/// Noise-free right-arm reading `t_ms` after gesture onset.
pub fn right_signal(class: GestureClass, p: &SynthParams, t_ms: f64) -> [f64; 3] {
    let Some(kind) = class.kind() else {
        return REST;
    };
    let (axis, sign) = class.axis_sign().expect("trainable class");
    match kind {
        ClassKind::Translation => {
            let mut a = REST;
            a[axis.index()] += sign.factor() * translation_profile(t_ms, p.peak_accel, p.rise_time_ms);
            a
        }
        ClassKind::Posture => tilt(REST, posture_vector(class).expect("posture"), t_ms),
        ClassKind::Twist => {
            let amp = TWIST_GAIN * translation_profile(t_ms, p.peak_accel, p.rise_time_ms);
            let s = sign.factor();
            [-s * amp, s * amp, GRAVITY]
        }
    }
}

fn trace_over<F: Fn(f64) -> [f64; 3]>(
    label: TraceLabel,
    arm: Arm,
    end_ms: f64,
    p: &SynthParams,
    signal: F,
) -> LabeledTrace {
    let mut rng = p.rng();
    let noise = Noise::new(p.noise_sigma);
    let n = (end_ms / SAMPLE_PERIOD_MS as f64).ceil() as u64;
    let samples = (0..=n)
        .map(|k| {
            let t = k * SAMPLE_PERIOD_MS;
            let [ax, ay, az] = noise.apply(&mut rng, signal(t as f64));
            AccelSample::new(t, arm, ax, ay, az)
        })
        .collect();
    LabeledTrace { label, samples }
}

/// Right-arm X±/Y±/Z± trace over the full accelerate-brake period.
pub fn synth_translation(class: GestureClass, p: &SynthParams) -> Result<LabeledTrace, SynthError> {
    p.validate()?;
    if class.kind() != Some(ClassKind::Translation) {
        return Err(SynthError::WrongClass(class));
    }
    Ok(trace_over(
        TraceLabel::Gesture(class),
        Arm::Right,
        4.0 * p.rise_time_ms,
        p,
        |t| right_signal(class, p, t),
    ))
}

/// Right-arm Rx±/Ry± trace: a smooth tilt from horizontal, then a hold.
pub fn synth_rotation(class: GestureClass, p: &SynthParams) -> Result<LabeledTrace, SynthError> {
    p.validate()?;
    if class.kind() != Some(ClassKind::Posture) {
        return Err(SynthError::WrongClass(class));
    }
    Ok(trace_over(
        TraceLabel::Gesture(class),
        Arm::Right,
        TRANSITION_MS + POSTURE_HOLD_MS,
        p,
        |t| right_signal(class, p, t),
    ))
}

/// Right-arm Rz± trace: gravity stays on Z, the twist shows in X–Y.
pub fn synth_rz(class: GestureClass, p: &SynthParams) -> Result<LabeledTrace, SynthError> {
    p.validate()?;
    if class.kind() != Some(ClassKind::Twist) {
        return Err(SynthError::WrongClass(class));
    }
    Ok(trace_over(
        TraceLabel::Gesture(class),
        Arm::Right,
        4.0 * p.rise_time_ms,
        p,
        |t| right_signal(class, p, t),
    ))
}

/// Any right-arm class.
pub fn synth_gesture(class: GestureClass, p: &SynthParams) -> Result<LabeledTrace, SynthError> {
    match class.kind() {
        Some(ClassKind::Translation) => synth_translation(class, p),
        Some(ClassKind::Posture) => synth_rotation(class, p),
        Some(ClassKind::Twist) => synth_rz(class, p),
        None => Err(SynthError::WrongClass(class)),
    }
}

/// Left-arm trace moving into `posture` from the opposite one, then holding.
pub fn synth_left(posture: LeftPosture, p: &SynthParams) -> Result<LabeledTrace, SynthError> {
    p.validate()?;
    let (from, to) = match posture {
        LeftPosture::Start => (REST, LEFT_START),
        LeftPosture::Stop => (LEFT_START, REST),
        LeftPosture::Indeterminate => return Err(SynthError::WrongPosture),
    };
    Ok(trace_over(
        TraceLabel::Left(posture),
        Arm::Left,
        TRANSITION_MS + POSTURE_HOLD_MS,
        p,
        |t| tilt(from, to, t),
    ))
}

/// Milliseconds from the start of a STOP→START tilt to the first noise-free
/// sample that reads as START.
pub fn start_detect_offset_ms() -> u64 {
    (0..)
        .map(|k| k * SAMPLE_PERIOD_MS)
        .find(|&t| left_posture(tilt(REST, LEFT_START, t as f64)) == LeftPosture::Start)
        .expect("tilt ends in START")
}

/// Timing of a two-arm scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Time (ms) of the intended activation edge.
    pub edge_ms: u64,
    /// How long the left arm keeps START after the edge.
    pub hold_ms: u64,
    /// Rest (left STOP) after the closing STOP tilt.
    pub tail_ms: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            edge_ms: 400,
            hold_ms: 6000,
            tail_ms: 100,
        }
    }
}

impl ScenarioConfig {
    /// Just long enough to capture the window.
    pub fn window_only() -> Self {
        Self {
            edge_ms: 300,
            hold_ms: 40,
            tail_ms: 0,
        }
    }
}

/// Interleaved two-arm frames: the left arm rests in STOP, tilts to START so
/// that activation lands `activation_lag_ms` after the right-arm gesture
/// began, holds, and returns to STOP. The right arm streams throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: GestureClass,
    pub onset_ms: f64,
    pub samples: Vec<AccelSample>,
}

pub fn synth_scenario(class: GestureClass, p: &SynthParams, sc: &ScenarioConfig) -> Result<Scenario, SynthError> {
    p.validate()?;
    if class == GestureClass::Unknown {
        return Err(SynthError::WrongClass(class));
    }
    let edge = sc.edge_ms as f64;
    let onset = edge - p.activation_lag_ms;
    let detect = start_detect_offset_ms() + (p.start_hold as u64 - 1) * SAMPLE_PERIOD_MS;
    let left_tilt = edge - detect as f64;
    let release = edge + sc.hold_ms as f64;
    let end = sc.edge_ms + sc.hold_ms + TRANSITION_MS as u64 + sc.tail_ms;

    let mut rng = p.rng();
    let noise = Noise::new(p.noise_sigma);
    let mut samples = Vec::with_capacity(2 * (end / SAMPLE_PERIOD_MS + 1) as usize);
    for t in (0..=end).step_by(SAMPLE_PERIOD_MS as usize) {
        let tf = t as f64;
        let left = if tf < release {
            tilt(REST, LEFT_START, tf - left_tilt)
        } else {
            tilt(LEFT_START, REST, tf - release)
        };
        let [lx, ly, lz] = noise.apply(&mut rng, left);
        samples.push(AccelSample::new(t, Arm::Left, lx, ly, lz));
        let [rx, ry, rz] = noise.apply(&mut rng, right_signal(class, p, tf - onset));
        samples.push(AccelSample::new(t, Arm::Right, rx, ry, rz));
    }
    Ok(Scenario {
        label: class,
        onset_ms: onset,
        samples,
    })
}

fn jittered(rng: &mut ChaCha8Rng, base: &SynthParams) -> SynthParams {
    SynthParams {
        peak_accel: rng.random_range(PEAK_RANGE.0..=PEAK_RANGE.1),
        rise_time_ms: rng.random_range(RISE_RANGE.0..=RISE_RANGE.1),
        activation_lag_ms: rng.random_range(LAG_RANGE.0..=LAG_RANGE.1),
        seed: rng.next_u64(),
        ..*base
    }
}

/// `n_per_class` windows per class from independently jittered scenarios,
/// extracted exactly as a live session would. `stream` separates training
/// draws from evaluation draws under the same seed.
pub fn synth_windows(n_per_class: usize, p: &SynthParams, stream: u64) -> Result<Vec<LabeledWindow>, SynthError> {
    synth_windows_with(n_per_class, p, stream, |_, _| {})
}

/// Like [`synth_windows`], reporting `(done, total)` after each window.
pub fn synth_windows_with(
    n_per_class: usize,
    p: &SynthParams,
    stream: u64,
    mut progress: impl FnMut(usize, usize),
) -> Result<Vec<LabeledWindow>, SynthError> {
    p.validate()?;
    if n_per_class == 0 {
        return Err(SynthError::InvalidParams("n_per_class must be at least 1".into()));
    }
    let mut rng = p.rng();
    rng.set_stream(stream);
    let session_cfg = SessionConfig {
        start_hold: p.start_hold,
    };
    let total = n_per_class * GestureClass::ALL.len();
    let mut out = Vec::with_capacity(total);
    for class in GestureClass::ALL {
        for _ in 0..n_per_class {
            out.push(LabeledWindow {
                label: class,
                samples: draw_window(class, p, &mut rng, session_cfg),
            });
            progress(out.len(), total);
        }
    }
    Ok(out)
}

fn draw_window(
    class: GestureClass,
    base: &SynthParams,
    rng: &mut ChaCha8Rng,
    cfg: SessionConfig,
) -> [[f64; 3]; WINDOW_LEN] {
    const ATTEMPTS: usize = 16;
    let sc = ScenarioConfig::window_only();
    let mut last = None;
    for _ in 0..ATTEMPTS {
        let params = jittered(rng, base);
        let scenario = synth_scenario(class, &params, &sc).expect("validated params");
        if let Some(w) = first_window(&scenario.samples, cfg) {
            return w.map(|s| s.accel());
        }
        last = Some((params, scenario));
    }
    // Extreme noise can keep the left arm from ever reading START; fall back
    // to the samples at the intended activation time.
    let (params, scenario) = last.expect("at least one attempt");
    let first = sc.edge_ms;
    log::warn!(
        "no activation in {ATTEMPTS} attempts for {class} (seed {})",
        params.seed
    );
    let right: Vec<&AccelSample> = scenario
        .samples
        .iter()
        .filter(|s| s.arm == Arm::Right && s.t >= first)
        .take(WINDOW_LEN)
        .collect();
    std::array::from_fn(|i| right[i].accel())
}

/// Training examples: see [`synth_windows`].
pub fn synth_dataset(n_per_class: usize, p: &SynthParams) -> Result<Vec<TrainingExample>, SynthError> {
    Ok(synth_windows(n_per_class, p, TRAINING_STREAM)?
        .iter()
        .map(LabeledWindow::to_example)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::classify_left;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn translation_closed_form() {
        let p = SynthParams::noiseless();
        let xp = synth_translation(GestureClass::Xp, &p).unwrap();
        let s = xp.samples[1];
        assert_eq!(s.t, 10);
        assert!(close(s.ax, (PI / 60.0).sin()));
        assert!((s.ax - 0.05234).abs() < 1e-5);
        assert_eq!((s.ay, s.az), (0.0, 1.0));

        let zn = synth_translation(GestureClass::Zn, &p).unwrap();
        let s = zn.samples.iter().find(|s| s.t == 150).unwrap();
        assert!(close(s.az, 1.0 - (PI / 4.0).sin()));
        assert!((s.az - 0.29289).abs() < 1e-5);

        for c in GestureClass::ALL {
            let tr = synth_gesture(c, &p).unwrap();
            assert_eq!(tr.samples[0].accel(), [0.0, 0.0, 1.0], "{c}");
        }
    }

    #[test]
    fn spacing_is_ten_ms() {
        let p = SynthParams::default();
        for c in GestureClass::ALL {
            let tr = synth_gesture(c, &p).unwrap();
            for pair in tr.samples.windows(2) {
                assert_eq!(pair[1].t - pair[0].t, 10);
            }
        }
    }

    #[test]
    fn wrong_class_rejected() {
        let p = SynthParams::default();
        assert!(synth_translation(GestureClass::Rxp, &p).is_err());
        assert!(synth_rotation(GestureClass::Xp, &p).is_err());
        assert!(synth_rz(GestureClass::Ryp, &p).is_err());
        assert!(synth_gesture(GestureClass::Unknown, &p).is_err());
        assert!(synth_left(LeftPosture::Indeterminate, &p).is_err());
        let bad = SynthParams { noise_sigma: -1.0, ..p };
        assert!(synth_translation(GestureClass::Xp, &bad).is_err());
    }

    #[test]
    fn rotation_postures() {
        let p = SynthParams::noiseless();
        let last = |c| *synth_rotation(c, &p).unwrap().samples.last().unwrap();
        let near = |a: [f64; 3], b: [f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(near(last(GestureClass::Ryn).accel(), [-1.0, 0.0, 0.0]));
        assert!(near(last(GestureClass::Ryp).accel(), [1.0, 0.0, 0.0]));
        assert!(near(last(GestureClass::Rxp).accel(), [0.0, 1.0, 0.0]));
        assert!(near(last(GestureClass::Rxn).accel(), [0.0, -1.0, 0.0]));
        // Transition done after 100 ms; gravity magnitude preserved throughout.
        let tr = synth_rotation(GestureClass::Ryn, &p).unwrap();
        let at100 = tr.samples.iter().find(|s| s.t == 100).unwrap();
        assert!(near(at100.accel(), [-1.0, 0.0, 0.0]));
        for s in &tr.samples {
            let n = (s.ax * s.ax + s.ay * s.ay + s.az * s.az).sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn twist_signature() {
        let p = SynthParams::noiseless();
        let rzp = synth_rz(GestureClass::Rzp, &p).unwrap();
        let rzn = synth_rz(GestureClass::Rzn, &p).unwrap();
        let at = |tr: &LabeledTrace, t| *tr.samples.iter().find(|s| s.t == t).unwrap();
        let peak = at(&rzp, 300);
        assert!(close(peak.ax, -0.6) && close(peak.ay, 0.6) && peak.az == 1.0);
        for (a, b) in rzp.samples.iter().zip(&rzn.samples) {
            assert_eq!(a.ax, -b.ax);
            assert_eq!(a.ay, -b.ay);
        }
        let mean_az = rzp.samples.iter().map(|s| s.az).sum::<f64>() / rzp.samples.len() as f64;
        assert!((mean_az - 1.0).abs() <= 0.02);
    }

    #[test]
    fn left_traces_read_as_their_posture() {
        for sigma in [0.0, 0.05, 0.1] {
            for posture in [LeftPosture::Start, LeftPosture::Stop] {
                let mut hits = 0;
                let mut total = 0;
                for seed in 0..50 {
                    let p = SynthParams {
                        noise_sigma: sigma,
                        seed,
                        ..SynthParams::default()
                    };
                    let tr = synth_left(posture, &p).unwrap();
                    for s in tr.samples.iter().filter(|s| s.t as f64 >= TRANSITION_MS) {
                        total += 1;
                        if classify_left(s).unwrap() == posture {
                            hits += 1;
                        }
                    }
                }
                let rate = hits as f64 / total as f64;
                assert!(rate >= 0.99, "{posture:?} at sigma {sigma}: {rate}");
            }
        }
    }

    #[test]
    fn scenario_activates_at_the_intended_lag() {
        let p = SynthParams::noiseless();
        let sc = ScenarioConfig::default();
        let scen = synth_scenario(GestureClass::Xp, &p, &sc).unwrap();
        let w = first_window(&scen.samples, SessionConfig::default()).unwrap();
        assert_eq!(w[0].t, sc.edge_ms);
        let expect = right_signal(GestureClass::Xp, &p, p.activation_lag_ms);
        assert_eq!(w[0].accel(), expect);
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let p = SynthParams {
            seed: 7,
            ..Default::default()
        };
        let a = synth_dataset(30, &p).unwrap();
        let b = synth_dataset(30, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 360);
        for c in GestureClass::ALL {
            assert_eq!(a.iter().filter(|e| e.label == c).count(), 30);
        }
        let other = synth_dataset(30, &SynthParams { seed: 8, ..p }).unwrap();
        assert_ne!(a, other);
        let eval = synth_windows(30, &p, EVAL_STREAM).unwrap();
        assert_ne!(a[0].input, eval[0].to_example().input);
        assert!(synth_dataset(0, &p).is_err());
    }
}
