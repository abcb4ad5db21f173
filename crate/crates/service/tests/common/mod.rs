#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use gestibot_core::mlp::{self, MlpModel, TrainingConfig};
use gestibot_core::synth::{synth_dataset, synth_windows, SynthParams, EVAL_STREAM};
use gestibot_core::{AccelSample, GestureClass};

/// Default-configured model trained on the default dataset.
pub fn model() -> &'static MlpModel {
    static MODEL: OnceLock<MlpModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let data = synth_dataset(30, &SynthParams::default()).unwrap();
        mlp::train(&data, &TrainingConfig::default()).unwrap().0
    })
}

pub fn write_model(dir: &Path) -> PathBuf {
    let path = dir.join("model.gmlp");
    std::fs::write(&path, model().to_bytes()).unwrap();
    path
}

/// Three right-arm samples of `class` as a capture window would see them.
pub fn window(class: GestureClass, seed: u64) -> [[f64; 3]; 3] {
    let p = SynthParams {
        seed,
        ..SynthParams::default()
    };
    synth_windows(1, &p, EVAL_STREAM)
        .unwrap()
        .into_iter()
        .find(|w| w.label == class)
        .unwrap()
        .samples
}

/// Left START readings then the window, timestamps from `t0` in 10 ms steps.
pub fn activation_burst(t0: u64, start_hold: usize, class: GestureClass, seed: u64) -> Vec<AccelSample> {
    let mut t = t0;
    let mut out = Vec::new();
    for _ in 0..start_hold {
        out.push(AccelSample::left(t, [-1.0, 0.0, 0.0]));
        t += 10;
    }
    for s in window(class, seed) {
        out.push(AccelSample::right(t, s));
        out.push(AccelSample::left(t, [-1.0, 0.0, 0.0]));
        t += 10;
    }
    out
}
