//! Per-class recognition rates on freshly synthesised trials.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::gesture::{ClassKind, GestureClass, NUM_CLASSES};
use crate::mlp::GestureClassifier;
use crate::synth::{synth_windows_with, SynthError, SynthParams, EVAL_STREAM};

pub const REPORT_KIND: &str = "synthetic analog";

/// Column index of `Unknown` in a confusion row.
pub const UNKNOWN_COLUMN: usize = NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    pub class: GestureClass,
    pub trials: u32,
    pub correct: u32,
    /// Percent.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: String,
    pub eval_seed: u64,
    pub trials_per_class: u32,
    pub noise_sigma: f64,
    pub per_class: Vec<ClassRate>,
    /// Row = true class, column = predicted class in neuron order with
    /// `Unknown` last; every row sums to `trials_per_class`.
    pub confusion: Vec<Vec<u32>>,
    /// Unweighted mean of the twelve per-class rates, percent.
    pub mean_rate: f64,
}

impl EvalReport {
    pub fn from_confusion(confusion: Vec<Vec<u32>>, eval_seed: u64, noise_sigma: f64) -> Self {
        let per_class: Vec<ClassRate> = GestureClass::ALL
            .iter()
            .zip(&confusion)
            .enumerate()
            .map(|(i, (c, row))| {
                let trials: u32 = row.iter().sum();
                let correct = row[i];
                let rate = if trials == 0 {
                    0.0
                } else {
                    100.0 * correct as f64 / trials as f64
                };
                ClassRate {
                    class: *c,
                    trials,
                    correct,
                    rate,
                }
            })
            .collect();
        let mean_rate = per_class.iter().map(|r| r.rate).sum::<f64>() / NUM_CLASSES as f64;
        let trials_per_class = per_class.first().map_or(0, |r| r.trials);
        Self {
            kind: REPORT_KIND.to_string(),
            eval_seed,
            trials_per_class,
            noise_sigma,
            per_class,
            confusion,
            mean_rate,
        }
    }

    pub fn rate(&self, class: GestureClass) -> f64 {
        class.index().map_or(0.0, |i| self.per_class[i].rate)
    }

    /// Rates of every class of `kind`.
    pub fn rates_of(&self, kind: ClassKind) -> Vec<f64> {
        self.per_class
            .iter()
            .filter(|r| r.class.kind() == Some(kind))
            .map(|r| r.rate)
            .collect()
    }

    /// Table with one row per class, in the style of a recognition-rate table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Recognition rate (%) - {} ({} trials/class, noise {} g, eval seed {})",
            self.kind, self.trials_per_class, self.noise_sigma, self.eval_seed
        );
        let _ = writeln!(s, "{:<10} {:>8}", "Class", "Rate");
        for r in &self.per_class {
            let _ = writeln!(s, "{:<10} {:>8.1}", r.class.display_name(), r.rate);
        }
        let _ = writeln!(s, "{:<10} {:>8.1}", "Mean", self.mean_rate);
        s
    }

    pub fn confusion_table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<6}", "true\\");
        for c in GestureClass::ALL {
            let _ = write!(s, "{:>5}", c.display_name());
        }
        let _ = writeln!(s, "{:>5}", "?");
        for (c, row) in GestureClass::ALL.iter().zip(&self.confusion) {
            let _ = write!(s, "{:<6}", c.display_name());
            for v in row {
                let _ = write!(s, "{v:>5}");
            }
            let _ = writeln!(s);
        }
        s
    }
}

/// Classifies `trials` fresh windows per class drawn from the evaluation
/// stream of `params.seed`.
pub fn evaluate<C: GestureClassifier + ?Sized>(
    classifier: &C,
    trials: usize,
    params: &SynthParams,
) -> Result<EvalReport, SynthError> {
    evaluate_with_progress(classifier, trials, params, |_, _| {})
}

pub fn evaluate_with_progress<C: GestureClassifier + ?Sized>(
    classifier: &C,
    trials: usize,
    params: &SynthParams,
    progress: impl FnMut(usize, usize),
) -> Result<EvalReport, SynthError> {
    let windows = synth_windows_with(trials, params, EVAL_STREAM, progress)?;
    let mut confusion = vec![vec![0u32; NUM_CLASSES + 1]; NUM_CLASSES];
    for w in &windows {
        let truth = w.label.index().expect("trainable label");
        let predicted = classifier.classify(&w.features()).index().unwrap_or(UNKNOWN_COLUMN);
        confusion[truth][predicted] += 1;
    }
    Ok(EvalReport::from_confusion(confusion, params.seed, params.noise_sigma))
}
