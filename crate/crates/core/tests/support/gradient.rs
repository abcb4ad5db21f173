use gestibot_core::mlp::{MlpModel, TrainingExample};

pub fn nudged(m: &MlpModel, index: usize, delta: f64) -> MlpModel {
    let mut out = m.clone();
    let mut i = 0;
    out.for_each_param_mut(|p| {
        if i == index {
            *p += delta;
        }
        i += 1;
    });
    out
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Largest relative error between backprop and central differences over all
/// parameters, with the parameter index where it occurs.
pub fn max_gradient_error(m: &MlpModel, ex: &TrainingExample) -> (f64, usize) {
    let h = 1e-5;
    m.gradient(ex)
        .params()
        .enumerate()
        .map(|(j, analytic)| {
            let numeric = (nudged(m, j, h).example_error(ex) - nudged(m, j, -h).example_error(ex)) / (2.0 * h);
            (rel_err(analytic, numeric), j)
        })
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
}
