//! Finite-difference check of the backward pass.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, LabeledData, MlpModel};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Minimum number of coordinates compared per check.
pub const MIN_COORDINATES: usize = 200;

/// Gradient magnitude below which relative error is measured against this floor instead.
const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckReport {
    pub max_relative_error: f64,
    pub coordinates: usize,
    /// `(layer, is_bias, flat index)` of the worst coordinate.
    pub worst: Option<(usize, bool, usize)>,
}

/// Checks [`MlpModel::loss_and_gradients`] against central differences.
pub fn gradient_check(model: &MlpModel, batch: &LabeledData, seed: u64) -> GradientCheckReport {
    gradient_check_with(model, batch, MIN_COORDINATES, seed, |m, x, y| {
        m.loss_and_gradients(x, y).1
    })
}

/// Same as [`gradient_check`] with a caller-supplied analytic gradient.
///
/// Samples `coordinates` parameters without replacement (all of them when
/// the model is smaller) and returns the maximum of
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`.
pub fn gradient_check_with<F>(
    model: &MlpModel,
    batch: &LabeledData,
    coordinates: usize,
    seed: u64,
    analytic: F,
) -> GradientCheckReport
where
    F: Fn(&MlpModel, ArrayView2<f64>, &[usize]) -> Gradients,
{
    let x = model.standardizer.transform(&batch.features);
    let y: Vec<usize> = batch
        .labels
        .iter()
        .map(|l| model.codec.encode(l).expect("batch labels are in the model codec"))
        .collect();
    let grads = analytic(model, x.view(), &y);

    let total = model.param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, total, coordinates.min(total));

    let mut probe = model.clone();
    let mut report = GradientCheckReport {
        max_relative_error: 0.0,
        coordinates: picks.len(),
        worst: None,
    };
    for flat in picks.iter() {
        let (layer, is_bias, idx) = locate(model, flat);
        let a = read(&grads.layers[layer], is_bias, idx);
        let original = read(&probe.layers[layer], is_bias, idx);

        write(&mut probe.layers[layer], is_bias, idx, original + FD_STEP);
        let plus = probe.loss(x.view(), &y).total();
        write(&mut probe.layers[layer], is_bias, idx, original - FD_STEP);
        let minus = probe.loss(x.view(), &y).total();
        write(&mut probe.layers[layer], is_bias, idx, original);

        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        if rel > report.max_relative_error || rel.is_nan() {
            report.max_relative_error = rel;
            report.worst = Some((layer, is_bias, idx));
        }
    }
    report
}

fn locate(model: &MlpModel, mut flat: usize) -> (usize, bool, usize) {
    for (i, layer) in model.layers.iter().enumerate() {
        if flat < layer.w.len() {
            return (i, false, flat);
        }
        flat -= layer.w.len();
        if flat < layer.b.len() {
            return (i, true, flat);
        }
        flat -= layer.b.len();
    }
    unreachable!("index within param_count")
}

fn read(layer: &super::Layer, is_bias: bool, idx: usize) -> f64 {
    if is_bias {
        layer.b[idx]
    } else {
        let cols = layer.w.ncols();
        layer.w[[idx / cols, idx % cols]]
    }
}

fn write(layer: &mut super::Layer, is_bias: bool, idx: usize, v: f64) {
    if is_bias {
        layer.b[idx] = v;
    } else {
        let cols = layer.w.ncols();
        layer.w[[idx / cols, idx % cols]] = v;
    }
}
