use std::time::Instant;

use ndarray::{Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, LabelCodec, LabeledData, Layer, MlpModel, Standardizer, HIDDEN_LAYERS};

/// Minimum samples per class accepted by [`train_mlp`].
pub const MIN_SAMPLES_PER_CLASS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub l2_alpha: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    /// Multiplier on the output layer's initial weights.
    pub head_init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: HIDDEN_LAYERS.to_vec(),
            l2_alpha: 0.01,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 64,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.1,
            head_init_scale: 0.1,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let positive = self.l2_alpha >= 0.0
            && self.learning_rate > 0.0
            && self.adam_epsilon > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0
            && self.head_init_scale > 0.0
            && !self.hidden.contains(&0);
        let betas = (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2);
        let frac = self.validation_fraction > 0.0 && self.validation_fraction < 1.0;
        if positive && betas && frac {
            Ok(())
        } else {
            Err(ClassifierError::Config(format!("invalid training config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Mean training objective (cross-entropy plus penalty) in the last epoch.
    pub final_train_loss: f64,
    /// Lowest validation cross-entropy seen; the returned weights are from that epoch.
    pub best_validation_loss: f64,
    /// Validation cross-entropy of the freshly initialized network.
    pub initial_validation_loss: f64,
    pub wall_clock_seconds: f64,
    pub seed: u64,
    pub history: Vec<EpochStats>,
}

/// Trains the classifier with mini-batch Adam and early stopping.
///
/// Features are standardized with statistics from all of `data`; a stratified
/// validation slice is then held out for early stopping.
pub fn train_mlp(data: &LabeledData, cfg: &TrainConfig) -> Result<(MlpModel, TrainReport), ClassifierError> {
    cfg.validate()?;
    let started = Instant::now();
    let codec = check_classes(data)?;
    let y: Vec<usize> = data
        .labels
        .iter()
        .map(|l| codec.encode(l).expect("codec built from these labels"))
        .collect();

    let standardizer = Standardizer::fit(&data.features)?;
    let x = standardizer.transform(&data.features);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_idx, val_idx) = stratified_holdout(&y, codec.len(), cfg.validation_fraction, &mut rng);
    fit(x, &y, &train_idx, &val_idx, codec, standardizer, cfg, rng, started)
}

/// Trains with an explicit validation set instead of an internal holdout.
///
/// The standardizer is fit on `train` only; `cfg.validation_fraction` is ignored.
pub fn train_mlp_with_validation(
    train: &LabeledData,
    validation: &LabeledData,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainReport), ClassifierError> {
    cfg.validate()?;
    let started = Instant::now();
    let codec = check_classes(train)?;
    if validation.is_empty() {
        return Err(ClassifierError::InsufficientData("validation set is empty".into()));
    }
    if validation.features.ncols() != train.features.ncols() {
        return Err(ClassifierError::Integrity(format!(
            "validation has {} features, training has {}",
            validation.features.ncols(),
            train.features.ncols()
        )));
    }
    let mut y = Vec::with_capacity(train.len() + validation.len());
    for l in train.labels.iter().chain(&validation.labels) {
        y.push(codec.encode(l).ok_or_else(|| {
            ClassifierError::Training(format!("validation label `{l}` never occurs in training data"))
        })?);
    }
    let standardizer = Standardizer::fit(&train.features)?;
    let all = ndarray::concatenate(Axis(0), &[train.features.view(), validation.features.view()])
        .map_err(|e| ClassifierError::Integrity(e.to_string()))?;
    let x = standardizer.transform(&all);
    let train_idx: Vec<usize> = (0..train.len()).collect();
    let val_idx: Vec<usize> = (train.len()..y.len()).collect();
    let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    fit(x, &y, &train_idx, &val_idx, codec, standardizer, cfg, rng, started)
}

fn check_classes(data: &LabeledData) -> Result<LabelCodec, ClassifierError> {
    let codec = LabelCodec::from_labels(&data.labels)?;
    if codec.len() < 2 {
        return Err(ClassifierError::Training(format!(
            "need at least 2 classes, found {}",
            codec.len()
        )));
    }
    let mut counts = vec![0usize; codec.len()];
    for l in &data.labels {
        counts[codec.encode(l).expect("codec built from these labels")] += 1;
    }
    if let Some((c, n)) = counts.iter().enumerate().find(|(_, &n)| n < MIN_SAMPLES_PER_CLASS) {
        return Err(ClassifierError::InsufficientData(format!(
            "class `{}` has {n} samples, need at least {MIN_SAMPLES_PER_CLASS}",
            codec.labels()[c]
        )));
    }
    Ok(codec)
}

#[allow(clippy::too_many_arguments)]
fn fit(
    x: Array2<f64>,
    y: &[usize],
    train_idx: &[usize],
    val_idx: &[usize],
    codec: LabelCodec,
    standardizer: Standardizer,
    cfg: &TrainConfig,
    mut rng: ChaCha8Rng,
    started: Instant,
) -> Result<(MlpModel, TrainReport), ClassifierError> {
    let x_val = x.select(Axis(0), val_idx);
    let y_val: Vec<usize> = val_idx.iter().map(|&i| y[i]).collect();

    let mut dims = vec![x.ncols()];
    dims.extend(&cfg.hidden);
    dims.push(codec.len());
    let mut model = MlpModel::initialize(&dims, codec, standardizer, cfg.l2_alpha, cfg.head_init_scale, &mut rng)?;
    let initial_validation_loss = model.loss(x_val.view(), &y_val).cross_entropy;

    let mut adam = Adam::new(&model, cfg);
    let mut best = model.layers.clone();
    let mut best_loss = initial_validation_loss;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut history = Vec::new();
    let mut order = train_idx.to_vec();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (loss, grads) = model.loss_and_gradients(xb.view(), &yb);
            if !loss.total().is_finite() {
                return Err(ClassifierError::Divergence {
                    epoch,
                    batch: b,
                    cross_entropy: loss.cross_entropy,
                    penalty: loss.penalty,
                });
            }
            weighted += loss.total() * chunk.len() as f64;
            adam.step(&mut model, &grads);
        }
        let train_loss = weighted / order.len() as f64;
        let validation_loss = model.loss(x_val.view(), &y_val).cross_entropy;
        if !validation_loss.is_finite() || !model.is_finite() {
            return Err(ClassifierError::Divergence {
                epoch,
                batch: usize::MAX,
                cross_entropy: validation_loss,
                penalty: model.l2_alpha * model.weight_norm_sq(),
            });
        }
        history.push(EpochStats {
            train_loss,
            validation_loss,
        });
        tracing::debug!(epoch, train_loss, validation_loss, "epoch finished");
        if validation_loss < best_loss {
            best_loss = validation_loss;
            best = model.layers.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    model.layers = best;

    let report = TrainReport {
        epochs_run: history.len(),
        best_epoch,
        final_train_loss: history.last().map(|h| h.train_loss).unwrap_or(f64::NAN),
        best_validation_loss: best_loss,
        initial_validation_loss,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
        history,
    };
    Ok((model, report))
}

/// Holds out `round(frac * n_c)` rows of every class (at least one, never all).
fn stratified_holdout(
    y: &[usize],
    classes: usize,
    frac: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::with_capacity(y.len());
    let mut val = Vec::new();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        members.shuffle(rng);
        let take = ((members.len() as f64 * frac).round() as usize).clamp(1, members.len() - 1);
        val.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl Adam {
    fn new(model: &MlpModel, cfg: &TrainConfig) -> Self {
        let zeros: Vec<Layer> = model
            .layers
            .iter()
            .map(|l| Layer::zeros(l.fan_in(), l.fan_out()))
            .collect();
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_epsilon,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &super::Gradients) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let step = self.lr * (1.0 - b2.powi(self.t)).sqrt() / (1.0 - b1.powi(self.t));
        let eps = self.eps * (1.0 - b2.powi(self.t)).sqrt();
        for (((p, g), m), v) in model
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            update(&mut p.w, &g.w, &mut m.w, &mut v.w, b1, b2, step, eps);
            update(&mut p.b, &g.b, &mut m.b, &mut v.b, b1, b2, step, eps);
        }
    }
}

// Bias-corrected Adam written in the folded form: eps is rescaled so the
// update equals lr * m_hat / (sqrt(v_hat) + eps).
#[allow(clippy::too_many_arguments)]
fn update<D: ndarray::Dimension>(
    p: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    b1: f64,
    b2: f64,
    step: f64,
    eps: f64,
) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= step * *m / (v.sqrt() + eps);
    });
}

/// Fraction of rows whose argmax class matches the label.
pub fn accuracy(model: &MlpModel, data: &LabeledData) -> f64 {
    if data.labels.is_empty() {
        return 0.0;
    }
    let x = model.standardizer.transform(&data.features);
    let p: Array2<f64> = model.probabilities(x.view());
    let correct = p
        .rows()
        .into_iter()
        .zip(&data.labels)
        .filter(|(row, label)| {
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0;
            model.codec.decode(best) == Some(*label)
        })
        .count();
    correct as f64 / data.labels.len() as f64
}
