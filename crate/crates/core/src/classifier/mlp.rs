use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::domain::{ProbVector, TemplateId};
use crate::embedding::EmbeddingVector;

use super::{ClassifierError, LabelCodec, Standardizer};

/// Hidden layer widths of the production classifier.
pub const HIDDEN_LAYERS: [usize; 3] = [512, 256, 128];

/// One affine layer; `w` is `fan_in x fan_out` so that `out = x.dot(w) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Feed-forward classifier: ReLU hidden layers and a softmax head.
///
/// The model owns its standardizer and label codec, so raw embeddings go in
/// and canonical template probabilities come out.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub l2_alpha: f64,
    pub codec: LabelCodec,
    pub standardizer: Standardizer,
}

/// Split loss: mean cross-entropy plus the L2 penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub cross_entropy: f64,
    pub penalty: f64,
}

impl Loss {
    pub fn total(&self) -> f64 {
        self.cross_entropy + self.penalty
    }
}

/// Gradients with the same shapes as [`MlpModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl MlpModel {
    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`) and zero biases.
    ///
    /// The output layer's draw is multiplied by `head_scale`; a small value
    /// keeps initial logits near zero so the starting loss is close to `ln K`.
    pub fn initialize(
        dims: &[usize],
        codec: LabelCodec,
        standardizer: Standardizer,
        l2_alpha: f64,
        head_scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, ClassifierError> {
        check_dims(dims, &codec, &standardizer)?;
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                let scale = if i == last { head_scale } else { 1.0 };
                let w = Array2::from_shape_simple_fn((fan_in, fan_out), || {
                    rng.random_range(-limit..limit) * scale
                });
                Layer {
                    w,
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            layers,
            l2_alpha,
            codec,
            standardizer,
        })
    }

    /// All-zero parameters; predicts the uniform distribution.
    pub fn zeros(dims: &[usize], codec: LabelCodec, standardizer: Standardizer) -> Result<Self, ClassifierError> {
        check_dims(dims, &codec, &standardizer)?;
        Ok(Self {
            layers: dims.windows(2).map(|p| Layer::zeros(p[0], p[1])).collect(),
            l2_alpha: 0.0,
            codec,
            standardizer,
        })
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].fan_in()];
        dims.extend(self.layers.iter().map(Layer::fan_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("at least one layer").fan_out()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().map(|l| l.w.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    /// Pre-softmax outputs for already standardized rows.
    pub fn logits(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = a.dot(&layer.w) + &layer.b;
            if i < last {
                a.mapv_inplace(relu);
            }
        }
        a
    }

    /// Class probabilities (codec order) for already standardized rows.
    pub fn probabilities(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = self.logits(x);
        for mut row in z.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
        z
    }

    /// Class probabilities in codec order for one raw feature row.
    pub fn class_probabilities(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.input_dim() {
            return Err(ClassifierError::Integrity(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::Integrity("input contains non-finite values".into()));
        }
        let row = self.standardizer.transform_row(ArrayView1::from(x));
        let p = self.probabilities(row.view().insert_axis(Axis(0)));
        Ok(p.row(0).to_vec())
    }

    /// Template probabilities over the five canonical templates.
    ///
    /// Templates absent from the training labels get probability zero.
    pub fn predict_proba(&self, x: &EmbeddingVector) -> Result<ProbVector, ClassifierError> {
        self.predict_proba_raw(x.values())
    }

    pub fn predict_proba_raw(&self, x: &[f64]) -> Result<ProbVector, ClassifierError> {
        let p = self.class_probabilities(x)?;
        let mut out = vec![0.0; TemplateId::K];
        for (label, v) in self.codec.labels().iter().zip(p) {
            out[label.canonical_index().expect("codec holds known labels")] = v;
        }
        ProbVector::new(out).map_err(|e| ClassifierError::Integrity(e.to_string()))
    }

    /// Mean cross-entropy and L2 penalty on standardized rows.
    pub fn loss(&self, x: ArrayView2<f64>, y: &[usize]) -> Loss {
        let z = self.logits(x);
        Loss {
            cross_entropy: mean_cross_entropy(&z, y),
            penalty: self.l2_alpha * self.weight_norm_sq(),
        }
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, y: &[usize]) -> (Loss, Gradients) {
        let n = x.nrows() as f64;
        let last = self.layers.len() - 1;
        // Post-activation outputs of each layer, input first.
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.w) + &layer.b;
            if i < last {
                z.mapv_inplace(relu);
            }
            acts.push(z);
        }
        let logits = acts.pop().expect("output layer");
        let loss = Loss {
            cross_entropy: mean_cross_entropy(&logits, y),
            penalty: self.l2_alpha * self.weight_norm_sq(),
        };

        let mut delta = logits;
        for (mut row, &label) in delta.rows_mut().into_iter().zip(y) {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
            row[label] -= 1.0;
        }
        delta /= n;

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &acts[i];
            let mut gw = input.t().dot(&delta);
            gw.scaled_add(2.0 * self.l2_alpha, &self.layers[i].w);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].w.t());
                // ReLU derivative read from the stored activation (zero iff pre-activation <= 0).
                ndarray::Zip::from(&mut back).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Layer { w: gw, b: gb });
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }
}

fn check_dims(dims: &[usize], codec: &LabelCodec, standardizer: &Standardizer) -> Result<(), ClassifierError> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(ClassifierError::Integrity(format!("invalid layer dims {dims:?}")));
    }
    if *dims.last().expect("len >= 2") != codec.len() {
        return Err(ClassifierError::Integrity(format!(
            "output width {} does not match {} labels",
            dims.last().expect("len >= 2"),
            codec.len()
        )));
    }
    if dims[0] != standardizer.dim() {
        return Err(ClassifierError::Integrity(format!(
            "input width {} does not match standardizer width {}",
            dims[0],
            standardizer.dim()
        )));
    }
    Ok(())
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub(crate) fn mean_cross_entropy(logits: &Array2<f64>, y: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &label) in logits.rows().into_iter().zip(y) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[label];
    }
    total / y.len() as f64
}
