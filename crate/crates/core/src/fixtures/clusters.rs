use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classifier::LabeledData;
use crate::domain::TemplateId;
use crate::embedding::EMBEDDING_DIM;

/// Isotropic Gaussian blobs, one per template.
///
/// Each class center has i.i.d. `N(0, separation^2 / (2 dim))` coordinates, so
/// the expected distance between two centers is about `separation`. Samples
/// add `N(0, noise^2)` to every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClusters {
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for GaussianClusters {
    fn default() -> Self {
        Self {
            dim: EMBEDDING_DIM,
            per_class: 400,
            separation: 8.0,
            noise: 1.0,
            seed: 7,
        }
    }
}

impl GaussianClusters {
    /// Class centers in canonical template order.
    pub fn centers(&self) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let s = self.separation / (2.0 * self.dim as f64).sqrt();
        Array2::from_shape_simple_fn((TemplateId::K, self.dim), || {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * s
        })
    }

    /// `per_class` samples for each of the five templates, classes interleaved.
    pub fn generate(&self) -> LabeledData {
        let centers = self.centers();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let n = self.per_class * TemplateId::K;
        let mut features = Array2::zeros((n, self.dim));
        let mut labels = Vec::with_capacity(n);
        for (i, mut row) in features.rows_mut().into_iter().enumerate() {
            let c = i % TemplateId::K;
            for (v, &m) in row.iter_mut().zip(centers.row(c)) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = m + self.noise * z;
            }
            labels.push(TemplateId::from_canonical_index(c).expect("c < K"));
        }
        LabeledData::new(features, labels).expect("finite by construction")
    }
}
