use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut2, Axis};

use super::ClassifierError;

/// Guard added to every standard deviation before dividing.
pub const STANDARDIZER_EPSILON: f64 = 1e-8;

/// Column-wise z-scoring with population statistics.
///
/// Columns that were constant during fitting (`std == 0`) are only centered:
/// a value never seen in training would otherwise be scaled by `1/epsilon`
/// and saturate every downstream softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
    pub epsilon: f64,
}

impl Standardizer {
    /// Fits mean and population standard deviation over the rows of `x`.
    pub fn fit(x: &Array2<f64>) -> Result<Self, ClassifierError> {
        let n = x.nrows();
        if n < 2 {
            return Err(ClassifierError::InsufficientData(format!(
                "standardizer needs at least 2 rows, got {n}"
            )));
        }
        let mean = x.mean_axis(Axis(0)).expect("n >= 2");
        let mut var = Array1::<f64>::zeros(x.ncols());
        for row in x.rows() {
            for ((v, &xi), &m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
                let d = xi - m;
                *v += d * d;
            }
        }
        let std = var.mapv(|v| (v / n as f64).sqrt());
        Ok(Self {
            mean,
            std,
            epsilon: STANDARDIZER_EPSILON,
        })
    }

    /// Identity transform (zero mean, unit std) for a given width.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
            epsilon: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn divisor(&self, s: f64) -> f64 {
        if s > 0.0 {
            s + self.epsilon
        } else {
            1.0
        }
    }

    pub fn transform_row(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut out = x.to_owned();
        for ((v, &m), &s) in out.iter_mut().zip(self.mean.iter()).zip(self.std.iter()) {
            *v = (*v - m) / self.divisor(s);
        }
        out
    }

    pub fn transform_in_place(&self, mut x: ArrayViewMut2<f64>) {
        for mut row in x.rows_mut() {
            for ((v, &m), &s) in row.iter_mut().zip(self.mean.iter()).zip(self.std.iter()) {
                *v = (*v - m) / self.divisor(s);
            }
        }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        self.transform_in_place(out.view_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_row_hand_computation() {
        let x = Array2::from_shape_fn((2, 6), |(i, _)| if i == 0 { 0.0 } else { 2.0 });
        let s = Standardizer::fit(&x).unwrap();
        assert!(s.mean.iter().all(|&m| m == 1.0));
        assert!(s.std.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = array![[3.0, 1.0], [3.0, 2.0], [3.0, 6.0]];
        let s = Standardizer::fit(&x).unwrap();
        let t = s.transform(&x);
        assert!(t.column(0).iter().all(|&v| v == 0.0));
        let unseen = s.transform_row(array![5.0, 2.0].view());
        assert_eq!(unseen[0], 2.0);
    }

    #[test]
    fn transformed_columns_are_standard() {
        let x = Array2::from_shape_fn((50, 4), |(i, j)| ((i * 7 + j * 13) % 11) as f64 * (j + 1) as f64);
        let t = Standardizer::fit(&x).unwrap().transform(&x);
        for col in t.columns() {
            let m = col.mean().unwrap();
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64).sqrt();
            assert!(m.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn single_row_is_rejected() {
        let x = array![[1.0, 2.0]];
        assert!(matches!(Standardizer::fit(&x), Err(ClassifierError::InsufficientData(_))));
    }
}
