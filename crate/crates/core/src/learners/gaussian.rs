use ndarray::{Array1, Array2, ArrayView2};

use super::{check_fit_input, check_width, softmax_rows, subsample, Classifier};
use crate::error::{Error, Result};
use crate::proba::ProbabilityMatrix;
use crate::scalar::Real;

/// Gaussian class-conditional learner with diagonal covariances.
///
/// Every variance is smoothed by `1e-9 · max feature variance` (or `1e-9` when all
/// features are constant), so zero-variance features never divide by zero.
#[derive(Debug, Clone, Default)]
pub struct GaussianClassConditional<T: Real> {
    fitted: Option<Fitted<T>>,
}

#[derive(Debug, Clone)]
struct Fitted<T: Real> {
    log_prior: Array1<T>,
    means: Array2<T>,
    variances: Array2<T>,
}

const SMOOTHING: f64 = 1e-9;

impl<T: Real> Classifier<T> for GaussianClassConditional<T> {
    fn fit(&mut self, features: ArrayView2<'_, T>, labels: &[usize], class_count: usize, seed: u64) -> Result<()> {
        check_fit_input(features, labels, class_count)?;
        let (x, y) = subsample(features, labels, seed);
        let (n, d) = x.dim();

        let mut counts = vec![0usize; class_count];
        let mut means = Array2::<T>::zeros((class_count, d));
        for (row, &c) in x.rows().into_iter().zip(&y) {
            counts[c] += 1;
            let mut m = means.row_mut(c);
            m += &row;
        }
        for (c, &k) in counts.iter().enumerate() {
            if k > 0 {
                means.row_mut(c).mapv_inplace(|v| v / T::of_usize(k));
            }
        }
        let mut variances = Array2::<T>::zeros((class_count, d));
        for (row, &c) in x.rows().into_iter().zip(&y) {
            for j in 0..d {
                let diff = row[j] - means[[c, j]];
                variances[[c, j]] += diff * diff;
            }
        }
        for (c, &k) in counts.iter().enumerate() {
            if k > 0 {
                variances.row_mut(c).mapv_inplace(|v| v / T::of_usize(k));
            }
        }

        let nf = T::of_usize(n);
        let mut max_var = T::zero();
        for col in x.columns() {
            let m = col.sum() / nf;
            let v = col.iter().map(|&a| (a - m) * (a - m)).sum::<T>() / nf;
            max_var = max_var.max(v);
        }
        let eps = if max_var > T::zero() { T::lit(SMOOTHING) * max_var } else { T::lit(SMOOTHING) };
        variances.mapv_inplace(|v| v + eps);

        let log_prior = counts
            .iter()
            .map(|&k| if k == 0 { T::neg_infinity() } else { (T::of_usize(k) / nf).ln() })
            .collect();
        self.fitted = Some(Fitted { log_prior, means, variances });
        Ok(())
    }

    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        let f = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        check_width(f.means.ncols(), features)?;
        let classes = f.log_prior.len();
        let two_pi = T::lit(std::f64::consts::TAU);
        let half = T::lit(0.5);
        let mut out = Array2::<T>::zeros((features.nrows(), classes));
        for (i, row) in features.rows().into_iter().enumerate() {
            for c in 0..classes {
                let mut lj = f.log_prior[c];
                if lj.is_finite() {
                    for (j, &v) in row.iter().enumerate() {
                        let var = f.variances[[c, j]];
                        let diff = v - f.means[[c, j]];
                        lj -= half * ((two_pi * var).ln() + diff * diff / var);
                    }
                }
                out[[i, c]] = lj;
            }
        }
        softmax_rows(&mut out);
        Ok(ProbabilityMatrix::from_trusted(out))
    }
}
