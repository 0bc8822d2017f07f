use ndarray::{Array2, ArrayView2};

use super::{check_fit_input, subsample, Classifier};
use crate::error::{Error, Result};
use crate::proba::ProbabilityMatrix;
use crate::scalar::Real;

/// Predicts the training class frequencies for every row.
#[derive(Debug, Clone, Default)]
pub struct ClassPrior<T: Real> {
    prior: Option<Vec<T>>,
}

impl<T: Real> Classifier<T> for ClassPrior<T> {
    fn fit(&mut self, features: ArrayView2<'_, T>, labels: &[usize], class_count: usize, seed: u64) -> Result<()> {
        check_fit_input(features, labels, class_count)?;
        let (_, y) = subsample(features, labels, seed);
        let mut counts = vec![T::zero(); class_count];
        for &c in &y {
            counts[c] += T::one();
        }
        let n = T::of_usize(y.len());
        self.prior = Some(counts.into_iter().map(|c| c / n).collect());
        Ok(())
    }

    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        let prior = self.prior.as_ref().ok_or(Error::NotFitted)?;
        let mut out = Array2::zeros((features.nrows(), prior.len()));
        for mut row in out.rows_mut() {
            for (v, &p) in row.iter_mut().zip(prior) {
                *v = p;
            }
        }
        ProbabilityMatrix::new(out)
    }
}
