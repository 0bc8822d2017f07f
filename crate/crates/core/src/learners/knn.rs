use ndarray::{Array2, ArrayView2};

use super::standardize::Standardizer;
use super::{check_fit_input, check_width, subsample, Classifier};
use crate::error::{Error, Result};
use crate::proba::ProbabilityMatrix;
use crate::scalar::Real;

/// k-nearest-neighbour voter on standardised features. The probability of a class
/// is its share among the `min(k, n)` nearest training rows; equal distances are
/// ordered by training row index.
#[derive(Debug, Clone)]
pub struct NearestNeighbors<T: Real> {
    k: usize,
    fitted: Option<(Standardizer<T>, Array2<T>, Vec<usize>, usize)>,
}

impl<T: Real> NearestNeighbors<T> {
    pub fn new(k: usize) -> Self {
        Self { k: k.max(1), fitted: None }
    }
}

impl<T: Real> Classifier<T> for NearestNeighbors<T> {
    fn fit(&mut self, features: ArrayView2<'_, T>, labels: &[usize], class_count: usize, seed: u64) -> Result<()> {
        check_fit_input(features, labels, class_count)?;
        let (x, y) = subsample(features, labels, seed);
        let scaler = Standardizer::fit(x.view());
        let z = scaler.transform(x.view());
        self.fitted = Some((scaler, z, y, class_count));
        Ok(())
    }

    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        let (scaler, train, labels, classes) = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        check_width(train.ncols(), features)?;
        let query = scaler.transform(features);
        let k = self.k.min(train.nrows());
        let share = T::one() / T::of_usize(k);
        let mut out = Array2::<T>::zeros((query.nrows(), *classes));
        let mut dist: Vec<(T, usize)> = Vec::with_capacity(train.nrows());
        for (i, q) in query.rows().into_iter().enumerate() {
            dist.clear();
            for (j, t) in train.rows().into_iter().enumerate() {
                let d2 = q.iter().zip(t.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
                dist.push((d2, j));
            }
            dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            for &(_, j) in &dist[..k] {
                out[[i, labels[j]]] += share;
            }
        }
        ProbabilityMatrix::normalized(out)
    }
}
