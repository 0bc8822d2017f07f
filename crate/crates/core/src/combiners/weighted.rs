use log::warn;

use crate::error::Result;
use crate::metrics::accuracy;
use crate::proba::{pool_shape, ProbabilityMatrix, WeightVector};
use crate::scalar::Real;

/// Validation-accuracy weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFit<T: Real> {
    pub weights: WeightVector<T>,
    pub scores: Vec<T>,
    /// Set when every base scored zero and uniform weights were used instead.
    pub uniform_fallback: bool,
}

/// `w_k = acc_k / Σ_j acc_j`, uniform when every accuracy is zero.
pub fn fit_weighted_average<T: Real>(val: &[ProbabilityMatrix<T>], labels: &[usize]) -> Result<WeightedFit<T>> {
    pool_shape(val)?;
    let scores = val.iter().map(|p| accuracy(p, labels)).collect::<Result<Vec<T>>>()?;
    Ok(match WeightVector::from_scores(&scores) {
        Some(weights) => WeightedFit { weights, scores, uniform_fallback: false },
        None => {
            warn!("every base has zero validation accuracy; using uniform weights");
            WeightedFit { weights: WeightVector::uniform(val.len()), scores, uniform_fallback: true }
        }
    })
}
