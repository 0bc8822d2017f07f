use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proba::{argmax, pool_shape, ProbabilityMatrix, WeightVector};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub iterations: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self { iterations: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyFit<T: Real> {
    pub weights: WeightVector<T>,
    /// Base chosen at each iteration, in order.
    pub selections: Vec<usize>,
}

fn correct_count<T: Real>(sum: &Array2<T>, candidate: &ProbabilityMatrix<T>, labels: &[usize]) -> usize {
    let view = candidate.view();
    let mut row = vec![T::zero(); sum.ncols()];
    let mut correct = 0;
    for (i, &y) in labels.iter().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = sum[[i, c]] + view[[i, c]];
        }
        if argmax(ndarray::ArrayView1::from(&row[..])) == y {
            correct += 1;
        }
    }
    correct
}

/// Forward selection with replacement. Each of the `iterations` steps adds the
/// base whose extra copy maximises validation accuracy of the multiset average
/// (lowest index on ties). Weights are selection counts over `iterations`.
///
/// The average of a multiset has the same argmax as its sum, so candidates are
/// scored on the running sum.
pub fn fit_greedy_selection<T: Real>(
    val: &[ProbabilityMatrix<T>],
    labels: &[usize],
    cfg: &GreedyConfig,
) -> Result<GreedyFit<T>> {
    let (n, c) = pool_shape(val)?;
    if cfg.iterations == 0 {
        return Err(Error::InvalidParameter("greedy selection needs at least one iteration".into()));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} rows vs {} labels", labels.len())));
    }
    let mut sum = Array2::<T>::zeros((n, c));
    let mut counts = vec![0usize; val.len()];
    let mut selections = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let mut best = (0, correct_count(&sum, &val[0], labels));
        for (k, cand) in val.iter().enumerate().skip(1) {
            let score = correct_count(&sum, cand, labels);
            if score > best.1 {
                best = (k, score);
            }
        }
        sum += &val[best.0].view();
        counts[best.0] += 1;
        selections.push(best.0);
    }
    let total = T::of_usize(cfg.iterations);
    let weights = WeightVector::new(counts.iter().map(|&k| T::of_usize(k) / total).collect())?;
    Ok(GreedyFit { weights, selections })
}
