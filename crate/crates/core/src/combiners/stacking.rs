use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{train_softmax, SoftmaxConfig, SoftmaxModel};
use crate::proba::{pool_shape, ProbabilityMatrix};
use crate::scalar::Real;

/// Multinomial linear meta-learner over the K·C concatenated base probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct StackingModel<T: Real> {
    pub bases: usize,
    pub meta: SoftmaxModel<T>,
}

impl<T: Real> StackingModel<T> {
    /// `C × (K·C + 1)`, bias in the last column.
    pub fn meta_weights(&self) -> &Array2<T> {
        &self.meta.weights
    }

    pub fn classes(&self) -> usize {
        self.meta.classes()
    }
}

/// Row `i` is `[p_1(i) | p_2(i) | … | p_K(i)]`.
pub fn meta_features<T: Real>(bases: &[ProbabilityMatrix<T>]) -> Result<Array2<T>> {
    let (n, c) = pool_shape(bases)?;
    let mut out = Array2::<T>::zeros((n, c * bases.len()));
    for (k, b) in bases.iter().enumerate() {
        out.slice_mut(ndarray::s![.., k * c..(k + 1) * c]).assign(&b.view());
    }
    Ok(out)
}

/// Trains the meta-learner on out-of-fold base predictions with L2 1e-4,
/// starting from zero weights.
pub fn fit_stacking<T: Real>(oof: &[ProbabilityMatrix<T>], labels: &[usize]) -> Result<StackingModel<T>> {
    let (n, c) = pool_shape(oof)?;
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} rows vs {} labels", labels.len())));
    }
    let x = meta_features(oof)?;
    let meta = train_softmax(x.view(), labels, c, &SoftmaxConfig::default(), None)?;
    Ok(StackingModel { bases: oof.len(), meta })
}

pub fn predict_stacking<T: Real>(model: &StackingModel<T>, bases: &[ProbabilityMatrix<T>]) -> Result<ProbabilityMatrix<T>> {
    if bases.len() != model.bases {
        return Err(Error::ShapeMismatch(format!("{} bases for a model over {}", bases.len(), model.bases)));
    }
    let (_, c) = pool_shape(bases)?;
    if c != model.classes() {
        return Err(Error::ShapeMismatch(format!("{c} classes for a model over {}", model.classes())));
    }
    model.meta.predict_proba(meta_features(bases)?.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::accuracy;
    use ndarray::Axis;
    use rand::Rng;

    #[test]
    fn one_hot_truth_is_learned_perfectly() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let oof = vec![ProbabilityMatrix::<f64>::one_hot(&labels, 3), ProbabilityMatrix::uniform(30, 3)];
        let model = fit_stacking(&oof, &labels).unwrap();
        assert_eq!(accuracy(&predict_stacking(&model, &oof).unwrap(), &labels).unwrap(), 1.0);
        assert_eq!(model.meta_weights().dim(), (3, 7));
    }

    #[test]
    fn oracle_single_base_passes_through() {
        let labels: Vec<usize> = (0..20).map(|i| (i * 7) % 2).collect();
        let oracle = ProbabilityMatrix::<f64>::one_hot(&labels, 2);
        let model = fit_stacking(std::slice::from_ref(&oracle), &labels).unwrap();
        let test_labels = vec![1, 0, 0, 1, 1];
        let test = ProbabilityMatrix::one_hot(&test_labels, 2);
        assert_eq!(predict_stacking(&model, &[test]).unwrap().argmax(), test_labels);
    }

    #[test]
    fn constant_features_predict_priors() {
        let labels = vec![0, 0, 0, 0, 0, 0, 1, 1, 2, 2];
        let oof = vec![ProbabilityMatrix::<f64>::uniform(10, 3)];
        let model = fit_stacking(&oof, &labels).unwrap();
        let out = predict_stacking(&model, &oof).unwrap();
        for (c, prior) in [0.6, 0.2, 0.2].into_iter().enumerate() {
            assert!((out.row(0)[c] - prior).abs() < 1e-4, "{:?} after {} epochs", out.row(0), model.meta.epochs);
        }
        assert_eq!(accuracy(&out, &labels).unwrap(), 0.6);
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let model = StackingModel { bases: 2, meta: SoftmaxModel::<f64>::zeros(4, 8) };
        let bases = vec![ProbabilityMatrix::one_hot(&[0, 3], 4), ProbabilityMatrix::uniform(2, 4)];
        for v in predict_stacking(&model, &bases).unwrap().view().iter() {
            assert_eq!(*v, 0.25);
        }
    }

    #[test]
    fn prediction_is_row_equivariant_and_stochastic() {
        let mut rng = crate::seed::rng_from_seed(11);
        let mut random = |n| ProbabilityMatrix::normalized(Array2::from_shape_fn((n, 3), |_| rng.random::<f64>() + 1e-3)).unwrap();
        let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let train = vec![random(40), random(40)];
        let model = fit_stacking(&train, &labels).unwrap();
        let test = vec![random(12), random(12)];
        let out = predict_stacking(&model, &test).unwrap();
        for row in out.view().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        let perm: Vec<usize> = (0..12).rev().collect();
        let permuted: Vec<_> = test.iter().map(|b| b.select_rows(&perm)).collect();
        let out_p = predict_stacking(&model, &permuted).unwrap();
        assert_eq!(out_p.view(), out.view().select(Axis(0), &perm));
    }

    #[test]
    fn base_count_must_match() {
        let labels = vec![0, 1, 0, 1];
        let model = fit_stacking(&[ProbabilityMatrix::<f64>::one_hot(&labels, 2)], &labels).unwrap();
        let two = vec![ProbabilityMatrix::uniform(4, 2), ProbabilityMatrix::uniform(4, 2)];
        assert!(matches!(predict_stacking(&model, &two), Err(Error::ShapeMismatch(_))));
    }
}
