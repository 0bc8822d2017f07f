//! Multinomial logistic regression trained by full-batch gradient descent.

use ndarray::{s, Array2, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::{check_fit_input, check_width, softmax_rows, subsample, Classifier};
use crate::error::{Error, Result};
use crate::proba::ProbabilityMatrix;
use crate::scalar::Real;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfig {
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop once the gradient's largest absolute entry falls below this.
    pub grad_tol: f64,
    pub init_std: f64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self { l2: 1e-4, max_epochs: 1000, grad_tol: 1e-6, init_std: 0.01 }
    }
}

/// Weights in raw feature space: `C × (d + 1)`, bias in the last column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SoftmaxModel<T: Real> {
    pub weights: Array2<T>,
    pub epochs: usize,
}

impl<T: Real> SoftmaxModel<T> {
    pub fn zeros(classes: usize, width: usize) -> Self {
        Self { weights: Array2::zeros((classes, width + 1)), epochs: 0 }
    }

    pub fn width(&self) -> usize {
        self.weights.ncols() - 1
    }

    pub fn classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        check_width(self.width(), x)?;
        let d = self.width();
        let w = self.weights.slice(s![.., ..d]);
        let bias = self.weights.column(d);
        let mut logits = x.dot(&w.t());
        for mut row in logits.rows_mut() {
            row += &bias;
        }
        softmax_rows(&mut logits);
        Ok(ProbabilityMatrix::from_trusted(logits))
    }
}

/// Minimises mean cross-entropy plus `l2/2 · ||W||²` (bias unpenalised) on
/// z-scored features. Step size is `1 / L` with `L = trace(ZᵀZ)/(2n) + l2`, an
/// upper bound on the gradient's Lipschitz constant. `init_seed` draws a
/// Gaussian initialisation; `None` starts from zero.
pub fn train_softmax<T: Real>(
    x: ArrayView2<'_, T>,
    y: &[usize],
    class_count: usize,
    cfg: &SoftmaxConfig,
    init_seed: Option<u64>,
) -> Result<SoftmaxModel<T>> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let (n, d) = x.dim();
    let scaler = Standardizer::fit(x);
    let mut z = Array2::<T>::ones((n, d + 1));
    z.slice_mut(s![.., ..d]).assign(&scaler.transform(x));

    let mut w = Array2::<T>::zeros((class_count, d + 1));
    if let Some(seed) = init_seed {
        let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = rng_from_seed(derive_seed(seed, "linear-init"));
        w.mapv_inplace(|_| T::lit(normal.sample(&mut rng)));
    }

    let nf = T::of_usize(n);
    let l2 = T::lit(cfg.l2);
    let trace = z.iter().map(|&v| v * v).sum::<T>() / nf;
    let step = T::one() / (T::lit(0.5) * trace + l2);
    let tol = T::lit(cfg.grad_tol);

    let mut residual = Array2::<T>::zeros((n, class_count));
    let mut epochs = 0;
    for epoch in 0..cfg.max_epochs {
        residual.assign(&z.dot(&w.t()));
        softmax_rows(&mut residual);
        for (i, &label) in y.iter().enumerate() {
            residual[[i, label]] -= T::one();
        }
        let mut grad = residual.t().dot(&z);
        grad.mapv_inplace(|g| g / nf);
        {
            let mut penalised = grad.slice_mut(s![.., ..d]);
            penalised.zip_mut_with(&w.slice(s![.., ..d]), |g, &wv| *g += l2 * wv);
        }
        epochs = epoch + 1;
        let gmax = grad.iter().fold(T::zero(), |m, &g| m.max(g.abs()));
        if gmax < tol {
            break;
        }
        w.scaled_add(-step, &grad);
    }

    // Fold the standardisation into raw-space weights.
    let mut raw = Array2::<T>::zeros((class_count, d + 1));
    for c in 0..class_count {
        let mut bias = w[[c, d]];
        for j in 0..d {
            let wj = w[[c, j]] / scaler.scale[j];
            raw[[c, j]] = wj;
            bias -= wj * scaler.mean[j];
        }
        raw[[c, d]] = bias;
    }
    Ok(SoftmaxModel { weights: raw, epochs })
}

/// Builtin multinomial linear learner.
#[derive(Debug, Clone, Default)]
pub struct LinearClassifier<T: Real> {
    cfg: SoftmaxConfig,
    model: Option<SoftmaxModel<T>>,
}

impl<T: Real> LinearClassifier<T> {
    pub fn new(cfg: SoftmaxConfig) -> Self {
        Self { cfg, model: None }
    }

    pub fn model(&self) -> Option<&SoftmaxModel<T>> {
        self.model.as_ref()
    }
}

impl<T: Real> Classifier<T> for LinearClassifier<T> {
    fn fit(&mut self, features: ArrayView2<'_, T>, labels: &[usize], class_count: usize, seed: u64) -> Result<()> {
        check_fit_input(features, labels, class_count)?;
        let (x, y) = subsample(features, labels, seed);
        let init = (seed != 0).then_some(seed);
        self.model = Some(train_softmax(x.view(), &y, class_count, &self.cfg, init)?);
        Ok(())
    }

    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        self.model.as_ref().ok_or(Error::NotFitted)?.predict_proba(features)
    }
}
