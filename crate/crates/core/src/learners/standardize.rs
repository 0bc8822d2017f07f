use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Per-column z-scoring from training statistics. Constant columns, including
/// those whose spread is rounding noise, get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Standardizer<T: Real> {
    pub mean: Array1<T>,
    pub scale: Array1<T>,
}

impl<T: Real> Standardizer<T> {
    pub fn fit(x: ArrayView2<'_, T>) -> Self {
        let n = T::of_usize(x.nrows());
        let mean = x.sum_axis(Axis(0)).mapv(|s| s / n);
        let mut scale = Array1::zeros(x.ncols());
        for (j, col) in x.columns().into_iter().enumerate() {
            let m = mean[j];
            let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / n;
            let sd = var.sqrt();
            let noise = T::epsilon() * T::lit(64.0) * m.abs().max(T::one());
            scale[j] = if sd > noise && sd.is_finite() { sd } else { T::one() };
        }
        Self { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }
}
