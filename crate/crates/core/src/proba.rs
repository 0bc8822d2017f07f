//! Row-stochastic prediction matrices and convex weight vectors.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Clipping floor applied before any logarithm of a probability.
pub const PROBA_EPS: f64 = 1e-15;

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<T: Real>(row: ArrayView1<'_, T>) -> usize {
    let mut best = 0;
    let mut best_val = row[0];
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// n×C class-probability predictions of one model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Array2<T>", into = "Array2<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ProbabilityMatrix<T: Real> {
    values: Array2<T>,
}

impl<T: Real> TryFrom<Array2<T>> for ProbabilityMatrix<T> {
    type Error = Error;
    fn try_from(values: Array2<T>) -> Result<Self> {
        Self::new(values)
    }
}

impl<T: Real> From<ProbabilityMatrix<T>> for Array2<T> {
    fn from(m: ProbabilityMatrix<T>) -> Self {
        m.values
    }
}

impl<T: Real> ProbabilityMatrix<T> {
    /// Validates non-negativity and unit row sums.
    pub fn new(values: Array2<T>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::InvalidProbabilities("zero classes".into()));
        }
        let tol = T::lit(T::ROW_SUM_TOL);
        for (i, row) in values.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < T::zero()) {
                return Err(Error::InvalidProbabilities(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let sum: T = row.sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::InvalidProbabilities(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { values })
    }

    /// Divides each row by its sum. Rows must be non-negative with a positive sum.
    pub fn normalized(mut values: Array2<T>) -> Result<Self> {
        for mut row in values.rows_mut() {
            let sum: T = row.sum();
            if !(sum > T::zero()) || !sum.is_finite() {
                return Err(Error::InvalidProbabilities("row with non-positive sum".into()));
            }
            row.mapv_inplace(|v| v / sum);
        }
        Self::new(values)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, c), flat)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::new(values)
    }

    pub fn uniform(rows: usize, classes: usize) -> Self {
        let p = T::one() / T::of_usize(classes);
        Self { values: Array2::from_elem((rows, classes), p) }
    }

    pub fn one_hot(labels: &[usize], classes: usize) -> Self {
        let mut values = Array2::zeros((labels.len(), classes));
        for (i, &y) in labels.iter().enumerate() {
            values[[i, y]] = T::one();
        }
        Self { values }
    }

    /// Trusted constructor for arithmetic whose result is row-stochastic by construction.
    pub(crate) fn from_trusted(values: Array2<T>) -> Self {
        debug_assert!(Self::new(values.clone()).is_ok());
        Self { values }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.values.row(i)
    }

    pub fn into_inner(self) -> Array2<T> {
        self.values
    }

    /// Hard predictions with the lowest-index tie rule.
    pub fn argmax(&self) -> Vec<usize> {
        self.values.rows().into_iter().map(argmax).collect()
    }

    /// Largest entry of every row.
    pub fn confidence(&self) -> Vec<T> {
        self.values
            .rows()
            .into_iter()
            .map(|r| r.fold(T::zero(), |m, &v| m.max(v)))
            .collect()
    }

    /// Entries clipped to `[eps, 1]`, rows renormalised.
    pub fn clipped(&self, eps: T) -> Self {
        let mut values = self.values.mapv(|v| v.max(eps).min(T::one()));
        for mut row in values.rows_mut() {
            let sum: T = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        Self { values }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self { values: self.values.select(Axis(0), rows) }
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.values.dim() != other.values.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.values.dim(),
                other.values.dim()
            )));
        }
        Ok(())
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> ProbabilityMatrix<U> {
        ProbabilityMatrix { values: self.values.mapv(f) }
    }
}

/// Checks that every matrix in a pool has the same shape; returns `(n, C)`.
pub fn pool_shape<T: Real>(pool: &[ProbabilityMatrix<T>]) -> Result<(usize, usize)> {
    let first = pool.first().ok_or_else(|| Error::ShapeMismatch("empty pool".into()))?;
    for m in &pool[1..] {
        first.same_shape(m)?;
    }
    Ok((first.rows(), first.classes()))
}

/// Non-negative weights over K bases summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct WeightVector<T: Real> {
    weights: Vec<T>,
}

impl<T: Real> TryFrom<Vec<T>> for WeightVector<T> {
    type Error = Error;
    fn try_from(weights: Vec<T>) -> Result<Self> {
        Self::new(weights)
    }
}

impl<T: Real> From<WeightVector<T>> for Vec<T> {
    fn from(w: WeightVector<T>) -> Self {
        w.weights
    }
}

impl<T: Real> WeightVector<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
        }
        let sum: T = weights.iter().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::of_usize(4 * weights.len()));
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidParameter(format!("weights sum to {sum}")));
        }
        Ok(Self { weights })
    }

    /// Normalises non-negative scores; `None` when they sum to zero.
    pub fn from_scores(scores: &[T]) -> Option<Self> {
        let total: T = scores.iter().sum();
        if !(total > T::zero()) {
            return None;
        }
        Some(Self { weights: scores.iter().map(|&s| s / total).collect() })
    }

    pub fn uniform(k: usize) -> Self {
        Self { weights: vec![T::one() / T::of_usize(k); k] }
    }

    pub fn one_hot(k: usize, index: usize) -> Self {
        let mut weights = vec![T::zero(); k];
        weights[index] = T::one();
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        let m = ProbabilityMatrix::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.2, 0.4, 0.4],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap();
        assert_eq!(m.argmax(), vec![0, 1, 2]);
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(ProbabilityMatrix::new(array![[0.5, 0.6]]).is_err());
        assert!(ProbabilityMatrix::new(array![[1.5, -0.5]]).is_err());
        assert!(ProbabilityMatrix::new(array![[f64::NAN, 1.0]]).is_err());
        assert!(ProbabilityMatrix::new(array![[0.25f32, 0.75]]).is_ok());
    }

    #[test]
    fn clipping_keeps_rows_stochastic() {
        let m = ProbabilityMatrix::new(array![[1.0, 0.0, 0.0]]).unwrap();
        let c = m.clipped(PROBA_EPS);
        assert!(c.row(0).iter().all(|&v| v >= 1e-16));
        assert!((c.row(0).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.5, 1.5]).is_err());
        assert!(WeightVector::<f64>::from_scores(&[0.0, 0.0]).is_none());
        let w = WeightVector::<f64>::from_scores(&[0.8, 0.6]).unwrap();
        assert!((w.as_slice()[0] - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip_validates() {
        let m = ProbabilityMatrix::new(array![[0.1, 0.9], [0.3, 0.7]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: ProbabilityMatrix<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let bad = s.replace("0.9", "0.95");
        assert!(serde_json::from_str::<ProbabilityMatrix<f64>>(&bad).is_err());
    }
}
