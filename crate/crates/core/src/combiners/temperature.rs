use serde::{Deserialize, Serialize};

use super::combine_convex;
use crate::error::{Error, Result};
use crate::learners::softmax_rows;
use crate::proba::{ProbabilityMatrix, WeightVector, PROBA_EPS};
use crate::scalar::Real;

pub const MIN_TEMPERATURE: f64 = 0.05;
pub const MAX_TEMPERATURE: f64 = 20.0;
const LOG_TOLERANCE: f64 = 1e-4;
const MAX_ITERATIONS: usize = 200;
const FLAT_TOLERANCE: f64 = 1e-12;
const FLAT_PROBES: usize = 9;

/// One fitted temperature per base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TemperatureVector<T: Real> {
    temperatures: Vec<T>,
}

impl<T: Real> TryFrom<Vec<T>> for TemperatureVector<T> {
    type Error = Error;
    fn try_from(t: Vec<T>) -> Result<Self> {
        Self::new(t)
    }
}

impl<T: Real> From<TemperatureVector<T>> for Vec<T> {
    fn from(t: TemperatureVector<T>) -> Self {
        t.temperatures
    }
}

impl<T: Real> TemperatureVector<T> {
    pub fn new(temperatures: Vec<T>) -> Result<Self> {
        let (lo, hi) = (T::lit(MIN_TEMPERATURE), T::lit(MAX_TEMPERATURE));
        if let Some(t) = temperatures.iter().find(|&&t| !(t >= lo && t <= hi)) {
            return Err(Error::InvalidParameter(format!("temperature {t} outside [{lo}, {hi}]")));
        }
        Ok(Self { temperatures })
    }

    pub fn ones(k: usize) -> Self {
        Self { temperatures: vec![T::one(); k] }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.temperatures
    }
}

fn scaled_logits<T: Real>(probs: &ProbabilityMatrix<T>, temperature: T) -> ndarray::Array2<T> {
    probs.clipped(T::lit(PROBA_EPS)).into_inner().mapv(|p| p.ln() / temperature)
}

/// `softmax(log p / T)` after clipping to `[1e-15, 1]`. `T == 1` returns the
/// input unchanged.
pub fn temperature_scale<T: Real>(probs: &ProbabilityMatrix<T>, temperature: T) -> ProbabilityMatrix<T> {
    if temperature == T::one() {
        return probs.clone();
    }
    let mut z = scaled_logits(probs, temperature);
    softmax_rows(&mut z);
    ProbabilityMatrix::from_trusted(z)
}

/// Mean negative log-likelihood of the temperature-scaled predictions.
pub fn temperature_nll<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize], temperature: T) -> T {
    let z = scaled_logits(probs, temperature);
    let total: T = z
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| {
            let max = row.fold(T::neg_infinity(), |m, &v| m.max(v));
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            lse - row[y]
        })
        .sum();
    total / T::of_usize(labels.len())
}

/// Minimises validation NLL over `T ∈ [0.05, 20]` by golden-section search on
/// `ln T`. A flat objective returns exactly 1; the final point competes with
/// both bracket ends.
pub fn fit_temperature<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Result<T> {
    if probs.rows() != labels.len() || labels.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {} labels", probs.rows(), labels.len())));
    }
    let (t_lo, t_hi) = (T::lit(MIN_TEMPERATURE), T::lit(MAX_TEMPERATURE));
    let objective = |u: T| temperature_nll(probs, labels, u.exp().max(t_lo).min(t_hi));
    let (mut a, mut b) = (t_lo.ln(), t_hi.ln());

    let probes: Vec<T> =
        (0..FLAT_PROBES).map(|i| objective(a + (b - a) * T::of_usize(i) / T::of_usize(FLAT_PROBES - 1))).collect();
    let spread = probes.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
        - probes.iter().fold(T::infinity(), |m, &v| m.min(v));
    if !(spread > T::lit(FLAT_TOLERANCE)) {
        return Ok(T::one());
    }

    let ratio = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..MAX_ITERATIONS {
        if b - a <= T::lit(LOG_TOLERANCE) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
    }
    let inner = ((a + b) / T::lit(2.0)).exp().max(t_lo).min(t_hi);
    let mut best = (inner, temperature_nll(probs, labels, inner));
    for t in [t_lo, t_hi] {
        let f = temperature_nll(probs, labels, t);
        if f < best.1 {
            best = (t, f);
        }
    }
    Ok(best.0)
}

/// Uniform average of the per-base temperature-scaled matrices.
pub fn temp_scaled_blend<T: Real>(
    bases: &[ProbabilityMatrix<T>],
    temperatures: &TemperatureVector<T>,
) -> Result<ProbabilityMatrix<T>> {
    if bases.len() != temperatures.as_slice().len() {
        return Err(Error::ShapeMismatch(format!(
            "{} temperatures for {} bases",
            temperatures.as_slice().len(),
            bases.len()
        )));
    }
    let scaled: Vec<_> = bases.iter().zip(temperatures.as_slice()).map(|(b, &t)| temperature_scale(b, t)).collect();
    combine_convex(&scaled, &WeightVector::uniform(bases.len()))
}
