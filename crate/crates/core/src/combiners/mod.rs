//! The six ensemble strategies over a fixed pool of K base predictors.
//!
//! Convex strategies (weighted average, greedy selection, temperature blend,
//! seed ensemble) end in [`combine_convex`]. Stacking and the cascade train
//! second-stage models.

mod cascade;
mod greedy;
mod seed_ensemble;
mod stacking;
mod temperature;
mod weighted;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proba::{pool_shape, ProbabilityMatrix, WeightVector};
use crate::scalar::Real;

pub use cascade::{fit_cascade, CascadeConfig, CascadeModel, CandidateForm};
pub use greedy::{fit_greedy_selection, GreedyConfig, GreedyFit};
pub use seed_ensemble::{fit_seed_ensemble, replicate_seed, seed_average, SeedEnsembleConfig, SeedEnsembleModel};
pub use stacking::{fit_stacking, meta_features, predict_stacking, StackingModel};
pub use temperature::{
    fit_temperature, temp_scaled_blend, temperature_nll, temperature_scale, TemperatureVector, MAX_TEMPERATURE,
    MIN_TEMPERATURE,
};
pub use weighted::{fit_weighted_average, WeightedFit};

/// Version tag of every serialized combiner manifest.
pub const MANIFEST_SCHEMA: u32 = 1;

/// `Σ_k w_k · bases[k]`, accumulated from zero in base order.
pub fn combine_convex<T: Real>(bases: &[ProbabilityMatrix<T>], weights: &WeightVector<T>) -> Result<ProbabilityMatrix<T>> {
    let (n, c) = pool_shape(bases)?;
    if weights.len() != bases.len() {
        return Err(Error::ShapeMismatch(format!("{} weights for {} bases", weights.len(), bases.len())));
    }
    let mut out = Array2::<T>::zeros((n, c));
    for (base, &w) in bases.iter().zip(weights.as_slice()) {
        out.zip_mut_with(&base.view(), |o, &p| *o += w * p);
    }
    Ok(ProbabilityMatrix::from_trusted(out))
}

/// Elementwise mean of same-shaped matrices: the sum in order divided by the
/// count. Identical inputs return the first matrix unchanged.
pub fn mean_of<T: Real>(matrices: &[ProbabilityMatrix<T>]) -> Result<ProbabilityMatrix<T>> {
    let (n, c) = pool_shape(matrices)?;
    if matrices[1..].iter().all(|m| m == &matrices[0]) {
        return Ok(matrices[0].clone());
    }
    let mut out = Array2::<T>::zeros((n, c));
    for m in matrices {
        out += &m.view();
    }
    let count = T::of_usize(matrices.len());
    out.mapv_inplace(|v| v / count);
    Ok(ProbabilityMatrix::from_trusted(out))
}

/// The six strategies, named as in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "WA_performance")]
    WeightedAverage,
    #[serde(rename = "Greedy_Selection")]
    GreedySelection,
    #[serde(rename = "Stacking_LR")]
    Stacking,
    #[serde(rename = "Temp_Scaled")]
    TemperatureScaled,
    #[serde(rename = "Cascade_2level")]
    Cascade,
    #[serde(rename = "DeepEnsemble_3seed")]
    SeedEnsemble,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::WeightedAverage,
        Strategy::GreedySelection,
        Strategy::Stacking,
        Strategy::TemperatureScaled,
        Strategy::Cascade,
        Strategy::SeedEnsemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::WeightedAverage => "WA_performance",
            Strategy::GreedySelection => "Greedy_Selection",
            Strategy::Stacking => "Stacking_LR",
            Strategy::TemperatureScaled => "Temp_Scaled",
            Strategy::Cascade => "Cascade_2level",
            Strategy::SeedEnsemble => "DeepEnsemble_3seed",
        }
    }

    /// Whether the output is a convex combination of pool outputs.
    pub fn is_convex(self) -> bool {
        !matches!(self, Strategy::Stacking | Strategy::Cascade)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

/// Fitted parameters of one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum FittedParams<T: Real> {
    #[serde(rename = "WA_performance")]
    WeightedAverage { weights: WeightVector<T>, uniform_fallback: bool },
    #[serde(rename = "Greedy_Selection")]
    GreedySelection { weights: WeightVector<T>, selections: Vec<usize> },
    #[serde(rename = "Stacking_LR")]
    Stacking { meta_weights: Array2<T> },
    #[serde(rename = "Temp_Scaled")]
    TemperatureScaled { temperatures: TemperatureVector<T> },
    #[serde(rename = "Cascade_2level")]
    Cascade { candidates: Vec<String>, weights: WeightVector<T>, selections: Vec<usize> },
    #[serde(rename = "DeepEnsemble_3seed")]
    SeedEnsemble { seeds: Vec<Vec<u64>>, weights: WeightVector<T> },
}

impl<T: Real> FittedParams<T> {
    pub fn strategy(&self) -> Strategy {
        match self {
            FittedParams::WeightedAverage { .. } => Strategy::WeightedAverage,
            FittedParams::GreedySelection { .. } => Strategy::GreedySelection,
            FittedParams::Stacking { .. } => Strategy::Stacking,
            FittedParams::TemperatureScaled { .. } => Strategy::TemperatureScaled,
            FittedParams::Cascade { .. } => Strategy::Cascade,
            FittedParams::SeedEnsemble { .. } => Strategy::SeedEnsemble,
        }
    }
}

/// Audit record of a fitted combiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Manifest<T: Real> {
    pub schema: u32,
    pub bases: Vec<String>,
    #[serde(flatten)]
    pub params: FittedParams<T>,
}

impl<T: Real> Manifest<T> {
    pub fn new(bases: Vec<String>, params: FittedParams<T>) -> Self {
        Self { schema: MANIFEST_SCHEMA, bases, params }
    }

    /// Parses a manifest, rejecting unknown schema versions.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::Config(format!("unsupported manifest schema {}", m.schema)));
        }
        Ok(m)
    }
}
