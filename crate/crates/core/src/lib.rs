//! Ensembles of pretrained tabular classifiers.
//!
//! A fixed pool of base predictors, each producing class-probability matrices,
//! is combined by one of six strategies and evaluated on accuracy, calibration,
//! selective prediction and group robustness. Pool diversity and rank
//! statistics across datasets are computed alongside.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common cases.

pub mod combiners;
pub mod data;
pub mod diversity;
pub mod error;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod proba;
pub mod scalar;
pub mod seed;
pub mod special;
pub mod split;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use proba::{ProbabilityMatrix, WeightVector};
pub use scalar::Real;

pub type ProbabilityMatrix64 = ProbabilityMatrix<f64>;
pub type ProbabilityMatrix32 = ProbabilityMatrix<f32>;
pub type WeightVector64 = WeightVector<f64>;
pub type WeightVector32 = WeightVector<f32>;
pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
