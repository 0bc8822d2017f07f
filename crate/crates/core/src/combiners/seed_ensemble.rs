use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{combine_convex, fit_weighted_average, mean_of};
use crate::error::{Error, Result};
use crate::learners::{Classifier, SharedFactory};
use crate::proba::{ProbabilityMatrix, WeightVector};
use crate::scalar::Real;
use crate::seed::derive_nonzero_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEnsembleConfig {
    pub seeds_per_base: usize,
}

impl Default for SeedEnsembleConfig {
    fn default() -> Self {
        Self { seeds_per_base: 3 }
    }
}

/// Non-zero seed of replicate `m` of `base`.
pub fn replicate_seed(dataset_seed: u64, base: &str, m: usize) -> u64 {
    derive_nonzero_seed(dataset_seed, &format!("replicate:{base}:{m}"))
}

/// Uniform average over the seed variants of one base.
pub fn seed_average<T: Real>(variants: &[ProbabilityMatrix<T>]) -> Result<ProbabilityMatrix<T>> {
    mean_of(variants)
}

/// M seeded refits per base; bases are seed-averaged, then weighted by the
/// validation accuracy of their averages.
pub struct SeedEnsembleModel<T: Real> {
    pub names: Vec<String>,
    pub seeds: Vec<Vec<u64>>,
    pub weights: WeightVector<T>,
    pub uniform_fallback: bool,
    /// Seed-averaged validation predictions, one per base.
    pub val_averages: Vec<ProbabilityMatrix<T>>,
    models: Vec<Vec<Box<dyn Classifier<T>>>>,
}

impl<T: Real> SeedEnsembleModel<T> {
    pub fn base_averages(&self, features: ArrayView2<'_, T>) -> Result<Vec<ProbabilityMatrix<T>>> {
        self.models
            .iter()
            .map(|variants| {
                let preds = variants.iter().map(|m| m.predict_proba(features)).collect::<Result<Vec<_>>>()?;
                seed_average(&preds)
            })
            .collect()
    }

    pub fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        combine_convex(&self.base_averages(features)?, &self.weights)
    }
}

pub fn fit_seed_ensemble<T: Real>(
    factories: &[SharedFactory<T>],
    train: (ArrayView2<'_, T>, &[usize]),
    val: (ArrayView2<'_, T>, &[usize]),
    class_count: usize,
    cfg: &SeedEnsembleConfig,
    dataset_seed: u64,
) -> Result<SeedEnsembleModel<T>> {
    if cfg.seeds_per_base < 2 {
        return Err(Error::InvalidParameter("a seed ensemble needs at least two seeds per base".into()));
    }
    if factories.is_empty() {
        return Err(Error::ShapeMismatch("empty pool".into()));
    }
    if let Some(f) = factories.iter().find(|f| !f.refittable()) {
        return Err(Error::RefitUnsupported(f.name().to_string()));
    }
    let mut names = Vec::new();
    let mut seeds = Vec::new();
    let mut models = Vec::new();
    let mut val_averages = Vec::new();
    for f in factories {
        let base_seeds: Vec<u64> = (0..cfg.seeds_per_base).map(|m| replicate_seed(dataset_seed, f.name(), m)).collect();
        let mut variants = Vec::with_capacity(base_seeds.len());
        let mut preds = Vec::with_capacity(base_seeds.len());
        for &s in &base_seeds {
            let mut model = f.build()?;
            model.fit(train.0, train.1, class_count, s)?;
            preds.push(model.predict_proba(val.0)?);
            variants.push(model);
        }
        val_averages.push(seed_average(&preds)?);
        names.push(f.name().to_string());
        seeds.push(base_seeds);
        models.push(variants);
    }
    let wa = fit_weighted_average(&val_averages, val.1)?;
    Ok(SeedEnsembleModel { names, seeds, weights: wa.weights, uniform_fallback: wa.uniform_fallback, val_averages, models })
}
