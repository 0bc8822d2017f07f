//! The base-model pool.
//!
//! Every pool member implements [`Classifier`]. A [`LearnerFactory`] builds fresh
//! unfitted instances, which is what out-of-fold prediction, cascades and seed
//! ensembles need. Predict-only members (precomputed outputs on disk) report
//! themselves as not refittable and every refitting path rejects them.

mod external;
mod file_backed;
mod gaussian;
mod knn;
mod linear;
mod prior;
mod standardize;

use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proba::ProbabilityMatrix;
use crate::scalar::Real;
use crate::seed::{rng_from_seed, shuffle};
use crate::split::FoldAssignment;

pub use external::{serve_worker, ExternalLearner, ExternalModel, WireClient, WorkerAdapter, DEFAULT_TIMEOUT};
pub use file_backed::{FileBackedPredictor, SplitName, Sidecar};
pub use gaussian::GaussianClassConditional;
pub use knn::NearestNeighbors;
pub use linear::{train_softmax, LinearClassifier, SoftmaxConfig, SoftmaxModel};
pub use prior::ClassPrior;
pub use standardize::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Builtin,
    FileBacked,
    External,
}

/// Identity of one pool member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseModelHandle {
    pub name: String,
    pub kind: ModelKind,
    pub seed: u64,
}

/// Wall-clock cost of one fit/predict cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

/// The uniform fit / predict_proba contract.
pub trait Classifier<T: Real>: Send + Sync {
    /// Fits on `features`/`labels`. `seed == 0` is the canonical unperturbed fit;
    /// any other seed requests a seeded perturbation where the model supports one.
    fn fit(&mut self, features: ArrayView2<'_, T>, labels: &[usize], class_count: usize, seed: u64) -> Result<()>;

    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>>;
}

/// Builds unfitted [`Classifier`] instances.
pub trait LearnerFactory<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    fn kind(&self) -> ModelKind {
        ModelKind::Builtin
    }

    fn build(&self) -> Result<Box<dyn Classifier<T>>>;

    fn refittable(&self) -> bool {
        true
    }
}

/// The built-in desk-scale learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum BuiltinLearner {
    Linear,
    Gaussian,
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Prior,
}

fn default_k() -> usize {
    5
}

impl BuiltinLearner {
    pub fn default_pool() -> Vec<BuiltinLearner> {
        vec![BuiltinLearner::Linear, BuiltinLearner::Gaussian, BuiltinLearner::Knn { k: 5 }]
    }

    pub fn label(&self) -> &'static str {
        match self {
            BuiltinLearner::Linear => "linear",
            BuiltinLearner::Gaussian => "gaussian",
            BuiltinLearner::Knn { .. } => "knn",
            BuiltinLearner::Prior => "prior",
        }
    }

    pub fn instantiate<T: Real>(&self) -> Box<dyn Classifier<T>> {
        match *self {
            BuiltinLearner::Linear => Box::new(LinearClassifier::new(SoftmaxConfig::default())),
            BuiltinLearner::Gaussian => Box::new(GaussianClassConditional::default()),
            BuiltinLearner::Knn { k } => Box::new(NearestNeighbors::new(k)),
            BuiltinLearner::Prior => Box::new(ClassPrior::default()),
        }
    }
}

/// A named builtin learner usable as a factory.
#[derive(Debug, Clone)]
pub struct Builtin {
    pub name: String,
    pub learner: BuiltinLearner,
}

impl Builtin {
    pub fn new(learner: BuiltinLearner) -> Self {
        Self { name: learner.label().to_string(), learner }
    }
}

impl<T: Real> LearnerFactory<T> for Builtin {
    fn name(&self) -> &str {
        &self.name
    }

    fn build(&self) -> Result<Box<dyn Classifier<T>>> {
        Ok(self.learner.instantiate())
    }
}

pub type SharedFactory<T> = Arc<dyn LearnerFactory<T>>;

pub(crate) fn check_fit_input<T: Real>(features: ArrayView2<'_, T>, labels: &[usize], class_count: usize) -> Result<()> {
    if features.nrows() == 0 || features.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    if features.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {} labels", features.nrows(), labels.len())));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("non-finite feature".into()));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= class_count) {
        return Err(Error::InvalidDataset(format!("label {y} outside {class_count} classes")));
    }
    Ok(())
}

pub(crate) fn check_width(expected: usize, features: ArrayView2<'_, impl Real>) -> Result<()> {
    if features.ncols() != expected {
        return Err(Error::WidthMismatch { expected, got: features.ncols() });
    }
    Ok(())
}

/// Rows used by a seeded refit: all rows for seed 0, otherwise a seeded 90% subsample.
pub(crate) fn perturbed_rows(n: usize, seed: u64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..n).collect();
    if seed == 0 || n < 2 {
        return rows;
    }
    shuffle(&mut rows, &mut rng_from_seed(seed));
    let keep = ((n as f64) * 0.9).round().max(1.0) as usize;
    rows.truncate(keep);
    rows.sort_unstable();
    rows
}

pub(crate) fn subsample<T: Real>(features: ArrayView2<'_, T>, labels: &[usize], seed: u64) -> (Array2<T>, Vec<usize>) {
    let rows = perturbed_rows(labels.len(), seed);
    (features.select(Axis(0), &rows), rows.iter().map(|&i| labels[i]).collect())
}

/// Fits `model` and predicts `query`, timing both halves.
pub fn fit_predict_timed<T: Real>(
    model: &mut dyn Classifier<T>,
    train: (ArrayView2<'_, T>, &[usize]),
    class_count: usize,
    seed: u64,
    queries: &[ArrayView2<'_, T>],
) -> Result<(Vec<ProbabilityMatrix<T>>, FitReport)> {
    let start = Instant::now();
    model.fit(train.0, train.1, class_count, seed)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let out = queries.iter().map(|q| model.predict_proba(*q)).collect::<Result<Vec<_>>>()?;
    Ok((out, FitReport { fit_seconds, predict_seconds: start.elapsed().as_secs_f64() }))
}

/// Out-of-fold predictions plus the per-fold models that produced them.
pub struct OofFit<T: Real> {
    pub oof: ProbabilityMatrix<T>,
    pub fold_models: Vec<Box<dyn Classifier<T>>>,
}

/// Fits one model per fold on the other folds and predicts the held-out rows.
/// Row `p` of the result comes from the model that never saw position `p`.
pub fn oof_fit<T: Real>(
    factory: &dyn LearnerFactory<T>,
    features: ArrayView2<'_, T>,
    labels: &[usize],
    class_count: usize,
    folds: &FoldAssignment,
    seed: u64,
) -> Result<OofFit<T>> {
    if !factory.refittable() {
        return Err(Error::RefitUnsupported(factory.name().to_string()));
    }
    if folds.len() != labels.len() || features.nrows() != labels.len() {
        return Err(Error::ShapeMismatch("fold assignment does not cover all rows".into()));
    }
    let mut out = Array2::<T>::zeros((labels.len(), class_count));
    let mut fold_models = Vec::with_capacity(folds.fold_count);
    for fold in 0..folds.fold_count {
        let (held, fit) = folds.partition(fold);
        let fit_x = features.select(Axis(0), &fit);
        let fit_y: Vec<usize> = fit.iter().map(|&p| labels[p]).collect();
        let mut model = factory.build()?;
        model.fit(fit_x.view(), &fit_y, class_count, seed)?;
        let pred = model.predict_proba(features.select(Axis(0), &held).view())?;
        if pred.classes() != class_count {
            return Err(Error::ShapeMismatch(format!("{} classes from fold model", pred.classes())));
        }
        for (r, &p) in held.iter().enumerate() {
            out.row_mut(p).assign(&pred.row(r));
        }
        fold_models.push(model);
    }
    Ok(OofFit { oof: ProbabilityMatrix::new(out)?, fold_models })
}

pub fn oof_predict<T: Real>(
    factory: &dyn LearnerFactory<T>,
    features: ArrayView2<'_, T>,
    labels: &[usize],
    class_count: usize,
    folds: &FoldAssignment,
    seed: u64,
) -> Result<ProbabilityMatrix<T>> {
    Ok(oof_fit(factory, features, labels, class_count, folds, seed)?.oof)
}

/// Uniform average of the fold models' predictions (the "bagged" form of an OOF learner).
pub fn bagged_predict<T: Real>(models: &[Box<dyn Classifier<T>>], features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
    let preds = models.iter().map(|m| m.predict_proba(features)).collect::<Result<Vec<_>>>()?;
    crate::combiners::mean_of(&preds)
}

pub(crate) fn softmax_rows<T: Real>(logits: &mut Array2<T>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(T::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum: T = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}
