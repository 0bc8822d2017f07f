//! Two-level stacking with skip connections.
//!
//! Level 1 fits every base on 3-fold splits of train and on all of train. Level 2
//! sees the raw features concatenated with level-1 probabilities: the
//! out-of-fold ones on train, the full-train ones everywhere else. Each learner
//! contributes two candidates, its full-train model and the average of its
//! fold models, and a final greedy selection over all candidates runs on the
//! validation split.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{combine_convex, fit_greedy_selection, mean_of, GreedyConfig, GreedyFit};
use crate::error::{Error, Result};
use crate::learners::{oof_fit, Classifier, SharedFactory};
use crate::proba::ProbabilityMatrix;
use crate::scalar::Real;
use crate::seed::derive_seed;
use crate::split::assign_folds;

pub(crate) const LEVEL1_FOLD_TAG: &str = "cascade-level1";
pub(crate) const LEVEL2_FOLD_TAG: &str = "cascade-level2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub levels: usize,
    pub oof_folds: usize,
    pub final_selection_iterations: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self { levels: 2, oof_folds: 3, final_selection_iterations: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateForm {
    /// Refit on all of train.
    Full,
    /// Average of the out-of-fold models.
    Bagged,
}

impl CandidateForm {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateForm::Full => "full",
            CandidateForm::Bagged => "bagged",
        }
    }
}

struct FittedLearner<T: Real> {
    name: String,
    full: Box<dyn Classifier<T>>,
    folds: Vec<Box<dyn Classifier<T>>>,
}

impl<T: Real> FittedLearner<T> {
    fn fit(
        factory: &SharedFactory<T>,
        x: ArrayView2<'_, T>,
        y: &[usize],
        class_count: usize,
        folds: &crate::split::FoldAssignment,
    ) -> Result<(Self, ProbabilityMatrix<T>)> {
        let oof = oof_fit(factory.as_ref(), x, y, class_count, folds, 0)?;
        let mut full = factory.build()?;
        full.fit(x, y, class_count, 0)?;
        Ok((Self { name: factory.name().to_string(), full, folds: oof.fold_models }, oof.oof))
    }

    fn candidates(&self, x: ArrayView2<'_, T>) -> Result<(ProbabilityMatrix<T>, ProbabilityMatrix<T>)> {
        let full = self.full.predict_proba(x)?;
        let folds = self.folds.iter().map(|m| m.predict_proba(x)).collect::<Result<Vec<_>>>()?;
        Ok((full, mean_of(&folds)?))
    }
}

/// Raw features followed by each matrix's probability columns.
pub(crate) fn augment<T: Real>(x: ArrayView2<'_, T>, probs: &[ProbabilityMatrix<T>]) -> Result<Array2<T>> {
    let mut parts = vec![x];
    parts.extend(probs.iter().map(|p| p.view()));
    concatenate(Axis(1), &parts).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

pub struct CascadeModel<T: Real> {
    /// `L{level}:{learner}:{form}` for every candidate, in candidate order.
    pub candidates: Vec<String>,
    pub selection: GreedyFit<T>,
    /// Candidate predictions on the validation split.
    pub val_candidates: Vec<ProbabilityMatrix<T>>,
    level1: Vec<FittedLearner<T>>,
    level2: Vec<FittedLearner<T>>,
}

impl<T: Real> CascadeModel<T> {
    /// Candidate outputs on new rows: level-1 full and bagged per base, then
    /// level-2 full and bagged per learner on features augmented with the
    /// full-train level-1 predictions.
    pub fn candidate_outputs(&self, x: ArrayView2<'_, T>) -> Result<Vec<ProbabilityMatrix<T>>> {
        let mut out = Vec::new();
        let mut level1_full = Vec::new();
        for l in &self.level1 {
            let (full, bagged) = l.candidates(x)?;
            level1_full.push(full.clone());
            out.push(full);
            out.push(bagged);
        }
        if !self.level2.is_empty() {
            let x2 = augment(x, &level1_full)?;
            for l in &self.level2 {
                let (full, bagged) = l.candidates(x2.view())?;
                out.push(full);
                out.push(bagged);
            }
        }
        Ok(out)
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        combine_convex(&self.candidate_outputs(x)?, &self.selection.weights)
    }
}

fn candidate_name(level: usize, learner: &str, form: CandidateForm) -> String {
    format!("L{level}:{learner}:{}", form.as_str())
}

pub fn fit_cascade<T: Real>(
    level1: &[SharedFactory<T>],
    level2: &[SharedFactory<T>],
    train: (ArrayView2<'_, T>, &[usize]),
    val: (ArrayView2<'_, T>, &[usize]),
    class_count: usize,
    cfg: &CascadeConfig,
    seed: u64,
) -> Result<CascadeModel<T>> {
    if cfg.levels != 2 {
        return Err(Error::InvalidParameter(format!("only 2-level cascades are supported, got {}", cfg.levels)));
    }
    if level1.is_empty() {
        return Err(Error::ShapeMismatch("empty level-1 pool".into()));
    }
    if let Some(f) = level1.iter().chain(level2).find(|f| !f.refittable()) {
        return Err(Error::RefitUnsupported(f.name().to_string()));
    }
    let (x, y) = train;
    let positions: Vec<usize> = (0..y.len()).collect();

    let folds1 = assign_folds(&positions, y, cfg.oof_folds, derive_seed(seed, LEVEL1_FOLD_TAG))?;
    let mut fitted1 = Vec::with_capacity(level1.len());
    let mut oof1 = Vec::with_capacity(level1.len());
    for f in level1 {
        let (fitted, oof) = FittedLearner::fit(f, x, y, class_count, &folds1)?;
        fitted1.push(fitted);
        oof1.push(oof);
    }

    let mut fitted2 = Vec::with_capacity(level2.len());
    if !level2.is_empty() {
        let x2 = augment(x, &oof1)?;
        let folds2 = assign_folds(&positions, y, cfg.oof_folds, derive_seed(seed, LEVEL2_FOLD_TAG))?;
        for f in level2 {
            fitted2.push(FittedLearner::fit(f, x2.view(), y, class_count, &folds2)?.0);
        }
    }

    let mut candidates = Vec::new();
    for (level, fitted) in [(1, &fitted1), (2, &fitted2)] {
        for l in fitted {
            for form in [CandidateForm::Full, CandidateForm::Bagged] {
                candidates.push(candidate_name(level, &l.name, form));
            }
        }
    }
    let mut model = CascadeModel {
        candidates,
        selection: GreedyFit { weights: crate::proba::WeightVector::uniform(1), selections: Vec::new() },
        val_candidates: Vec::new(),
        level1: fitted1,
        level2: fitted2,
    };
    let val_candidates = model.candidate_outputs(val.0)?;
    model.selection =
        fit_greedy_selection(&val_candidates, val.1, &GreedyConfig { iterations: cfg.final_selection_iterations })?;
    model.val_candidates = val_candidates;
    Ok(model)
}
