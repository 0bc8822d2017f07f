//! Precomputed predictions stored on disk.
//!
//! Format: a header-less CSV of n rows × C columns, plus a sidecar JSON file with
//! the same stem: `{"model": .., "dataset": .., "split": "train"|"val"|"test"}`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{Classifier, LearnerFactory, ModelKind};
use crate::error::{Error, Result};
use crate::proba::ProbabilityMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub model: String,
    pub dataset: String,
    pub split: SplitName,
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// A predict-only pool member returning a stored matrix.
#[derive(Debug, Clone)]
pub struct FileBackedPredictor<T: Real> {
    pub sidecar: Sidecar,
    matrix: ProbabilityMatrix<T>,
}

impl<T: Real> FileBackedPredictor<T> {
    pub fn new(sidecar: Sidecar, matrix: ProbabilityMatrix<T>) -> Self {
        Self { sidecar, matrix }
    }

    /// Loads `<stem>.csv` and its `<stem>.json` sidecar.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(csv_path))?)?;
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(csv_path)?;
        let mut rows: Vec<Vec<T>> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|cell| {
                    cell.trim()
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|e| Error::InvalidProbabilities(format!("{}: {e}", csv_path.display())))
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        Ok(Self { sidecar, matrix: ProbabilityMatrix::from_rows(&rows)? })
    }

    /// Writes the matrix with shortest round-trip decimals, plus the sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let mut text = String::new();
        for row in self.matrix.view().rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    text.push(',');
                }
                write!(text, "{v}").expect("write to string");
            }
            text.push('\n');
        }
        fs::write(csv_path, text)?;
        fs::write(sidecar_path(csv_path), serde_json::to_string_pretty(&self.sidecar)?)?;
        Ok(())
    }

    pub fn matrix(&self) -> &ProbabilityMatrix<T> {
        &self.matrix
    }
}

impl<T: Real> Classifier<T> for FileBackedPredictor<T> {
    fn fit(&mut self, _: ArrayView2<'_, T>, _: &[usize], _: usize, _: u64) -> Result<()> {
        Err(Error::RefitUnsupported(self.sidecar.model.clone()))
    }

    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        if features.nrows() != self.matrix.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} query rows vs {} stored rows for {}/{}",
                features.nrows(),
                self.matrix.rows(),
                self.sidecar.dataset,
                self.sidecar.split.as_str()
            )));
        }
        Ok(self.matrix.clone())
    }
}

impl<T: Real> LearnerFactory<T> for FileBackedPredictor<T> {
    fn name(&self) -> &str {
        &self.sidecar.model
    }

    fn kind(&self) -> ModelKind {
        ModelKind::FileBacked
    }

    fn build(&self) -> Result<Box<dyn Classifier<T>>> {
        Ok(Box::new(self.clone()))
    }

    fn refittable(&self) -> bool {
        false
    }
}
