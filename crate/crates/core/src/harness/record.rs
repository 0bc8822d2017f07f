use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricBundle;
use crate::scalar::Real;

pub const RECORD_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Base,
    Strategy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for RecordError {
    fn from(e: &Error) -> Self {
        Self { kind: e.kind().to_string(), message: e.to_string() }
    }
}

/// Metric values of a successful run, flattened into the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetrics {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub roc_auc_ovr: Option<f64>,
    pub log_loss: f64,
    pub ece: f64,
    pub brier_rel: f64,
    pub aurc: f64,
    pub cov_at_95: f64,
    pub wga: Option<f64>,
}

impl<T: Real> From<&MetricBundle<T>> for RecordMetrics {
    fn from(m: &MetricBundle<T>) -> Self {
        Self {
            accuracy: m.accuracy.as_f64(),
            weighted_f1: m.weighted_f1.as_f64(),
            roc_auc_ovr: m.roc_auc_ovr.map(Real::as_f64),
            log_loss: m.log_loss.as_f64(),
            ece: m.ece.as_f64(),
            brier_rel: m.brier_rel.as_f64(),
            aurc: m.aurc.as_f64(),
            cov_at_95: m.cov_at_95.as_f64(),
            wga: m.wga.map(Real::as_f64),
        }
    }
}

/// One (dataset, method) outcome: a line of `records.jsonl`.
///
/// For a base model `pool_seconds` is its own fit and predict time and
/// `combiner_seconds` is zero. For a strategy `fit_seconds`/`predict_seconds`
/// cover the combiner alone (including any refits it performs) and
/// `pool_seconds` is the cached pool's total cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u32,
    pub dataset_id: String,
    pub method: String,
    pub kind: MethodKind,
    pub n_test: usize,
    /// Unix seconds.
    pub timestamp: u64,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RecordMetrics>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub pool_seconds: f64,
    pub combiner_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RecordError>,
    /// Argmax test predictions, aligned with `test_labels`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_predictions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_labels: Vec<usize>,
}

pub(crate) fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunRecord {
    pub fn failed(dataset_id: &str, method: &str, kind: MethodKind, n_test: usize, error: &Error) -> Self {
        Self {
            schema: RECORD_SCHEMA,
            dataset_id: dataset_id.into(),
            method: method.into(),
            kind,
            n_test,
            timestamp: now_unix(),
            metrics: None,
            fit_seconds: 0.0,
            predict_seconds: 0.0,
            pool_seconds: 0.0,
            combiner_seconds: 0.0,
            error: Some(error.into()),
            test_predictions: Vec::new(),
            test_labels: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.metrics.is_some()
    }

    pub fn accuracy(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.accuracy)
    }

    /// Time under the full-pipeline accounting: pool plus combiner.
    pub fn total_seconds(&self) -> f64 {
        self.pool_seconds + self.combiner_seconds
    }
}

/// Append-only JSONL sink.
pub struct RecordWriter {
    file: File,
}

impl RecordWriter {
    pub fn append(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        Ok(Self { file: OpenOptions::new().create(true).append(true).open(path)? })
    }

    /// Writes all records as one buffered append.
    pub fn write_all(&mut self, records: &[RunRecord]) -> Result<()> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.flush()?;
        Ok(())
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if record.schema != RECORD_SCHEMA {
            return Err(Error::Config(format!("{}:{}: unsupported record schema {}", path.display(), i + 1, record.schema)));
        }
        out.push(record);
    }
    Ok(out)
}
