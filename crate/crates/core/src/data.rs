//! Dataset representation and CSV ingestion.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A classification table: finite features and class indices in `[0, C)`.
#[derive(Debug, Clone)]
pub struct Dataset<T: Real> {
    pub id: String,
    pub features: Array2<T>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    /// Feature column whose distinct values designate worst-group-accuracy groups.
    pub group_column: Option<usize>,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        id: impl Into<String>,
        features: Array2<T>,
        labels: Vec<usize>,
        class_count: usize,
        group_column: Option<usize>,
    ) -> Result<Self> {
        let id = id.into();
        if features.nrows() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows vs {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if class_count < 2 {
            return Err(Error::InvalidDataset(format!("{id}: fewer than two classes")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("{id}: non-finite feature value")));
        }
        let mut seen = vec![false; class_count];
        for &y in &labels {
            if y >= class_count {
                return Err(Error::InvalidDataset(format!("{id}: label {y} out of range")));
            }
            seen[y] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!("{id}: class {c} never appears")));
        }
        if let Some(g) = group_column {
            if g >= features.ncols() {
                return Err(Error::InvalidDataset(format!("{id}: group column {g} out of range")));
            }
        }
        Ok(Self { id, features, labels, class_count, group_column })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        class_sizes(&self.labels, self.class_count)
    }

    /// Rows `idx` of the feature matrix, in the given order.
    pub fn rows(&self, idx: &[usize]) -> Array2<T> {
        self.features.select(Axis(0), idx)
    }

    pub fn labels_at(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }

    /// Group id per row, numbered by first appearance of each distinct value of
    /// the group column.
    pub fn groups(&self) -> Option<Vec<usize>> {
        let col = self.group_column?;
        let mut ids: HashMap<u64, usize> = HashMap::new();
        Some(
            self.features
                .column(col)
                .iter()
                .map(|v| {
                    let next = ids.len();
                    *ids.entry(v.as_f64().to_bits()).or_insert(next)
                })
                .collect(),
        )
    }
}

pub fn class_sizes(labels: &[usize], class_count: usize) -> Vec<usize> {
    let mut sizes = vec![0; class_count];
    for &y in labels {
        sizes[y] += 1;
    }
    sizes
}

/// How a CSV file becomes a [`Dataset`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    /// Name of the target column.
    pub target: String,
    /// Optional categorical column designating worst-group-accuracy groups.
    #[serde(default)]
    pub group: Option<String>,
    /// Fill missing numeric cells with the column median (categorical: the mode)
    /// instead of rejecting the file.
    #[serde(default)]
    pub median_impute: bool,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "?" | "NA" | "NaN" | "nan" | "null")
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headed CSV. Numeric columns are parsed as reals; any column with a
/// non-numeric cell is integer-encoded by first-appearance order. Class labels
/// are numbered by sorted distinct target value (numeric order when every target
/// parses as a number).
pub fn read_csv<T: Real>(path: &Path, id: &str, opts: &CsvOptions) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_col = header
        .iter()
        .position(|h| *h == opts.target)
        .ok_or_else(|| Error::Config(format!("{id}: target column `{}` not found", opts.target)))?;
    let group_name = opts.group.as_deref();
    let group_src = match group_name {
        Some(g) => Some(
            header
                .iter()
                .position(|h| h == g)
                .ok_or_else(|| Error::Config(format!("{id}: group column `{g}` not found")))?,
        ),
        None => None,
    };

    let mut cells: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        cells.push(record.iter().map(str::to_string).collect());
    }
    if cells.is_empty() {
        return Err(Error::InvalidDataset(format!("{id}: no rows")));
    }

    let targets: Vec<&str> = cells.iter().map(|r| r[target_col].trim()).collect();
    if targets.iter().any(|t| is_missing(t)) {
        return Err(Error::InvalidDataset(format!("{id}: missing target value")));
    }
    let mut classes: Vec<&str> = targets.clone();
    if targets.iter().all(|t| parse_number(t).is_some()) {
        classes.sort_by(|a, b| parse_number(a).unwrap().total_cmp(&parse_number(b).unwrap()));
    } else {
        classes.sort_unstable();
    }
    classes.dedup();
    let class_index: HashMap<&str, usize> =
        classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let labels: Vec<usize> = targets.iter().map(|t| class_index[t]).collect();

    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != target_col).collect();
    let n = cells.len();
    let mut features = Array2::<T>::zeros((n, feature_cols.len()));
    for (j, &col) in feature_cols.iter().enumerate() {
        let column: Vec<&str> = cells.iter().map(|r| r[col].as_str()).collect();
        let encoded = encode_column(&column, opts.median_impute)
            .map_err(|row| Error::InvalidDataset(format!(
                "{id}: missing value in column `{}` at row {}",
                header[col],
                row + 1
            )))?;
        for (i, v) in encoded.into_iter().enumerate() {
            features[[i, j]] = T::lit(v);
        }
    }
    let group_column = group_src.map(|g| feature_cols.iter().position(|&c| c == g).unwrap());
    Dataset::new(id, features, labels, classes.len(), group_column)
}

/// Writes `dataset` as a headed CSV: feature columns `x0, x1, …` (the group
/// column, if any, is named `group`) followed by a `target` column of class indices.
pub fn write_csv<T: Real>(dataset: &Dataset<T>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..dataset.width())
        .map(|j| if Some(j) == dataset.group_column { "group".to_string() } else { format!("x{j}") })
        .collect();
    header.push("target".into());
    w.write_record(&header)?;
    for (row, &y) in dataset.features.rows().into_iter().zip(&dataset.labels) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(y.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Encodes one column; `Err(row)` names the first missing cell when imputation is off.
fn encode_column(column: &[&str], impute: bool) -> std::result::Result<Vec<f64>, usize> {
    let numeric = column.iter().all(|c| is_missing(c) || parse_number(c).is_some());
    let mut values: Vec<Option<f64>> = Vec::with_capacity(column.len());
    if numeric {
        values.extend(column.iter().map(|c| parse_number(c)));
    } else {
        let mut codes: HashMap<&str, usize> = HashMap::new();
        for c in column {
            if is_missing(c) {
                values.push(None);
            } else {
                let next = codes.len();
                values.push(Some(*codes.entry(c.trim()).or_insert(next) as f64));
            }
        }
    }
    if let Some(row) = values.iter().position(Option::is_none) {
        if !impute {
            return Err(row);
        }
        let observed: Vec<f64> = values.iter().flatten().copied().collect();
        if observed.is_empty() {
            return Err(row);
        }
        let fill = if numeric { median(observed) } else { mode(&observed) };
        return Ok(values.into_iter().map(|v| v.unwrap_or(fill)).collect());
    }
    Ok(values.into_iter().map(Option::unwrap).collect())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

// Codes are first-appearance integers, so the lowest code wins ties.
fn mode(v: &[f64]) -> f64 {
    let mut counts: Vec<usize> = Vec::new();
    for &x in v {
        let code = x as usize;
        if counts.len() <= code {
            counts.resize(code + 1, 0);
        }
        counts[code] += 1;
    }
    let best = counts.iter().max().copied().unwrap_or(0);
    counts.iter().position(|&c| c == best).unwrap_or(0) as f64
}
