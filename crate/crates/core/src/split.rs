//! Deterministic stratified partitioning and fold assignment.
//!
//! Every class's rows are shuffled with a SplitMix64 stream seeded from the split
//! seed. Partition sizes come from largest-remainder apportionment, so each
//! class receives `floor(f * n_c)` or one more row, and the partition total is
//! `round(f * n)` unless singleton caps intervene.

use serde::{Deserialize, Serialize};

use crate::data::class_sizes;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, shuffle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub test_fraction: f64,
    pub val_fraction_of_train: f64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, test_fraction: 0.20, val_fraction_of_train: 0.25 }
    }

    fn validate(&self) -> Result<()> {
        for f in [self.test_fraction, self.val_fraction_of_train] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidParameter(format!("fraction {f} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// A class that could only be placed in the training partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitWarning {
    pub class: usize,
    pub size: usize,
}

/// Disjoint train/validation/test row sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<SplitWarning>,
}

/// Largest-remainder apportionment of `fraction * total` over classes, capped so
/// each class keeps at least one row outside the partition.
fn apportion(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let exact: Vec<f64> = sizes.iter().map(|&s| fraction * s as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| (e + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // Larger fractional part first, lower class index on ties.
    order.sort_by(|&a, &b| {
        let fa = exact[a] - quota[a] as f64;
        let fb = exact[b] - quota[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut assigned: usize = quota.iter().sum();
    for &c in &order {
        if assigned >= target {
            break;
        }
        if exact[c] - quota[c] as f64 > 1e-9 {
            quota[c] += 1;
            assigned += 1;
        }
    }
    for (q, &s) in quota.iter_mut().zip(sizes) {
        *q = (*q).min(s.saturating_sub(1));
    }
    quota
}

fn rows_by_class(indices: &[usize], labels: &[usize], class_count: usize) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); class_count];
    for &i in indices {
        by_class[labels[i]].push(i);
    }
    by_class
}

/// Stratified 80/20 train+val/test split followed by a 75/25 train/val split.
///
/// Singleton classes go entirely to train and are reported as warnings.
pub fn stratified_split(labels: &[usize], class_count: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let sizes = class_sizes(labels, class_count);
    if let Some(class) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::ClassTooSmall { class });
    }
    let mut rng = rng_from_seed(derive_seed(spec.seed, "stratified-split"));
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut by_class = rows_by_class(&all, labels, class_count);
    for rows in &mut by_class {
        shuffle(rows, &mut rng);
    }

    let test_quota = apportion(&sizes, spec.test_fraction);
    let remaining: Vec<usize> = sizes.iter().zip(&test_quota).map(|(s, t)| s - t).collect();
    let val_quota = apportion(&remaining, spec.val_fraction_of_train);

    let mut split = Split { train: Vec::new(), val: Vec::new(), test: Vec::new(), warnings: Vec::new() };
    for (class, rows) in by_class.iter().enumerate() {
        if rows.len() == 1 {
            split.warnings.push(SplitWarning { class, size: 1 });
        }
        let (t, v) = (test_quota[class], val_quota[class]);
        split.test.extend_from_slice(&rows[..t]);
        split.val.extend_from_slice(&rows[t..t + v]);
        split.train.extend_from_slice(&rows[t + v..]);
        if rows.len() == t + v {
            return Err(Error::ClassTooSmall { class });
        }
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Fold index for every position of an index list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    /// `fold_of_row[p]` is the fold of the `p`-th entry of the assigned index list.
    pub fold_of_row: Vec<usize>,
    pub fold_count: usize,
}

impl FoldAssignment {
    /// Positions held out in `fold` and positions used for fitting, both ascending.
    pub fn partition(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut held = Vec::new();
        let mut fit = Vec::new();
        for (p, &f) in self.fold_of_row.iter().enumerate() {
            if f == fold {
                held.push(p);
            } else {
                fit.push(p);
            }
        }
        (held, fit)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.fold_of_row {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn len(&self) -> usize {
        self.fold_of_row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of_row.is_empty()
    }
}

/// Stratified fold assignment: classes in ascending order, each shuffled, dealt
/// round-robin over folds with the fold cursor carried across classes.
///
/// `labels` is indexed by the values in `indices`.
pub fn assign_folds(
    indices: &[usize],
    labels: &[usize],
    fold_count: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if fold_count < 2 {
        return Err(Error::InvalidParameter(format!("fold count {fold_count} < 2")));
    }
    if indices.len() < fold_count {
        return Err(Error::TooFewSamples { available: indices.len(), folds: fold_count });
    }
    let class_count = indices.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let positions: Vec<usize> = (0..indices.len()).collect();
    let local_labels: Vec<usize> = indices.iter().map(|&i| labels[i]).collect();
    let mut by_class = rows_by_class(&positions, &local_labels, class_count);
    let mut rng = rng_from_seed(derive_seed(seed, "folds"));
    let mut fold_of_row = vec![0; indices.len()];
    let mut cursor = 0;
    for rows in &mut by_class {
        shuffle(rows, &mut rng);
        for &p in rows.iter() {
            fold_of_row[p] = cursor % fold_count;
            cursor += 1;
        }
    }
    Ok(FoldAssignment { fold_of_row, fold_count })
}
