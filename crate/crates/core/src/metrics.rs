//! Per-run evaluation metrics.
//!
//! Hard predictions use the lowest-index argmax everywhere. Calibration metrics
//! bin the top-class confidence into equal-width right-closed bins on (0, 1].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proba::{ProbabilityMatrix, PROBA_EPS};
use crate::scalar::Real;

pub const DEFAULT_BINS: usize = 15;
pub const COVERAGE_TARGET: f64 = 0.95;
/// Groups smaller than this are pooled into one rest group for worst-group accuracy.
pub const MIN_GROUP_SIZE: usize = 5;

fn check_shape<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Result<()> {
    if probs.rows() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {} labels", probs.rows(), labels.len())));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= probs.classes()) {
        return Err(Error::ShapeMismatch(format!("label {y} outside {} classes", probs.classes())));
    }
    Ok(())
}

fn correctness<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Vec<bool> {
    probs.argmax().iter().zip(labels).map(|(p, y)| p == y).collect()
}

fn ratio<T: Real>(num: usize, den: usize) -> T {
    T::of_usize(num) / T::of_usize(den)
}

pub fn accuracy<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Result<T> {
    check_shape(probs, labels)?;
    if labels.is_empty() {
        return Err(Error::DegenerateInput("no rows".into()));
    }
    let correct = correctness(probs, labels).iter().filter(|&&c| c).count();
    Ok(ratio(correct, labels.len()))
}

/// Accuracy of hard predictions.
pub fn hard_accuracy<T: Real>(preds: &[usize], labels: &[usize]) -> T {
    let correct = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    ratio(correct, labels.len())
}

/// Support-weighted mean of per-class F1.
pub fn weighted_f1<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Result<T> {
    check_shape(probs, labels)?;
    let c = probs.classes();
    let (mut tp, mut fp, mut fneg) = (vec![0usize; c], vec![0usize; c], vec![0usize; c]);
    for (p, &y) in probs.argmax().into_iter().zip(labels) {
        if p == y {
            tp[y] += 1;
        } else {
            fp[p] += 1;
            fneg[y] += 1;
        }
    }
    let n = labels.len();
    let mut total = T::zero();
    for k in 0..c {
        let support = tp[k] + fneg[k];
        let denom = 2 * tp[k] + fp[k] + fneg[k];
        if support == 0 || denom == 0 {
            continue;
        }
        let f1: T = ratio(2 * tp[k], denom);
        total += f1 * ratio(support, n);
    }
    Ok(total)
}

/// Mann-Whitney AUC of `scores` for the positive rows, ties counting one half.
fn binary_auc<T: Real>(scores: &[T], positive: &[bool]) -> T {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![T::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let mid = T::of_usize(i + j + 2) / T::lit(2.0);
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = n - pos;
    let rank_sum: T = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(&r, _)| r).sum();
    let p = T::of_usize(pos);
    (rank_sum - p * (p + T::one()) / T::lit(2.0)) / (p * T::of_usize(neg))
}

/// One-vs-rest ROC-AUC averaged with class-support weights over the classes
/// present in `labels`.
pub fn roc_auc_ovr<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Result<T> {
    check_shape(probs, labels)?;
    let n = labels.len();
    let mut support = vec![0usize; probs.classes()];
    for &y in labels {
        support[y] += 1;
    }
    if support.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let view = probs.view();
    let mut total = T::zero();
    for (c, &s) in support.iter().enumerate() {
        if s == 0 {
            continue;
        }
        let scores: Vec<T> = view.column(c).to_vec();
        let positive: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        total += binary_auc(&scores, &positive) * ratio(s, n);
    }
    Ok(total)
}

/// Mean negative log-likelihood after clipping to `[1e-15, 1]` and renormalising.
pub fn log_loss<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Result<T> {
    check_shape(probs, labels)?;
    let clipped = probs.clipped(T::lit(PROBA_EPS));
    let total: T = labels.iter().enumerate().map(|(i, &y)| -clipped.row(i)[y].ln()).sum();
    Ok(total / T::of_usize(labels.len()))
}

/// Bin of `conf` among `bins` right-closed bins `((b)/B, (b+1)/B]`; edges go low.
pub fn confidence_bin<T: Real>(conf: T, bins: usize) -> usize {
    let b = T::of_usize(bins);
    let mut k = (conf * b).ceil().to_usize().unwrap_or(0).saturating_sub(1).min(bins - 1);
    while k > 0 && conf <= T::of_usize(k) / b {
        k -= 1;
    }
    while k + 1 < bins && conf > T::of_usize(k + 1) / b {
        k += 1;
    }
    k
}

struct Bin<T> {
    count: usize,
    correct: usize,
    conf_sum: T,
}

fn reliability_bins<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize], bins: usize) -> Result<Vec<Bin<T>>> {
    check_shape(probs, labels)?;
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be at least 1".into()));
    }
    let mut out: Vec<Bin<T>> = (0..bins).map(|_| Bin { count: 0, correct: 0, conf_sum: T::zero() }).collect();
    for ((conf, ok), _) in probs.confidence().into_iter().zip(correctness(probs, labels)).zip(labels) {
        let bin = &mut out[confidence_bin(conf, bins)];
        bin.count += 1;
        bin.conf_sum += conf;
        if ok {
            bin.correct += 1;
        }
    }
    Ok(out)
}

fn binned_gap<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize], bins: usize, gap: impl Fn(T) -> T) -> Result<T> {
    let n = labels.len();
    let mut total = T::zero();
    for b in reliability_bins(probs, labels, bins)? {
        if b.count == 0 {
            continue;
        }
        let acc: T = ratio(b.correct, b.count);
        let conf = b.conf_sum / T::of_usize(b.count);
        total += ratio::<T>(b.count, n) * gap(acc - conf);
    }
    Ok(total)
}

/// Expected calibration error: `Σ_b (n_b/n)·|acc_b − conf_b|`.
pub fn ece<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize], bins: usize) -> Result<T> {
    binned_gap(probs, labels, bins, |d| d.abs())
}

/// Reliability term of the Brier decomposition of the top-class correctness
/// problem: `Σ_b (n_b/n)·(conf_b − acc_b)²`, binned as [`ece`].
pub fn brier_reliability<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize], bins: usize) -> Result<T> {
    binned_gap(probs, labels, bins, |d| d * d)
}

/// Prefix correct counts after sorting rows by descending confidence (row index breaks ties).
fn prefix_correct<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Result<Vec<usize>> {
    check_shape(probs, labels)?;
    if labels.is_empty() {
        return Err(Error::DegenerateInput("no rows".into()));
    }
    let conf = probs.confidence();
    let ok = correctness(probs, labels);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| conf[b].partial_cmp(&conf[a]).unwrap().then(a.cmp(&b)));
    let mut running = 0;
    Ok(order
        .into_iter()
        .map(|i| {
            running += ok[i] as usize;
            running
        })
        .collect())
}

/// `(coverage, risk)` at every prefix `i/n`, with `risk = 1 − prefix accuracy`.
pub fn risk_coverage_curve<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Result<Vec<(T, T)>> {
    let n = labels.len();
    Ok(prefix_correct(probs, labels)?
        .into_iter()
        .enumerate()
        .map(|(i, c)| (ratio(i + 1, n), T::one() - ratio(c, i + 1)))
        .collect())
}

/// Area under the risk-coverage curve as the mean prefix risk.
pub fn aurc<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize]) -> Result<T> {
    let curve = risk_coverage_curve(probs, labels)?;
    let total: T = curve.iter().map(|&(_, r)| r).sum();
    Ok(total / T::of_usize(curve.len()))
}

/// Largest confidence-ordered coverage whose prefix accuracy reaches `target`; 0 if none.
pub fn coverage_at_accuracy<T: Real>(probs: &ProbabilityMatrix<T>, labels: &[usize], target: T) -> Result<T> {
    let n = labels.len();
    let best = prefix_correct(probs, labels)?
        .into_iter()
        .enumerate()
        .filter(|&(i, c)| ratio::<T>(c, i + 1) >= target)
        .map(|(i, _)| i + 1)
        .max()
        .unwrap_or(0);
    Ok(ratio(best, n))
}

/// Minimum per-group accuracy. Groups under [`MIN_GROUP_SIZE`] members are pooled.
pub fn worst_group_accuracy<T: Real>(
    probs: &ProbabilityMatrix<T>,
    labels: &[usize],
    groups: Option<&[usize]>,
) -> Result<T> {
    let groups = groups.ok_or(Error::NoGroups)?;
    check_shape(probs, labels)?;
    if groups.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} groups vs {} labels", groups.len(), labels.len())));
    }
    if groups.is_empty() {
        return Err(Error::NoGroups);
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for &g in groups {
        *sizes.entry(g).or_default() += 1;
    }
    // Key `None` is the pooled rest group.
    let mut tally: HashMap<Option<usize>, (usize, usize)> = HashMap::new();
    for ((&g, ok), _) in groups.iter().zip(correctness(probs, labels)).zip(labels) {
        let key = (sizes[&g] >= MIN_GROUP_SIZE).then_some(g);
        let e = tally.entry(key).or_default();
        e.0 += ok as usize;
        e.1 += 1;
    }
    Ok(tally
        .values()
        .map(|&(c, n)| ratio::<T>(c, n))
        .fold(T::infinity(), |m, a| m.min(a)))
}

/// Every metric of one run; times are filled in by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MetricBundle<T: Real> {
    pub accuracy: T,
    pub weighted_f1: T,
    pub roc_auc_ovr: Option<T>,
    pub log_loss: T,
    pub ece: T,
    pub brier_rel: T,
    pub aurc: T,
    pub cov_at_95: T,
    pub wga: Option<T>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

impl<T: Real> MetricBundle<T> {
    /// ROC-AUC is `None` when the test labels hold one class; WGA is `None`
    /// without groups.
    pub fn evaluate(probs: &ProbabilityMatrix<T>, labels: &[usize], groups: Option<&[usize]>) -> Result<Self> {
        let roc_auc_ovr = match roc_auc_ovr(probs, labels) {
            Ok(v) => Some(v),
            Err(Error::SingleClass) => None,
            Err(e) => return Err(e),
        };
        let wga = match worst_group_accuracy(probs, labels, groups) {
            Ok(v) => Some(v),
            Err(Error::NoGroups) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            accuracy: accuracy(probs, labels)?,
            weighted_f1: weighted_f1(probs, labels)?,
            roc_auc_ovr,
            log_loss: log_loss(probs, labels)?,
            ece: ece(probs, labels, DEFAULT_BINS)?,
            brier_rel: brier_reliability(probs, labels, DEFAULT_BINS)?,
            aurc: aurc(probs, labels)?,
            cov_at_95: coverage_at_accuracy(probs, labels, T::lit(COVERAGE_TARGET))?,
            wga,
            fit_seconds: 0.0,
            predict_seconds: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn pm(rows: &[&[f64]]) -> ProbabilityMatrix<f64> {
        ProbabilityMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn constant_conf(n: usize, conf: f64, correct: usize) -> (ProbabilityMatrix<f64>, Vec<usize>) {
        let probs = ProbabilityMatrix::new(Array2::from_shape_fn((n, 2), |(_, j)| if j == 0 { conf } else { 1.0 - conf })).unwrap();
        let labels = (0..n).map(|i| if i < correct { 0 } else { 1 }).collect();
        (probs, labels)
    }

    #[test]
    fn accuracy_cases() {
        let one_hot = ProbabilityMatrix::<f64>::one_hot(&[0, 2, 1], 3);
        assert_eq!(accuracy(&one_hot, &[0, 2, 1]).unwrap(), 1.0);
        let uniform = ProbabilityMatrix::<f64>::uniform(4, 3);
        assert_eq!(accuracy(&uniform, &[0, 0, 0, 0]).unwrap(), 1.0);
        assert!(accuracy(&uniform, &[0, 0]).is_err());
    }

    #[test]
    fn weighted_f1_hand_contingencies() {
        // TP=2, FP=1, FN=1, TN=2 with class 1 as positive.
        let preds = [1, 1, 1, 0, 0, 0];
        let labels = [1, 1, 0, 1, 0, 0];
        let probs = ProbabilityMatrix::<f64>::one_hot(&preds, 2);
        assert!((weighted_f1(&probs, &labels).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let all_zero = ProbabilityMatrix::<f64>::one_hot(&[0, 0, 0, 0], 2);
        assert!((weighted_f1(&all_zero, &[0, 0, 1, 1]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(weighted_f1(&all_zero, &[0, 0, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn auc_cases() {
        let ranked = pm(&[&[0.9, 0.1], &[0.8, 0.2], &[0.3, 0.7], &[0.1, 0.9]]);
        assert_eq!(roc_auc_ovr(&ranked, &[0, 0, 1, 1]).unwrap(), 1.0);
        let flat = ProbabilityMatrix::<f64>::uniform(4, 2);
        assert_eq!(roc_auc_ovr(&flat, &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(matches!(roc_auc_ovr(&flat, &[1, 1, 1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn log_loss_cases() {
        let uniform = ProbabilityMatrix::<f64>::uniform(3, 2);
        assert!((log_loss(&uniform, &[0, 1, 1]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let one_hot = ProbabilityMatrix::<f64>::one_hot(&[0, 2, 1], 3);
        let l = log_loss(&one_hot, &[0, 2, 1]).unwrap();
        assert!((0.0..1e-13).contains(&l));
    }

    #[test]
    fn calibration_single_bin_arithmetic() {
        let (p, y) = constant_conf(10, 0.9, 5);
        assert!((ece(&p, &y, 15).unwrap() - 0.4).abs() < 1e-12);
        assert!((brier_reliability(&p, &y, 15).unwrap() - 0.16).abs() < 1e-12);
        let (p, y) = constant_conf(6, 1.0, 6);
        assert_eq!(ece(&p, &y, 15).unwrap(), 0.0);
        assert_eq!(brier_reliability(&p, &y, 15).unwrap(), 0.0);
        assert!(ece(&p, &y, 0).is_err());
    }

    #[test]
    fn bin_edges_go_low_except_one() {
        assert_eq!(confidence_bin(1.0f64, 15), 14);
        assert_eq!(confidence_bin(0.5f64, 2), 0);
        assert_eq!(confidence_bin(0.500001f64, 2), 1);
        assert_eq!(confidence_bin(0.2f64, 15), 2);
        assert_eq!(confidence_bin(1.0f64 / 3.0, 3), 0);
    }

    #[test]
    fn aurc_cases() {
        let right = ProbabilityMatrix::<f64>::one_hot(&[0, 1, 1], 2);
        assert_eq!(aurc(&right, &[0, 1, 1]).unwrap(), 0.0);
        assert_eq!(aurc(&right, &[1, 0, 0]).unwrap(), 1.0);
        // Confidence order: rows 2, 0, 3, 1 with correctness [1, 0, 1, 0].
        let p = pm(&[&[0.8, 0.2], &[0.6, 0.4], &[0.1, 0.9], &[0.3, 0.7]]);
        let y = [1, 1, 1, 1];
        let expected = (0.0 + 0.5 + 1.0 / 3.0 + 0.5) / 4.0;
        assert!((aurc(&p, &y).unwrap() - expected).abs() < 1e-15);
        let curve = risk_coverage_curve(&p, &y).unwrap();
        assert_eq!(curve.last().unwrap().1, 1.0 - accuracy(&p, &y).unwrap());
    }

    #[test]
    fn coverage_cases() {
        let right = ProbabilityMatrix::<f64>::one_hot(&[0, 1, 1], 2);
        assert_eq!(coverage_at_accuracy(&right, &[0, 1, 1], 0.95).unwrap(), 1.0);
        let wrong = ProbabilityMatrix::<f64>::one_hot(&[0, 0], 2);
        assert_eq!(coverage_at_accuracy(&wrong, &[1, 1], 0.95).unwrap(), 0.0);
        assert_eq!(coverage_at_accuracy(&wrong, &[1, 1], 0.0).unwrap(), 1.0);
    }

    #[test]
    fn worst_group_cases() {
        let p = ProbabilityMatrix::<f64>::one_hot(&[0; 10], 2);
        let labels = [0, 0, 0, 0, 0, 0, 0, 1, 1, 0];
        assert!(matches!(worst_group_accuracy(&p, &labels, None), Err(Error::NoGroups)));
        let one = [3; 10];
        assert_eq!(worst_group_accuracy(&p, &labels, Some(&one)).unwrap(), accuracy(&p, &labels).unwrap());
        let two = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        assert_eq!(worst_group_accuracy(&p, &labels, Some(&two)).unwrap(), 0.6);
        // Two small groups of 2 pool into one rest group.
        let pooled = [0, 0, 0, 0, 0, 0, 7, 7, 8, 8];
        assert_eq!(worst_group_accuracy(&p, &labels, Some(&pooled)).unwrap(), 0.5);
    }

    #[test]
    fn bundle_handles_optional_metrics() {
        let p = ProbabilityMatrix::<f64>::one_hot(&[1, 1], 2);
        let b = MetricBundle::evaluate(&p, &[1, 1], None).unwrap();
        assert_eq!(b.roc_auc_ovr, None);
        assert_eq!(b.wga, None);
        assert_eq!(b.accuracy, 1.0);
        let json = serde_json::to_value(&b).unwrap();
        assert!(json.get("cov_at_95").is_some());
    }
}
