//! Pairwise diversity of pool members and the consensus ceiling.
//!
//! Per pair, each measure is averaged over tasks; pool figures are then the
//! unweighted mean over unordered pairs. Undefined values (Q with `ad + bc = 0`,
//! kappa with chance agreement 1) are excluded and listed, never imputed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Joint correctness counts of two predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// Both correct.
    pub a: usize,
    /// Only the first correct.
    pub b: usize,
    /// Only the second correct.
    pub c: usize,
    /// Both wrong.
    pub d: usize,
}

impl ContingencyTable {
    pub fn n(&self) -> usize {
        self.a + self.b + self.c + self.d
    }
}

pub fn contingency(first: &[usize], second: &[usize], labels: &[usize]) -> Result<ContingencyTable> {
    if first.len() != labels.len() || second.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction lengths {} and {} vs {} labels",
            first.len(),
            second.len(),
            labels.len()
        )));
    }
    let mut t = ContingencyTable::default();
    for ((&p, &q), &y) in first.iter().zip(second).zip(labels) {
        match (p == y, q == y) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    Ok(t)
}

/// Yule's Q, `(ad − bc)/(ad + bc)`; `None` when `ad + bc = 0`.
pub fn q_statistic<T: Real>(t: &ContingencyTable) -> Option<T> {
    let ad = T::of_usize(t.a) * T::of_usize(t.d);
    let bc = T::of_usize(t.b) * T::of_usize(t.c);
    let den = ad + bc;
    (den > T::zero()).then(|| (ad - bc) / den)
}

/// Cohen's kappa on the correctness indicators.
pub fn cohen_kappa<T: Real>(t: &ContingencyTable) -> Result<T> {
    let n = t.n();
    if n == 0 {
        return Err(Error::DegenerateInput("empty contingency table".into()));
    }
    let f = |v: usize| T::of_usize(v);
    let nn = f(n) * f(n);
    let observed = f(t.a + t.d) / f(n);
    let chance = (f(t.a + t.b) * f(t.a + t.c) + f(t.c + t.d) * f(t.b + t.d)) / nn;
    if chance == T::one() {
        return Err(Error::DegenerateAgreement);
    }
    Ok((observed - chance) / (T::one() - chance))
}

/// Fraction of rows where exactly one of the two is correct.
pub fn disagreement<T: Real>(t: &ContingencyTable) -> Result<T> {
    if t.n() == 0 {
        return Err(Error::DegenerateInput("empty contingency table".into()));
    }
    Ok(T::of_usize(t.b + t.c) / T::of_usize(t.n()))
}

/// Hard predictions of every pool member on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPredictions {
    pub task: String,
    pub labels: Vec<usize>,
    /// One label vector per model, in pool order.
    pub predictions: Vec<Vec<usize>>,
}

/// A (pair, task) cell left out of a measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub first: String,
    pub second: String,
    pub task: String,
    pub measure: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct DiversityReport<T: Real> {
    pub models: Vec<String>,
    /// Symmetric K×K matrix of per-pair mean Q; the diagonal and pairs undefined on
    /// every task are null.
    pub per_pair_q: Vec<Vec<Option<T>>>,
    pub mean_q: Option<T>,
    /// Population standard deviation of the defined per-pair means.
    pub std_q: Option<T>,
    pub mean_kappa: Option<T>,
    pub mean_disagreement: T,
    /// Pairs whose Q is undefined on every task.
    pub undefined_pairs: Vec<(String, String)>,
    pub exclusions: Vec<Exclusion>,
}

fn mean<T: Real>(values: &[T]) -> Option<T> {
    (!values.is_empty()).then(|| values.iter().copied().sum::<T>() / T::of_usize(values.len()))
}

fn population_std<T: Real>(values: &[T]) -> Option<T> {
    let m = mean(values)?;
    let var = values.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::of_usize(values.len());
    Some(var.sqrt())
}

/// Pair-then-pool diversity over `tasks` for the models named in `models`.
pub fn pool_diversity<T: Real>(models: &[String], tasks: &[TaskPredictions]) -> Result<DiversityReport<T>> {
    let k = models.len();
    if k < 2 {
        return Err(Error::DegenerateInput("diversity needs at least two models".into()));
    }
    if tasks.is_empty() {
        return Err(Error::DegenerateInput("diversity needs at least one task".into()));
    }
    if let Some(t) = tasks.iter().find(|t| t.predictions.len() != k) {
        return Err(Error::ShapeMismatch(format!("task {} has {} models, expected {k}", t.task, t.predictions.len())));
    }
    let mut per_pair_q = vec![vec![None; k]; k];
    let (mut pair_q, mut pair_kappa, mut pair_dis) = (Vec::new(), Vec::new(), Vec::new());
    let mut undefined_pairs = Vec::new();
    let mut exclusions = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (mut qs, mut kappas, mut dis) = (Vec::new(), Vec::new(), Vec::new());
            for task in tasks {
                let t = contingency(&task.predictions[i], &task.predictions[j], &task.labels)?;
                let mut exclude = |measure: &str| {
                    exclusions.push(Exclusion {
                        first: models[i].clone(),
                        second: models[j].clone(),
                        task: task.task.clone(),
                        measure: measure.into(),
                    })
                };
                match q_statistic::<T>(&t) {
                    Some(q) => qs.push(q),
                    None => exclude("q"),
                }
                match cohen_kappa::<T>(&t) {
                    Ok(v) => kappas.push(v),
                    Err(Error::DegenerateAgreement) => exclude("kappa"),
                    Err(e) => return Err(e),
                }
                dis.push(disagreement::<T>(&t)?);
            }
            match mean(&qs) {
                Some(q) => {
                    per_pair_q[i][j] = Some(q);
                    per_pair_q[j][i] = Some(q);
                    pair_q.push(q);
                }
                None => undefined_pairs.push((models[i].clone(), models[j].clone())),
            }
            if let Some(v) = mean(&kappas) {
                pair_kappa.push(v);
            }
            pair_dis.extend(mean(&dis));
        }
    }
    Ok(DiversityReport {
        models: models.to_vec(),
        per_pair_q,
        mean_q: mean(&pair_q),
        std_q: population_std(&pair_q),
        mean_kappa: mean(&pair_kappa),
        mean_disagreement: mean(&pair_dis).unwrap_or_else(T::zero),
        undefined_pairs,
        exclusions,
    })
}

/// Rows on which every pool member predicts the same label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ConsensusReport<T: Real> {
    pub consensus_fraction: T,
    /// `1 − consensus_fraction`: the largest possible accuracy gap between any
    /// convex ensemble of the pool and any of its members.
    pub ceiling_bound: T,
    pub consensus_mask: Vec<bool>,
}

pub fn consensus_report<T: Real>(predictions: &[Vec<usize>], labels: &[usize]) -> Result<ConsensusReport<T>> {
    let n = labels.len();
    if predictions.is_empty() {
        return Err(Error::DegenerateInput("no predictions".into()));
    }
    if let Some(p) = predictions.iter().find(|p| p.len() != n) {
        return Err(Error::ShapeMismatch(format!("{} predictions vs {n} labels", p.len())));
    }
    if n == 0 {
        return Err(Error::DegenerateInput("no rows".into()));
    }
    let mask: Vec<bool> = (0..n).map(|i| predictions.iter().all(|p| p[i] == predictions[0][i])).collect();
    let fraction = T::of_usize(mask.iter().filter(|&&m| m).count()) / T::of_usize(n);
    Ok(ConsensusReport { consensus_fraction: fraction, ceiling_bound: T::one() - fraction, consensus_mask: mask })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(a: usize, b: usize, c: usize, d: usize) -> ContingencyTable {
        ContingencyTable { a, b, c, d }
    }

    #[test]
    fn contingency_cases() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let preds = [0, 1, 0, 1, 0, 1, 1, 0, 1, 0];
        assert_eq!(contingency(&preds, &preds, &labels).unwrap(), table(6, 0, 0, 4));
        let flipped: Vec<usize> = preds.iter().map(|p| 1 - p).collect();
        let t = contingency(&preds, &flipped, &labels).unwrap();
        assert_eq!((t.a, t.d), (0, 0));
        assert!(contingency(&preds, &preds[..3], &labels).is_err());
    }

    #[test]
    fn q_values() {
        assert_eq!(q_statistic::<f64>(&table(6, 0, 0, 4)), Some(1.0));
        assert_eq!(q_statistic::<f64>(&table(0, 5, 5, 0)), Some(-1.0));
        assert!((q_statistic::<f64>(&table(4, 1, 1, 4)).unwrap() - 15.0 / 17.0).abs() < 1e-15);
        assert_eq!(q_statistic::<f64>(&table(5, 0, 5, 0)), None);
        let t = table(3, 2, 7, 1);
        assert_eq!(q_statistic::<f64>(&t), q_statistic(&table(3, 7, 2, 1)));
        assert_eq!(q_statistic::<f64>(&t).map(|q| -q), q_statistic(&table(2, 3, 1, 7)));
    }

    #[test]
    fn kappa_values() {
        assert_eq!(cohen_kappa::<f64>(&table(4, 0, 0, 4)).unwrap(), 1.0);
        assert_eq!(cohen_kappa::<f64>(&table(4, 4, 4, 4)).unwrap(), 0.0);
        assert!(matches!(cohen_kappa::<f64>(&table(9, 0, 0, 0)), Err(Error::DegenerateAgreement)));
    }

    #[test]
    fn disagreement_values() {
        assert_eq!(disagreement::<f64>(&table(6, 0, 0, 4)).unwrap(), 0.0);
        assert_eq!(disagreement::<f64>(&table(0, 5, 5, 0)).unwrap(), 1.0);
        assert_eq!(disagreement::<f64>(&table(4, 1, 1, 4)).unwrap(), 0.2);
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn identical_models_have_unit_q() {
        let tasks: Vec<TaskPredictions> = (0..3)
            .map(|t| {
                let labels = vec![0, 1, 1, 0, 1];
                let p = vec![0, 1, 0, 0, (t % 2)];
                TaskPredictions { task: format!("t{t}"), labels, predictions: vec![p.clone(), p] }
            })
            .collect();
        let r = pool_diversity::<f64>(&names(2), &tasks).unwrap();
        assert_eq!(r.mean_q, Some(1.0));
        assert_eq!(r.std_q, Some(0.0));
        assert_eq!(r.per_pair_q[0][0], None);
    }

    #[test]
    fn complementary_pair_in_three_model_pool() {
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 1];
        let right = labels.clone();
        let wrong: Vec<usize> = labels.iter().map(|y| 1 - y).collect();
        // m0 right on rows 0..4, m1 right on rows 4..8, m2 right on 0..2 and 4..6.
        let m0: Vec<usize> = (0..8).map(|i| if i < 4 { right[i] } else { wrong[i] }).collect();
        let m1: Vec<usize> = (0..8).map(|i| if i >= 4 { right[i] } else { wrong[i] }).collect();
        let m2: Vec<usize> = (0..8).map(|i| if i % 4 < 2 { right[i] } else { wrong[i] }).collect();
        let tasks = vec![TaskPredictions { task: "t".into(), labels, predictions: vec![m0, m1, m2] }];
        let r = pool_diversity::<f64>(&names(3), &tasks).unwrap();
        assert_eq!(r.per_pair_q[0][1], Some(-1.0));
        // m0 vs m2 and m1 vs m2 are both (2,2,2,2): Q = 0.
        assert_eq!(r.per_pair_q[0][2], Some(0.0));
        assert_eq!(r.per_pair_q[1][2], Some(0.0));
        assert!((r.mean_q.unwrap() - (-1.0 / 3.0)).abs() < 1e-15);
        assert!((r.mean_disagreement - (1.0 + 0.5 + 0.5) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pair_undefined_everywhere_is_listed_and_excluded() {
        let labels = vec![0, 0, 0, 0];
        // m0 always right, m1 right on half: a=2, c=0, b=2, d=0 → ad+bc = 0.
        let m0 = vec![0, 0, 0, 0];
        let m1 = vec![0, 0, 1, 1];
        let m2 = vec![0, 1, 1, 0];
        let tasks = vec![TaskPredictions { task: "t".into(), labels, predictions: vec![m0, m1, m2] }];
        let r = pool_diversity::<f64>(&names(3), &tasks).unwrap();
        assert!(r.undefined_pairs.contains(&("m0".into(), "m1".into())));
        assert!(r.exclusions.iter().any(|e| e.measure == "q" && e.first == "m0" && e.second == "m1"));
        let defined: Vec<f64> = [r.per_pair_q[0][2], r.per_pair_q[1][2]].into_iter().flatten().collect();
        let expected = defined.iter().sum::<f64>() / defined.len() as f64;
        assert_eq!(r.mean_q, if defined.is_empty() { None } else { Some(expected) });
    }

    #[test]
    fn consensus_cases() {
        let labels = vec![0; 10];
        let a = vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0];
        let r = consensus_report::<f64>(&[a.clone(), a.clone()], &labels).unwrap();
        assert_eq!((r.consensus_fraction, r.ceiling_bound), (1.0, 0.0));
        let mut b = a.clone();
        for i in [1, 4, 7] {
            b[i] = 9;
        }
        let r = consensus_report::<f64>(&[a.clone(), b], &labels).unwrap();
        assert_eq!(r.consensus_fraction, 0.7);
        assert_eq!(r.ceiling_bound, 1.0 - 0.7);
        assert_eq!(r.consensus_mask.iter().filter(|&&m| !m).count(), 3);
        assert_eq!(consensus_report::<f64>(&[a], &labels).unwrap().consensus_fraction, 1.0);
    }
}
