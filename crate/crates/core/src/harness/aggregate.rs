use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::record::{MethodKind, RunRecord};
use crate::diversity::{consensus_report, pool_diversity, DiversityReport, TaskPredictions};
use crate::error::{Error, Result};
use crate::stats::{
    friedman, nemenyi_cd, oracle_comparison, pareto_frontier, rank_table, spread_gain_correlation,
    wilcoxon_signed_rank, win_matrix, OracleComparison, ParetoPoint, RankMatrix,
};

pub const CD_ALPHA: f64 = 0.05;
/// Floor applied to mean times before the Pareto computation.
const MIN_SECONDS: f64 = 1e-9;

/// Per-method means over every dataset the method completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub roc_auc_ovr: Option<f64>,
    pub log_loss: f64,
    pub ece: f64,
    pub brier_rel: f64,
    pub aurc: f64,
    pub cov_at_95: f64,
    pub wga: Option<f64>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub pool_seconds: f64,
    pub combiner_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub method: String,
    pub kind: MethodKind,
    /// Mean accuracy rank; `None` for methods excluded from ranking.
    pub mean_rank: Option<f64>,
    /// Whether the method completed every dataset (and so entered the ranks).
    pub complete: bool,
    pub datasets: usize,
    pub failures: usize,
    pub means: MetricMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonPair {
    pub first: String,
    pub second: String,
    pub pairs: usize,
    pub p_value: Option<f64>,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRatio {
    pub method: String,
    pub base: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyVsOracle {
    pub method: String,
    pub comparison: OracleComparison<f64>,
    /// Mean over datasets of accuracy minus the best base accuracy.
    pub mean_gain: f64,
}

/// Rank statistics over the ranked methods and common datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub friedman_chi2: f64,
    pub friedman_p: f64,
    pub alpha: f64,
    /// `None` when K is outside the tabulated range.
    pub nemenyi_cd: Option<f64>,
    pub wilcoxon: Vec<WilcoxonPair>,
    /// K×K percentages of datasets where the row method strictly beats the column method.
    pub win_matrix: Vec<Vec<f64>>,
    pub pareto_set: Vec<String>,
    /// The strategy whose gain enters the spread-gain correlation (the best-ranked one).
    pub spread_gain_method: Option<String>,
    pub spread_gain_correlation: Option<f64>,
    pub oracle: Vec<StrategyVsOracle>,
    /// Mean total time of the best-ranked method over that of the best-ranked base.
    pub time_ratio: Option<TimeRatio>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdDiagram {
    /// Methods sorted by mean rank.
    pub methods: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub cd: Option<f64>,
    pub alpha: f64,
    /// Maximal runs of methods whose mean ranks differ by less than the CD.
    pub groups: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    /// Mean accuracy and mean pool + combiner seconds per ranked method.
    pub points: Vec<ParetoPoint<f64>>,
    pub frontier: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConsensus {
    pub dataset: String,
    pub consensus_fraction: f64,
    pub ceiling_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversitySummary {
    #[serde(flatten)]
    pub report: DiversityReport<f64>,
    pub consensus: Vec<DatasetConsensus>,
    pub mean_ceiling_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub leaderboard: Vec<LeaderboardEntry>,
    pub ranks: RankMatrix<f64>,
    pub stats: StatReport,
    pub cd_diagram: CdDiagram,
    pub pareto: ParetoReport,
    pub diversity: Option<DiversitySummary>,
}

struct Table<'a> {
    methods: Vec<(String, MethodKind)>,
    datasets: Vec<String>,
    ok: HashMap<(&'a str, &'a str), &'a RunRecord>,
    failures: HashMap<&'a str, usize>,
}

impl<'a> Table<'a> {
    fn new(records: &'a [RunRecord]) -> Self {
        let mut methods: Vec<(String, MethodKind)> = Vec::new();
        let mut datasets = BTreeSet::new();
        let mut ok = HashMap::new();
        let mut failures = HashMap::new();
        for r in records {
            if !methods.iter().any(|(m, _)| m == &r.method) {
                methods.push((r.method.clone(), r.kind));
            }
            if r.is_ok() {
                datasets.insert(r.dataset_id.clone());
                ok.insert((r.dataset_id.as_str(), r.method.as_str()), r);
            } else {
                *failures.entry(r.method.as_str()).or_insert(0) += 1;
            }
        }
        methods.sort_by_key(|(_, kind)| *kind != MethodKind::Base);
        Self { methods, datasets: datasets.into_iter().collect(), ok, failures }
    }

    fn get(&self, dataset: &str, method: &str) -> Option<&'a RunRecord> {
        self.ok.get(&(dataset, method)).copied()
    }

    fn complete(&self, method: &str) -> bool {
        self.datasets.iter().all(|d| self.get(d, method).is_some())
    }

    fn accuracy(&self, dataset: &str, method: &str) -> f64 {
        self.get(dataset, method).and_then(RunRecord::accuracy).expect("ranked cell present")
    }

    fn means(&self, method: &str) -> Option<MetricMeans> {
        let rs: Vec<&RunRecord> = self.datasets.iter().filter_map(|d| self.get(d, method)).collect();
        if rs.is_empty() {
            return None;
        }
        let n = rs.len() as f64;
        let mean = |f: &dyn Fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
        let mean_opt = |f: &dyn Fn(&RunRecord) -> Option<f64>| {
            let v: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let m = |r: &RunRecord| r.metrics.clone().expect("ok record");
        Some(MetricMeans {
            accuracy: mean(&|r| m(r).accuracy),
            weighted_f1: mean(&|r| m(r).weighted_f1),
            roc_auc_ovr: mean_opt(&|r| m(r).roc_auc_ovr),
            log_loss: mean(&|r| m(r).log_loss),
            ece: mean(&|r| m(r).ece),
            brier_rel: mean(&|r| m(r).brier_rel),
            aurc: mean(&|r| m(r).aurc),
            cov_at_95: mean(&|r| m(r).cov_at_95),
            wga: mean_opt(&|r| m(r).wga),
            fit_seconds: mean(&|r| r.fit_seconds),
            predict_seconds: mean(&|r| r.predict_seconds),
            pool_seconds: mean(&|r| r.pool_seconds),
            combiner_seconds: mean(&|r| r.combiner_seconds),
            total_seconds: mean(&RunRecord::total_seconds),
        })
    }
}

fn cd_groups(sorted_ranks: &[f64], cd: f64) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut last_end = 0;
    for i in 0..sorted_ranks.len() {
        let mut j = i;
        while j + 1 < sorted_ranks.len() && sorted_ranks[j + 1] - sorted_ranks[i] < cd {
            j += 1;
        }
        if j > i && j > last_end {
            groups.push((i, j));
            last_end = j;
        }
    }
    groups
}

/// Builds leaderboard, rank statistics and pool diversity from run records.
///
/// Only methods that completed every dataset enter the rank-based statistics;
/// the others keep their per-method means with `complete = false`.
pub fn aggregate(records: &[RunRecord]) -> Result<Aggregate> {
    let table = Table::new(records);
    let ranked: Vec<&(String, MethodKind)> = table.methods.iter().filter(|(m, _)| table.complete(m)).collect();
    if table.datasets.len() < 2 {
        return Err(Error::InsufficientOverlap(table.datasets.len()));
    }
    if ranked.len() < 2 {
        return Err(Error::DegenerateInput(format!("{} methods completed every dataset; 2 required", ranked.len())));
    }
    for (m, _) in &table.methods {
        if !table.complete(m) {
            warn!("{m} is missing datasets and is excluded from rank statistics");
        }
    }
    let names: Vec<String> = ranked.iter().map(|(m, _)| m.clone()).collect();
    let (n, k) = (table.datasets.len(), ranked.len());
    let acc = Array2::from_shape_fn((n, k), |(i, j)| table.accuracy(&table.datasets[i], &names[j]));
    let ranks = rank_table(acc.view(), true)?;
    let rank_matrix = RankMatrix { ranks, methods: names.clone(), datasets: table.datasets.clone() };
    let mean_ranks = rank_matrix.mean_ranks();
    let fr = friedman(rank_matrix.ranks.view())?;
    let cd = match nemenyi_cd::<f64>(k, n, CD_ALPHA) {
        Ok(v) => Some(v),
        Err(Error::UnsupportedK(_)) => None,
        Err(e) => return Err(e),
    };

    let mut wilcoxon = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let x = acc.column(i).to_vec();
            let y = acc.column(j).to_vec();
            let pair = match wilcoxon_signed_rank(&x, &y) {
                Ok(w) => WilcoxonPair { first: names[i].clone(), second: names[j].clone(), pairs: w.pairs, p_value: Some(w.p_value), exact: w.exact },
                Err(Error::TooFewPairs(p)) => {
                    WilcoxonPair { first: names[i].clone(), second: names[j].clone(), pairs: p, p_value: None, exact: false }
                }
                Err(e) => return Err(e),
            };
            wilcoxon.push(pair);
        }
    }
    let wins = win_matrix(acc.view())?;

    let means: Vec<MetricMeans> = names.iter().map(|m| table.means(m).expect("ranked method has records")).collect();
    let points: Vec<ParetoPoint<f64>> = names
        .iter()
        .zip(&means)
        .map(|(m, mm)| ParetoPoint { method: m.clone(), accuracy: mm.accuracy, seconds: mm.total_seconds.max(MIN_SECONDS) })
        .collect();
    let frontier = pareto_frontier(&points)?;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| mean_ranks[a].total_cmp(&mean_ranks[b]).then(a.cmp(&b)));
    let base_cols: Vec<usize> = order.iter().copied().filter(|&j| ranked[j].1 == MethodKind::Base).collect();
    let strategy_cols: Vec<usize> = order.iter().copied().filter(|&j| ranked[j].1 == MethodKind::Strategy).collect();

    let mut oracle = Vec::new();
    let mut spread_gain_method = None;
    let mut spread_gain = None;
    if !base_cols.is_empty() {
        let base_acc = Array2::from_shape_fn((n, base_cols.len()), |(i, b)| acc[[i, base_cols[b]]]);
        let best: Vec<f64> = base_acc.rows().into_iter().map(|r| r.fold(f64::NEG_INFINITY, |m, &v| m.max(v))).collect();
        let spread: Vec<f64> = base_acc
            .rows()
            .into_iter()
            .map(|r| r.fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - r.fold(f64::INFINITY, |m, &v| m.min(v)))
            .collect();
        for &s in &strategy_cols {
            let ens = acc.column(s).to_vec();
            let comparison = oracle_comparison(base_acc.view(), &ens)?;
            let mean_gain = ens.iter().zip(&best).map(|(e, b)| e - b).sum::<f64>() / n as f64;
            oracle.push(StrategyVsOracle { method: names[s].clone(), comparison, mean_gain });
        }
        if let Some(&top) = strategy_cols.first() {
            let pairs: Vec<(f64, f64)> = (0..n).map(|i| (spread[i], acc[[i, top]] - best[i])).collect();
            spread_gain_method = Some(names[top].clone());
            spread_gain = match spread_gain_correlation(&pairs) {
                Ok(r) => Some(r),
                Err(Error::ZeroVariance(_)) | Err(Error::DegenerateInput(_)) => None,
                Err(e) => return Err(e),
            };
        }
    }
    let time_ratio = base_cols.first().map(|&b| TimeRatio {
        method: names[order[0]].clone(),
        base: names[b].clone(),
        ratio: means[order[0]].total_seconds.max(MIN_SECONDS) / means[b].total_seconds.max(MIN_SECONDS),
    });

    let sorted_ranks: Vec<f64> = order.iter().map(|&j| mean_ranks[j]).collect();
    let cd_diagram = CdDiagram {
        methods: order.iter().map(|&j| names[j].clone()).collect(),
        mean_ranks: sorted_ranks.clone(),
        cd,
        alpha: CD_ALPHA,
        groups: cd
            .map(|cd| {
                cd_groups(&sorted_ranks, cd)
                    .into_iter()
                    .map(|(a, b)| order[a..=b].iter().map(|&j| names[j].clone()).collect())
                    .collect()
            })
            .unwrap_or_default(),
    };

    let mut leaderboard: Vec<LeaderboardEntry> = table
        .methods
        .iter()
        .filter_map(|(m, kind)| {
            let means = table.means(m)?;
            let col = names.iter().position(|x| x == m);
            Some(LeaderboardEntry {
                method: m.clone(),
                kind: *kind,
                mean_rank: col.map(|j| mean_ranks[j]),
                complete: col.is_some(),
                datasets: table.datasets.iter().filter(|d| table.get(d, m).is_some()).count(),
                failures: table.failures.get(m.as_str()).copied().unwrap_or(0),
                means,
            })
        })
        .collect();
    leaderboard.sort_by(|a, b| match (a.mean_rank, b.mean_rank) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => b.means.accuracy.total_cmp(&a.means.accuracy),
    });

    let pool: Vec<String> = (0..k).filter(|&j| ranked[j].1 == MethodKind::Base).map(|j| names[j].clone()).collect();
    let diversity = diversity_from_table(&table, &pool)?;

    let stats = StatReport {
        methods: names.clone(),
        datasets: table.datasets.clone(),
        mean_ranks: mean_ranks.clone(),
        friedman_chi2: fr.chi2,
        friedman_p: fr.p_value,
        alpha: CD_ALPHA,
        nemenyi_cd: cd,
        wilcoxon,
        win_matrix: wins.percent.rows().into_iter().map(|r| r.to_vec()).collect(),
        pareto_set: frontier.clone(),
        spread_gain_method,
        spread_gain_correlation: spread_gain,
        oracle,
        time_ratio,
    };
    Ok(Aggregate { leaderboard, ranks: rank_matrix, stats, cd_diagram, pareto: ParetoReport { points, frontier }, diversity })
}

fn diversity_from_table(table: &Table<'_>, bases: &[String]) -> Result<Option<DiversitySummary>> {
    if bases.len() < 2 {
        return Ok(None);
    }
    let mut tasks = Vec::new();
    for d in &table.datasets {
        let rs: Vec<&RunRecord> = bases.iter().map(|b| table.get(d, b).expect("complete base")).collect();
        if rs.iter().any(|r| r.test_predictions.is_empty()) {
            warn!("{d}: base records carry no test predictions; skipped for diversity");
            continue;
        }
        tasks.push(TaskPredictions {
            task: d.clone(),
            labels: rs[0].test_labels.clone(),
            predictions: rs.iter().map(|r| r.test_predictions.clone()).collect(),
        });
    }
    if tasks.is_empty() {
        return Ok(None);
    }
    let report = pool_diversity::<f64>(bases, &tasks)?;
    let mut consensus = Vec::new();
    for t in &tasks {
        let c = consensus_report::<f64>(&t.predictions, &t.labels)?;
        consensus.push(DatasetConsensus {
            dataset: t.task.clone(),
            consensus_fraction: c.consensus_fraction,
            ceiling_bound: c.ceiling_bound,
        });
    }
    let mean_ceiling_bound = consensus.iter().map(|c| c.ceiling_bound).sum::<f64>() / consensus.len() as f64;
    Ok(Some(DiversitySummary { report, consensus, mean_ceiling_bound }))
}

/// Diversity of every base that completed every dataset, without rank statistics.
pub fn diversity_only(records: &[RunRecord]) -> Result<Option<DiversitySummary>> {
    let table = Table::new(records);
    let bases: Vec<String> = table
        .methods
        .iter()
        .filter(|(m, kind)| *kind == MethodKind::Base && table.complete(m))
        .map(|(m, _)| m.clone())
        .collect();
    diversity_from_table(&table, &bases)
}

pub fn win_matrix_csv(stats: &StatReport) -> String {
    let mut out = String::from("method");
    for m in &stats.methods {
        write!(out, ",{m}").expect("write to string");
    }
    out.push('\n');
    for (m, row) in stats.methods.iter().zip(&stats.win_matrix) {
        out.push_str(m);
        for v in row {
            write!(out, ",{v}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

/// Writes leaderboard.json, stat_report.json, diversity.json, cd_diagram.json,
/// win_matrix.csv and pareto.json into `dir`.
pub fn write_report(agg: &Aggregate, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("leaderboard.json"), serde_json::to_string_pretty(&agg.leaderboard)?)?;
    fs::write(dir.join("stat_report.json"), serde_json::to_string_pretty(&agg.stats)?)?;
    fs::write(dir.join("diversity.json"), serde_json::to_string_pretty(&agg.diversity)?)?;
    fs::write(dir.join("cd_diagram.json"), serde_json::to_string_pretty(&agg.cd_diagram)?)?;
    fs::write(dir.join("win_matrix.csv"), win_matrix_csv(&agg.stats))?;
    fs::write(dir.join("pareto.json"), serde_json::to_string_pretty(&agg.pareto)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::record::{RecordMetrics, RECORD_SCHEMA};

    fn rec(dataset: &str, method: &str, kind: MethodKind, acc: f64, seconds: f64) -> RunRecord {
        RunRecord {
            schema: RECORD_SCHEMA,
            dataset_id: dataset.into(),
            method: method.into(),
            kind,
            n_test: 4,
            timestamp: 0,
            metrics: Some(RecordMetrics {
                accuracy: acc,
                weighted_f1: acc,
                roc_auc_ovr: None,
                log_loss: 1.0,
                ece: 0.0,
                brier_rel: 0.0,
                aurc: 0.0,
                cov_at_95: 0.0,
                wga: None,
            }),
            fit_seconds: seconds,
            predict_seconds: 0.0,
            pool_seconds: seconds,
            combiner_seconds: 0.0,
            error: None,
            test_predictions: Vec::new(),
            test_labels: Vec::new(),
        }
    }

    // Accuracy table (rows: datasets d1..d4; columns: A, B, C):
    //   d1  0.90 0.80 0.70   ranks 1   2   3
    //   d2  0.60 0.60 0.90   ranks 2.5 2.5 1
    //   d3  0.50 0.70 0.70   ranks 3   1.5 1.5
    //   d4  0.80 0.85 0.75   ranks 2   1   3
    // Column sums 8.5, 7.0, 8.5 give mean ranks 2.125, 1.75, 2.125.
    fn spreadsheet() -> Vec<RunRecord> {
        let table = [[0.9, 0.8, 0.7], [0.6, 0.6, 0.9], [0.5, 0.7, 0.7], [0.8, 0.85, 0.75]];
        let mut out = Vec::new();
        for (i, row) in table.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                let kind = if j < 2 { MethodKind::Base } else { MethodKind::Strategy };
                out.push(rec(&format!("d{}", i + 1), ["A", "B", "C"][j], kind, a, 1.0 + j as f64));
            }
        }
        out
    }

    #[test]
    fn mean_ranks_match_the_hand_table() {
        let agg = aggregate(&spreadsheet()).unwrap();
        assert_eq!(agg.stats.methods, ["A", "B", "C"]);
        assert_eq!(agg.stats.mean_ranks, vec![2.125, 1.75, 2.125]);
        assert_eq!(agg.ranks.ranks.dim(), (4, 3));
        assert_eq!(agg.leaderboard[0].method, "B");
        // Friedman: 12·4/(3·4)·(2.125² + 1.75² + 2.125² − 12) = 4·0.09375.
        assert!((agg.stats.friedman_chi2 - 0.375).abs() < 1e-12);
        assert_eq!(agg.cd_diagram.methods, ["B", "A", "C"]);
        assert_eq!(agg.cd_diagram.groups, vec![vec!["B".to_string(), "A".into(), "C".into()]]);
        // C beats A on d2, d3 only; A beats C on d1, d4.
        assert_eq!(agg.stats.win_matrix[0][2], 50.0);
        assert_eq!(agg.stats.win_matrix[2][0], 50.0);
        let oracle = &agg.stats.oracle[0];
        assert_eq!((oracle.comparison.wins, oracle.comparison.ties, oracle.comparison.losses), (1, 1, 2));
        assert!(agg.stats.wilcoxon.iter().all(|w| w.p_value.is_none()));
        assert_eq!(agg.stats.time_ratio.as_ref().unwrap().ratio, 1.0);
    }

    #[test]
    fn incomplete_methods_are_flagged_not_ranked() {
        let mut records = spreadsheet();
        records.retain(|r| !(r.method == "C" && r.dataset_id == "d3"));
        records.push(RunRecord::failed("d3", "C", MethodKind::Strategy, 4, &Error::SingleClass));
        let agg = aggregate(&records).unwrap();
        assert_eq!(agg.stats.methods, ["A", "B"]);
        let c = agg.leaderboard.iter().find(|e| e.method == "C").unwrap();
        assert!(!c.complete && c.mean_rank.is_none());
        assert_eq!((c.datasets, c.failures), (3, 1));
        assert!((c.means.accuracy - (0.7 + 0.9 + 0.75) / 3.0).abs() < 1e-15);
        assert_eq!(agg.leaderboard.last().unwrap().method, "C");
    }

    #[test]
    fn one_common_dataset_is_insufficient() {
        let records: Vec<RunRecord> = spreadsheet().into_iter().filter(|r| r.dataset_id == "d1").collect();
        assert!(matches!(aggregate(&records), Err(Error::InsufficientOverlap(1))));
    }

    #[test]
    fn cd_groups_are_maximal_runs() {
        assert_eq!(cd_groups(&[1.0, 1.5, 1.9, 3.5, 3.9], 1.0), vec![(0, 2), (3, 4)]);
        assert_eq!(cd_groups(&[1.0, 1.5, 2.2, 2.4], 1.0), vec![(0, 1), (1, 3)]);
        assert!(cd_groups(&[1.0, 3.0], 1.0).is_empty());
    }

    #[test]
    fn report_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        write_report(&aggregate(&spreadsheet()).unwrap(), dir.path()).unwrap();
        for f in ["leaderboard.json", "stat_report.json", "diversity.json", "cd_diagram.json", "win_matrix.csv", "pareto.json"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let csv = fs::read_to_string(dir.path().join("win_matrix.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("method,A,B,C"));
    }
}
