//! Cross-dataset comparison of methods: ranks, Friedman and Nemenyi,
//! Wilcoxon signed-rank, head-to-head wins, the accuracy/time Pareto set.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{chi_square_sf, normal_two_sided};

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
/// `descending` ranks the largest value first.
pub fn average_ranks<T: Real>(values: ArrayView1<'_, T>, descending: bool) -> Vec<T> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let o = values[a].partial_cmp(&values[b]).expect("finite values");
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    let mut ranks = vec![T::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = T::of_usize(i + j + 2) / T::lit(2.0);
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// Per-dataset ranks of K methods over N datasets, 1 = best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RankMatrix<T: Real> {
    pub ranks: Array2<T>,
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
}

impl<T: Real> RankMatrix<T> {
    pub fn mean_ranks(&self) -> Vec<T> {
        mean_ranks(self.ranks.view())
    }
}

/// Ranks every row of an N×K table.
pub fn rank_table<T: Real>(values: ArrayView2<'_, T>, higher_is_better: bool) -> Result<Array2<T>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite metric value".into()));
    }
    let mut out = Array2::zeros(values.dim());
    for (i, row) in values.rows().into_iter().enumerate() {
        for (j, r) in average_ranks(row, higher_is_better).into_iter().enumerate() {
            out[[i, j]] = r;
        }
    }
    Ok(out)
}

pub fn mean_ranks<T: Real>(ranks: ArrayView2<'_, T>) -> Vec<T> {
    let n = T::of_usize(ranks.nrows());
    ranks.sum_axis(Axis(0)).iter().map(|&s| s / n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct FriedmanResult<T: Real> {
    pub chi2: T,
    pub p_value: T,
    pub datasets: usize,
    pub methods: usize,
}

/// `χ² = 12N/(K(K+1)) · [Σ_j R_j² − K(K+1)²/4]` on mean ranks, without tie
/// correction; p from the chi-square tail with K−1 degrees of freedom.
pub fn friedman<T: Real>(ranks: ArrayView2<'_, T>) -> Result<FriedmanResult<T>> {
    let (n, k) = ranks.dim();
    if n < 2 {
        return Err(Error::DegenerateInput(format!("Friedman test needs at least 2 datasets, got {n}")));
    }
    if k < 2 {
        return Err(Error::DegenerateInput(format!("Friedman test needs at least 2 methods, got {k}")));
    }
    let (nf, kf) = (T::of_usize(n), T::of_usize(k));
    let sum_sq: T = mean_ranks(ranks).iter().map(|&r| r * r).sum();
    let chi2 = T::lit(12.0) * nf / (kf * (kf + T::one())) * (sum_sq - kf * (kf + T::one()).powi(2) / T::lit(4.0));
    let chi2 = chi2.max(T::zero());
    Ok(FriedmanResult { chi2, p_value: chi_square_sf(chi2, k - 1), datasets: n, methods: k })
}

// Critical values for the Nemenyi test: the upper-α quantile of the studentized
// range with infinite degrees of freedom, divided by √2, for K = 2..=20.
const Q_ALPHA_05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354, 3.391, 3.426, 3.458,
    3.489, 3.517, 3.544,
];
const Q_ALPHA_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120, 3.159, 3.196, 3.230,
    3.261, 3.291, 3.319,
];

/// Embedded critical value `q_α(K)` for α ∈ {0.05, 0.10}.
pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    let table = if alpha == 0.05 {
        &Q_ALPHA_05
    } else if alpha == 0.10 {
        &Q_ALPHA_10
    } else {
        return Err(Error::InvalidParameter(format!("no critical values for alpha {alpha}; use 0.05 or 0.10")));
    };
    if !(2..=20).contains(&k) {
        return Err(Error::UnsupportedK(k));
    }
    Ok(table[k - 2])
}

/// Nemenyi critical difference `q_α(K) · sqrt(K(K+1)/(6N))`.
pub fn nemenyi_cd<T: Real>(k: usize, n: usize, alpha: f64) -> Result<T> {
    let q = T::lit(nemenyi_q(k, alpha)?);
    if n == 0 {
        return Err(Error::InvalidParameter("critical difference needs at least one dataset".into()));
    }
    Ok(q * (T::of_usize(k * (k + 1)) / T::of_usize(6 * n)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct WilcoxonResult<T: Real> {
    /// Pairs left after dropping zero differences.
    pub pairs: usize,
    pub w_plus: T,
    pub p_value: T,
    pub exact: bool,
}

/// Largest post-drop sample evaluated by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 12;
pub const WILCOXON_MIN_PAIRS: usize = 5;

struct SignedRanks<T> {
    ranks: Vec<T>,
    w_plus: T,
}

fn signed_ranks<T: Real>(x: &[T], y: &[T]) -> Result<SignedRanks<T>> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} paired values", x.len(), y.len())));
    }
    let diffs: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).filter(|d| *d != T::zero()).collect();
    if diffs.len() < WILCOXON_MIN_PAIRS {
        return Err(Error::TooFewPairs(diffs.len()));
    }
    let abs: ndarray::Array1<T> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(abs.view(), false);
    let w_plus = ranks.iter().zip(&diffs).filter(|(_, d)| **d > T::zero()).map(|(&r, _)| r).sum();
    Ok(SignedRanks { ranks, w_plus })
}

/// Two-sided p by enumerating all sign assignments of the (possibly tied) ranks.
pub fn wilcoxon_exact_p<T: Real>(ranks: &[T], w_plus: T) -> T {
    // Ranks are multiples of 1/2, so doubled ranks are exact integers.
    let doubled: Vec<usize> = ranks.iter().map(|&r| (r * T::lit(2.0)).round().to_usize().unwrap()).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for w in (r..=total).rev() {
            counts[w] += counts[w - r];
        }
    }
    let observed = (w_plus * T::lit(2.0)).round().to_usize().unwrap();
    let all = 2f64.powi(ranks.len() as i32);
    let lower: u64 = counts[..=observed].iter().sum();
    let upper: u64 = counts[observed..].iter().sum();
    let p = 2.0 * (lower.min(upper) as f64) / all;
    T::lit(p.min(1.0))
}

/// Two-sided p from the normal approximation with tie-corrected variance and a
/// 0.5 continuity correction.
pub fn wilcoxon_normal_p<T: Real>(ranks: &[T], w_plus: T) -> T {
    let n = T::of_usize(ranks.len());
    let mean = n * (n + T::one()) / T::lit(4.0);
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = T::zero();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = T::of_usize(j);
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + T::one()) * (T::lit(2.0) * n + T::one()) / T::lit(24.0) - tie_term / T::lit(48.0);
    let z = ((w_plus - mean).abs() - T::lit(0.5)).max(T::zero()) / var.sqrt();
    normal_two_sided(z).min(T::one())
}

/// Paired two-sided Wilcoxon signed-rank test, zero differences dropped.
pub fn wilcoxon_signed_rank<T: Real>(x: &[T], y: &[T]) -> Result<WilcoxonResult<T>> {
    let sr = signed_ranks(x, y)?;
    let exact = sr.ranks.len() <= WILCOXON_EXACT_MAX;
    let p_value = if exact { wilcoxon_exact_p(&sr.ranks, sr.w_plus) } else { wilcoxon_normal_p(&sr.ranks, sr.w_plus) };
    Ok(WilcoxonResult { pairs: sr.ranks.len(), w_plus: sr.w_plus, p_value, exact })
}

/// Both p-values for the same pairs, for checking the approximation.
pub fn wilcoxon_both<T: Real>(x: &[T], y: &[T]) -> Result<(T, T)> {
    let sr = signed_ranks(x, y)?;
    Ok((wilcoxon_exact_p(&sr.ranks, sr.w_plus), wilcoxon_normal_p(&sr.ranks, sr.w_plus)))
}

/// Head-to-head outcomes over N datasets of K methods (higher is better).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct WinMatrix<T: Real> {
    /// `wins[i][j]`: datasets where method i strictly beats j.
    pub wins: Array2<usize>,
    pub datasets: usize,
    /// Percentages of `wins`.
    pub percent: Array2<T>,
}

impl<T: Real> WinMatrix<T> {
    /// `100 − percent(i,j) − percent(j,i)`.
    pub fn tie_rate(&self, i: usize, j: usize) -> T {
        T::lit(100.0) - (self.percent[[i, j]] + self.percent[[j, i]])
    }
}

pub fn win_matrix<T: Real>(values: ArrayView2<'_, T>) -> Result<WinMatrix<T>> {
    let (n, k) = values.dim();
    if n == 0 {
        return Err(Error::DegenerateInput("no datasets".into()));
    }
    let mut wins = Array2::<usize>::zeros((k, k));
    for row in values.rows() {
        for i in 0..k {
            for j in 0..k {
                if row[i] > row[j] {
                    wins[[i, j]] += 1;
                }
            }
        }
    }
    let percent = wins.mapv(|w| T::lit(100.0) * T::of_usize(w) / T::of_usize(n));
    Ok(WinMatrix { wins, datasets: n, percent })
}

/// One method's mean accuracy and mean fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ParetoPoint<T: Real> {
    pub method: String,
    pub accuracy: T,
    pub seconds: T,
}

/// Methods not dominated in (higher accuracy, lower time), in input order.
pub fn pareto_frontier<T: Real>(points: &[ParetoPoint<T>]) -> Result<Vec<String>> {
    if let Some(p) = points.iter().find(|p| !(p.seconds > T::zero())) {
        return Err(Error::InvalidParameter(format!("method {} has non-positive time", p.method)));
    }
    Ok(points
        .iter()
        .filter(|m| {
            !points.iter().any(|o| {
                o.accuracy >= m.accuracy && o.seconds <= m.seconds && (o.accuracy > m.accuracy || o.seconds < m.seconds)
            })
        })
        .map(|m| m.method.clone())
        .collect())
}

/// Pearson correlation between per-dataset inter-base accuracy spread and
/// ensemble gain over the best base.
pub fn spread_gain_correlation<T: Real>(pairs: &[(T, T)]) -> Result<T> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::DegenerateInput(format!("correlation needs at least 3 datasets, got {n}")));
    }
    let nf = T::of_usize(n);
    let mx = pairs.iter().map(|p| p.0).sum::<T>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<T>() / nf;
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == T::zero() {
        return Err(Error::ZeroVariance("spread"));
    }
    if syy == T::zero() {
        return Err(Error::ZeroVariance("gain"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct OracleComparison<T: Real> {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub mean_delta: T,
}

/// Ensemble accuracy against the per-dataset best base.
pub fn oracle_comparison<T: Real>(base_accuracy: ArrayView2<'_, T>, ensemble: &[T]) -> Result<OracleComparison<T>> {
    let n = base_accuracy.nrows();
    if ensemble.len() != n || base_accuracy.ncols() == 0 {
        return Err(Error::ShapeMismatch(format!("{} ensemble values for {n}×{} bases", ensemble.len(), base_accuracy.ncols())));
    }
    if n == 0 {
        return Err(Error::DegenerateInput("no datasets".into()));
    }
    let mut out = OracleComparison { wins: 0, ties: 0, losses: 0, mean_delta: T::zero() };
    let mut total = T::zero();
    for (row, &e) in base_accuracy.rows().into_iter().zip(ensemble) {
        let oracle = row.fold(T::neg_infinity(), |m, &v| m.max(v));
        if e > oracle {
            out.wins += 1;
        } else if e == oracle {
            out.ties += 1;
        } else {
            out.losses += 1;
        }
        total += e - oracle;
    }
    out.mean_delta = total / T::of_usize(n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn rank_examples() {
        let r = rank_table(array![[0.9, 0.8, 0.7], [0.9, 0.9, 0.7]].view(), true).unwrap();
        assert_eq!(r, array![[1.0, 2.0, 3.0], [1.5, 1.5, 3.0]]);
        let low = rank_table(array![[0.9, 0.8, 0.7]].view(), false).unwrap();
        assert_eq!(low, array![[3.0, 2.0, 1.0]]);
        assert!(rank_table(array![[f64::NAN, 1.0]].view(), true).is_err());
    }

    #[test]
    fn friedman_identical_rankings_k3() {
        let ranks = Array2::from_shape_fn((10, 3), |(_, j)| (j + 1) as f64);
        let f = friedman(ranks.view()).unwrap();
        assert!((f.chi2 - 20.0).abs() < 1e-12);
        assert!((f.p_value - (-10.0f64).exp()).abs() < 1e-15);
        assert!(friedman(Array2::<f64>::ones((1, 3)).view()).is_err());
    }

    #[test]
    fn friedman_two_methods_is_a_sign_test() {
        // 8 datasets, method 0 wins 7.
        let mut v = Array2::<f64>::zeros((8, 2));
        for i in 0..8 {
            v[[i, 0]] = if i < 7 { 1.0 } else { 0.0 };
            v[[i, 1]] = 0.5;
        }
        let f = friedman(rank_table(v.view(), true).unwrap().view()).unwrap();
        let z = (2.0 * 7.0 - 8.0) / 8f64.sqrt();
        assert!((f.chi2 - z * z).abs() < 1e-12);
        assert!((f.p_value - normal_two_sided(z)).abs() < 1e-12);
        // Exact binomial two-sided p for 7 of 8 is 18/256; the asymptotic p is smaller.
        let exact = 2.0 * (1.0 + 8.0) / 256.0;
        assert!(f.p_value < exact);
    }

    #[test]
    fn friedman_null_rarely_rejects() {
        let mut rng = crate::seed::rng_from_seed(21);
        let trials = 300;
        let mut kept = 0;
        for _ in 0..trials {
            let v = Array2::from_shape_fn((60, 4), |_| rng.random::<f64>());
            let f = friedman(rank_table(v.view(), true).unwrap().view()).unwrap();
            if f.p_value > 0.01 {
                kept += 1;
            }
        }
        assert!(kept as f64 >= 0.95 * trials as f64, "{kept}");
    }

    #[test]
    fn nemenyi_values() {
        let cd: f64 = nemenyi_cd(12, 153, 0.05).unwrap();
        assert!((cd - 1.347).abs() < 1e-3);
        let k2: f64 = nemenyi_cd(2, 49, 0.05).unwrap();
        assert!((k2 - 1.960 / 7.0).abs() < 1e-15);
        let k5: f64 = nemenyi_cd(5, 20, 0.05).unwrap();
        assert!((k5 - 2.728 * (30.0f64 / 120.0).sqrt()).abs() < 1e-15);
        for k in 2..=20 {
            let a: f64 = nemenyi_cd(k, 17, 0.10).unwrap();
            let b: f64 = nemenyi_cd(k, 68, 0.10).unwrap();
            assert_eq!(b, a / 2.0);
        }
        assert!(matches!(nemenyi_cd::<f64>(21, 10, 0.05), Err(Error::UnsupportedK(21))));
        assert!(matches!(nemenyi_cd::<f64>(1, 10, 0.05), Err(Error::UnsupportedK(1))));
        assert!(nemenyi_cd::<f64>(5, 10, 0.01).is_err());
    }

    #[test]
    fn wilcoxon_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert!(matches!(wilcoxon_signed_rank(&x, &x), Err(Error::TooFewPairs(0))));
        let a: Vec<f64> = (0..10).map(|i| i as f64 + 1.0).collect();
        let b: Vec<f64> = a.iter().map(|v| v - 0.5 - *v / 100.0).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(r.exact);
        assert_eq!(r.pairs, 10);
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_large_sample_uses_normal() {
        let a: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).cos()).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!r.exact);
        assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn exact_p_with_ties_matches_brute_force() {
        let ranks = [1.5, 1.5, 3.0, 4.5, 4.5, 6.0];
        let w = 9.0;
        let mut le = 0;
        let mut ge = 0;
        for mask in 0u32..64 {
            let s: f64 = (0..6).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            le += (s <= w) as u32;
            ge += (s >= w) as u32;
        }
        let expected = (2.0 * le.min(ge) as f64 / 64.0).min(1.0);
        assert_eq!(wilcoxon_exact_p(&ranks, w), expected);
    }

    #[test]
    fn win_matrix_examples() {
        let w = win_matrix(array![[0.9, 0.5], [0.8, 0.1]].view()).unwrap();
        assert_eq!(w.percent, array![[0.0, 100.0], [0.0, 0.0]]);
        let ties = win_matrix(Array2::<f64>::ones((3, 3)).view()).unwrap();
        assert!(ties.percent.iter().all(|&p| p == 0.0));
        let mut rng = crate::seed::rng_from_seed(2);
        let v = Array2::from_shape_fn((7, 3), |_| (rng.random::<f64>() * 3.0).floor());
        let w = win_matrix(v.view()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(w.percent[[i, j]] + w.percent[[j, i]] + w.tie_rate(i, j), 100.0);
            }
        }
    }

    fn pt(m: &str, a: f64, s: f64) -> ParetoPoint<f64> {
        ParetoPoint { method: m.into(), accuracy: a, seconds: s }
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(pareto_frontier(&[pt("a", 0.5, 1.0)]).unwrap(), vec!["a"]);
        assert_eq!(pareto_frontier(&[pt("a", 0.5, 1.0), pt("b", 0.6, 0.5)]).unwrap(), vec!["b"]);
        assert_eq!(pareto_frontier(&[pt("a", 0.5, 1.0), pt("b", 0.5, 1.0)]).unwrap(), vec!["a", "b"]);
        assert_eq!(pareto_frontier(&[pt("a", 0.5, 1.0), pt("b", 0.6, 2.0)]).unwrap(), vec!["a", "b"]);
        assert!(pareto_frontier(&[pt("a", 0.5, 0.0)]).is_err());
    }

    #[test]
    fn correlation_examples() {
        let line: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!((spread_gain_correlation(&line).unwrap() - 1.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 0.3)).collect();
        assert!(matches!(spread_gain_correlation(&flat), Err(Error::ZeroVariance("gain"))));
        assert!(spread_gain_correlation(&line[..2]).is_err());
    }

    #[test]
    fn oracle_examples() {
        let bases = array![[0.8, 0.7], [0.6, 0.9], [0.5, 0.5]];
        let same = oracle_comparison(bases.view(), &[0.8, 0.9, 0.5]).unwrap();
        assert_eq!((same.wins, same.ties, same.losses, same.mean_delta), (0, 3, 0, 0.0));
        let above = oracle_comparison(bases.view(), &[0.9, 1.0, 0.6]).unwrap();
        assert_eq!((above.wins, above.ties, above.losses), (3, 0, 0));
        assert!(above.mean_delta > 0.0);
    }
}
