use ndarray::Array2;
use proptest::prelude::*;

use ensemble_lab::combiners::{
    combine_convex, fit_greedy_selection, fit_stacking, mean_of, predict_stacking, temp_scaled_blend, GreedyConfig,
    TemperatureVector,
};
use ensemble_lab::diversity::{consensus_report, contingency, disagreement, q_statistic, ContingencyTable};
use ensemble_lab::learners::{oof_predict, Builtin, BuiltinLearner};
use ensemble_lab::metrics::{
    accuracy, aurc, brier_reliability, coverage_at_accuracy, ece, log_loss, risk_coverage_curve, roc_auc_ovr,
    weighted_f1, worst_group_accuracy,
};
use ensemble_lab::split::{assign_folds, stratified_split, SplitSpec};
use ensemble_lab::stats::{friedman, nemenyi_cd, rank_table, win_matrix};
use ensemble_lab::{ProbabilityMatrix64 as Probs, WeightVector};

fn stochastic_rows(n: usize, c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, c), n)
        .prop_map(|rows| rows.into_iter().map(|r| r.iter().map(|v| v / r.iter().sum::<f64>()).collect()).collect())
}

/// `(n, C, K pool matrices, labels)`.
fn pool() -> impl Strategy<Value = (Vec<Probs>, Vec<usize>)> {
    (2usize..=5, 2usize..=4, 5usize..=40).prop_flat_map(|(k, c, n)| {
        (
            prop::collection::vec(stochastic_rows(n, c), k),
            prop::collection::vec(0..c, n),
        )
            .prop_map(|(mats, y)| (mats.iter().map(|m| Probs::from_rows(m).unwrap()).collect(), y))
    })
}

fn scored_matrix() -> impl Strategy<Value = (Probs, Vec<usize>, Vec<usize>)> {
    (2usize..=4, 3usize..=40).prop_flat_map(|(c, n)| {
        (stochastic_rows(n, c), prop::collection::vec(0..c, n), prop::collection::vec(0usize..4, n))
            .prop_map(move |(rows, mut y, g)| {
                y[0] = 0;
                y[1] = 1;
                (Probs::from_rows(&rows).unwrap(), y, g)
            })
    })
}

fn labels_with_classes() -> impl Strategy<Value = (Vec<usize>, usize)> {
    (2usize..=4).prop_flat_map(|c| {
        prop::collection::vec(0..c, 20..120).prop_map(move |mut y| {
            // Every class gets at least ten rows.
            for k in 0..c {
                y.extend(std::iter::repeat_n(k, 10));
            }
            (y, c)
        })
    })
}

fn class_counts(rows: &[usize], y: &[usize], c: usize) -> Vec<usize> {
    let mut out = vec![0; c];
    for &r in rows {
        out[y[r]] += 1;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convex_blends_stay_row_stochastic((pool, _) in pool(), raw in prop::collection::vec(0.0f64..5.0, 5)) {
        let k = pool.len();
        let Some(w) = WeightVector::from_scores(&raw[..k]) else { return Ok(()) };
        prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let temps = TemperatureVector::new((0..k).map(|i| 0.3 + i as f64).collect()).unwrap();
        for out in [combine_convex(&pool, &w).unwrap(), mean_of(&pool).unwrap(), temp_scaled_blend(&pool, &temps).unwrap()] {
            for row in out.view().rows() {
                prop_assert!((row.sum() - 1.0).abs() <= 1e-9);
                prop_assert!(row.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn convex_blends_keep_the_unanimous_label((pool, y) in pool(), raw in prop::collection::vec(0.0f64..5.0, 5)) {
        let k = pool.len();
        let Some(w) = WeightVector::from_scores(&raw[..k]) else { return Ok(()) };
        let preds: Vec<Vec<usize>> = pool.iter().map(Probs::argmax).collect();
        let report = consensus_report::<f64>(&preds, &y).unwrap();
        let blended = combine_convex(&pool, &w).unwrap().argmax();
        for (i, &m) in report.consensus_mask.iter().enumerate() {
            if m {
                prop_assert_eq!(blended[i], preds[0][i]);
            }
        }
        prop_assert_eq!(report.ceiling_bound, 1.0 - report.consensus_fraction);
    }

    #[test]
    fn unit_temperatures_equal_the_uniform_average((pool, _) in pool()) {
        let k = pool.len();
        prop_assert_eq!(
            temp_scaled_blend(&pool, &TemperatureVector::ones(k)).unwrap(),
            combine_convex(&pool, &WeightVector::uniform(k)).unwrap()
        );
    }

    #[test]
    fn split_is_deterministic_disjoint_and_stratified((y, c) in labels_with_classes(), seed in any::<u64>()) {
        let spec = SplitSpec::new(seed);
        let s = stratified_split(&y, c, &spec).unwrap();
        prop_assert_eq!(&s, &stratified_split(&y, c, &spec).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        let sizes = class_counts(&(0..y.len()).collect::<Vec<_>>(), &y, c);
        let test = class_counts(&s.test, &y, c);
        let val = class_counts(&s.val, &y, c);
        for k in 0..c {
            prop_assert!((test[k] as f64 - 0.2 * sizes[k] as f64).abs() <= 1.0);
            prop_assert!((val[k] as f64 - 0.25 * (sizes[k] - test[k]) as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn folds_partition_the_index_set((y, c) in labels_with_classes(), folds in 2usize..=5, seed in any::<u64>()) {
        let idx: Vec<usize> = (0..y.len()).collect();
        let a = assign_folds(&idx, &y, folds, seed).unwrap();
        prop_assert_eq!(&a, &assign_folds(&idx, &y, folds, seed).unwrap());
        prop_assert!(a.fold_sizes().iter().all(|&s| s > 0));
        let mut seen = vec![0; idx.len()];
        for f in 0..folds {
            let (held, fit) = a.partition(f);
            prop_assert_eq!(held.len() + fit.len(), idx.len());
            for &h in &held {
                seen[h] += 1;
            }
            let per_class = class_counts(&held, &y, c);
            let sizes = class_counts(&idx, &y, c);
            for k in 0..c {
                prop_assert!((per_class[k] as f64 - sizes[k] as f64 / folds as f64).abs() <= 1.0);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn metrics_ignore_row_order((p, y, g) in scored_matrix(), rot in 0usize..40) {
        let n = y.len();
        let order: Vec<usize> = (0..n).map(|i| (i * 7 + rot) % n).collect();
        // 7 must be coprime with n for this to be a permutation.
        if n % 7 == 0 {
            return Ok(());
        }
        let q = p.select_rows(&order);
        let qy: Vec<usize> = order.iter().map(|&i| y[i]).collect();
        let qg: Vec<usize> = order.iter().map(|&i| g[i]).collect();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        prop_assert!(close(accuracy(&p, &y).unwrap(), accuracy(&q, &qy).unwrap()));
        prop_assert!(close(weighted_f1(&p, &y).unwrap(), weighted_f1(&q, &qy).unwrap()));
        prop_assert!(close(roc_auc_ovr(&p, &y).unwrap(), roc_auc_ovr(&q, &qy).unwrap()));
        prop_assert!(close(log_loss(&p, &y).unwrap(), log_loss(&q, &qy).unwrap()));
        prop_assert!(close(ece(&p, &y, 15).unwrap(), ece(&q, &qy, 15).unwrap()));
        prop_assert!(close(brier_reliability(&p, &y, 15).unwrap(), brier_reliability(&q, &qy, 15).unwrap()));
        prop_assert!(close(worst_group_accuracy(&p, &y, Some(&g)).unwrap(), worst_group_accuracy(&q, &qy, Some(&qg)).unwrap()));
        // Continuous confidences have no ties, so the selective metrics are order-free too.
        prop_assert!(close(aurc(&p, &y).unwrap(), aurc(&q, &qy).unwrap()));
        prop_assert!(close(coverage_at_accuracy(&p, &y, 0.95).unwrap(), coverage_at_accuracy(&q, &qy, 0.95).unwrap()));
    }

    #[test]
    fn metric_ranges_and_identities((p, y, _) in scored_matrix()) {
        let acc = accuracy(&p, &y).unwrap();
        let curve = risk_coverage_curve(&p, &y).unwrap();
        prop_assert_eq!(curve.last().unwrap().1, 1.0 - acc);
        let conf = p.confidence();
        let mean_conf = conf.iter().sum::<f64>() / conf.len() as f64;
        prop_assert_eq!(ece(&p, &y, 1).unwrap(), (acc - mean_conf).abs());
        for v in [weighted_f1(&p, &y).unwrap(), ece(&p, &y, 15).unwrap(), aurc(&p, &y).unwrap(),
                  coverage_at_accuracy(&p, &y, 0.95).unwrap(), roc_auc_ovr(&p, &y).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(log_loss(&p, &y).unwrap() >= 0.0);
    }

    #[test]
    fn binary_auc_survives_monotone_rescoring(rows in stochastic_rows(30, 2), y in prop::collection::vec(0usize..2, 30), gamma in 0.2f64..5.0) {
        let mut y = y;
        y[0] = 0;
        y[1] = 1;
        let p = Probs::from_rows(&rows).unwrap();
        // p ↦ p^γ / (p^γ + (1−p)^γ) is increasing and keeps binary rows stochastic.
        let warped: Vec<Vec<f64>> = rows.iter().map(|r| {
            let a = r[0].powf(gamma);
            let b = r[1].powf(gamma);
            vec![a / (a + b), b / (a + b)]
        }).collect();
        let q = Probs::from_rows(&warped).unwrap();
        prop_assert!((roc_auc_ovr(&p, &y).unwrap() - roc_auc_ovr(&q, &y).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn q_symmetries(a in 0usize..30, b in 0usize..30, c in 0usize..30, d in 0usize..30) {
        let t = ContingencyTable { a, b, c, d };
        let swapped = ContingencyTable { a, b: c, c: b, d };
        let flipped = ContingencyTable { a: b, b: a, c: d, d: c };
        prop_assert_eq!(q_statistic::<f64>(&t), q_statistic::<f64>(&swapped));
        prop_assert_eq!(q_statistic::<f64>(&t), q_statistic::<f64>(&flipped).map(|q| -q));
        if let Some(q) = q_statistic::<f64>(&t) {
            prop_assert!((-1.0..=1.0).contains(&q));
        }
        if t.n() > 0 {
            prop_assert_eq!(disagreement::<f64>(&t).unwrap(), disagreement::<f64>(&swapped).unwrap());
        }
    }

    #[test]
    fn contingency_is_symmetric_and_complete(y in prop::collection::vec(0usize..3, 1..60), seed in any::<u64>()) {
        let shift = |s: u64| -> Vec<usize> { y.iter().enumerate().map(|(i, &v)| (v + ((s >> (i % 60)) & 1) as usize) % 3).collect() };
        let (p, q) = (shift(seed), shift(seed.rotate_left(17)));
        let t = contingency(&p, &q, &y).unwrap();
        let u = contingency(&q, &p, &y).unwrap();
        prop_assert_eq!(t.n(), y.len());
        prop_assert_eq!((t.a, t.b, t.c, t.d), (u.a, u.c, u.b, u.d));
    }

    #[test]
    fn ranks_win_rates_and_friedman(n in 2usize..30, k in 2usize..10, seed in any::<u64>()) {
        let mut state = seed;
        let values = Array2::from_shape_fn((n, k), |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % 6) as f64 / 5.0
        });
        let ranks = rank_table(values.view(), true).unwrap();
        for row in ranks.rows() {
            prop_assert_eq!(row.sum(), (k * (k + 1)) as f64 / 2.0);
        }
        // A strictly increasing transform leaves the ranks and the statistic unchanged.
        let warped = values.mapv(|v| v.powi(3) + 2.0 * v - 7.0);
        let warped_ranks = rank_table(warped.view(), true).unwrap();
        prop_assert_eq!(&ranks, &warped_ranks);
        prop_assert_eq!(friedman(ranks.view()).unwrap().chi2, friedman(warped_ranks.view()).unwrap().chi2);
        let p = friedman(ranks.view()).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));

        let wm = win_matrix::<f64>(values.view()).unwrap();
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    prop_assert_eq!(wm.percent[[i, j]] + wm.percent[[j, i]] + wm.tie_rate(i, j), 100.0);
                }
            }
        }
    }

    #[test]
    fn critical_difference_halves_with_four_times_the_datasets(k in 2usize..=20, n in 1usize..500) {
        let cd: f64 = nemenyi_cd(k, n, 0.05).unwrap();
        prop_assert!(cd > 0.0);
        prop_assert_eq!(nemenyi_cd::<f64>(k, 4 * n, 0.05).unwrap(), cd / 2.0);
    }

    #[test]
    fn stacking_is_row_equivariant((pool, y) in pool(), rot in 1usize..40) {
        let model = fit_stacking(&pool, &y).unwrap();
        let n = y.len();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let permuted: Vec<Probs> = pool.iter().map(|p| p.select_rows(&order)).collect();
        let direct = predict_stacking(&model, &pool).unwrap();
        let shuffled = predict_stacking(&model, &permuted).unwrap();
        prop_assert_eq!(direct.select_rows(&order), shuffled);
    }
}

fn learner_data(seed: u64, n: usize, c: usize) -> (Array2<f64>, Vec<usize>) {
    let mut state = seed | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let y: Vec<usize> = (0..n).map(|i| i % c).collect();
    let x = Array2::from_shape_fn((n, 3), |(i, j)| next() + if j == 0 { y[i] as f64 } else { 0.0 });
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn builtin_learners_are_row_stochastic_and_order_free(seed in any::<u64>(), c in 2usize..=3, fit_seed in 0u64..3) {
        let (x, y) = learner_data(seed, 60, c);
        let (query, _) = learner_data(seed.rotate_left(9), 25, c);
        let reversed = query.slice(ndarray::s![..;-1, ..]).to_owned();
        for learner in BuiltinLearner::default_pool().into_iter().chain([BuiltinLearner::Prior]) {
            let mut m = learner.instantiate::<f64>();
            m.fit(x.view(), &y, c, fit_seed).unwrap();
            let p = m.predict_proba(query.view()).unwrap();
            for row in p.view().rows() {
                prop_assert!((row.sum() - 1.0).abs() <= 1e-9);
            }
            let r = m.predict_proba(reversed.view()).unwrap();
            let back: Vec<usize> = (0..25).rev().collect();
            prop_assert_eq!(r.select_rows(&back), p.clone(), "{}", learner.label());

            let mut again = learner.instantiate::<f64>();
            again.fit(x.view(), &y, c, fit_seed).unwrap();
            prop_assert_eq!(again.predict_proba(query.view()).unwrap(), p);
        }
    }

    #[test]
    fn out_of_fold_rows_never_see_their_own_label(seed in any::<u64>(), row in 0usize..40) {
        let (x, y) = learner_data(seed, 40, 2);
        let idx: Vec<usize> = (0..40).collect();
        let folds = assign_folds(&idx, &y, 5, seed).unwrap();
        for learner in BuiltinLearner::default_pool() {
            let f = Builtin::new(learner.clone());
            let base = oof_predict(&f, x.view(), &y, 2, &folds, 0).unwrap();
            let mut poisoned = y.clone();
            poisoned[row] = 1 - poisoned[row];
            let p = oof_predict(&f, x.view(), &poisoned, 2, &folds, 0).unwrap();
            prop_assert_eq!(base.row(row), p.row(row), "{}", learner.label());
        }
    }

    #[test]
    fn greedy_keeps_a_dominant_base(others in prop::collection::vec(stochastic_rows(12, 3), 1..4), slot in 0usize..4) {
        // The dominant base is right on every row by a margin too thin for any
        // other base to be added without flipping a row within 200 steps.
        let y: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let dominant: Vec<Vec<f64>> = y.iter().map(|&l| {
            let mut r = vec![0.0; 3];
            r[l] = 0.5 + 1e-3;
            r[(l + 1) % 3] = 0.5 - 1e-3;
            r
        }).collect();
        let mut pool: Vec<Probs> = others.iter().map(|m| {
            // Shift every other base's mass onto the dominant base's runner-up.
            let rows: Vec<Vec<f64>> = m.iter().zip(&y).map(|(r, &l)| {
                let mut out = vec![0.0; 3];
                out[(l + 1) % 3] = 1.0 - r[l] * 0.1;
                out[l] = r[l] * 0.1;
                out
            }).collect();
            Probs::from_rows(&rows).unwrap()
        }).collect();
        let slot = slot.min(pool.len());
        pool.insert(slot, Probs::from_rows(&dominant).unwrap());
        let fit = fit_greedy_selection(&pool, &y, &GreedyConfig { iterations: 200 }).unwrap();
        let expected: Vec<f64> = (0..pool.len()).map(|i| if i == slot { 1.0 } else { 0.0 }).collect();
        prop_assert_eq!(fit.weights.as_slice(), &expected[..]);
    }
}
