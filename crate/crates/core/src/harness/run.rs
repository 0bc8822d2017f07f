use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use log::{info, warn};
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::config::{BaseEntry, DatasetEntry, RunConfig};
use super::record::{now_unix, read_records, MethodKind, RecordMetrics, RecordWriter, RunRecord, RECORD_SCHEMA};
use crate::combiners::{
    combine_convex, fit_cascade, fit_greedy_selection, fit_seed_ensemble, fit_stacking, fit_temperature,
    fit_weighted_average, predict_stacking, temp_scaled_blend, CascadeConfig, FittedParams, GreedyConfig, Manifest,
    SeedEnsembleConfig, Strategy, TemperatureVector,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{
    oof_predict, Builtin, BuiltinLearner, Classifier, ExternalLearner, FileBackedPredictor, FitReport, LearnerFactory,
    ModelKind, SharedFactory,
};
use crate::metrics::{accuracy, MetricBundle};
use crate::proba::ProbabilityMatrix;
use crate::scalar::Real;
use crate::seed::derive_seed;
use crate::split::{assign_folds, stratified_split, Split, SplitSpec};

const STACKING_FOLD_TAG: &str = "stacking";

pub fn dataset_seed(master_seed: u64, dataset_id: &str) -> u64 {
    derive_seed(master_seed, &format!("dataset:{dataset_id}"))
}

/// A builtin learner whose canonical fit (seed 0) uses a fixed nonzero seed.
struct SeededBuiltin {
    name: String,
    learner: BuiltinLearner,
    seed: u64,
}

struct SeededClassifier<T: Real> {
    inner: Box<dyn Classifier<T>>,
    seed: u64,
}

impl<T: Real> Classifier<T> for SeededClassifier<T> {
    fn fit(&mut self, features: ArrayView2<'_, T>, labels: &[usize], class_count: usize, seed: u64) -> Result<()> {
        self.inner.fit(features, labels, class_count, if seed == 0 { self.seed } else { seed })
    }

    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<ProbabilityMatrix<T>> {
        self.inner.predict_proba(features)
    }
}

impl<T: Real> LearnerFactory<T> for SeededBuiltin {
    fn name(&self) -> &str {
        &self.name
    }

    fn build(&self) -> Result<Box<dyn Classifier<T>>> {
        Ok(Box::new(SeededClassifier { inner: self.learner.instantiate(), seed: self.seed }))
    }
}

/// Builds the refittable factory for `entry`; `None` for file-backed members.
pub fn factory_for<T: Real>(entry: &BaseEntry) -> Option<SharedFactory<T>> {
    let name = entry.name();
    match entry {
        BaseEntry::Builtin { learner, seed: 0, .. } => Some(Arc::new(Builtin { name, learner: learner.clone() })),
        BaseEntry::Builtin { learner, seed, .. } => {
            Some(Arc::new(SeededBuiltin { name, learner: learner.clone(), seed: *seed }))
        }
        BaseEntry::External { command, .. } => {
            Some(Arc::new(ExternalLearner { name, command: command.clone(), timeout: entry.timeout() }))
        }
        BaseEntry::FileBacked { .. } => None,
    }
}

fn load_stored<T: Real>(dir: &Path, dataset: &str, split: &str, rows: usize) -> Result<ProbabilityMatrix<T>> {
    let p = FileBackedPredictor::<T>::load(&dir.join(format!("{dataset}.{split}.csv")))?;
    if p.matrix().rows() != rows {
        return Err(Error::ShapeMismatch(format!(
            "{dataset}.{split}.csv has {} rows, the split has {rows}",
            p.matrix().rows()
        )));
    }
    Ok(p.matrix().clone())
}

/// Base predictions computed once per dataset and shared by every strategy.
pub struct BaseCache<T: Real> {
    pub names: Vec<String>,
    pub kinds: Vec<ModelKind>,
    pub val: Vec<ProbabilityMatrix<T>>,
    pub test: Vec<ProbabilityMatrix<T>>,
    pub reports: Vec<FitReport>,
    factories: Vec<Option<SharedFactory<T>>>,
    /// Precomputed train out-of-fold matrices of predict-only members, if supplied.
    stored_oof: Vec<Option<ProbabilityMatrix<T>>>,
}

impl<T: Real> BaseCache<T> {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn pool_seconds(&self) -> f64 {
        self.reports.iter().map(|r| r.fit_seconds + r.predict_seconds).sum()
    }

    fn refittable(&self) -> Result<Vec<SharedFactory<T>>> {
        self.factories
            .iter()
            .zip(&self.names)
            .map(|(f, name)| f.clone().ok_or_else(|| Error::RefitUnsupported(name.clone())))
            .collect()
    }
}

/// The dataset rows of one split.
pub struct Partitions<T: Real> {
    pub split: Split,
    pub train_x: Array2<T>,
    pub train_y: Vec<usize>,
    pub val_x: Array2<T>,
    pub val_y: Vec<usize>,
    pub test_x: Array2<T>,
    pub test_y: Vec<usize>,
    pub test_groups: Option<Vec<usize>>,
}

impl<T: Real> Partitions<T> {
    pub fn new(dataset: &Dataset<T>, seed: u64) -> Result<Self> {
        let split = stratified_split(&dataset.labels, dataset.class_count, &SplitSpec::new(seed))?;
        for w in &split.warnings {
            warn!("{}: class {} has a single row; kept in train only", dataset.id, w.class);
        }
        let test_groups = dataset.groups().map(|g| split.test.iter().map(|&i| g[i]).collect());
        Ok(Self {
            train_x: dataset.rows(&split.train),
            train_y: dataset.labels_at(&split.train),
            val_x: dataset.rows(&split.val),
            val_y: dataset.labels_at(&split.val),
            test_x: dataset.rows(&split.test),
            test_y: dataset.labels_at(&split.test),
            test_groups,
            split,
        })
    }
}

/// Everything one dataset produced.
pub struct DatasetRun<T: Real> {
    pub dataset_id: String,
    pub seed: u64,
    pub partitions: Partitions<T>,
    pub records: Vec<RunRecord>,
    /// Members that fitted successfully, in pool order.
    pub cache: BaseCache<T>,
    pub manifests: Vec<Manifest<T>>,
    /// Test predictions of each successful strategy.
    pub strategy_outputs: Vec<(Strategy, ProbabilityMatrix<T>)>,
}

fn success_record<T: Real>(
    dataset: &str,
    method: &str,
    kind: MethodKind,
    probs: &ProbabilityMatrix<T>,
    parts: &Partitions<T>,
    report: FitReport,
    pool_seconds: f64,
) -> Result<RunRecord> {
    let metrics = MetricBundle::evaluate(probs, &parts.test_y, parts.test_groups.as_deref())?;
    let combiner_seconds = match kind {
        MethodKind::Base => 0.0,
        MethodKind::Strategy => report.fit_seconds + report.predict_seconds,
    };
    Ok(RunRecord {
        schema: RECORD_SCHEMA,
        dataset_id: dataset.into(),
        method: method.into(),
        kind,
        n_test: parts.test_y.len(),
        timestamp: now_unix(),
        metrics: Some(RecordMetrics::from(&metrics)),
        fit_seconds: report.fit_seconds,
        predict_seconds: report.predict_seconds,
        pool_seconds,
        combiner_seconds,
        error: None,
        test_predictions: probs.argmax(),
        test_labels: parts.test_y.clone(),
    })
}

fn fit_member<T: Real>(
    entry: &BaseEntry,
    dataset: &Dataset<T>,
    parts: &Partitions<T>,
) -> Result<(ProbabilityMatrix<T>, ProbabilityMatrix<T>, FitReport, Option<ProbabilityMatrix<T>>)> {
    if let BaseEntry::FileBacked { dir, .. } = entry {
        let start = Instant::now();
        let val = load_stored(dir, &dataset.id, "val", parts.val_y.len())?;
        let test = load_stored(dir, &dataset.id, "test", parts.test_y.len())?;
        let predict_seconds = start.elapsed().as_secs_f64();
        let oof_path = dir.join(format!("{}.train.csv", dataset.id));
        let oof = if oof_path.is_file() { Some(load_stored(dir, &dataset.id, "train", parts.train_y.len())?) } else { None };
        for m in [&val, &test].into_iter().chain(oof.as_ref()) {
            if m.classes() != dataset.class_count {
                return Err(Error::ShapeMismatch(format!("{} stored classes vs {}", m.classes(), dataset.class_count)));
            }
        }
        return Ok((val, test, FitReport { fit_seconds: 0.0, predict_seconds }, oof));
    }
    let factory = factory_for::<T>(entry).expect("refittable member");
    let mut model = factory.build()?;
    let (mut out, report) = crate::learners::fit_predict_timed(
        model.as_mut(),
        (parts.train_x.view(), &parts.train_y),
        dataset.class_count,
        0,
        &[parts.val_x.view(), parts.test_x.view()],
    )?;
    let test = out.pop().expect("two outputs");
    let val = out.pop().expect("two outputs");
    for m in [&val, &test] {
        if m.classes() != dataset.class_count {
            return Err(Error::ShapeMismatch(format!("{} predicted classes vs {}", m.classes(), dataset.class_count)));
        }
    }
    Ok((val, test, report, None))
}

struct Outcome<T: Real> {
    test: ProbabilityMatrix<T>,
    params: FittedParams<T>,
    report: FitReport,
}

fn timed<R>(f: impl FnOnce() -> Result<R>) -> Result<(R, f64)> {
    let start = Instant::now();
    let r = f()?;
    Ok((r, start.elapsed().as_secs_f64()))
}

fn run_strategy<T: Real>(
    strategy: Strategy,
    cfg: &RunConfig,
    dataset: &Dataset<T>,
    parts: &Partitions<T>,
    cache: &BaseCache<T>,
    seed: u64,
) -> Result<Outcome<T>> {
    if cache.is_empty() {
        return Err(Error::DegenerateInput("no pool member fitted".into()));
    }
    let c = dataset.class_count;
    let greedy = GreedyConfig { iterations: cfg.greedy_iterations };
    let (test, params, fit_seconds, predict_seconds) = match strategy {
        Strategy::WeightedAverage => {
            let (fit, f) = timed(|| fit_weighted_average(&cache.val, &parts.val_y))?;
            let (test, p) = timed(|| combine_convex(&cache.test, &fit.weights))?;
            (test, FittedParams::WeightedAverage { weights: fit.weights, uniform_fallback: fit.uniform_fallback }, f, p)
        }
        Strategy::GreedySelection => {
            let (fit, f) = timed(|| fit_greedy_selection(&cache.val, &parts.val_y, &greedy))?;
            let (test, p) = timed(|| combine_convex(&cache.test, &fit.weights))?;
            (test, FittedParams::GreedySelection { weights: fit.weights, selections: fit.selections }, f, p)
        }
        Strategy::Stacking => {
            let (model, f) = timed(|| {
                let positions: Vec<usize> = (0..parts.train_y.len()).collect();
                let folds =
                    assign_folds(&positions, &parts.train_y, cfg.folds.stacking, derive_seed(seed, STACKING_FOLD_TAG))?;
                let mut oof = Vec::with_capacity(cache.len());
                for k in 0..cache.len() {
                    oof.push(match (&cache.factories[k], &cache.stored_oof[k]) {
                        (Some(factory), _) => {
                            oof_predict(factory.as_ref(), parts.train_x.view(), &parts.train_y, c, &folds, 0)?
                        }
                        (None, Some(stored)) => stored.clone(),
                        (None, None) => return Err(Error::RefitUnsupported(cache.names[k].clone())),
                    });
                }
                fit_stacking(&oof, &parts.train_y)
            })?;
            let (test, p) = timed(|| predict_stacking(&model, &cache.test))?;
            (test, FittedParams::Stacking { meta_weights: model.meta_weights().clone() }, f, p)
        }
        Strategy::TemperatureScaled => {
            let (temps, f) = timed(|| {
                let t = cache.val.iter().map(|v| fit_temperature(v, &parts.val_y)).collect::<Result<Vec<T>>>()?;
                TemperatureVector::new(t)
            })?;
            let (test, p) = timed(|| temp_scaled_blend(&cache.test, &temps))?;
            (test, FittedParams::TemperatureScaled { temperatures: temps }, f, p)
        }
        Strategy::Cascade => {
            let level1 = cache.refittable()?;
            let level2: Vec<SharedFactory<T>> = cfg
                .cascade_level2
                .iter()
                .map(|l| Arc::new(Builtin { name: l.label().to_string(), learner: l.clone() }) as SharedFactory<T>)
                .collect();
            let cascade_cfg = CascadeConfig {
                oof_folds: cfg.folds.cascade,
                final_selection_iterations: cfg.greedy_iterations,
                ..CascadeConfig::default()
            };
            let (model, f) = timed(|| {
                fit_cascade(
                    &level1,
                    &level2,
                    (parts.train_x.view(), &parts.train_y),
                    (parts.val_x.view(), &parts.val_y),
                    c,
                    &cascade_cfg,
                    seed,
                )
            })?;
            let (test, p) = timed(|| model.predict_proba(parts.test_x.view()))?;
            let params = FittedParams::Cascade {
                candidates: model.candidates.clone(),
                weights: model.selection.weights.clone(),
                selections: model.selection.selections.clone(),
            };
            (test, params, f, p)
        }
        Strategy::SeedEnsemble => {
            let factories = cache.refittable()?;
            let se_cfg = SeedEnsembleConfig { seeds_per_base: cfg.seeds_per_base };
            let (model, f) = timed(|| {
                fit_seed_ensemble(
                    &factories,
                    (parts.train_x.view(), &parts.train_y),
                    (parts.val_x.view(), &parts.val_y),
                    c,
                    &se_cfg,
                    seed,
                )
            })?;
            let (test, p) = timed(|| model.predict_proba(parts.test_x.view()))?;
            (test, FittedParams::SeedEnsemble { seeds: model.seeds.clone(), weights: model.weights.clone() }, f, p)
        }
    };
    Ok(Outcome { test, params, report: FitReport { fit_seconds, predict_seconds } })
}

/// Runs every pool member and every enabled strategy on one dataset.
///
/// Member and strategy failures become error records; only a failed split
/// aborts, and then every method gets an error record.
pub fn run_dataset<T: Real>(cfg: &RunConfig, dataset: &Dataset<T>) -> Result<DatasetRun<T>> {
    let seed = dataset_seed(cfg.master_seed, &dataset.id);
    let parts = Partitions::new(dataset, seed)?;
    let n_test = parts.test_y.len();
    let mut records = Vec::new();
    let mut cache = BaseCache {
        names: Vec::new(),
        kinds: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        reports: Vec::new(),
        factories: Vec::new(),
        stored_oof: Vec::new(),
    };
    let mut base_records = Vec::new();
    for entry in &cfg.pool {
        let name = entry.name();
        let fitted = fit_member(entry, dataset, &parts).and_then(|(val, test, report, oof)| {
            let rec = success_record(
                &dataset.id,
                &name,
                MethodKind::Base,
                &test,
                &parts,
                report,
                report.fit_seconds + report.predict_seconds,
            )?;
            Ok((val, test, report, oof, rec))
        });
        match fitted {
            Ok((val, test, report, oof, rec)) => {
                cache.names.push(name);
                cache.kinds.push(match entry {
                    BaseEntry::Builtin { .. } => ModelKind::Builtin,
                    BaseEntry::FileBacked { .. } => ModelKind::FileBacked,
                    BaseEntry::External { .. } => ModelKind::External,
                });
                cache.val.push(val);
                cache.test.push(test);
                cache.reports.push(report);
                cache.factories.push(factory_for(entry));
                cache.stored_oof.push(oof);
                base_records.push(rec);
            }
            Err(e) => {
                warn!("{}: pool member {name} failed: {e}", dataset.id);
                base_records.push(RunRecord::failed(&dataset.id, &name, MethodKind::Base, n_test, &e));
            }
        }
    }
    records.extend(base_records);

    let pool_seconds = cache.pool_seconds();
    let mut manifests = Vec::new();
    let mut strategy_outputs = Vec::new();
    for &strategy in &cfg.strategies {
        let result = run_strategy(strategy, cfg, dataset, &parts, &cache, seed).and_then(|o| {
            let rec =
                success_record(&dataset.id, strategy.name(), MethodKind::Strategy, &o.test, &parts, o.report, pool_seconds)?;
            Ok((o, rec))
        });
        match result {
            Ok((o, rec)) => {
                records.push(rec);
                manifests.push(Manifest::new(cache.names.clone(), o.params));
                strategy_outputs.push((strategy, o.test));
            }
            Err(e) => {
                warn!("{}: {strategy} failed: {e}", dataset.id);
                records.push(RunRecord::failed(&dataset.id, strategy.name(), MethodKind::Strategy, n_test, &e));
            }
        }
    }
    Ok(DatasetRun { dataset_id: dataset.id.clone(), seed, partitions: parts, records, cache, manifests, strategy_outputs })
}

/// Validation accuracy of every cached member, in cache order.
pub fn validation_accuracies<T: Real>(run: &DatasetRun<T>) -> Result<Vec<T>> {
    run.cache.val.iter().map(|v| accuracy(v, &run.partitions.val_y)).collect()
}

/// Records for a dataset that could not be loaded or split.
pub fn failed_dataset_records(cfg: &RunConfig, dataset_id: &str, error: &Error) -> Vec<RunRecord> {
    cfg.pool
        .iter()
        .map(|b| RunRecord::failed(dataset_id, &b.name(), MethodKind::Base, 0, error))
        .chain(cfg.strategies.iter().map(|s| RunRecord::failed(dataset_id, s.name(), MethodKind::Strategy, 0, error)))
        .collect()
}

fn write_artifacts<T: Real>(out: &Path, run: &DatasetRun<T>) -> Result<()> {
    let models = out.join("models").join(&run.dataset_id);
    fs::create_dir_all(&models)?;
    for m in &run.manifests {
        fs::write(models.join(format!("{}.json", m.params.strategy().name())), serde_json::to_string_pretty(m)?)?;
    }
    let splits = out.join("splits");
    fs::create_dir_all(&splits)?;
    fs::write(splits.join(format!("{}.json", run.dataset_id)), serde_json::to_string(&run.partitions.split)?)?;
    Ok(())
}

pub const RECORDS_FILE: &str = "records.jsonl";

/// Summary of a [`run_all`] invocation.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub records: Vec<RunRecord>,
    pub skipped: Vec<String>,
}

/// Runs every dataset of `cfg` on `workers` threads, appending records to
/// `<output_dir>/records.jsonl` as each dataset finishes. Datasets that already
/// have records there are skipped.
pub fn run_all<T: Real>(cfg: &RunConfig, workers: usize) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let records_path = cfg.output_dir.join(RECORDS_FILE);
    let done: HashSet<String> = if records_path.is_file() {
        read_records(&records_path)?.into_iter().map(|r| r.dataset_id).collect()
    } else {
        HashSet::new()
    };
    let (todo, skipped): (Vec<&DatasetEntry>, Vec<&DatasetEntry>) =
        cfg.datasets.iter().partition(|d| !done.contains(&d.id()));
    let skipped: Vec<String> = skipped.iter().map(|d| d.id()).collect();
    for id in &skipped {
        info!("{id}: already in {}, skipping", records_path.display());
    }
    let writer = Mutex::new(RecordWriter::append(&records_path)?);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_dataset: Vec<Result<Vec<RunRecord>>> = pool.install(|| {
        todo.par_iter()
            .map(|entry| {
                let id = entry.id();
                info!("{id}: start");
                let records = match entry.load::<T>().and_then(|d| run_dataset(cfg, &d)) {
                    Ok(run) => {
                        write_artifacts(&cfg.output_dir, &run)?;
                        run.records
                    }
                    Err(e) => {
                        warn!("{id}: {e}");
                        failed_dataset_records(cfg, &id, &e)
                    }
                };
                writer.lock().unwrap_or_else(|e| e.into_inner()).write_all(&records)?;
                info!("{id}: {} records", records.len());
                Ok(records)
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in per_dataset {
        records.extend(r?);
    }
    Ok(RunSummary { records, skipped })
}
