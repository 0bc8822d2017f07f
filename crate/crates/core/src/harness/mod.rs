//! Experiment orchestration: per-dataset runs, JSONL records and the
//! cross-dataset report.

mod aggregate;
mod config;
mod record;
mod run;

pub use aggregate::{
    aggregate, diversity_only, win_matrix_csv, write_report, Aggregate, CdDiagram, DatasetConsensus, DiversitySummary,
    LeaderboardEntry, MetricMeans, ParetoReport, StatReport, StrategyVsOracle, TimeRatio, WilcoxonPair, CD_ALPHA,
};
pub use config::{BaseEntry, DatasetEntry, FoldCounts, RunConfig};
pub use record::{read_records, MethodKind, RecordError, RecordMetrics, RecordWriter, RunRecord, RECORD_SCHEMA};
pub use run::{
    dataset_seed, factory_for, failed_dataset_records, run_all, run_dataset, validation_accuracies, BaseCache,
    DatasetRun, Partitions, RunSummary, RECORDS_FILE,
};
