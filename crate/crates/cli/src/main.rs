use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use ensemble_lab::data::{write_csv, CsvOptions};
use ensemble_lab::harness::{
    aggregate, diversity_only, read_records, run_all, write_report, Aggregate, BaseEntry, DatasetEntry, RunConfig,
    RECORDS_FILE,
};
use ensemble_lab::learners::BuiltinLearner;
use ensemble_lab::synthetic::{benchmark_suite, gaussian_mixture};
use ensemble_lab::Dataset64;

#[derive(Parser)]
#[command(name = "ensemble-lab", version, about = "Benchmark ensembles of tabular classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every dataset of a config and append to <output_dir>/records.jsonl.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Datasets processed in parallel.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Delete existing records first instead of skipping finished datasets.
        #[arg(long)]
        fresh: bool,
    },
    /// Aggregate records into the leaderboard and statistics files.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pool diversity from base-model records only.
    Diversity {
        #[arg(long)]
        records: PathBuf,
        /// Output file; defaults to diversity.json next to the records.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write Gaussian-mixture CSV datasets plus a ready-to-run config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append a 3-valued group column for worst-group accuracy.
        #[arg(long)]
        groups: bool,
    },
}

fn print_leaderboard(agg: &Aggregate) {
    println!("{:<22} {:>9} {:>9} {:>8} {:>9} {:>10}", "method", "mean_rank", "accuracy", "ece", "log_loss", "seconds");
    for e in &agg.leaderboard {
        let rank = e.mean_rank.map_or_else(|| "-".to_string(), |r| format!("{r:.3}"));
        println!(
            "{:<22} {:>9} {:>9.4} {:>8.4} {:>9.4} {:>10.4}{}",
            e.method,
            rank,
            e.means.accuracy,
            e.means.ece,
            e.means.log_loss,
            e.means.total_seconds,
            if e.complete { "" } else { "  (incomplete)" }
        );
    }
    let s = &agg.stats;
    println!(
        "Friedman chi2 = {:.4} (p = {:.3e}); N = {}, K = {}",
        s.friedman_chi2,
        s.friedman_p,
        s.datasets.len(),
        s.methods.len()
    );
    if let Some(cd) = s.nemenyi_cd {
        println!("Nemenyi CD (alpha = {}) = {cd:.4}", s.alpha);
    }
}

fn run(config: &Path, workers: usize, fresh: bool) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let records = cfg.output_dir.join(RECORDS_FILE);
    if fresh && records.exists() {
        fs::remove_file(&records).with_context(|| format!("removing {}", records.display()))?;
    }
    let summary = run_all::<f64>(&cfg, workers)?;
    let failed = summary.records.iter().filter(|r| !r.is_ok()).count();
    println!(
        "{} records written to {} ({failed} failed, {} datasets skipped)",
        summary.records.len(),
        records.display(),
        summary.skipped.len()
    );
    Ok(())
}

fn report(records: &Path, out: &Path) -> Result<()> {
    let records = read_records(records).with_context(|| format!("reading {}", records.display()))?;
    let agg = aggregate(&records)?;
    write_report(&agg, out)?;
    print_leaderboard(&agg);
    info!("report written to {}", out.display());
    Ok(())
}

fn diversity(records: &Path, out: Option<PathBuf>) -> Result<()> {
    let list = read_records(records).with_context(|| format!("reading {}", records.display()))?;
    let Some(summary) = diversity_only(&list)? else {
        bail!("fewer than two base models completed every dataset");
    };
    let out = out.unwrap_or_else(|| records.with_file_name("diversity.json"));
    fs::write(&out, serde_json::to_string_pretty(&summary)?)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
    println!(
        "mean Q = {}, std Q = {}, mean kappa = {}, mean ceiling bound = {:.4}",
        fmt(summary.report.mean_q),
        fmt(summary.report.std_q),
        fmt(summary.report.mean_kappa),
        summary.mean_ceiling_bound
    );
    println!("written to {}", out.display());
    Ok(())
}

fn validate(config: &Path) -> Result<bool> {
    let cfg = RunConfig::load(config)?;
    let issues = cfg.lint();
    if issues.is_empty() {
        println!(
            "ok: {} datasets, {} pool members, {} strategies",
            cfg.datasets.len(),
            cfg.pool.len(),
            cfg.strategies.len()
        );
        return Ok(true);
    }
    for issue in &issues {
        println!("error: {issue}");
    }
    Ok(false)
}

fn synth(out: &Path, count: usize, seed: u64, groups: bool) -> Result<()> {
    let data_dir = out.join("data");
    fs::create_dir_all(&data_dir)?;
    let mut datasets = Vec::new();
    for mut spec in benchmark_suite(count, seed) {
        spec.with_groups = groups;
        let data: Dataset64 = gaussian_mixture(&spec)?;
        let file = format!("{}.csv", spec.id);
        write_csv(&data, &data_dir.join(&file))?;
        datasets.push(DatasetEntry::Csv {
            path: PathBuf::from("data").join(file),
            id: None,
            options: CsvOptions { target: "target".into(), group: groups.then(|| "group".into()), median_impute: false },
        });
    }
    let pool = BuiltinLearner::default_pool()
        .into_iter()
        .map(|learner| BaseEntry::Builtin { name: None, learner, seed: 0 })
        .collect();
    let mut cfg = RunConfig::new(datasets, pool);
    cfg.master_seed = seed;
    let path = out.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg)?)?;
    println!("{count} datasets in {}; config at {}", data_dir.display(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, workers, fresh } => run(&config, workers, fresh).map(|_| true),
        Command::Report { records, out } => report(&records, &out).map(|_| true),
        Command::Diversity { records, out } => diversity(&records, out).map(|_| true),
        Command::Validate { config } => validate(&config),
        Command::Synth { out, count, seed, groups } => synth(&out, count, seed, groups).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
