use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::combiners::Strategy;
use crate::data::{read_csv, CsvOptions, Dataset};
use crate::error::{Error, Result};
use crate::learners::{BuiltinLearner, DEFAULT_TIMEOUT};
use crate::scalar::Real;
use crate::synthetic::{gaussian_mixture, MixtureSpec};

/// Where one dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetEntry {
    Csv {
        path: PathBuf,
        /// Defaults to the file stem.
        #[serde(default)]
        id: Option<String>,
        #[serde(flatten)]
        options: CsvOptions,
    },
    Synthetic(MixtureSpec),
}

impl DatasetEntry {
    pub fn id(&self) -> String {
        match self {
            DatasetEntry::Csv { id: Some(id), .. } => id.clone(),
            DatasetEntry::Csv { path, .. } => {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
            }
            DatasetEntry::Synthetic(spec) => spec.id.clone(),
        }
    }

    pub fn load<T: Real>(&self) -> Result<Dataset<T>> {
        match self {
            DatasetEntry::Csv { path, options, .. } => read_csv(path, &self.id(), options),
            DatasetEntry::Synthetic(spec) => gaussian_mixture(spec),
        }
    }
}

/// One pool member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseEntry {
    /// A builtin learner. A nonzero `seed` replaces the canonical seed 0 for
    /// every fit of this member (so several seeds of one learner can coexist).
    Builtin {
        #[serde(default)]
        name: Option<String>,
        #[serde(flatten)]
        learner: BuiltinLearner,
        #[serde(default)]
        seed: u64,
    },
    /// Precomputed predictions: `<dir>/<dataset>.val.csv` and `<dataset>.test.csv`,
    /// rows in ascending dataset-row order of the split. An optional
    /// `<dataset>.train.csv` supplies out-of-fold train predictions for stacking.
    FileBacked { name: String, dir: PathBuf },
    /// A worker process speaking the wire protocol.
    External {
        name: String,
        command: Vec<String>,
        #[serde(default)]
        timeout_seconds: Option<u64>,
    },
}

impl BaseEntry {
    pub fn name(&self) -> String {
        match self {
            BaseEntry::Builtin { name: Some(n), .. } => n.clone(),
            BaseEntry::Builtin { learner, seed: 0, .. } => learner.label().to_string(),
            BaseEntry::Builtin { learner, seed, .. } => format!("{}@{seed}", learner.label()),
            BaseEntry::FileBacked { name, .. } | BaseEntry::External { name, .. } => name.clone(),
        }
    }

    pub fn timeout(&self) -> Duration {
        match self {
            BaseEntry::External { timeout_seconds: Some(s), .. } => Duration::from_secs(*s),
            _ => DEFAULT_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldCounts {
    pub stacking: usize,
    pub cascade: usize,
}

impl Default for FoldCounts {
    fn default() -> Self {
        Self { stacking: 5, cascade: 3 }
    }
}

fn all_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_iterations() -> usize {
    50
}

fn default_seeds() -> usize {
    3
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_level2() -> Vec<BuiltinLearner> {
    BuiltinLearner::default_pool()
}

/// A complete experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub datasets: Vec<DatasetEntry>,
    pub pool: Vec<BaseEntry>,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub folds: FoldCounts,
    #[serde(default = "default_iterations")]
    pub greedy_iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds_per_base: usize,
    /// Second-level learners of the cascade.
    #[serde(default = "default_level2")]
    pub cascade_level2: Vec<BuiltinLearner>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(datasets: Vec<DatasetEntry>, pool: Vec<BaseEntry>) -> Self {
        Self {
            master_seed: 0,
            datasets,
            pool,
            strategies: all_strategies(),
            folds: FoldCounts::default(),
            greedy_iterations: default_iterations(),
            seeds_per_base: default_seeds(),
            cascade_level2: default_level2(),
            output_dir: default_output(),
        }
    }

    /// Parses a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut cfg.datasets {
            if let DatasetEntry::Csv { path, .. } = d {
                resolve(path);
            }
        }
        for b in &mut cfg.pool {
            if let BaseEntry::FileBacked { dir, .. } = b {
                resolve(dir);
            }
        }
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    /// Every problem found, empty when the config is runnable.
    pub fn lint(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.datasets.is_empty() {
            issues.push("no datasets".to_string());
        }
        if self.pool.len() < 2 {
            issues.push(format!("pool has {} members; at least two required", self.pool.len()));
        }
        let mut seen = HashSet::new();
        for d in &self.datasets {
            let id = d.id();
            if !seen.insert(id.clone()) {
                issues.push(format!("duplicate dataset id `{id}`"));
            }
            if let DatasetEntry::Csv { path, options, .. } = d {
                if !path.is_file() {
                    issues.push(format!("dataset `{id}`: {} not found", path.display()));
                }
                if options.target.is_empty() {
                    issues.push(format!("dataset `{id}`: empty target column name"));
                }
            }
        }
        let mut names = HashSet::new();
        for b in &self.pool {
            let name = b.name();
            if !names.insert(name.clone()) {
                issues.push(format!("duplicate pool member `{name}`"));
            }
            match b {
                BaseEntry::FileBacked { dir, .. } => {
                    if !dir.is_dir() {
                        issues.push(format!("pool member `{name}`: directory {} not found", dir.display()));
                    } else {
                        for d in &self.datasets {
                            for split in ["val", "test"] {
                                let f = dir.join(format!("{}.{split}.csv", d.id()));
                                if !f.is_file() {
                                    issues.push(format!("pool member `{name}`: {} not found", f.display()));
                                }
                            }
                        }
                    }
                }
                BaseEntry::External { command, .. } if command.is_empty() => {
                    issues.push(format!("pool member `{name}`: empty command"));
                }
                _ => {}
            }
        }
        let mut strategies = HashSet::new();
        for s in &self.strategies {
            if !strategies.insert(*s) {
                issues.push(format!("strategy {s} listed twice"));
            }
        }
        if self.folds.stacking < 2 || self.folds.cascade < 2 {
            issues.push("fold counts must be at least 2".to_string());
        }
        if self.greedy_iterations == 0 {
            issues.push("greedy_iterations must be positive".to_string());
        }
        if self.seeds_per_base < 2 {
            issues.push("seeds_per_base must be at least 2".to_string());
        }
        issues
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.lint();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues.join("; ")))
        }
    }
}
