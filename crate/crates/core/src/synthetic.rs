//! Seeded Gaussian-mixture classification tables.

use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::{derive_seed, rng_from_seed, shuffle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub id: String,
    #[serde(default = "default_rows")]
    pub rows: usize,
    #[serde(default = "default_features")]
    pub features: usize,
    pub classes: usize,
    /// Mixture components per class.
    #[serde(default = "default_components")]
    pub components: usize,
    /// Standard deviation of component centres; within-component noise is 1.
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Append a 3-valued group column (drawn independently of the class).
    #[serde(default)]
    pub with_groups: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_rows() -> usize {
    300
}

fn default_features() -> usize {
    8
}

fn default_components() -> usize {
    2
}

fn default_separation() -> f64 {
    1.0
}

impl MixtureSpec {
    pub fn new(id: impl Into<String>, classes: usize, seed: u64) -> Self {
        Self {
            id: id.into(),
            rows: default_rows(),
            features: default_features(),
            classes,
            components: default_components(),
            separation: default_separation(),
            with_groups: false,
            seed,
        }
    }
}

/// Rows are dealt to classes round-robin (so class sizes differ by at most one),
/// to a uniformly drawn component of their class, then shuffled.
pub fn gaussian_mixture<T: Real>(spec: &MixtureSpec) -> Result<Dataset<T>> {
    if spec.classes < 2 || spec.rows < spec.classes || spec.features == 0 || spec.components == 0 {
        return Err(Error::InvalidParameter(format!("degenerate mixture spec {spec:?}")));
    }
    let centre_dist = Normal::new(0.0, spec.separation).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = rng_from_seed(derive_seed(spec.seed, "mixture"));
    let centres: Vec<Vec<Vec<f64>>> = (0..spec.classes)
        .map(|_| (0..spec.components).map(|_| (0..spec.features).map(|_| centre_dist.sample(&mut rng)).collect()).collect())
        .collect();

    let mut labels: Vec<usize> = (0..spec.rows).map(|i| i % spec.classes).collect();
    shuffle(&mut labels, &mut rng);
    let width = spec.features + spec.with_groups as usize;
    let mut x = Array2::<T>::zeros((spec.rows, width));
    for (i, &y) in labels.iter().enumerate() {
        let comp = (rand::Rng::random::<u64>(&mut rng) % spec.components as u64) as usize;
        for j in 0..spec.features {
            x[[i, j]] = T::lit(centres[y][comp][j] + noise.sample(&mut rng));
        }
        if spec.with_groups {
            x[[i, spec.features]] = T::of_usize((rand::Rng::random::<u64>(&mut rng) % 3) as usize);
        }
    }
    Dataset::new(spec.id.clone(), x, labels, spec.classes, spec.with_groups.then_some(spec.features))
}

/// `count` mixtures alternating 2 and 3 classes with separations cycling
/// through 0.6, 0.9, 1.2, 1.5, 1.8; seeds derived from `seed`.
pub fn benchmark_suite(count: usize, seed: u64) -> Vec<MixtureSpec> {
    (0..count)
        .map(|i| MixtureSpec {
            separation: 0.6 + 0.3 * (i % 5) as f64,
            ..MixtureSpec::new(format!("mixture-{i:02}"), 2 + i % 2, derive_seed(seed, &format!("suite:{i}")))
        })
        .collect()
}
