//! Datasets, synthetic generators, CSV ingestion, splits and pool
//! initialization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from;

/// Attempts made by [`init_warm_start`] to draw a two-class labeled set.
pub const WARM_START_ATTEMPTS: usize = 16;

/// A binary-labeled feature matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        features: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::invalid(format!(
                "{} feature values do not form {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::invalid(format!("label at row {i} is not 0 or 1")));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature in row {}",
                i / dim
            )));
        }
        Ok(Dataset {
            name: name.into(),
            dim,
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    pub fn has_both_classes(&self) -> bool {
        let [zeros, ones] = self.class_counts();
        zeros > 0 && ones > 0
    }

    /// Rows `indices` (in that order) as a new dataset.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            name: name.into(),
            dim: self.dim,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            let header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
            writeln!(w, "{},label", header.join(","))?;
            for (row, label) in self.rows().zip(&self.labels) {
                for v in row {
                    write!(w, "{v},")?;
                }
                writeln!(w, "{label}")?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }
}

fn check_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

/// Two isotropic unit-variance Gaussian classes centred at
/// `∓separation/2` along the first axis. Class 0 rows come first.
pub fn gaussian_clouds(
    n: usize,
    class0_fraction: f64,
    separation: f64,
    dim: usize,
    seed: u64,
) -> Result<Dataset> {
    check_count(n)?;
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if !(class0_fraction > 0.0 && class0_fraction < 1.0) {
        return Err(Error::invalid("class0_fraction must lie in (0, 1)"));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::invalid("separation must be positive"));
    }
    let n0 = (n as f64 * class0_fraction).round() as usize;
    if n0 == 0 || n0 == n {
        return Err(Error::invalid(format!(
            "class0_fraction {class0_fraction} leaves a class empty at n = {n}"
        )));
    }

    let mut rng = rng_from(seed, &[]);
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = u8::from(i >= n0);
        let shift = if label == 0 {
            -separation / 2.0
        } else {
            separation / 2.0
        };
        for j in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            features.push(if j == 0 { z + shift } else { z });
        }
        labels.push(label);
    }
    Dataset::new(format!("gaussian-clouds-{n}"), dim, features, labels)
}

/// Parity label of the `k x k` checkerboard on the unit square.
pub fn checkerboard_label(k: usize, x1: f64, x2: f64) -> u8 {
    let cell = |v: f64| ((k as f64 * v).floor() as i64).clamp(0, k as i64 - 1);
    ((cell(x1) + cell(x2)).rem_euclid(2)) as u8
}

pub fn checkerboard(k: usize, n: usize, seed: u64) -> Result<Dataset> {
    if k != 2 && k != 4 {
        return Err(Error::invalid(format!(
            "checkerboard side must be 2 or 4, got {k}"
        )));
    }
    check_count(n)?;
    let mut rng = rng_from(seed, &[]);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.gen();
        let x2: f64 = rng.gen();
        features.extend([x1, x2]);
        labels.push(checkerboard_label(k, x1, x2));
    }
    Dataset::new(format!("checkerboard-{k}x{k}"), 2, features, labels)
}

/// Two interleaved crescents. Class 0 lies on the upper unit half-circle,
/// class 1 on the lower half-circle centred at `(1, 0.5)`; both are
/// perturbed by isotropic Gaussian noise of scale `noise`.
pub fn banana(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    check_count(n)?;
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid("noise must be a non-negative number"));
    }
    let n0 = n.div_ceil(2);
    let mut rng = rng_from(seed, &[]);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.gen::<f64>() * std::f64::consts::PI;
        let (label, x, y) = if i < n0 {
            (0, t.cos(), t.sin())
        } else {
            (1, 1.0 - t.cos(), 0.5 - t.sin())
        };
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        features.extend([x + noise * ex, y + noise * ey]);
        labels.push(label);
    }
    Dataset::new("banana", 2, features, labels)
}

/// Declarative description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorSpec {
    GaussianClouds {
        n: usize,
        #[serde(default = "half")]
        class0_fraction: f64,
        #[serde(default = "two")]
        separation: f64,
        #[serde(default = "two_usize")]
        dim: usize,
    },
    Checkerboard {
        k: usize,
        n: usize,
    },
    Banana {
        n: usize,
        #[serde(default = "default_banana_noise")]
        noise: f64,
    },
}

fn half() -> f64 {
    0.5
}
fn two() -> f64 {
    2.0
}
fn two_usize() -> usize {
    2
}
fn default_banana_noise() -> f64 {
    0.15
}

impl GeneratorSpec {
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        match *self {
            GeneratorSpec::GaussianClouds {
                n,
                class0_fraction,
                separation,
                dim,
            } => gaussian_clouds(n, class0_fraction, separation, dim, seed),
            GeneratorSpec::Checkerboard { k, n } => checkerboard(k, n, seed),
            GeneratorSpec::Banana { n, noise } => banana(n, noise, seed),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            GeneratorSpec::GaussianClouds { n, .. }
            | GeneratorSpec::Checkerboard { n, .. }
            | GeneratorSpec::Banana { n, .. } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reads a CSV file with one header row. Every column other than
/// `label_column` is a feature, in header order. Row numbers in errors
/// count data rows from 1 (the header is row 0).
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let format_err = |message: String| Error::CsvFormat {
        path: path.to_path_buf(),
        message,
    };

    let headers = reader
        .headers()
        .map_err(|e| format_err(e.to_string()))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| format_err(format!("no column named `{label_column}`")))?;
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(format_err("no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| format_err(format!("row {row}: {e}")))?;
        for (c, cell) in record.iter().enumerate() {
            let cell_err = |message: String| Error::CsvCell {
                path: path.to_path_buf(),
                row,
                column: headers[c].to_string(),
                message,
            };
            if c == label_idx {
                let label = match cell {
                    "0" | "0.0" => 0,
                    "1" | "1.0" => 1,
                    other => return Err(cell_err(format!("label `{other}` is not 0 or 1"))),
                };
                labels.push(label);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| cell_err(format!("`{cell}` is not a number")))?;
                if !v.is_finite() {
                    return Err(cell_err(format!("`{cell}` is not finite")));
                }
                features.push(v);
            }
        }
    }
    if labels.len() < 2 {
        return Err(format_err(format!(
            "need at least 2 data rows, found {}",
            labels.len()
        )));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Dataset::new(name, dim, features, labels)
}

/// Shuffled row indices divided into `(train, test)`.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test_fraction must lie in (0, 1)"));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::invalid(format!(
            "test_fraction {test_fraction} leaves an empty part at n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed, &[]));
    let test = order.split_off(n - n_test);
    Ok((order, test))
}

pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train_idx, test_idx) = split_indices(dataset.len(), test_fraction, seed)?;
    let train = dataset.subset(&train_idx, format!("{}-train", dataset.name));
    let test = dataset.subset(&test_idx, format!("{}-test", dataset.name));
    for part in [&train, &test] {
        if !part.has_both_classes() {
            return Err(Error::SingleClass(format!("split part `{}`", part.name)));
        }
    }
    Ok((train, test))
}

/// The labeled/unlabeled partition of a dataset during active learning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    labeled: Vec<usize>,
    /// Sorted ascending.
    unlabeled: Vec<usize>,
    iteration: usize,
}

impl PoolState {
    /// Partition of `0..n` with `labeled` (in order) on the labeled side.
    pub fn new(n: usize, labeled: Vec<usize>) -> Result<Self> {
        let mut is_labeled = vec![false; n];
        for &i in &labeled {
            if i >= n {
                return Err(Error::invalid(format!(
                    "index {i} out of range for {n} samples"
                )));
            }
            if std::mem::replace(&mut is_labeled[i], true) {
                return Err(Error::invalid(format!("index {i} labeled twice")));
            }
        }
        let unlabeled = (0..n).filter(|&i| !is_labeled[i]).collect();
        Ok(PoolState {
            labeled,
            unlabeled,
            iteration: 0,
        })
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_unlabeled(&self, index: usize) -> bool {
        self.unlabeled.binary_search(&index).is_ok()
    }

    /// Moves `index` from the pool to the labeled set and advances `t`.
    pub fn query(&mut self, index: usize) -> Result<()> {
        let pos = self
            .unlabeled
            .binary_search(&index)
            .map_err(|_| Error::invalid(format!("index {index} is not in the unlabeled pool")))?;
        self.unlabeled.remove(pos);
        self.labeled.push(index);
        self.iteration += 1;
        Ok(())
    }

    /// Fraction of labeled samples with label 0.
    pub fn class0_proportion(&self, dataset: &Dataset) -> f64 {
        if self.labeled.is_empty() {
            return 0.0;
        }
        let zeros = self
            .labeled
            .iter()
            .filter(|&&i| dataset.label(i) == 0)
            .count();
        zeros as f64 / self.labeled.len() as f64
    }

    pub fn labeled_has_both_classes(&self, dataset: &Dataset) -> bool {
        let zeros = self
            .labeled
            .iter()
            .filter(|&&i| dataset.label(i) == 0)
            .count();
        zeros > 0 && zeros < self.labeled.len()
    }
}

/// One uniformly random index per class.
pub fn init_cold_start(train: &Dataset, seed: u64) -> Result<PoolState> {
    let mut rng = rng_from(seed, &[]);
    let picks = one_per_class(train, &mut rng)?;
    PoolState::new(train.len(), picks.to_vec())
}

pub(crate) fn one_per_class(train: &Dataset, rng: &mut impl Rng) -> Result<[usize; 2]> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in train.labels().iter().enumerate() {
        by_class[l as usize].push(i);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::SingleClass(format!("dataset `{}`", train.name())));
    }
    let a = by_class[0][rng.gen_range(0..by_class[0].len())];
    let b = by_class[1][rng.gen_range(0..by_class[1].len())];
    Ok([a, b])
}

/// `n0` random labeled indices containing both classes, retried up to
/// [`WARM_START_ATTEMPTS`] times.
pub fn init_warm_start(train: &Dataset, n0: usize, seed: u64) -> Result<PoolState> {
    if n0 < 2 || n0 >= train.len() {
        return Err(Error::invalid(format!(
            "warm start size must satisfy 2 <= n0 < {}, got {n0}",
            train.len()
        )));
    }
    let mut rng = rng_from(seed, &[]);
    for _ in 0..WARM_START_ATTEMPTS {
        let picked = sample(&mut rng, train.len(), n0).into_vec();
        let zeros = picked.iter().filter(|&&i| train.label(i) == 0).count();
        if zeros > 0 && zeros < n0 {
            return PoolState::new(train.len(), picked);
        }
    }
    Err(Error::SingleClass(format!(
        "no two-class warm start of size {n0} found in {WARM_START_ATTEMPTS} attempts"
    )))
}
