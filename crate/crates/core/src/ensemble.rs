//! Bootstrap learner pools and 0/1-weighted majority voting.
//!
//! The ensemble prediction is `sign(sum_i w_i * f_i(x))` with `w_i` in
//! {0, 1} and `f_i(x)` in {-1, +1}. A sum of exactly zero votes +1.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::learner::{self, Classifier, LearnerError, LearnerSpec, TrainedLearner};
use crate::seed::derive_seed;
use crate::vectorize::{Dataset, FeatureVector};
use crate::Label;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("pool must hold at least one learner")]
    EmptyPool,
    #[error("weight vector selects no learner")]
    AllZeroWeights,
    #[error("weight vector has length {found}, pool has {expected} learners")]
    LengthMismatch { expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has unlabeled samples")]
    Unlabeled,
    #[error("learner {index}: {source}")]
    Learner {
        index: usize,
        #[source]
        source: LearnerError,
    },
    #[error("invalid weight string {0:?}")]
    BadWeights(String),
    #[error("{path}: line {line}: {reason}")]
    Format { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary selection over a learner pool.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightVector(Vec<bool>);

impl WeightVector {
    pub fn new(bits: Vec<bool>) -> Self {
        WeightVector(bits)
    }

    pub fn all_ones(n: usize) -> Self {
        WeightVector(vec![true; n])
    }

    /// Only learner `index` selected.
    pub fn single(n: usize, index: usize) -> Self {
        let mut bits = vec![false; n];
        bits[index] = true;
        WeightVector(bits)
    }

    /// The `n`-bit vector whose bit `i` is bit `i` of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        WeightVector((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.0
    }

    pub fn popcount(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for WeightVector {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(EnsembleError::BadWeights(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(WeightVector)
    }
}

/// Sign of the summed votes of the selected learners, ties to +1.
pub fn majority(votes: impl IntoIterator<Item = Label>) -> Label {
    Label::from_sign(votes.into_iter().map(|l| l.sign() as i64).sum())
}

/// `M` indices drawn uniformly with replacement from `0..m`.
pub fn bootstrap_indices(m: usize, seed: u64) -> Vec<usize> {
    if m == 0 {
        return Vec::new();
    }
    let mut rng = crate::seed::rng(seed);
    (0..m).map(|_| rng.gen_range(0..m)).collect()
}

/// Classical bootstrap replicate: same size as `data`, drawn with
/// replacement.
pub fn bootstrap_sample(data: &Dataset, seed: u64) -> Dataset {
    data.select(&bootstrap_indices(data.len(), seed))
}

/// Component learners trained on bootstrap replicates of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePool {
    learners: Vec<TrainedLearner>,
    seeds: Vec<u64>,
    master_seed: u64,
}

impl EnsemblePool {
    pub fn new(learners: Vec<TrainedLearner>, seeds: Vec<u64>, master_seed: u64) -> Result<Self, EnsembleError> {
        if learners.is_empty() {
            return Err(EnsembleError::EmptyPool);
        }
        if seeds.len() != learners.len() {
            return Err(EnsembleError::LengthMismatch { expected: learners.len(), found: seeds.len() });
        }
        let d = learners[0].dimension();
        if let Some((index, l)) = learners.iter().enumerate().find(|(_, l)| l.dimension() != d) {
            return Err(EnsembleError::Learner {
                index,
                source: LearnerError::DimensionMismatch { expected: d, found: l.dimension() },
            });
        }
        Ok(EnsemblePool { learners, seeds, master_seed })
    }

    pub fn len(&self) -> usize {
        self.learners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.learners.is_empty()
    }

    pub fn learners(&self) -> &[TrainedLearner] {
        &self.learners
    }

    pub fn bootstrap_seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn dimension(&self) -> usize {
        self.learners[0].dimension()
    }
}

/// Bootstrap seed of pool member `index`.
pub fn member_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, index as u64)
}

/// Trains `n` learners, learner `i` on `bootstrap_sample(data, seed_i)`.
/// Members train in parallel; the pool is assembled in index order.
pub fn train_pool(data: &Dataset, n: usize, spec: &LearnerSpec, master_seed: u64) -> Result<EnsemblePool, EnsembleError> {
    if n == 0 {
        return Err(EnsembleError::EmptyPool);
    }
    let seeds: Vec<u64> = (0..n).map(|i| member_seed(master_seed, i)).collect();
    let learners = seeds
        .par_iter()
        .enumerate()
        .map(|(index, &seed)| {
            let replicate = bootstrap_sample(data, seed);
            let member_spec = LearnerSpec { seed: derive_seed(seed, 1), ..*spec };
            learner::train(&member_spec, &replicate).map_err(|source| EnsembleError::Learner { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    EnsemblePool::new(learners, seeds, master_seed)
}

fn check_weights(pool: &EnsemblePool, omega: &WeightVector) -> Result<(), EnsembleError> {
    if omega.len() != pool.len() {
        return Err(EnsembleError::LengthMismatch { expected: pool.len(), found: omega.len() });
    }
    if omega.popcount() == 0 {
        return Err(EnsembleError::AllZeroWeights);
    }
    Ok(())
}

/// Majority vote of the learners selected by `omega`.
pub fn vote(pool: &EnsemblePool, omega: &WeightVector, x: &FeatureVector) -> Result<Label, EnsembleError> {
    check_weights(pool, omega)?;
    let mut votes = Vec::with_capacity(omega.popcount());
    for index in omega.selected() {
        votes.push(
            pool.learners[index]
                .predict_label(x)
                .map_err(|source| EnsembleError::Learner { index, source })?,
        );
    }
    Ok(majority(votes))
}

/// Fraction of `data` on which the vote matches the label.
pub fn ensemble_accuracy(pool: &EnsemblePool, omega: &WeightVector, data: &Dataset) -> Result<f64, EnsembleError> {
    check_weights(pool, omega)?;
    if data.is_empty() {
        return Err(EnsembleError::EmptyDataset);
    }
    let mut correct = 0usize;
    for x in data {
        let label = x.label().ok_or(EnsembleError::Unlabeled)?;
        if vote(pool, omega, x)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// A pool together with the members chosen for voting.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveEnsemble {
    pool: EnsemblePool,
    omega: WeightVector,
}

impl SelectiveEnsemble {
    pub fn new(pool: EnsemblePool, omega: WeightVector) -> Result<Self, EnsembleError> {
        check_weights(&pool, &omega)?;
        Ok(SelectiveEnsemble { pool, omega })
    }

    pub fn pool(&self) -> &EnsemblePool {
        &self.pool
    }

    pub fn omega(&self) -> &WeightVector {
        &self.omega
    }

    pub fn selected_count(&self) -> usize {
        self.omega.popcount()
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Label, EnsembleError> {
        vote(&self.pool, &self.omega, x)
    }
}

impl Classifier for SelectiveEnsemble {
    fn dimension(&self) -> usize {
        self.pool.dimension()
    }

    /// Net vote count of the selected members.
    fn decision_margin(&self, x: &FeatureVector) -> Result<f64, LearnerError> {
        let mut sum = 0i64;
        for index in self.omega.selected() {
            sum += self.pool.learners[index].predict_label(x)?.sign() as i64;
        }
        Ok(sum as f64)
    }
}

const POOL_MAGIC: &str = "droidsel-pool 1";
const ENSEMBLE_MAGIC: &str = "droidsel-ensemble 1";
pub const POOL_MANIFEST: &str = "pool.txt";

/// Writes `dir/pool.txt` and one `learner-NNN.txt` per member.
///
/// ```text
/// droidsel-pool 1
/// size=20
/// master_seed=42
/// learner=0 seed=<bootstrap seed> file=learner-000.txt
/// ...
/// ```
pub fn save_pool(pool: &EnsemblePool, dir: impl AsRef<Path>) -> Result<PathBuf, EnsembleError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join(POOL_MANIFEST);
    let mut out = std::io::BufWriter::new(std::fs::File::create(&manifest_path)?);
    writeln!(out, "{POOL_MAGIC}")?;
    writeln!(out, "size={}", pool.len())?;
    writeln!(out, "master_seed={}", pool.master_seed)?;
    for (index, (model, seed)) in pool.learners.iter().zip(&pool.seeds).enumerate() {
        let file = format!("learner-{index:03}.txt");
        learner::save_learner(model, dir.join(&file)).map_err(|source| EnsembleError::Learner { index, source })?;
        writeln!(out, "learner={index} seed={seed} file={file}")?;
    }
    out.flush()?;
    Ok(manifest_path)
}

fn format_error(path: &Path, line: usize, reason: impl Into<String>) -> EnsembleError {
    EnsembleError::Format { path: path.to_path_buf(), line, reason: reason.into() }
}

fn read_lines(path: &Path) -> Result<Vec<String>, EnsembleError> {
    let file = std::fs::File::open(path)?;
    Ok(std::io::BufReader::new(file).lines().collect::<Result<_, _>>()?)
}

fn key_value<'a>(path: &Path, lines: &'a [String], line: usize, key: &str) -> Result<&'a str, EnsembleError> {
    lines
        .get(line - 1)
        .and_then(|l| l.strip_prefix(key)?.strip_prefix('='))
        .ok_or_else(|| format_error(path, line, format!("expected `{key}=`")))
}

/// Loads a pool from its manifest file or the directory holding it.
pub fn load_pool(path: impl AsRef<Path>) -> Result<EnsemblePool, EnsembleError> {
    let path = path.as_ref();
    let manifest = if path.is_dir() { path.join(POOL_MANIFEST) } else { path.to_path_buf() };
    let dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let lines = read_lines(&manifest)?;
    if lines.first().map(String::as_str) != Some(POOL_MAGIC) {
        return Err(format_error(&manifest, 1, format!("expected {POOL_MAGIC:?}")));
    }
    let size: usize = key_value(&manifest, &lines, 2, "size")?
        .parse()
        .map_err(|_| format_error(&manifest, 2, "bad size"))?;
    let master_seed: u64 = key_value(&manifest, &lines, 3, "master_seed")?
        .parse()
        .map_err(|_| format_error(&manifest, 3, "bad master seed"))?;
    if lines.len() != 3 + size {
        return Err(format_error(&manifest, lines.len(), format!("expected {size} learner lines")));
    }
    let mut learners = Vec::with_capacity(size);
    let mut seeds = Vec::with_capacity(size);
    for index in 0..size {
        let lineno = 4 + index;
        let fields: Vec<&str> = lines[lineno - 1].split(' ').collect();
        let parsed = match fields[..] {
            [l, s, f] => l
                .strip_prefix("learner=")
                .and_then(|l| l.parse::<usize>().ok())
                .filter(|&l| l == index)
                .and(s.strip_prefix("seed=").and_then(|s| s.parse::<u64>().ok()))
                .zip(f.strip_prefix("file=")),
            _ => None,
        };
        let (seed, file) = parsed.ok_or_else(|| format_error(&manifest, lineno, "expected `learner=<i> seed=<s> file=<f>`"))?;
        learners.push(learner::load_learner(dir.join(file)).map_err(|source| EnsembleError::Learner { index, source })?);
        seeds.push(seed);
    }
    EnsemblePool::new(learners, seeds, master_seed)
}

/// Writes an ensemble file pointing at a saved pool manifest.
///
/// ```text
/// droidsel-ensemble 1
/// pool=<path of pool.txt, relative to this file when possible>
/// size=<N>
/// omega=<N characters of 0/1>
/// ```
pub fn save_ensemble(path: impl AsRef<Path>, pool_manifest: impl AsRef<Path>, omega: &WeightVector) -> Result<(), EnsembleError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let pool_manifest = pool_manifest.as_ref();
    let pool_ref = pool_manifest
        .canonicalize()
        .ok()
        .zip(base.canonicalize().ok())
        .and_then(|(p, b)| p.strip_prefix(&b).ok().map(Path::to_path_buf))
        .unwrap_or_else(|| pool_manifest.to_path_buf());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{ENSEMBLE_MAGIC}")?;
    writeln!(out, "pool={}", pool_ref.display())?;
    writeln!(out, "size={}", omega.len())?;
    writeln!(out, "omega={omega}")?;
    out.flush()?;
    Ok(())
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<SelectiveEnsemble, EnsembleError> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    if lines.first().map(String::as_str) != Some(ENSEMBLE_MAGIC) {
        return Err(format_error(path, 1, format!("expected {ENSEMBLE_MAGIC:?}")));
    }
    let pool_ref = Path::new(key_value(path, &lines, 2, "pool")?);
    let size: usize = key_value(path, &lines, 3, "size")?
        .parse()
        .map_err(|_| format_error(path, 3, "bad size"))?;
    let omega: WeightVector = key_value(path, &lines, 4, "omega")?.parse()?;
    if omega.len() != size {
        return Err(format_error(path, 4, format!("omega has {} bits, size is {size}", omega.len())));
    }
    let pool_path = if pool_ref.is_absolute() {
        pool_ref.to_path_buf()
    } else {
        path.parent().unwrap_or(Path::new("")).join(pool_ref)
    };
    let pool = load_pool(pool_path)?;
    SelectiveEnsemble::new(pool, omega)
}
