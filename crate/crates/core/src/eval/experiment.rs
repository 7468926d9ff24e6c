use std::fs::File;
use std::io::{BufReader, Write};

use log::{info, warn};
use rayon::prelude::*;

use super::config::{DataSource, ExperimentConfig, NoiseScope};
use super::metrics::{compute_metrics, Metric, MetricsReport, RepeatSummary};
use super::noise::{flip_indices, NoiseTarget};
use super::split::{split_indices, SplitIndices, SplitSpec};
use super::synthetic::planted_dataset;
use super::EvalError;
use crate::apk::{read_records, FeatureRecord};
use crate::ensemble::{train_pool, WeightVector};
use crate::ga::{run_ga_on_matrix, FitnessSplit, GaConfig, PredictionMatrix};
use crate::learner::{self, Classifier, LearnerSpec};
use crate::seed::derive_tagged;
use crate::vectorize::{build_vocabulary, load_dataset, vectorize, Dataset, VocabularyConfig};
use crate::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Majority vote of the GA-selected pool members.
    Selective,
    /// One learner trained on the whole training split.
    Single,
    /// Majority vote of every pool member.
    FullPool,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Selective, Method::Single, Method::FullPool];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Selective => "selective",
            Method::Single => "single",
            Method::FullPool => "full_pool",
        }
    }
}

enum Corpus {
    Vectors(Dataset),
    Records(Vec<FeatureRecord>, VocabularyConfig),
}

impl Corpus {
    fn load(source: &DataSource) -> Result<Corpus, EvalError> {
        let wrap = |path: &std::path::Path, e: EvalError| EvalError::Input { path: path.to_path_buf(), source: Box::new(e) };
        match source {
            DataSource::Synthetic(spec) => Ok(Corpus::Vectors(planted_dataset(spec)?)),
            DataSource::Dataset(path) => {
                let data = load_dataset(path).map_err(|e| wrap(path, e.into()))?;
                Ok(Corpus::Vectors(data))
            }
            DataSource::Records { path, vocabulary } => {
                let file = File::open(path).map_err(|e| wrap(path, e.into()))?;
                let records = read_records(BufReader::new(file)).map_err(|e| wrap(path, e.into()))?;
                Ok(Corpus::Records(records, *vocabulary))
            }
        }
    }

    fn labels(&self) -> Result<Vec<Label>, EvalError> {
        match self {
            Corpus::Vectors(data) => data.labels().ok_or(EvalError::Unlabeled),
            Corpus::Records(records, _) => records.iter().map(|r| r.label).collect::<Option<_>>().ok_or(EvalError::Unlabeled),
        }
    }

    /// The full dataset, vectorized with a vocabulary built from `train`
    /// alone when the corpus is made of records.
    fn vectors(&self, train: &[usize]) -> Result<Dataset, EvalError> {
        match self {
            Corpus::Vectors(data) => Ok(data.clone()),
            Corpus::Records(records, config) => {
                let vocab = build_vocabulary(train.iter().map(|&i| &records[i]), *config)?;
                let vectors = records.iter().map(|r| vectorize(r, &vocab)).collect();
                Ok(Dataset::new(vocab.dimension(), vectors)?)
            }
        }
    }
}

/// The data of one run after splitting and noise injection. Indices refer
/// to positions in the source corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRun {
    pub run: usize,
    pub split: SplitIndices,
    /// Corpus positions whose training label was flipped.
    pub flipped: Vec<usize>,
    pub train: Dataset,
    pub validation: Dataset,
    /// Carries the clean labels.
    pub test: Dataset,
}

fn noise_seed(config: &ExperimentConfig, run: usize) -> u64 {
    derive_tagged(config.master_seed, "noise", run as u64)
}

fn prepare(config: &ExperimentConfig, corpus: &Corpus, run: usize) -> Result<PreparedRun, EvalError> {
    let clean = corpus.labels()?;
    let split_spec = SplitSpec { seed: derive_tagged(config.master_seed, "split", run as u64), ..config.split };
    let seed = noise_seed(config, run);
    let fraction = config.noise.flip_fraction;

    let mut noisy = clean.clone();
    let split = match config.noise_scope {
        NoiseScope::WholeDataset => {
            for i in flip_indices(&clean, fraction, seed) {
                noisy[i] = noisy[i].flipped();
            }
            split_indices(&noisy, &split_spec)?
        }
        NoiseScope::Splits => {
            let split = split_indices(&clean, &split_spec)?;
            for (target, part) in [(NoiseTarget::Train, &split.train), (NoiseTarget::Validation, &split.validation)] {
                if !config.noise.targets(target) {
                    continue;
                }
                let part_labels: Vec<Label> = part.iter().map(|&i| clean[i]).collect();
                for k in flip_indices(&part_labels, fraction, derive_tagged(seed, target.as_str(), 0)) {
                    noisy[part[k]] = noisy[part[k]].flipped();
                }
            }
            split
        }
    };
    let flipped: Vec<usize> = (0..clean.len()).filter(|&i| noisy[i] != clean[i]).collect();

    let mut data = corpus.vectors(&split.train)?;
    let relabel = |data: &mut Dataset, indices: &[usize], labels: &[Label]| {
        for &i in indices {
            data.set_label(i, Some(labels[i]));
        }
    };
    relabel(&mut data, &split.train, &noisy);
    relabel(&mut data, &split.validation, &noisy);
    relabel(&mut data, &split.test, &clean);

    Ok(PreparedRun {
        run,
        train: data.select(&split.train),
        validation: data.select(&split.validation),
        test: data.select(&split.test),
        flipped,
        split,
    })
}

/// Splits and corrupts the data for run `run` without training anything.
pub fn prepare_run(config: &ExperimentConfig, run: usize) -> Result<PreparedRun, EvalError> {
    config.validate()?;
    prepare(config, &Corpus::load(&config.source)?, run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub flipped: usize,
    pub omega: WeightVector,
    pub ga_fitness: f64,
    pub ga_accuracy: f64,
    pub ga_diversity: f64,
    pub selective: MetricsReport,
    pub single: MetricsReport,
    pub full_pool: MetricsReport,
}

impl RunResult {
    pub fn metrics(&self, method: Method) -> &MetricsReport {
        match method {
            Method::Selective => &self.selective,
            Method::Single => &self.single,
            Method::FullPool => &self.full_pool,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(RunResult),
    Failed { run: usize, error: String },
}

fn execute(config: &ExperimentConfig, corpus: &Corpus, run: usize) -> Result<RunResult, EvalError> {
    let prepared = prepare(config, corpus, run)?;
    let tag = |name: &str| derive_tagged(config.master_seed, name, run as u64);

    let pool = train_pool(&prepared.train, config.pool_size, &config.learner, tag("pool"))?;
    let fitness_data = match config.ga.fitness_split {
        FitnessSplit::Train => &prepared.train,
        FitnessSplit::Validation => &prepared.validation,
    };
    let fitness_labels = fitness_data.labels().ok_or(EvalError::Unlabeled)?;
    let fitness_matrix = PredictionMatrix::from_pool(&pool, fitness_data)?;
    let ga = run_ga_on_matrix(&fitness_matrix, &fitness_labels, &GaConfig { seed: tag("ga"), ..config.ga })?;

    let truth = prepared.test.labels().ok_or(EvalError::Unlabeled)?;
    let test_matrix = PredictionMatrix::from_pool(&pool, &prepared.test)?;
    let selective = compute_metrics(&test_matrix.votes(&ga.best)?, &truth)?;
    let full_pool = compute_metrics(&test_matrix.votes(&WeightVector::all_ones(pool.len()))?, &truth)?;

    let single_model = learner::train(&LearnerSpec { seed: tag("single"), ..config.learner }, &prepared.train)?;
    let single_predictions = prepared
        .test
        .iter()
        .map(|x| single_model.predict_label(x))
        .collect::<Result<Vec<_>, _>>()?;
    let single = compute_metrics(&single_predictions, &truth)?;

    Ok(RunResult {
        run,
        train_size: prepared.train.len(),
        validation_size: prepared.validation.len(),
        test_size: prepared.test.len(),
        flipped: prepared.flipped.len(),
        omega: ga.best,
        ga_fitness: ga.best_fitness,
        ga_accuracy: ga.accuracy,
        ga_diversity: ga.diversity,
        selective,
        single,
        full_pool,
    })
}

/// One complete run: split, noise, pool, GA selection and test scoring.
pub fn run_once(config: &ExperimentConfig, run: usize) -> Result<RunResult, EvalError> {
    config.validate()?;
    execute(config, &Corpus::load(&config.source)?, run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub outcomes: Vec<RunOutcome>,
    pub selective: RepeatSummary,
    pub single: RepeatSummary,
    pub full_pool: RepeatSummary,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> &RepeatSummary {
        match method {
            Method::Selective => &self.selective,
            Method::Single => &self.single,
            Method::FullPool => &self.full_pool,
        }
    }

    pub fn completed(&self) -> impl Iterator<Item = &RunResult> {
        self.outcomes.iter().filter_map(|o| match o {
            RunOutcome::Completed(r) => Some(r),
            RunOutcome::Failed { .. } => None,
        })
    }
}

/// Runs `config.repeats` independent runs (in parallel) and summarizes
/// each method's test metrics. A failing run aborts the experiment unless
/// `allow_partial` is set.
pub fn repeated_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, EvalError> {
    config.validate()?;
    let corpus = Corpus::load(&config.source)?;
    let results: Vec<Result<RunResult, EvalError>> = (0..config.repeats)
        .into_par_iter()
        .map(|run| {
            let result = execute(config, &corpus, run);
            match &result {
                Ok(r) => info!("run {run}: selected {} of {}, test f1 {:.4}", r.omega.popcount(), r.omega.len(), r.selective.f1),
                Err(e) => warn!("run {run} failed: {e}"),
            }
            result
        })
        .collect();

    let mut outcomes = Vec::with_capacity(results.len());
    for (run, result) in results.into_iter().enumerate() {
        match result {
            Ok(r) => outcomes.push(RunOutcome::Completed(r)),
            Err(e) if config.allow_partial => outcomes.push(RunOutcome::Failed { run, error: e.to_string() }),
            Err(e) => return Err(EvalError::Run { run, source: Box::new(e) }),
        }
    }
    let summarize = |method: Method| {
        let runs: Vec<MetricsReport> = outcomes
            .iter()
            .filter_map(|o| match o {
                RunOutcome::Completed(r) => Some(*r.metrics(method)),
                RunOutcome::Failed { .. } => None,
            })
            .collect();
        if runs.is_empty() {
            return Err(EvalError::AllRunsFailed);
        }
        RepeatSummary::new(runs)
    };
    Ok(ExperimentReport {
        selective: summarize(Method::Selective)?,
        single: summarize(Method::Single)?,
        full_pool: summarize(Method::FullPool)?,
        config: config.clone(),
        outcomes,
    })
}

fn write_metrics(out: &mut impl Write, run: usize, method: Method, m: &MetricsReport) -> std::io::Result<()> {
    writeln!(
        out,
        "metrics run={run} method={} accuracy={:.6} precision={:.6} recall={:.6} f1={:.6} tp={} fp={} tn={} fn={} degenerate={}",
        method.as_str(),
        m.accuracy,
        m.precision,
        m.recall,
        m.f1,
        m.counts.tp,
        m.counts.fp,
        m.counts.tn,
        m.counts.fn_,
        m.degenerate as u8
    )
}

/// Line-oriented report: the canonical config, a record per run, then a
/// summary row per method and metric. Identical inputs give identical bytes.
pub fn write_experiment_report(report: &ExperimentReport, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "# droidsel experiment report v1")?;
    for line in report.config.to_text().lines() {
        writeln!(out, "config {line}")?;
    }
    for outcome in &report.outcomes {
        match outcome {
            RunOutcome::Completed(r) => {
                writeln!(
                    out,
                    "run run={} status=ok train={} validation={} test={} flipped={} selected={} omega={} ga_fitness={:.6} ga_accuracy={:.6} ga_diversity={:.6}",
                    r.run,
                    r.train_size,
                    r.validation_size,
                    r.test_size,
                    r.flipped,
                    r.omega.popcount(),
                    r.omega,
                    r.ga_fitness,
                    r.ga_accuracy,
                    r.ga_diversity
                )?;
                for method in Method::ALL {
                    write_metrics(&mut out, r.run, method, r.metrics(method))?;
                }
            }
            RunOutcome::Failed { run, error } => {
                writeln!(out, "run run={run} status=failed error={:?}", error)?;
            }
        }
    }
    for method in Method::ALL {
        let summary = report.summary(method);
        for metric in Metric::ALL {
            let s = summary.stats(metric);
            writeln!(
                out,
                "summary method={} metric={} runs={} worst={:.6} best={:.6} average={:.6} std={:.6}",
                method.as_str(),
                metric.as_str(),
                summary.run_count(),
                s.worst,
                s.best,
                s.mean,
                s.std
            )?;
        }
    }
    Ok(())
}
