use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::noise::{NoiseSpec, NoiseTarget};
use super::split::SplitSpec;
use super::synthetic::SyntheticSpec;
use super::EvalError;
use crate::ga::GaConfig;
use crate::learner::LearnerSpec;
use crate::vectorize::VocabularyConfig;

/// Where the experiment's samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    /// A sparse dataset file; every sample must be labeled.
    Dataset(PathBuf),
    /// A feature-record file; the vocabulary is rebuilt from each run's
    /// training split.
    Records { path: PathBuf, vocabulary: VocabularyConfig },
}

/// Where label noise is injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScope {
    /// Into the splits named by `NoiseSpec::apply_to`, after splitting.
    #[default]
    Splits,
    /// Into the whole dataset before splitting, test split included.
    WholeDataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub repeats: usize,
    pub pool_size: usize,
    /// The seed field is replaced per member and per run.
    pub learner: LearnerSpec,
    /// The seed field is replaced per run.
    pub ga: GaConfig,
    /// The seed field is replaced per run.
    pub split: SplitSpec,
    /// The seed field is replaced per run.
    pub noise: NoiseSpec,
    pub noise_scope: NoiseScope,
    pub source: DataSource,
    /// Keep going when a run fails and summarize the runs that succeeded.
    pub allow_partial: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 0,
            repeats: 30,
            pool_size: 20,
            learner: LearnerSpec::default(),
            ga: GaConfig::default(),
            split: SplitSpec::default(),
            noise: NoiseSpec::default(),
            noise_scope: NoiseScope::Splits,
            source: DataSource::Synthetic(SyntheticSpec::default()),
            allow_partial: false,
        }
    }
}

fn invalid(key: &str, reason: impl Display) -> EvalError {
    EvalError::InvalidConfig { key: key.to_string(), reason: reason.to_string() }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T, EvalError>
where
    T::Err: Display,
{
    raw.parse().map_err(|e| invalid(key, format!("{raw:?}: {e}")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, EvalError> {
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(key, format!("{raw:?} is not a boolean"))),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.repeats == 0 {
            return Err(invalid("repeats", "must be at least 1"));
        }
        if self.pool_size == 0 {
            return Err(invalid("pool_size", "must be at least 1"));
        }
        self.learner.validate().map_err(|e| invalid("learner", e))?;
        self.ga.validate().map_err(|e| invalid("ga", e))?;
        self.split.validate().map_err(|e| invalid("split", e))?;
        self.noise.validate().map_err(|e| invalid("noise_fraction", e))?;
        Ok(())
    }

    /// Canonical `key = value` lines, one per setting, in key order.
    /// Parsing the result yields an equal config.
    pub fn to_text(&self) -> String {
        let mut entries: BTreeMap<&str, String> = BTreeMap::new();
        let mut put = |k: &'static str, v: String| {
            entries.insert(k, v);
        };
        put("master_seed", self.master_seed.to_string());
        put("repeats", self.repeats.to_string());
        put("pool_size", self.pool_size.to_string());
        put("allow_partial", self.allow_partial.to_string());
        put("learner", self.learner.kind.as_str().into());
        put("learning_rate", self.learner.learning_rate.to_string());
        put("epochs", self.learner.epochs.to_string());
        put("hidden_units", self.learner.hidden_units.to_string());
        put("l2", self.learner.l2.to_string());
        put("batch_size", self.learner.batch_size.to_string());
        put("ga_pop_size", self.ga.pop_size.to_string());
        put("ga_max_iter", self.ga.max_iter.to_string());
        put("ga_crossover_rate", self.ga.crossover_rate.to_string());
        put("ga_mutation_rate", self.ga.mutation_rate.to_string());
        put("ga_elite_count", self.ga.elite_count.to_string());
        put("fitness_split", self.ga.fitness_split.as_str().into());
        put("diversity_norm", self.ga.diversity_norm.as_str().into());
        put("train_fraction", self.split.train_fraction.to_string());
        put("validation_fraction", self.split.validation_fraction.to_string());
        put("test_fraction", self.split.test_fraction.to_string());
        put("noise_fraction", self.noise.flip_fraction.to_string());
        let targets: Vec<&str> = self.noise.apply_to.iter().map(|t| t.as_str()).collect();
        put("noise_apply_to", if targets.is_empty() { "none".into() } else { targets.join(",") });
        put("noise_test", (self.noise_scope == NoiseScope::WholeDataset).to_string());
        match &self.source {
            DataSource::Synthetic(s) => {
                put("source", "synthetic".into());
                put("synthetic_samples", s.samples.to_string());
                put("synthetic_features", s.features.to_string());
                put("synthetic_density", s.density.to_string());
                put("synthetic_concept_noise", s.concept_noise.to_string());
                put("synthetic_seed", s.seed.to_string());
            }
            DataSource::Dataset(path) => {
                put("source", "dataset".into());
                put("dataset_path", path.display().to_string());
            }
            DataSource::Records { path, vocabulary } => {
                put("source", "records".into());
                put("records_path", path.display().to_string());
                put("min_doc_freq", vocabulary.min_doc_freq.to_string());
                put("max_api_features", vocabulary.max_api_features.to_string());
            }
        }
        entries.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Parses flat `key = value` text. `#` starts a comment line. Relative data
/// paths are resolved against `base_dir` when given. Keys left out keep
/// their defaults; unknown or repeated keys are errors.
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<ExperimentConfig, EvalError> {
    let mut raw: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, val) = trimmed.split_once('=').ok_or_else(|| EvalError::ConfigFormat {
            line: line_no,
            reason: format!("expected key = value, got {trimmed:?}"),
        })?;
        let key = key.trim().to_string();
        if raw.insert(key.clone(), (line_no, val.trim().to_string())).is_some() {
            return Err(EvalError::ConfigFormat { line: line_no, reason: format!("duplicate key {key:?}") });
        }
    }

    let mut c = ExperimentConfig::default();
    let mut synthetic = SyntheticSpec::default();
    let mut vocabulary = VocabularyConfig::default();
    let mut source = "synthetic".to_string();
    let mut dataset_path = None;
    let mut records_path = None;
    let resolve = |p: &str| match base_dir {
        Some(dir) if Path::new(p).is_relative() => dir.join(p),
        _ => PathBuf::from(p),
    };

    for (key, (_, v)) in &raw {
        let k = key.as_str();
        match k {
            "master_seed" => c.master_seed = value(k, v)?,
            "repeats" => c.repeats = value(k, v)?,
            "pool_size" => c.pool_size = value(k, v)?,
            "allow_partial" => c.allow_partial = parse_bool(k, v)?,
            "learner" => c.learner.kind = value(k, v)?,
            "learning_rate" => c.learner.learning_rate = value(k, v)?,
            "epochs" => c.learner.epochs = value(k, v)?,
            "hidden_units" => c.learner.hidden_units = value(k, v)?,
            "l2" => c.learner.l2 = value(k, v)?,
            "batch_size" => c.learner.batch_size = value(k, v)?,
            "ga_pop_size" => c.ga.pop_size = value(k, v)?,
            "ga_max_iter" => c.ga.max_iter = value(k, v)?,
            "ga_crossover_rate" => c.ga.crossover_rate = value(k, v)?,
            "ga_mutation_rate" => c.ga.mutation_rate = value(k, v)?,
            "ga_elite_count" => c.ga.elite_count = value(k, v)?,
            "fitness_split" => c.ga.fitness_split = value(k, v)?,
            "diversity_norm" => c.ga.diversity_norm = value(k, v)?,
            "train_fraction" => c.split.train_fraction = value(k, v)?,
            "validation_fraction" => c.split.validation_fraction = value(k, v)?,
            "test_fraction" => c.split.test_fraction = value(k, v)?,
            "noise_fraction" => c.noise.flip_fraction = value(k, v)?,
            "noise_apply_to" => {
                c.noise.apply_to = if v == "none" {
                    Vec::new()
                } else {
                    let mut targets = v
                        .split(',')
                        .map(|t| t.trim().parse::<NoiseTarget>().map_err(|e| invalid(k, e)))
                        .collect::<Result<Vec<_>, _>>()?;
                    targets.sort();
                    targets.dedup();
                    targets
                }
            }
            "noise_test" => {
                c.noise_scope = if parse_bool(k, v)? { NoiseScope::WholeDataset } else { NoiseScope::Splits }
            }
            "source" => match v.as_str() {
                "synthetic" | "dataset" | "records" => source = v.clone(),
                other => return Err(invalid(k, format!("unknown source {other:?}"))),
            },
            "synthetic_samples" => synthetic.samples = value(k, v)?,
            "synthetic_features" => synthetic.features = value(k, v)?,
            "synthetic_density" => synthetic.density = value(k, v)?,
            "synthetic_concept_noise" => synthetic.concept_noise = value(k, v)?,
            "synthetic_seed" => synthetic.seed = value(k, v)?,
            "dataset_path" => dataset_path = Some(resolve(v)),
            "records_path" => records_path = Some(resolve(v)),
            "min_doc_freq" => vocabulary.min_doc_freq = value(k, v)?,
            "max_api_features" => vocabulary.max_api_features = value(k, v)?,
            _ => return Err(invalid(k, "unknown key")),
        }
    }

    c.source = match source.as_str() {
        "dataset" => DataSource::Dataset(dataset_path.ok_or_else(|| invalid("dataset_path", "required by source = dataset"))?),
        "records" => DataSource::Records {
            path: records_path.ok_or_else(|| invalid("records_path", "required by source = records"))?,
            vocabulary,
        },
        _ => DataSource::Synthetic(synthetic),
    };
    c.validate()?;
    Ok(c)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::LearnerKind;

    fn key_of(e: EvalError) -> String {
        match e {
            EvalError::InvalidConfig { key, .. } => key,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("", None).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parses_keys() {
        let text = "# comment\nrepeats = 3\nlearner=mlp\nhidden_units = 4\nnoise_apply_to = train\nnoise_test = true\n\
                    source = records\nrecords_path = data/r.txt\nmin_doc_freq = 1\n";
        let c = parse_config(text, Some(Path::new("/tmp/x"))).unwrap();
        assert_eq!(c.repeats, 3);
        assert_eq!(c.learner.kind, LearnerKind::Mlp);
        assert_eq!(c.learner.hidden_units, 4);
        assert_eq!(c.noise.apply_to, vec![NoiseTarget::Train]);
        assert_eq!(c.noise_scope, NoiseScope::WholeDataset);
        assert_eq!(
            c.source,
            DataSource::Records {
                path: PathBuf::from("/tmp/x/data/r.txt"),
                vocabulary: VocabularyConfig { min_doc_freq: 1, max_api_features: 2000 }
            }
        );
    }

    #[test]
    fn rejects_bad_keys() {
        assert_eq!(key_of(parse_config("repeats = 0", None).unwrap_err()), "repeats");
        assert_eq!(key_of(parse_config("bogus = 1", None).unwrap_err()), "bogus");
        assert_eq!(key_of(parse_config("epochs = many", None).unwrap_err()), "epochs");
        assert_eq!(key_of(parse_config("noise_apply_to = test", None).unwrap_err()), "noise_apply_to");
        assert_eq!(key_of(parse_config("source = dataset", None).unwrap_err()), "dataset_path");
        assert_eq!(key_of(parse_config("noise_fraction = 0.7", None).unwrap_err()), "noise_fraction");
        assert!(matches!(parse_config("repeats = 1\nrepeats = 2", None), Err(EvalError::ConfigFormat { line: 2, .. })));
        assert!(matches!(parse_config("just words", None), Err(EvalError::ConfigFormat { line: 1, .. })));
    }

    #[test]
    fn canonical_text_round_trips() {
        let text = "repeats = 4\nga_mutation_rate = 0.125\nlearning_rate = 0.3\nsynthetic_samples = 77\nnoise_apply_to = none\n";
        let c = parse_config(text, None).unwrap();
        assert_eq!(parse_config(&c.to_text(), None).unwrap(), c);
        let d = ExperimentConfig { source: DataSource::Dataset("/data/x.txt".into()), ..ExperimentConfig::default() };
        assert_eq!(parse_config(&d.to_text(), None).unwrap(), d);
    }
}
