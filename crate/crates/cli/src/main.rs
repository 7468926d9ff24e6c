//! `droidsel` command-line tool.
//!
//! Exit codes:
//!
//! * 0: success
//! * 1: runtime failure (I/O, malformed input file, training error)
//! * 2: bad command-line usage
//! * 3: invalid experiment config
//! * 4: extraction failed (no inputs, every input failed, or any failure
//!   under `--strict`)
//! * 5: model and vocabulary or dataset disagree on dimension

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use droidsel::apk::{extract_features, open_apk, read_records, write_record, FeatureRecord};
use droidsel::ensemble::{load_ensemble, load_pool, save_ensemble, save_pool, train_pool, SelectiveEnsemble};
use droidsel::eval::{
    compute_metrics, read_config, repeated_experiment, write_experiment_report, EvalError, NoiseScope,
};
use droidsel::ga::{run_ga, write_report, DiversityNorm, GaConfig};
use droidsel::label::parse_optional;
use droidsel::learner::{Classifier, LearnerKind, LearnerSpec};
use droidsel::vectorize::{
    build_vocabulary, load_dataset, load_vocabulary, save_dataset, save_vocabulary, vectorize, Dataset,
    Vocabulary, VocabularyConfig,
};
use droidsel::Label;

#[derive(Parser)]
#[command(name = "droidsel", version, about = "Selective-ensemble Android malware classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract feature records from APK files or directories of APKs.
    Extract(ExtractArgs),
    /// Build a vocabulary and turn feature records into a sparse dataset.
    Vectorize(VectorizeArgs),
    /// Train a bootstrap pool of learners.
    TrainPool(TrainPoolArgs),
    /// Select pool members with the genetic search.
    Select(SelectArgs),
    /// Score a selective ensemble on a labeled dataset.
    Evaluate(EvaluateArgs),
    /// Label records or dataset samples with a selective ensemble.
    Predict(PredictArgs),
    /// Run the repeated split/noise/train/select/test experiment.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// APK files, or directories whose `.apk` files are all read.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Records file to write.
    #[arg(long)]
    out: PathBuf,
    /// Label for every record: +1, -1, or ? for unlabeled.
    #[arg(long, default_value = "?", allow_hyphen_values = true)]
    label: String,
    /// Fail when any input fails to parse.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct VectorizeArgs {
    #[arg(long)]
    records: PathBuf,
    /// Sparse dataset to write.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the vocabulary built from `--records`.
    #[arg(long, conflicts_with = "vocab_in", required_unless_present = "vocab_in")]
    vocab_out: Option<PathBuf>,
    /// Reuse an existing vocabulary instead of building one.
    #[arg(long)]
    vocab_in: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    min_doc_freq: usize,
    #[arg(long, default_value_t = 2000)]
    max_api_features: usize,
}

#[derive(Args)]
struct LearnerArgs {
    #[arg(long, default_value = "linear")]
    learner: LearnerKind,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    hidden_units: usize,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
}

#[derive(Args)]
struct TrainPoolArgs {
    /// Labeled training dataset.
    #[arg(long)]
    data: PathBuf,
    /// Directory for the pool files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Args)]
struct SelectArgs {
    /// Pool directory or its pool.txt.
    #[arg(long)]
    pool: PathBuf,
    /// Labeled dataset the fitness is measured on.
    #[arg(long)]
    data: PathBuf,
    /// Ensemble file to write.
    #[arg(long)]
    out: PathBuf,
    /// Write the GA run report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pop_size: usize,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.8)]
    crossover_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    mutation_rate: f64,
    #[arg(long, default_value_t = 2)]
    elite_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "paper")]
    diversity_norm: DiversityNorm,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    ensemble: PathBuf,
    /// Labeled dataset to score.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    ensemble: PathBuf,
    /// Vocabulary the pool was trained with; needed for `--records`.
    #[arg(long, requires = "records")]
    vocab: Option<PathBuf>,
    /// Feature records to classify.
    #[arg(long, conflicts_with = "data", required_unless_present = "data", requires = "vocab")]
    records: Option<PathBuf>,
    /// Sparse dataset to classify; samples are named by their line index.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Inject noise into the whole dataset before splitting.
    #[arg(long)]
    noise_test: bool,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(error: E) -> Self {
        Failure { code: 1, error: error.into() }
    }
}

fn fail(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

type CmdResult = Result<(), Failure>;

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn collect_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("apk")))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn app_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().replace(['\t', '\n', '\r'], "_"))
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unnamed".to_string())
}

fn extract(args: ExtractArgs) -> CmdResult {
    let label = parse_optional(&args.label).map_err(|e| fail(2, anyhow!("--label: {e}")))?;
    let files = collect_inputs(&args.inputs)?;
    if files.is_empty() {
        return Err(fail(4, anyhow!("no inputs")));
    }
    let results: Vec<anyhow::Result<String>> = files
        .par_iter()
        .map(|path| {
            let archive = open_apk(path)?;
            let record = extract_features(&archive, &app_id(path), label)?;
            Ok(write_record(&record)?)
        })
        .collect();

    let mut out = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    let mut failed = 0usize;
    for (path, result) in files.iter().zip(results) {
        match result {
            Ok(line) => writeln!(out, "{line}")?,
            Err(e) => {
                failed += 1;
                warn!("{}: {e:#}", path.display());
            }
        }
    }
    out.flush()?;
    info!("extracted {} of {} inputs", files.len() - failed, files.len());
    if failed == files.len() {
        return Err(fail(4, anyhow!("all {failed} inputs failed")));
    }
    if failed > 0 && args.strict {
        return Err(fail(4, anyhow!("{failed} of {} inputs failed", files.len())));
    }
    Ok(())
}

fn load_records(path: &Path) -> anyhow::Result<Vec<FeatureRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_records(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn vectorize_records(records: &[FeatureRecord], vocab: &Vocabulary) -> anyhow::Result<Dataset> {
    Ok(Dataset::new(vocab.dimension(), records.iter().map(|r| vectorize(r, vocab)).collect())?)
}

fn vectorize_cmd(args: VectorizeArgs) -> CmdResult {
    let records = load_records(&args.records)?;
    let vocab = match (&args.vocab_in, &args.vocab_out) {
        (Some(path), _) => load_vocabulary(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(path)) => {
            let config = VocabularyConfig { min_doc_freq: args.min_doc_freq, max_api_features: args.max_api_features };
            let vocab = build_vocabulary(&records, config)?;
            save_vocabulary(&vocab, path)?;
            vocab
        }
        (None, None) => unreachable!("clap requires one vocabulary flag"),
    };
    save_dataset(&vectorize_records(&records, &vocab)?, &args.out)?;
    info!("{} records, dimension {}", records.len(), vocab.dimension());
    Ok(())
}

fn train_pool_cmd(args: TrainPoolArgs) -> CmdResult {
    let data = load_dataset(&args.data).with_context(|| format!("loading {}", args.data.display()))?;
    let l = args.learner;
    let spec = LearnerSpec {
        kind: l.learner,
        learning_rate: l.learning_rate,
        epochs: l.epochs,
        hidden_units: l.hidden_units,
        l2: l.l2,
        batch_size: l.batch_size,
        seed: 0,
    };
    spec.validate().map_err(|e| fail(2, e.into()))?;
    let pool = train_pool(&data, args.size, &spec, args.seed)?;
    let manifest = save_pool(&pool, &args.out)?;
    info!("wrote {} learners to {}", pool.len(), manifest.display());
    Ok(())
}

fn select_cmd(args: SelectArgs) -> CmdResult {
    let pool = load_pool(&args.pool)?;
    let data = load_dataset(&args.data).with_context(|| format!("loading {}", args.data.display()))?;
    if data.dimension() != pool.dimension() {
        return Err(fail(5, anyhow!("dataset dimension {} but pool expects {}", data.dimension(), pool.dimension())));
    }
    let config = GaConfig {
        pop_size: args.pop_size,
        max_iter: args.max_iter,
        crossover_rate: args.crossover_rate,
        mutation_rate: args.mutation_rate,
        elite_count: args.elite_count,
        seed: args.seed,
        diversity_norm: args.diversity_norm,
        ..GaConfig::default()
    };
    config.validate().map_err(|e| fail(2, e.into()))?;
    let outcome = run_ga(&pool, &data, &config)?;
    let manifest = if args.pool.is_dir() { args.pool.join("pool.txt") } else { args.pool.clone() };
    let manifest = std::fs::canonicalize(&manifest).unwrap_or(manifest);
    save_ensemble(&args.out, &manifest, &outcome.best)?;
    let mut out = output(args.report.as_deref())?;
    write_report(&outcome, &mut out)?;
    out.flush()?;
    info!("selected {} of {} learners", outcome.best.popcount(), outcome.best.len());
    Ok(())
}

fn check_dimension(ensemble: &SelectiveEnsemble, found: usize, what: &str) -> CmdResult {
    if ensemble.dimension() != found {
        return Err(fail(5, anyhow!("{what} dimension {found} but model expects {}", ensemble.dimension())));
    }
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> CmdResult {
    let ensemble = load_ensemble(&args.ensemble)?;
    let data = load_dataset(&args.data).with_context(|| format!("loading {}", args.data.display()))?;
    check_dimension(&ensemble, data.dimension(), "dataset")?;
    let labels = data.labels().ok_or_else(|| anyhow!("{} has unlabeled samples", args.data.display()))?;
    let predictions = data.iter().map(|x| ensemble.predict(x)).collect::<Result<Vec<Label>, _>>()?;
    let m = compute_metrics(&predictions, &labels)?;
    println!(
        "accuracy={:.6} precision={:.6} recall={:.6} f1={:.6} tp={} fp={} tn={} fn={} degenerate={}",
        m.accuracy, m.precision, m.recall, m.f1, m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn_, m.degenerate as u8
    );
    Ok(())
}

fn predict_cmd(args: PredictArgs) -> CmdResult {
    let ensemble = load_ensemble(&args.ensemble)?;
    let (names, data) = match (&args.records, &args.data, &args.vocab) {
        (Some(records), _, Some(vocab)) => {
            let vocab = load_vocabulary(vocab).with_context(|| format!("loading {}", vocab.display()))?;
            check_dimension(&ensemble, vocab.dimension(), "vocabulary")?;
            let records = load_records(records)?;
            let names = records.iter().map(|r| r.app_id.clone()).collect::<Vec<_>>();
            (names, vectorize_records(&records, &vocab)?)
        }
        (None, Some(path), _) => {
            let data = load_dataset(path).with_context(|| format!("loading {}", path.display()))?;
            check_dimension(&ensemble, data.dimension(), "dataset")?;
            ((0..data.len()).map(|i| i.to_string()).collect(), data)
        }
        _ => unreachable!("clap enforces the input flags"),
    };
    let mut out = output(args.out.as_deref())?;
    for (name, x) in names.iter().zip(&data) {
        writeln!(out, "{name}\t{}", ensemble.predict(x)?)?;
    }
    out.flush()?;
    Ok(())
}

fn experiment_cmd(args: ExperimentArgs) -> CmdResult {
    let mut config = read_config(&args.config).map_err(|e| match e {
        EvalError::Io(_) => fail(1, anyhow::Error::new(e).context(format!("reading {}", args.config.display()))),
        other => fail(3, other.into()),
    })?;
    if args.noise_test {
        config.noise_scope = NoiseScope::WholeDataset;
    }
    let report = repeated_experiment(&config)?;
    let mut out = output(args.out.as_deref())?;
    write_experiment_report(&report, &mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Vectorize(a) => vectorize_cmd(a),
        Command::TrainPool(a) => train_pool_cmd(a),
        Command::Select(a) => select_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("droidsel: {error:#}");
            ExitCode::from(code)
        }
    }
}
