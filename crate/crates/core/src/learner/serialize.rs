//! Versioned text format for trained learners.
//!
//! ```text
//! droidsel-learner 1
//! kind=mlp
//! dimension=50
//! hidden_units=16
//! learning_rate=0.05
//! epochs=20
//! l2=0.0001
//! batch_size=1
//! seed=42
//! params=833
//! <one parameter per line>
//! ```
//!
//! Floats are written in shortest round-trip form, so loading a saved
//! learner reproduces it bit for bit.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{LearnerError, LearnerSpec, TrainedLearner};

const MAGIC: &str = "droidsel-learner 1";

pub fn write_learner(learner: &TrainedLearner, mut out: impl Write) -> std::io::Result<()> {
    use super::Classifier;
    let spec = learner.spec();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "kind={}", spec.kind.as_str())?;
    writeln!(out, "dimension={}", learner.dimension())?;
    writeln!(out, "hidden_units={}", spec.hidden_units)?;
    writeln!(out, "learning_rate={:e}", spec.learning_rate)?;
    writeln!(out, "epochs={}", spec.epochs)?;
    writeln!(out, "l2={:e}", spec.l2)?;
    writeln!(out, "batch_size={}", spec.batch_size)?;
    writeln!(out, "seed={}", spec.seed)?;
    writeln!(out, "params={}", learner.parameters().len())?;
    for p in learner.parameters() {
        writeln!(out, "{p:e}")?;
    }
    Ok(())
}

pub fn save_learner(learner: &TrainedLearner, path: impl AsRef<Path>) -> Result<(), LearnerError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_learner(learner, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_learner(reader: impl BufRead) -> Result<TrainedLearner, LearnerError> {
    let mut lines = reader.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String), LearnerError> {
        match lines.next() {
            Some((i, line)) => Ok((i + 1, line?)),
            None => Err(LearnerError::Format { line: 0, reason: format!("unexpected end of file, expected {expect}") }),
        }
    };
    let (line, magic) = next("header")?;
    if magic != MAGIC {
        return Err(LearnerError::Format { line, reason: format!("expected {MAGIC:?}") });
    }
    let mut field = |key: &str| -> Result<(usize, String), LearnerError> {
        let (line, text) = next(key)?;
        match text.split_once('=') {
            Some((k, v)) if k == key => Ok((line, v.to_string())),
            _ => Err(LearnerError::Format { line, reason: format!("expected `{key}=`") }),
        }
    };
    fn parse<T: std::str::FromStr>(line: usize, value: &str) -> Result<T, LearnerError> {
        value
            .parse()
            .map_err(|_| LearnerError::Format { line, reason: format!("cannot parse {value:?}") })
    }

    let (_, kind) = field("kind")?;
    let kind = kind.parse()?;
    let (l, v) = field("dimension")?;
    let dimension: usize = parse(l, &v)?;
    let (l, v) = field("hidden_units")?;
    let hidden_units = parse(l, &v)?;
    let (l, v) = field("learning_rate")?;
    let learning_rate = parse(l, &v)?;
    let (l, v) = field("epochs")?;
    let epochs = parse(l, &v)?;
    let (l, v) = field("l2")?;
    let l2 = parse(l, &v)?;
    let (l, v) = field("batch_size")?;
    let batch_size = parse(l, &v)?;
    let (l, v) = field("seed")?;
    let seed = parse(l, &v)?;
    let (l, v) = field("params")?;
    let count: usize = parse(l, &v)?;
    let spec = LearnerSpec { kind, learning_rate, epochs, hidden_units, l2, batch_size, seed };
    let expected = super::model::param_count(kind, dimension, hidden_units);
    if count != expected {
        return Err(LearnerError::Format { line: l, reason: format!("expected {expected} parameters, header says {count}") });
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let (l, v) = next("parameter")?;
        params.push(parse(l, &v)?);
    }
    TrainedLearner::from_parameters(spec, dimension, params)
}

pub fn load_learner(path: impl AsRef<Path>) -> Result<TrainedLearner, LearnerError> {
    read_learner(std::io::BufReader::new(std::fs::File::open(path)?))
}
