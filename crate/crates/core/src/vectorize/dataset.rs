use std::io::{BufRead, Write};
use std::path::Path;

use super::VectorizeError;
use crate::label::{format_optional, parse_optional};
use crate::Label;

/// Sparse binary vector: the sorted set of active columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    dimension: usize,
    active: Vec<u32>,
    label: Option<Label>,
}

impl FeatureVector {
    /// Sorts and deduplicates `active`; fails on an index outside the
    /// dimension.
    pub fn new(dimension: usize, mut active: Vec<u32>, label: Option<Label>) -> Result<Self, VectorizeError> {
        if dimension == 0 {
            return Err(VectorizeError::InvalidVector("dimension must be positive".into()));
        }
        active.sort_unstable();
        active.dedup();
        if let Some(&max) = active.last() {
            if max as usize >= dimension {
                return Err(VectorizeError::InvalidVector(format!(
                    "index {max} outside dimension {dimension}"
                )));
            }
        }
        Ok(FeatureVector { dimension, active, label })
    }

    pub(crate) fn from_sorted(dimension: usize, active: Vec<u32>, label: Option<Label>) -> Self {
        debug_assert!(active.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(active.last().is_none_or(|&m| (m as usize) < dimension));
        FeatureVector { dimension, active, label }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }

    pub fn set_label(&mut self, label: Option<Label>) {
        self.label = label;
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.active.binary_search(&(index as u32)).is_ok()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dimension];
        for &i in &self.active {
            dense[i as usize] = 1.0;
        }
        dense
    }
}

/// Ordered samples sharing one dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    dimension: usize,
    vectors: Vec<FeatureVector>,
}

impl Dataset {
    pub fn new(dimension: usize, vectors: Vec<FeatureVector>) -> Result<Self, VectorizeError> {
        if dimension == 0 {
            return Err(VectorizeError::InvalidVector("dimension must be positive".into()));
        }
        if let Some(v) = vectors.iter().find(|v| v.dimension != dimension) {
            return Err(VectorizeError::DimensionMismatch { expected: dimension, found: v.dimension });
        }
        Ok(Dataset { dimension, vectors })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        &self.vectors
    }

    pub fn get(&self, index: usize) -> Option<&FeatureVector> {
        self.vectors.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FeatureVector> {
        self.vectors.iter()
    }

    /// All labels, or `None` if any sample is unlabeled.
    pub fn labels(&self) -> Option<Vec<Label>> {
        self.vectors.iter().map(FeatureVector::label).collect()
    }

    /// New dataset made of the samples at `indices`, repeats allowed.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            dimension: self.dimension,
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
        }
    }

    pub fn set_label(&mut self, index: usize, label: Option<Label>) {
        self.vectors[index].label = label;
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a FeatureVector;
    type IntoIter = std::slice::Iter<'a, FeatureVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.vectors.iter()
    }
}

/// Writes the sparse text format: a `dim=<d> n=<M>` header, then one
/// `<label> <idx> <idx> ...` line per sample. Unlabeled samples use `?`.
pub fn write_dataset(dataset: &Dataset, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "dim={} n={}", dataset.dimension, dataset.len())?;
    for v in &dataset.vectors {
        out.write_all(format_optional(v.label).as_bytes())?;
        for i in &v.active {
            write!(out, " {i}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), VectorizeError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let dim = parts.next()?.strip_prefix("dim=")?.parse().ok()?;
    let n = parts.next()?.strip_prefix("n=")?.parse().ok()?;
    parts.next().is_none().then_some((dim, n))
}

pub fn read_dataset(reader: impl BufRead) -> Result<Dataset, VectorizeError> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let (dimension, declared) = parse_header(&header).ok_or_else(|| VectorizeError::Format {
        line: 1,
        reason: format!("expected `dim=<d> n=<M>` header, found {header:?}"),
    })?;
    if dimension == 0 {
        return Err(VectorizeError::Format { line: 1, reason: "dimension must be positive".into() });
    }
    let mut vectors = Vec::with_capacity(declared.min(1 << 20));
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let err = |reason: String| VectorizeError::Format { line: lineno, reason };
        let mut tokens = line.split(' ');
        let label = tokens.next().unwrap_or_default();
        if label.is_empty() && line.is_empty() {
            continue;
        }
        let label = parse_optional(label).map_err(|e| err(e.to_string()))?;
        let mut active: Vec<u32> = Vec::new();
        for token in tokens {
            let idx: u32 = token.parse().map_err(|_| err(format!("bad index {token:?}")))?;
            if idx as usize >= dimension {
                return Err(err(format!("index {idx} not below dimension {dimension}")));
            }
            if active.last().is_some_and(|&prev| prev >= idx) {
                return Err(err(format!("index {idx} not strictly increasing")));
            }
            active.push(idx);
        }
        vectors.push(FeatureVector::from_sorted(dimension, active, label));
    }
    if vectors.len() != declared {
        return Err(VectorizeError::DimensionMismatch { expected: declared, found: vectors.len() });
    }
    Ok(Dataset { dimension, vectors })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, VectorizeError> {
    read_dataset(std::io::BufReader::new(std::fs::File::open(path)?))
}
