//! Frozen feature vocabularies and sparse binary feature vectors.

mod dataset;
mod vocab;

use thiserror::Error;

pub use dataset::{load_dataset, read_dataset, save_dataset, write_dataset, Dataset, FeatureVector};
pub use vocab::{
    build_vocabulary, load_vocabulary, read_vocabulary, save_vocabulary, vectorize, write_vocabulary, Block,
    Vocabulary, VocabularyConfig,
};

#[derive(Debug, Error)]
pub enum VectorizeError {
    #[error("no records to build a vocabulary from")]
    EmptyCorpus,
    #[error("no feature reaches the document-frequency threshold")]
    EmptyVocabulary,
    #[error("invalid vocabulary configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid feature vector: {0}")]
    InvalidVector(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
