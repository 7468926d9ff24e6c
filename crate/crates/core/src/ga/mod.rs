//! Genetic search for the weight vector of a selective ensemble.
//!
//! Fitness of a weight vector is ensemble accuracy times a diversity factor:
//! the summed Euclidean distances between the prediction rows of every pair
//! of selected learners, divided by the number of selected learners.

mod fitness;
mod operators;
mod run;

use thiserror::Error;

pub use fitness::{diversity, diversity_with, fitness, DiversityNorm, FitnessEvaluator, PredictionMatrix};
pub use operators::{crossover, init_population, mutation, repair, select_newpop, Chromosome, Population};
pub use run::{run_ga, run_ga_on_matrix, write_report, FitnessSplit, GaConfig, GaOutcome, GenerationStats};

use crate::ensemble::EnsembleError;

#[derive(Debug, Error)]
pub enum GaError {
    #[error("weight vector selects no learner")]
    AllZeroWeights,
    #[error("weight vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid prediction matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("chromosome {0} has no valid fitness")]
    InvalidFitness(usize),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}
