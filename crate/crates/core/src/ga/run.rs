use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use super::fitness::{DiversityNorm, FitnessEvaluator, PredictionMatrix};
use super::operators::{crossover, init_population, mutation, select_newpop, Chromosome};
use super::GaError;
use crate::ensemble::{EnsemblePool, WeightVector};
use crate::vectorize::Dataset;
use crate::Label;

/// Which split the fitness is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitnessSplit {
    Train,
    #[default]
    Validation,
}

impl FitnessSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            FitnessSplit::Train => "train",
            FitnessSplit::Validation => "validation",
        }
    }
}

impl FromStr for FitnessSplit {
    type Err = GaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(FitnessSplit::Train),
            "validation" => Ok(FitnessSplit::Validation),
            other => Err(GaError::InvalidConfig(format!("unknown fitness_split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaConfig {
    pub pop_size: usize,
    pub max_iter: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elite_count: usize,
    pub seed: u64,
    pub fitness_split: FitnessSplit,
    pub diversity_norm: DiversityNorm,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            pop_size: 30,
            max_iter: 50,
            crossover_rate: 0.8,
            mutation_rate: 0.05,
            elite_count: 2,
            seed: 0,
            fitness_split: FitnessSplit::Validation,
            diversity_norm: DiversityNorm::Paper,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |msg: String| Err(GaError::InvalidConfig(msg));
        if self.pop_size < 2 {
            return bad(format!("pop_size must be at least 2, got {}", self.pop_size));
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1".into());
        }
        for (name, rate) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} must lie in [0, 1], got {rate}"));
            }
        }
        if self.elite_count >= self.pop_size {
            return bad(format!("elite_count {} must be below pop_size {}", self.elite_count, self.pop_size));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub best_ever: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub config: GaConfig,
    pub best: WeightVector,
    pub best_fitness: f64,
    pub accuracy: f64,
    pub diversity: f64,
    pub samples: usize,
    /// Generation 0 is the initial population.
    pub history: Vec<GenerationStats>,
}

fn evaluate(population: &mut [Chromosome], evaluator: &FitnessEvaluator<'_>) -> Result<(), GaError> {
    population
        .par_iter_mut()
        .filter(|c| c.fitness().is_none())
        .try_for_each(|c| evaluator.fitness(c.bits()).map(|f| c.set_fitness(f)))
}

/// Runs the generation loop: crossover, mutation, fitness evaluation, then
/// selection. The best chromosome ever evaluated is returned, whether or
/// not it survived.
pub fn run_ga_on_matrix(matrix: &PredictionMatrix, labels: &[Label], config: &GaConfig) -> Result<GaOutcome, GaError> {
    config.validate()?;
    let evaluator = FitnessEvaluator::new(matrix, labels, config.diversity_norm)?;
    let mut rng = crate::seed::rng(config.seed);

    let mut population = init_population(config.pop_size, matrix.learners(), &mut rng);
    evaluate(&mut population, &evaluator)?;
    let mut best = population[0].clone();
    let mut history = Vec::with_capacity(config.max_iter + 1);

    let mut record = |generation: usize, population: &[Chromosome], best: &mut Chromosome| {
        let fitness: Vec<f64> = population.iter().map(|c| c.fitness().unwrap_or(0.0)).collect();
        for (c, &f) in population.iter().zip(&fitness) {
            if f > best.fitness().unwrap_or(f64::NEG_INFINITY) {
                *best = c.clone();
            }
        }
        history.push(GenerationStats {
            generation,
            best: fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: fitness.iter().sum::<f64>() / fitness.len() as f64,
            best_ever: best.fitness().unwrap_or(0.0),
        });
    };
    record(0, &population, &mut best);

    for generation in 1..=config.max_iter {
        crossover(&mut population, config.crossover_rate, &mut rng);
        mutation(&mut population, config.mutation_rate, &mut rng);
        evaluate(&mut population, &evaluator)?;
        record(generation, &population, &mut best);
        population = select_newpop(&population, config.elite_count, &mut rng)?;
    }

    let omega = best.bits().clone();
    Ok(GaOutcome {
        config: *config,
        best_fitness: best.fitness().unwrap_or(0.0),
        accuracy: evaluator.accuracy(&omega)?,
        diversity: evaluator.diversity(&omega)?,
        best: omega,
        samples: matrix.samples(),
        history,
    })
}

/// Precomputes the pool's predictions on `data` and searches weight
/// vectors against its labels.
pub fn run_ga(pool: &EnsemblePool, data: &Dataset, config: &GaConfig) -> Result<GaOutcome, GaError> {
    let labels = data
        .labels()
        .ok_or_else(|| GaError::InvalidMatrix("fitness data has unlabeled samples".into()))?;
    let matrix = PredictionMatrix::from_pool(pool, data)?;
    run_ga_on_matrix(&matrix, &labels, config)
}

/// Plain-text run report: config echo, one line per generation, then the
/// winning weight vector and its fitness decomposition.
pub fn write_report(outcome: &GaOutcome, mut out: impl Write) -> std::io::Result<()> {
    let c = &outcome.config;
    writeln!(out, "# droidsel ga report v1")?;
    writeln!(
        out,
        "config pop_size={} max_iter={} crossover_rate={} mutation_rate={} elite_count={} seed={} fitness_split={} diversity_norm={}",
        c.pop_size,
        c.max_iter,
        c.crossover_rate,
        c.mutation_rate,
        c.elite_count,
        c.seed,
        c.fitness_split.as_str(),
        c.diversity_norm.as_str()
    )?;
    writeln!(out, "pool_size={} samples={}", outcome.best.len(), outcome.samples)?;
    for g in &outcome.history {
        writeln!(
            out,
            "generation={} best={:.6} mean={:.6} best_ever={:.6}",
            g.generation, g.best, g.mean, g.best_ever
        )?;
    }
    writeln!(out, "omega={}", outcome.best)?;
    writeln!(out, "selected={}", outcome.best.popcount())?;
    writeln!(
        out,
        "fitness={:.6} accuracy={:.6} diversity={:.6}",
        outcome.best_fitness, outcome.accuracy, outcome.diversity
    )
}
