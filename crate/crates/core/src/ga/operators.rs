use rand::seq::SliceRandom;
use rand::Rng;

use super::GaError;
use crate::ensemble::WeightVector;

/// A weight vector with its fitness, cached until a gene changes.
#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    bits: WeightVector,
    fitness: Option<f64>,
}

pub type Population = Vec<Chromosome>;

impl Chromosome {
    pub fn new(bits: WeightVector) -> Self {
        Chromosome { bits, fitness: None }
    }

    pub fn bits(&self) -> &WeightVector {
        &self.bits
    }

    pub fn fitness(&self) -> Option<f64> {
        self.fitness
    }

    pub fn set_fitness(&mut self, fitness: f64) {
        self.fitness = Some(fitness);
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn flip(&mut self, gene: usize) {
        let bits = self.bits.bits_mut();
        bits[gene] = !bits[gene];
        self.fitness = None;
    }

    fn swap_tail(&mut self, other: &mut Chromosome, cut: usize) {
        self.bits.bits_mut()[cut..].swap_with_slice(&mut other.bits.bits_mut()[cut..]);
        self.fitness = None;
        other.fitness = None;
    }
}

/// Sets one uniformly chosen gene of an all-zero chromosome.
pub fn repair(chromosome: &mut Chromosome, rng: &mut impl Rng) {
    if chromosome.bits.popcount() == 0 && !chromosome.is_empty() {
        let gene = rng.gen_range(0..chromosome.len());
        chromosome.flip(gene);
    }
}

pub fn init_population(pop_size: usize, genes: usize, rng: &mut impl Rng) -> Population {
    (0..pop_size)
        .map(|_| {
            let mut c = Chromosome::new(WeightVector::new((0..genes).map(|_| rng.gen_bool(0.5)).collect()));
            repair(&mut c, rng);
            c
        })
        .collect()
}

pub(crate) fn crossover_unrepaired(population: &mut [Chromosome], rate: f64, rng: &mut impl Rng) {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.shuffle(rng);
    for pair in order.chunks_exact(2) {
        if !rng.gen_bool(rate) {
            continue;
        }
        let genes = population[pair[0]].len();
        if genes < 2 {
            continue;
        }
        let cut = rng.gen_range(1..genes);
        let (lo, hi) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        let (left, right) = population.split_at_mut(hi);
        left[lo].swap_tail(&mut right[0], cut);
    }
}

/// Single-point crossover over randomly paired parents. Each pair crosses
/// with probability `rate`; children take their parents' slots.
pub fn crossover(population: &mut [Chromosome], rate: f64, rng: &mut impl Rng) {
    crossover_unrepaired(population, rate, rng);
    population.iter_mut().for_each(|c| repair(c, rng));
}

/// Flips every gene independently with probability `rate`.
pub fn mutation(population: &mut [Chromosome], rate: f64, rng: &mut impl Rng) {
    for c in population.iter_mut() {
        for gene in 0..c.len() {
            if rng.gen_bool(rate) {
                c.flip(gene);
            }
        }
        repair(c, rng);
    }
}

/// Next generation: the `elite_count` fittest chromosomes (ties to the lower
/// index), then roulette-wheel draws with replacement. All-zero fitness
/// makes the wheel uniform.
pub fn select_newpop(population: &[Chromosome], elite_count: usize, rng: &mut impl Rng) -> Result<Population, GaError> {
    let fitness: Vec<f64> = population
        .iter()
        .enumerate()
        .map(|(i, c)| c.fitness.filter(|f| f.is_finite() && *f >= 0.0).ok_or(GaError::InvalidFitness(i)))
        .collect::<Result<_, _>>()?;
    let size = population.len();
    if elite_count > size {
        return Err(GaError::InvalidConfig(format!("elite_count {elite_count} exceeds population {size}")));
    }

    let mut ranked: Vec<usize> = (0..size).collect();
    ranked.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    let mut next: Population = ranked[..elite_count].iter().map(|&i| population[i].clone()).collect();

    let total: f64 = fitness.iter().sum();
    let last_positive = fitness.iter().rposition(|&f| f > 0.0);
    while next.len() < size {
        let pick = match last_positive {
            Some(fallback) if total > 0.0 => {
                let target = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                fitness
                    .iter()
                    .position(|&f| {
                        acc += f;
                        target < acc
                    })
                    .unwrap_or(fallback)
            }
            _ => rng.gen_range(0..size),
        };
        next.push(population[pick].clone());
    }
    Ok(next)
}
