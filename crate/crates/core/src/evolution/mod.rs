//! Mutation-only multi-objective evolution with simulator-backed scoring
//! and abrupt environment transitions.

mod evaluate;
mod pareto;
mod select;

pub use evaluate::{displacement, evaluate, plan_steps, simulate, EvalProtocol, StepPlan};
pub use pareto::{
    crowding_distance, dominates, hypervolume, nondominated_sort, reference_point, ObjectiveVector,
};
pub use select::{select_survivors, Candidate};

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cppn::{mutate, random_genome, Genome, MutationRates};
use crate::descriptors::{describe, DescriptorSet};
use crate::lattice::{EnvMode, EnvironmentSpec, MaterialParams};
use crate::phenotype::{express, ExpressionConfig, Material, Phenotype};
use crate::seed::{derive_seed, rng_for, tag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid evolution config: {0}")]
    Invalid(String),
}

/// Environment switch taking effect at `start_generation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub start_generation: u32,
    pub env: EnvironmentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: u32,
    pub schedule: Vec<ScheduleEntry>,
    pub material: MaterialParams,
    pub protocol: EvalProtocol,
    pub dims: (usize, usize, usize),
    pub expression: ExpressionConfig,
    pub rates: MutationRates,
    pub master_seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 32,
            generations: 100,
            schedule: vec![ScheduleEntry {
                start_generation: 0,
                env: EnvironmentSpec::land(),
            }],
            material: MaterialParams::default(),
            protocol: EvalProtocol::default(),
            dims: (8, 8, 7),
            expression: ExpressionConfig::default(),
            rates: MutationRates::default(),
            master_seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |s: String| Err(ConfigError::Invalid(s));
        if self.population_size == 0 {
            return bad("population_size must be >= 1".into());
        }
        if self.generations == 0 {
            return bad("generations must be >= 1".into());
        }
        if self.dims.0 == 0 || self.dims.1 == 0 || self.dims.2 == 0 {
            return bad(format!("dims {:?} must be positive", self.dims));
        }
        if self.protocol.cycles == 0 {
            return bad("cycles_per_eval must be >= 1".into());
        }
        if !(self.protocol.settle_time >= 0.0 && self.protocol.settle_time.is_finite()) {
            return bad("settle_time must be >= 0".into());
        }
        if !(self.protocol.ramp_cycles >= 0.0 && self.protocol.ramp_cycles.is_finite()) {
            return bad("ramp_cycles must be >= 0".into());
        }
        let e = &self.expression;
        if !(e.f_min > 0.0 && e.f_max >= e.f_min && e.f_max.is_finite()) {
            return bad("need 0 < f_min <= f_max".into());
        }
        match self.schedule.first() {
            Some(s) if s.start_generation == 0 => {}
            _ => return bad("environment schedule must start at generation 0".into()),
        }
        for w in self.schedule.windows(2) {
            if w[1].start_generation <= w[0].start_generation {
                return bad("schedule transitions must be strictly increasing".into());
            }
        }
        for s in &self.schedule {
            s.env.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        self.material.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.rates.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    pub fn env_at(&self, generation: u32) -> &EnvironmentSpec {
        &self
            .schedule
            .iter()
            .rev()
            .find(|s| s.start_generation <= generation)
            .unwrap_or(&self.schedule[0])
            .env
    }

    pub fn is_transition(&self, generation: u32) -> bool {
        generation > 0 && self.schedule.iter().any(|s| s.start_generation == generation)
    }

    pub fn grid_cells(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub genome: Genome,
    /// `None` when the genome is infeasible or its simulation blew up.
    pub fitness: Option<ObjectiveVector>,
    pub descriptors: Option<DescriptorSet>,
    pub frequency: Option<f64>,
    pub eval_seed: u64,
}

/// One evaluation, as written to the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub generation: u32,
    pub individual_id: u64,
    pub parent_id: Option<u64>,
    pub env_mode: EnvMode,
    pub fitness: Option<ObjectiveVector>,
    pub descriptors: Option<DescriptorSet>,
    pub frequency: Option<f64>,
    pub eval_seed: u64,
}

impl LogRow {
    fn of(ind: &Individual, generation: u32, mode: EnvMode) -> Self {
        Self {
            generation,
            individual_id: ind.id,
            parent_id: ind.parent_id,
            env_mode: mode,
            fitness: ind.fitness,
            descriptors: ind.descriptors,
            frequency: ind.frequency,
            eval_seed: ind.eval_seed,
        }
    }
}

/// Survivor statistics after a generation completes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: u32,
    pub env_mode: EnvMode,
    pub survivor_ids: Vec<u64>,
    pub best_distance: f64,
    pub mean_distance: f64,
    /// Hypervolume of the survivors' first front against [`reference_point`].
    pub front0_hypervolume: f64,
    pub front0: Vec<ObjectiveVector>,
    /// Mean distance of the population right after a transition
    /// re-evaluation, before offspring are added.
    pub reevaluated_mean_distance: Option<f64>,
}

/// Express, describe and score one genome.
pub fn assess(genome: Genome, config: &EvolutionConfig, env: &EnvironmentSpec, eval_seed: u64) -> Individual {
    let phenotype = express(&genome, config.dims, &config.expression).ok();
    let scored = phenotype.as_ref().map(|p| score_phenotype(p, config, env));
    build_individual(genome, eval_seed, phenotype.as_ref(), scored)
}

fn score_phenotype(p: &Phenotype, config: &EvolutionConfig, env: &EnvironmentSpec) -> Scored {
    Scored {
        fitness: evaluate(p, env, &config.material, &config.protocol).ok(),
        descriptors: describe(&p.body, config.material.voxel_size).ok(),
    }
}

fn build_individual(genome: Genome, eval_seed: u64, phenotype: Option<&Phenotype>, scored: Option<Scored>) -> Individual {
    Individual {
        id: genome.id,
        parent_id: genome.parent_id,
        genome,
        fitness: scored.and_then(|s| s.fitness),
        descriptors: scored.and_then(|s| s.descriptors),
        frequency: phenotype.map(|p| p.frequency),
        eval_seed,
    }
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    fitness: Option<ObjectiveVector>,
    descriptors: Option<DescriptorSet>,
}

/// Exact identity of a phenotype: simulation is deterministic, so equal keys
/// in the same environment always score identically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PhenotypeKey {
    material: Vec<Material>,
    phase: Vec<u64>,
    frequency: u64,
}

impl PhenotypeKey {
    fn of(p: &Phenotype) -> Self {
        Self {
            material: p.body.material.clone(),
            phase: p.body.phase.iter().map(|x| x.to_bits()).collect(),
            frequency: p.frequency.to_bits(),
        }
    }
}

/// Memo of scored phenotypes for the current environment.
#[derive(Debug, Clone, Default)]
struct ScoreCache {
    env: Option<EnvironmentSpec>,
    entries: HashMap<PhenotypeKey, Scored>,
    hits: u64,
}

/// Resumable state of one evolutionary run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionRun {
    pub config: EvolutionConfig,
    /// Next generation to execute.
    pub generation: u32,
    pub population: Vec<Individual>,
    pub next_id: u64,
    #[serde(skip)]
    cache: ScoreCache,
}

impl EvolutionRun {
    pub fn new(config: EvolutionConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            config,
            generation: 0,
            population: Vec::new(),
            next_id: 0,
            cache: ScoreCache::default(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.generation >= self.config.generations
    }

    /// Evaluations answered from the phenotype memo instead of simulation.
    pub fn reused_evaluations(&self) -> u64 {
        self.cache.hits
    }

    fn eval_seed(&self, slot: usize, phase: u64) -> u64 {
        derive_seed(&[self.config.master_seed, self.generation as u64, slot as u64, tag::EVAL, phase])
    }

    /// Express and score a batch; distinct unseen phenotypes are simulated in parallel.
    fn score_batch(&mut self, batch: Vec<(Genome, u64)>, env: &EnvironmentSpec) -> Vec<Individual> {
        if self.cache.env.as_ref() != Some(env) {
            self.cache.entries.clear();
            self.cache.env = Some(*env);
        }
        let cfg = &self.config;
        let phenotypes: Vec<Option<Phenotype>> = batch
            .par_iter()
            .map(|(g, _)| express(g, cfg.dims, &cfg.expression).ok())
            .collect();
        let keys: Vec<Option<PhenotypeKey>> = phenotypes.iter().map(|p| p.as_ref().map(PhenotypeKey::of)).collect();

        let mut pending: HashMap<&PhenotypeKey, usize> = HashMap::new();
        let mut misses: Vec<usize> = Vec::new();
        for (i, key) in keys.iter().enumerate() {
            if let Some(k) = key {
                if self.cache.entries.contains_key(k) || pending.contains_key(k) {
                    self.cache.hits += 1;
                } else {
                    pending.insert(k, i);
                    misses.push(i);
                }
            }
        }
        let fresh: Vec<Scored> = misses
            .par_iter()
            .map(|&i| score_phenotype(phenotypes[i].as_ref().unwrap(), cfg, env))
            .collect();
        for (&i, s) in misses.iter().zip(fresh) {
            self.cache.entries.insert(keys[i].clone().unwrap(), s);
        }

        batch
            .into_iter()
            .zip(phenotypes.iter().zip(&keys))
            .map(|((genome, seed), (p, key))| {
                let scored = key.as_ref().map(|k| self.cache.entries[k]);
                build_individual(genome, seed, p.as_ref(), scored)
            })
            .collect()
    }

    /// Execute the next generation, passing every evaluation to `log`.
    pub fn step<F: FnMut(&LogRow)>(&mut self, mut log: F) -> GenerationSummary {
        let g = self.generation;
        let env = *self.config.env_at(g);
        let seed = self.config.master_seed;
        let mut reevaluated_mean = None;

        if g == 0 {
            let n = self.config.population_size;
            let batch: Vec<(Genome, u64)> = (0..n)
                .map(|slot| {
                    let genome = random_genome(&mut rng_for(&[seed, 0, slot as u64, tag::INIT]), slot as u64);
                    (genome, self.eval_seed(slot, 0))
                })
                .collect();
            self.population = self.score_batch(batch, &env);
            self.next_id = n as u64;
            for ind in &self.population {
                log(&LogRow::of(ind, g, env.mode));
            }
        } else {
            if self.config.is_transition(g) {
                let batch: Vec<(Genome, u64)> = self
                    .population
                    .iter()
                    .enumerate()
                    .map(|(slot, ind)| (ind.genome.clone(), self.eval_seed(slot, 1)))
                    .collect();
                self.population = self.score_batch(batch, &env);
                for ind in &self.population {
                    log(&LogRow::of(ind, g, env.mode));
                }
                reevaluated_mean = Some(mean_distance(&self.population));
            }

            let batch: Vec<(Genome, u64)> = self
                .population
                .iter()
                .enumerate()
                .map(|(slot, parent)| {
                    let mut rng = rng_for(&[seed, g as u64, slot as u64, tag::MUTATE]);
                    let child = mutate(&parent.genome, &self.config.rates, &mut rng, self.next_id + slot as u64);
                    (child, self.eval_seed(slot, 0))
                })
                .collect();
            self.next_id += batch.len() as u64;
            let offspring = self.score_batch(batch, &env);
            for ind in &offspring {
                log(&LogRow::of(ind, g, env.mode));
            }

            let mut pool: Vec<Individual> = std::mem::take(&mut self.population);
            let n_parents = pool.len();
            pool.extend(offspring);
            let candidates: Vec<Candidate> = pool
                .iter()
                .enumerate()
                .map(|(i, ind)| Candidate {
                    id: ind.id,
                    fitness: ind.fitness,
                    is_parent: i < n_parents,
                })
                .collect();
            let keep = select_survivors(&candidates, self.config.population_size);
            let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
            self.population = keep.into_iter().map(|i| slots[i].take().expect("unique index")).collect();
        }

        self.generation += 1;
        self.summary(g, env.mode, reevaluated_mean)
    }

    fn summary(&self, generation: u32, env_mode: EnvMode, reevaluated_mean: Option<f64>) -> GenerationSummary {
        let fits: Vec<Option<ObjectiveVector>> = self.population.iter().map(|i| i.fitness).collect();
        let front0: Vec<ObjectiveVector> = match nondominated_sort(&fits).first() {
            Some(f) if fits[f[0]].is_some() => f.iter().map(|&i| fits[i].unwrap()).collect(),
            _ => Vec::new(),
        };
        GenerationSummary {
            generation,
            env_mode,
            survivor_ids: self.population.iter().map(|i| i.id).collect(),
            best_distance: fits.iter().flatten().map(|o| o.distance).fold(0.0, f64::max),
            mean_distance: mean_distance(&self.population),
            front0_hypervolume: hypervolume(&front0, &reference_point(self.config.grid_cells())),
            front0,
            reevaluated_mean_distance: reevaluated_mean,
        }
    }
}

/// Mean distance over the population; infeasible members count as zero.
pub fn mean_distance(pop: &[Individual]) -> f64 {
    if pop.is_empty() {
        return 0.0;
    }
    pop.iter().map(|i| i.fitness.map_or(0.0, |o| o.distance)).sum::<f64>() / pop.len() as f64
}

/// In-memory log of a complete run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
    pub generations: Vec<GenerationSummary>,
    pub final_population: Vec<Individual>,
}

pub fn evolve_run(config: EvolutionConfig) -> Result<RunLog, ConfigError> {
    let mut run = EvolutionRun::new(config)?;
    let mut log = RunLog::default();
    while !run.is_finished() {
        let summary = run.step(|row| log.rows.push(row.clone()));
        log.generations.push(summary);
    }
    log.final_population = run.population;
    Ok(log)
}
