use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::runlog::truncate_logs;
use super::snapshot::{read_snapshot, write_snapshot};
use super::{create_dir, write_file, HarnessError, RunLogWriter};
use crate::config::Config;
use crate::evolution::{EvolutionRun, Individual};
use crate::formats::{serialize_body, serialize_genome};
use crate::phenotype::express;
use crate::seed::{derive_seed, tag};

pub const CONFIG_FILE: &str = "config.snapshot";
pub const RUNLOG_FILE: &str = "runlog.csv";
pub const GENERATIONS_FILE: &str = "generations.csv";
pub const GENOMES_DIR: &str = "genomes";
pub const SNAPSHOTS_DIR: &str = "snapshots";
pub const BEST_DIR: &str = "best";

/// Result of one finished repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionOutcome {
    pub repetition: u32,
    pub dir: PathBuf,
    pub best_distance: f64,
    pub generations_run: u32,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub repetitions: Vec<Result<RepetitionOutcome, HarnessError>>,
}

impl ExperimentReport {
    pub fn failed(&self) -> Vec<u32> {
        self.repetitions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_err())
            .map(|(i, _)| i as u32)
            .collect()
    }
}

pub fn repetition_seed(master_seed: u64, repetition: u32) -> u64 {
    derive_seed(&[master_seed, repetition as u64, tag::REPETITION])
}

pub fn repetition_dir(out_dir: &Path, repetition: u32) -> PathBuf {
    out_dir.join(format!("rep_{repetition:03}"))
}

/// Run every repetition of `config` under `out_dir`. Repetitions run
/// concurrently; a failing repetition leaves an `error.txt` in its directory
/// and does not stop the others.
pub fn run_experiment(config: &Config, out_dir: &Path) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    create_dir(out_dir)?;
    write_file(&out_dir.join(CONFIG_FILE), &config.to_text())?;
    let repetitions: Vec<Result<RepetitionOutcome, HarnessError>> = (0..config.repetitions)
        .into_par_iter()
        .map(|r| {
            let dir = repetition_dir(out_dir, r);
            let result = run_repetition(config, r, &dir);
            if let Err(e) = &result {
                let _ = std::fs::create_dir_all(&dir);
                let _ = std::fs::write(dir.join("error.txt"), format!("{e}\n"));
            }
            result
        })
        .collect();
    Ok(ExperimentReport {
        out_dir: out_dir.to_path_buf(),
        repetitions,
    })
}

pub fn run_repetition(config: &Config, repetition: u32, dir: &Path) -> Result<RepetitionOutcome, HarnessError> {
    let mut evo = config.evolution.clone();
    evo.master_seed = repetition_seed(config.evolution.master_seed, repetition);
    let run = EvolutionRun::new(evo)?;
    for sub in [GENOMES_DIR, SNAPSHOTS_DIR, BEST_DIR] {
        create_dir(&dir.join(sub))?;
    }
    let writer = RunLogWriter::open(&dir.join(RUNLOG_FILE), &dir.join(GENERATIONS_FILE), false)?;
    drive(config, repetition, run, dir, writer)
}

/// Continue the repetition stored in a snapshot inside `rep_XXX/snapshots/`.
/// Log lines from the snapshot's generation on are discarded first, so the
/// finished directory matches an uninterrupted run.
pub fn resume(snapshot_path: &Path) -> Result<RepetitionOutcome, HarnessError> {
    let snap = read_snapshot(snapshot_path)?;
    let dir = snapshot_path
        .parent()
        .and_then(Path::parent)
        .ok_or_else(|| HarnessError::InvalidInput("snapshot must live in <rep>/snapshots/".into()))?
        .to_path_buf();
    let rows = dir.join(RUNLOG_FILE);
    let gens = dir.join(GENERATIONS_FILE);
    truncate_logs(&rows, &gens, snap.run.generation)?;
    let writer = RunLogWriter::open(&rows, &gens, true)?;
    drive(&snap.config, snap.repetition, snap.run, &dir, writer)
}

fn drive(
    config: &Config,
    repetition: u32,
    mut run: EvolutionRun,
    dir: &Path,
    mut writer: RunLogWriter,
) -> Result<RepetitionOutcome, HarnessError> {
    let mut last_best = 0.0;
    while !run.is_finished() {
        let mut failure = None;
        let summary = run.step(|row| {
            if failure.is_none() {
                failure = writer.write_row(row).err();
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        writer.write_generation(&summary)?;
        writer.flush()?;
        last_best = summary.best_distance;
        if run.generation.is_multiple_of(config.snapshot_interval) || run.is_finished() {
            let path = dir.join(SNAPSHOTS_DIR).join(format!("gen_{:05}.snap", run.generation));
            write_snapshot(&path, config, repetition, &run)?;
        }
    }
    write_population(&run, dir)?;
    Ok(RepetitionOutcome {
        repetition,
        dir: dir.to_path_buf(),
        best_distance: last_best,
        generations_run: run.generation,
    })
}

/// Final population genomes, and genome plus body of the farthest mover.
fn write_population(run: &EvolutionRun, dir: &Path) -> Result<(), HarnessError> {
    let genomes = dir.join(GENOMES_DIR);
    for ind in &run.population {
        write_file(&genomes.join(format!("{:08}.genome", ind.id)), &serialize_genome(&ind.genome))?;
    }
    let best = run
        .population
        .iter()
        .filter(|i| i.fitness.is_some())
        .max_by(|a, b| distance(a).total_cmp(&distance(b)).then(b.id.cmp(&a.id)));
    if let Some(best) = best {
        let out = dir.join(BEST_DIR);
        write_file(&out.join("champion.genome"), &serialize_genome(&best.genome))?;
        if let Ok(p) = express(&best.genome, run.config.dims, &run.config.expression) {
            write_file(&out.join("champion.body"), &serialize_body(&p.body))?;
        }
        let f = best.fitness.expect("filtered to feasible");
        write_file(
            &out.join("champion.txt"),
            &format!(
                "id {}\ndistance {:?}\nenergy {:?}\nmaterial {}\n",
                best.id, f.distance, f.energy, f.material
            ),
        )?;
    }
    Ok(())
}

fn distance(i: &Individual) -> f64 {
    i.fitness.map_or(0.0, |f| f.distance)
}
