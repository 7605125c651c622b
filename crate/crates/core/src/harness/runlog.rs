use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{csv_err, io_err, HarnessError};
use crate::evolution::{GenerationSummary, LogRow, ObjectiveVector};
use crate::lattice::EnvMode;
use crate::stats::LoggedEval;

pub const RUNLOG_COLUMNS: [&str; 16] = [
    "generation",
    "individual_id",
    "parent_id",
    "env_mode",
    "distance",
    "energy",
    "material",
    "feasible",
    "s_x",
    "s_y",
    "s_z",
    "G_SI",
    "BI",
    "shape_entropy",
    "frequency",
    "eval_seed",
];

/// One line of `runlog.csv`. Objective fields are empty for infeasible
/// individuals; descriptor fields are empty when no body was expressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogRecord {
    pub generation: u32,
    pub individual_id: u64,
    pub parent_id: Option<u64>,
    pub env_mode: String,
    pub distance: Option<f64>,
    pub energy: Option<f64>,
    pub material: Option<u32>,
    pub feasible: u8,
    pub s_x: Option<f64>,
    pub s_y: Option<f64>,
    pub s_z: Option<f64>,
    #[serde(rename = "G_SI")]
    pub g_si: Option<f64>,
    #[serde(rename = "BI")]
    pub bi: Option<f64>,
    pub shape_entropy: Option<f64>,
    pub frequency: Option<f64>,
    pub eval_seed: u64,
}

impl From<&LogRow> for RunLogRecord {
    fn from(r: &LogRow) -> Self {
        let d = r.descriptors;
        Self {
            generation: r.generation,
            individual_id: r.individual_id,
            parent_id: r.parent_id,
            env_mode: r.env_mode.name().to_string(),
            distance: r.fitness.map(|f| f.distance),
            energy: r.fitness.map(|f| f.energy),
            material: r.fitness.map(|f| f.material),
            feasible: r.fitness.is_some() as u8,
            s_x: d.map(|d| d.s_x),
            s_y: d.map(|d| d.s_y),
            s_z: d.map(|d| d.s_z),
            g_si: d.map(|d| d.g_si),
            bi: d.map(|d| d.bi),
            shape_entropy: d.map(|d| d.shape_entropy),
            frequency: r.frequency,
            eval_seed: r.eval_seed,
        }
    }
}

impl RunLogRecord {
    pub fn fitness(&self) -> Option<ObjectiveVector> {
        match (self.feasible, self.distance, self.energy, self.material) {
            (1, Some(distance), Some(energy), Some(material)) => Some(ObjectiveVector {
                distance,
                energy,
                material,
            }),
            _ => None,
        }
    }

    pub fn env(&self) -> Option<EnvMode> {
        EnvMode::parse(&self.env_mode)
    }

    pub fn logged_eval(&self) -> LoggedEval {
        LoggedEval {
            generation: self.generation,
            individual_id: self.individual_id,
            fitness: self.fitness(),
        }
    }
}

/// Per-generation summary line of `generations.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u32,
    pub env_mode: String,
    pub best_distance: f64,
    pub mean_distance: f64,
    pub front0_size: usize,
    pub front0_hypervolume: f64,
    pub reevaluated_mean_distance: Option<f64>,
}

impl From<&GenerationSummary> for GenerationRecord {
    fn from(s: &GenerationSummary) -> Self {
        Self {
            generation: s.generation,
            env_mode: s.env_mode.name().to_string(),
            best_distance: s.best_distance,
            mean_distance: s.mean_distance,
            front0_size: s.front0.len(),
            front0_hypervolume: s.front0_hypervolume,
            reevaluated_mean_distance: s.reevaluated_mean_distance,
        }
    }
}

/// Single writer for a repetition's run log and generation summaries.
pub struct RunLogWriter {
    rows: csv::Writer<File>,
    rows_path: PathBuf,
    generations: csv::Writer<File>,
    generations_path: PathBuf,
}

fn open_csv(path: &Path, append: bool) -> Result<csv::Writer<File>, HarnessError> {
    let file = if append {
        OpenOptions::new().append(true).open(path)
    } else {
        File::create(path)
    }
    .map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().has_headers(!append).from_writer(file))
}

impl RunLogWriter {
    /// Start fresh files, or append to existing ones when resuming.
    pub fn open(rows_path: &Path, generations_path: &Path, append: bool) -> Result<Self, HarnessError> {
        Ok(Self {
            rows: open_csv(rows_path, append)?,
            rows_path: rows_path.to_path_buf(),
            generations: open_csv(generations_path, append)?,
            generations_path: generations_path.to_path_buf(),
        })
    }

    pub fn write_row(&mut self, row: &LogRow) -> Result<(), HarnessError> {
        self.rows
            .serialize(RunLogRecord::from(row))
            .map_err(csv_err(&self.rows_path))
    }

    pub fn write_generation(&mut self, summary: &GenerationSummary) -> Result<(), HarnessError> {
        self.generations
            .serialize(GenerationRecord::from(summary))
            .map_err(csv_err(&self.generations_path))
    }

    pub fn flush(&mut self) -> Result<(), HarnessError> {
        self.rows.flush().map_err(io_err(&self.rows_path))?;
        self.generations.flush().map_err(io_err(&self.generations_path))
    }
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}

pub fn read_runlog(path: &Path) -> Result<Vec<RunLogRecord>, HarnessError> {
    read_records(path)
}

pub fn read_generations(path: &Path) -> Result<Vec<GenerationRecord>, HarnessError> {
    read_records(path)
}

/// Keep the header and every line whose leading `generation` field is below
/// `generation`. Log lines never contain quoted fields, so this is line based.
fn truncate_file(path: &Path, generation: u32) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = String::with_capacity(text.len());
    for (i, line) in text.lines().enumerate() {
        let keep = i == 0
            || line
                .split(',')
                .next()
                .and_then(|g| g.parse::<u32>().ok())
                .is_some_and(|g| g < generation);
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Drop every logged line from `generation` on, so a resumed run can append.
pub(crate) fn truncate_logs(rows_path: &Path, generations_path: &Path, generation: u32) -> Result<(), HarnessError> {
    truncate_file(rows_path, generation)?;
    truncate_file(generations_path, generation)
}
