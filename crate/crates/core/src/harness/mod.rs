//! Run directories, logs, snapshots, replay and analysis.

mod analyze;
mod experiment;
mod replay;
mod runlog;
mod snapshot;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use analyze::{analyze, AnalysisReport, TreatmentSummary};
pub use experiment::{
    repetition_seed, resume, run_experiment, run_repetition, ExperimentReport, RepetitionOutcome, BEST_DIR,
    CONFIG_FILE, GENERATIONS_FILE, GENOMES_DIR, RUNLOG_FILE, SNAPSHOTS_DIR,
};
pub use replay::{replay, ReplayReport};
pub use runlog::{
    read_generations, read_runlog, GenerationRecord, RunLogRecord, RunLogWriter, RUNLOG_COLUMNS,
};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SNAPSHOT_FORMAT_VERSION};

use crate::formats::FormatError;
use crate::lattice::SimError;
use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Evolution(#[from] crate::evolution::ConfigError),
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: corrupt snapshot ({reason})")]
    CorruptSnapshot { path: PathBuf, reason: String },
    #[error("snapshot format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("genome does not express a feasible body: {0}")]
    InfeasiblePhenotype(String),
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{0}")]
    InvalidInput(String),
    #[error("repetitions failed: {0:?}")]
    RepetitionsFailed(Vec<u32>),
}

impl HarnessError {
    /// Process exit code: 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_)
            | Self::Evolution(_)
            | Self::Format { .. }
            | Self::CorruptSnapshot { .. }
            | Self::VersionMismatch { .. }
            | Self::InvalidInput(_) => 1,
            Self::Io { .. }
            | Self::Csv { .. }
            | Self::InfeasiblePhenotype(_)
            | Self::Simulation(_)
            | Self::Stats(_)
            | Self::RepetitionsFailed(_) => 2,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_genome(path: &Path) -> Result<crate::cppn::Genome, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    crate::formats::parse_genome(&text).map_err(|source| HarnessError::Format {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_body(path: &Path) -> Result<crate::phenotype::VoxelBody, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    crate::formats::parse_body(&text).map_err(|source| HarnessError::Format {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}
