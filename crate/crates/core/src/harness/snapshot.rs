//! Self-describing population snapshots.
//!
//! ```text
//! voxevo-snapshot 1
//! config-hash <sha256 of the effective config>
//! checksum <sha256 of the payload>
//! <JSON payload>
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, write_file, HarnessError};
use crate::config::{hex, Config};
use crate::evolution::EvolutionRun;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "voxevo-snapshot";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Payload {
    format_version: u32,
    config_text: String,
    config_hash: String,
    repetition: u32,
    run: EvolutionRun,
}

/// Everything needed to continue a repetition.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub config: Config,
    pub config_hash: String,
    pub repetition: u32,
    pub run: EvolutionRun,
}

pub fn write_snapshot(path: &Path, config: &Config, repetition: u32, run: &EvolutionRun) -> Result<(), HarnessError> {
    let payload = Payload {
        format_version: SNAPSHOT_FORMAT_VERSION,
        config_text: config.to_text(),
        config_hash: config.hash(),
        repetition,
        run: run.clone(),
    };
    let body = serde_json::to_string(&payload).expect("snapshot payload serializes");
    let checksum = hex(&Sha256::digest(body.as_bytes()));
    let text = format!(
        "{MAGIC} {SNAPSHOT_FORMAT_VERSION}\nconfig-hash {}\nchecksum {checksum}\n{body}\n",
        payload.config_hash
    );
    write_file(path, &text)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let corrupt = |reason: &str| HarnessError::CorruptSnapshot {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut lines = text.splitn(4, '\n');
    let header = lines.next().unwrap_or_default();
    let version = header
        .strip_prefix(MAGIC)
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| corrupt("missing header"))?;
    if version != SNAPSHOT_FORMAT_VERSION {
        return Err(HarnessError::VersionMismatch {
            found: version,
            expected: SNAPSHOT_FORMAT_VERSION,
        });
    }
    let config_hash = lines
        .next()
        .and_then(|l| l.strip_prefix("config-hash "))
        .ok_or_else(|| corrupt("missing config hash"))?;
    let checksum = lines
        .next()
        .and_then(|l| l.strip_prefix("checksum "))
        .ok_or_else(|| corrupt("missing checksum"))?;
    let body = lines.next().unwrap_or_default().trim_end_matches('\n');
    if hex(&Sha256::digest(body.as_bytes())) != checksum {
        return Err(corrupt("checksum mismatch"));
    }
    let payload: Payload = serde_json::from_str(body).map_err(|e| corrupt(&e.to_string()))?;
    if payload.format_version != version {
        return Err(HarnessError::VersionMismatch {
            found: payload.format_version,
            expected: SNAPSHOT_FORMAT_VERSION,
        });
    }
    let config = Config::parse(&payload.config_text)?;
    if config.hash() != payload.config_hash || payload.config_hash != config_hash {
        return Err(corrupt("config hash mismatch"));
    }
    Ok(Snapshot {
        config,
        config_hash: payload.config_hash,
        repetition: payload.repetition,
        run: payload.run,
    })
}
