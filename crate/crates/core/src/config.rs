//! Flat `section.key = value` configuration.
//!
//! Every key has a default; an empty file yields [`Config::default`]. Lines
//! starting with `#` are comments. String values may be quoted.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evolution::{EvolutionConfig, ScheduleEntry};
use crate::lattice::{EnvMode, EnvironmentSpec, Stiffness};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: `{key}` expects {expected}, got `{found}`")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: String,
        line: usize,
    },
    #[error("`{key}` {reason}")]
    ConstraintViolation { key: String, reason: String },
}

/// Environment schedule as written in the config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedulePattern {
    Land,
    Water,
    LandWaterHalfway,
    WaterLandHalfway,
    /// Explicit `mode@generation` list.
    Explicit(Vec<(EnvMode, u32)>),
}

impl SchedulePattern {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "land" => Some(Self::Land),
            "water" => Some(Self::Water),
            "land_water_halfway" => Some(Self::LandWaterHalfway),
            "water_land_halfway" => Some(Self::WaterLandHalfway),
            _ => s
                .split(',')
                .map(|part| {
                    let (mode, g) = part.trim().split_once('@')?;
                    Some((EnvMode::parse(mode)?, g.trim().parse().ok()?))
                })
                .collect::<Option<Vec<_>>>()
                .filter(|v| !v.is_empty())
                .map(Self::Explicit),
        }
    }

    /// (mode, start generation) pairs for a run of `generations`.
    pub fn resolve(&self, generations: u32) -> Vec<(EnvMode, u32)> {
        let half = generations / 2;
        match self {
            Self::Land => vec![(EnvMode::Land, 0)],
            Self::Water => vec![(EnvMode::Water, 0)],
            Self::LandWaterHalfway => vec![(EnvMode::Land, 0), (EnvMode::Water, half)],
            Self::WaterLandHalfway => vec![(EnvMode::Water, 0), (EnvMode::Land, half)],
            Self::Explicit(v) => v.clone(),
        }
    }

    fn render(&self) -> String {
        match self {
            Self::Land => "land".into(),
            Self::Water => "water".into(),
            Self::LandWaterHalfway => "land_water_halfway".into(),
            Self::WaterLandHalfway => "water_land_halfway".into(),
            Self::Explicit(v) => v
                .iter()
                .map(|(m, g)| format!("{}@{}", m.name(), g))
                .collect::<Vec<_>>()
                .join(","),
        }
    }
}

/// Statistics options used by `analyze`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsOptions {
    pub confidence_level: f64,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            confidence_level: 0.95,
            bootstrap_resamples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub evolution: EvolutionConfig,
    pub schedule: SchedulePattern,
    /// Land-environment parameters; Water shares them except for gravity.
    pub environment: EnvironmentSpec,
    pub repetitions: u32,
    /// Generations between population snapshots.
    pub snapshot_interval: u32,
    /// Steps between trace rows written by `replay`.
    pub trace_interval: u64,
    pub stats: StatsOptions,
}

impl Default for Config {
    fn default() -> Self {
        let mut c = Self {
            evolution: EvolutionConfig::default(),
            schedule: SchedulePattern::Land,
            environment: EnvironmentSpec::land(),
            repetitions: 1,
            snapshot_interval: 10,
            trace_interval: 100,
            stats: StatsOptions::default(),
        };
        c.sync_schedule();
        c
    }
}

fn num<T: std::str::FromStr>(key: &str, raw: &str, expected: &'static str, line: usize) -> Result<T, ConfigError> {
    raw.parse().map_err(|_| ConfigError::TypeMismatch {
        key: key.to_string(),
        expected,
        found: raw.to_string(),
        line,
    })
}

fn boolean(key: &str, raw: &str, line: usize) -> Result<bool, ConfigError> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::TypeMismatch {
            key: key.to_string(),
            expected: "true or false",
            found: raw.to_string(),
            line,
        }),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Config::default();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            c.set(key, value, line)?;
        }
        c.sync_schedule();
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str, line: usize) -> Result<(), ConfigError> {
        let e = &mut self.evolution;
        let m = &mut e.material;
        let env = &mut self.environment;
        let r = &mut e.rates;
        const REAL: &str = "a real number";
        const COUNT: &str = "a non-negative integer";
        match key {
            "run.repetitions" => self.repetitions = num(key, v, COUNT, line)?,
            "run.master_seed" => e.master_seed = num(key, v, COUNT, line)?,
            "run.snapshot_interval" => self.snapshot_interval = num(key, v, COUNT, line)?,
            "run.trace_interval" => self.trace_interval = num(key, v, COUNT, line)?,
            "evolution.population_size" => e.population_size = num(key, v, COUNT, line)?,
            "evolution.generations" => e.generations = num(key, v, COUNT, line)?,
            "evolution.cycles_per_eval" => e.protocol.cycles = num(key, v, COUNT, line)?,
            "evolution.settle_time" => e.protocol.settle_time = num(key, v, REAL, line)?,
            "evolution.ramp_cycles" => e.protocol.ramp_cycles = num(key, v, REAL, line)?,
            "evolution.self_collision" => e.protocol.self_collision = boolean(key, v, line)?,
            "grid.dims" => {
                let parts: Option<Vec<usize>> = v.split(['x', ',']).map(|p| p.trim().parse().ok()).collect();
                match parts.as_deref() {
                    Some(&[x, y, z]) => e.dims = (x, y, z),
                    _ => {
                        return Err(ConfigError::TypeMismatch {
                            key: key.into(),
                            expected: "three integers like 8x8x7",
                            found: v.into(),
                            line,
                        })
                    }
                }
            }
            "material.stiffness" => {
                let s = Stiffness::parse(v).ok_or_else(|| ConfigError::TypeMismatch {
                    key: key.into(),
                    expected: "one of S1..S5",
                    found: v.into(),
                    line,
                })?;
                m.elastic_modulus = s.elastic_modulus();
            }
            "material.elastic_modulus" => m.elastic_modulus = num(key, v, REAL, line)?,
            "material.density" => m.density = num(key, v, REAL, line)?,
            "material.damping_ratio" => m.bond_damping_ratio = num(key, v, REAL, line)?,
            "material.friction_static" => m.friction_static = num(key, v, REAL, line)?,
            "material.friction_kinetic" => m.friction_kinetic = num(key, v, REAL, line)?,
            "material.actuation_amplitude" => m.actuation_amplitude = num(key, v, REAL, line)?,
            "material.voxel_size" => m.voxel_size = num(key, v, REAL, line)?,
            "environment.schedule" => {
                self.schedule = SchedulePattern::parse(v).ok_or_else(|| ConfigError::TypeMismatch {
                    key: key.into(),
                    expected: "land, water, land_water_halfway, water_land_halfway or mode@gen,...",
                    found: v.into(),
                    line,
                })?
            }
            "environment.gravity" => env.gravity = num(key, v, REAL, line)?,
            "environment.fluid_density" => env.fluid_density = num(key, v, REAL, line)?,
            "environment.drag_coefficient" => env.drag_coefficient = num(key, v, REAL, line)?,
            "environment.ground_stiffness" => env.ground_contact_stiffness = num(key, v, REAL, line)?,
            "environment.ground_damping" => env.ground_contact_damping = num(key, v, REAL, line)?,
            "expression.f_min" => e.expression.f_min = num(key, v, REAL, line)?,
            "expression.f_max" => e.expression.f_max = num(key, v, REAL, line)?,
            "mutation.perturb_weight" => r.perturb_weight_prob = num(key, v, REAL, line)?,
            "mutation.perturb_per_connection" => r.perturb_per_connection = num(key, v, REAL, line)?,
            "mutation.add_connection" => r.add_connection_prob = num(key, v, REAL, line)?,
            "mutation.add_node" => r.add_node_prob = num(key, v, REAL, line)?,
            "mutation.change_activation" => r.change_activation_prob = num(key, v, REAL, line)?,
            "mutation.weight_sigma" => r.weight_sigma = num(key, v, REAL, line)?,
            "stats.confidence_level" => self.stats.confidence_level = num(key, v, REAL, line)?,
            "stats.bootstrap_resamples" => self.stats.bootstrap_resamples = num(key, v, COUNT, line)?,
            "stats.seed" => self.stats.seed = num(key, v, COUNT, line)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    line,
                })
            }
        }
        Ok(())
    }

    /// Rebuild `evolution.schedule` from the pattern and environment parameters.
    pub fn sync_schedule(&mut self) {
        let land = EnvironmentSpec {
            mode: EnvMode::Land,
            ..self.environment
        };
        let water = EnvironmentSpec {
            mode: EnvMode::Water,
            gravity: 0.0,
            ..self.environment
        };
        self.evolution.schedule = self
            .schedule
            .resolve(self.evolution.generations)
            .into_iter()
            .map(|(mode, start_generation)| ScheduleEntry {
                start_generation,
                env: if mode == EnvMode::Land { land } else { water },
            })
            .collect();
    }

    /// Land or Water environment built from this config.
    pub fn env_for(&self, mode: EnvMode) -> EnvironmentSpec {
        match mode {
            EnvMode::Land => EnvironmentSpec {
                mode,
                ..self.environment
            },
            EnvMode::Water => EnvironmentSpec {
                mode,
                gravity: 0.0,
                ..self.environment
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: &str| {
            Err(ConfigError::ConstraintViolation {
                key: key.to_string(),
                reason: reason.to_string(),
            })
        };
        let e = &self.evolution;
        let m = &e.material;
        let env = &self.environment;
        let r = &e.rates;
        if self.repetitions == 0 {
            return bad("run.repetitions", "must be >= 1");
        }
        if self.snapshot_interval == 0 {
            return bad("run.snapshot_interval", "must be >= 1");
        }
        if self.trace_interval == 0 {
            return bad("run.trace_interval", "must be >= 1");
        }
        if e.population_size == 0 {
            return bad("evolution.population_size", "must be >= 1");
        }
        if e.generations == 0 {
            return bad("evolution.generations", "must be >= 1");
        }
        if e.protocol.cycles == 0 {
            return bad("evolution.cycles_per_eval", "must be >= 1");
        }
        if !(e.protocol.settle_time >= 0.0 && e.protocol.settle_time.is_finite()) {
            return bad("evolution.settle_time", "must be >= 0");
        }
        if !(e.protocol.ramp_cycles >= 0.0 && e.protocol.ramp_cycles.is_finite()) {
            return bad("evolution.ramp_cycles", "must be >= 0");
        }
        if e.dims.0 == 0 || e.dims.1 == 0 || e.dims.2 == 0 {
            return bad("grid.dims", "must be positive in every axis");
        }
        for (key, x) in [
            ("material.elastic_modulus", m.elastic_modulus),
            ("material.density", m.density),
            ("material.voxel_size", m.voxel_size),
            ("environment.fluid_density", env.fluid_density),
            ("environment.drag_coefficient", env.drag_coefficient),
            ("environment.ground_stiffness", env.ground_contact_stiffness),
            ("expression.f_min", e.expression.f_min),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return bad(key, "must be a positive finite number");
            }
        }
        if !(0.0..=crate::lattice::MAX_DAMPING_RATIO).contains(&m.bond_damping_ratio) {
            return bad("material.damping_ratio", "must lie in [0, 0.6]");
        }
        if !(m.friction_static >= 0.0) {
            return bad("material.friction_static", "must be >= 0");
        }
        if !(m.friction_kinetic >= 0.0 && m.friction_kinetic <= m.friction_static) {
            return bad("material.friction_kinetic", "must lie in [0, friction_static]");
        }
        if !(m.actuation_amplitude >= 0.0 && m.actuation_amplitude < 0.5) {
            return bad("material.actuation_amplitude", "must lie in [0, 0.5)");
        }
        if !(env.gravity >= 0.0 && env.gravity.is_finite()) {
            return bad("environment.gravity", "must be >= 0");
        }
        if !(env.ground_contact_damping >= 0.0 && env.ground_contact_damping.is_finite()) {
            return bad("environment.ground_damping", "must be >= 0");
        }
        if !(e.expression.f_max >= e.expression.f_min && e.expression.f_max.is_finite()) {
            return bad("expression.f_max", "must be >= f_min");
        }
        for (key, p) in [
            ("mutation.perturb_weight", r.perturb_weight_prob),
            ("mutation.perturb_per_connection", r.perturb_per_connection),
            ("mutation.add_connection", r.add_connection_prob),
            ("mutation.add_node", r.add_node_prob),
            ("mutation.change_activation", r.change_activation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(key, "must lie in [0, 1]");
            }
        }
        if !(r.weight_sigma >= 0.0 && r.weight_sigma.is_finite()) {
            return bad("mutation.weight_sigma", "must be >= 0");
        }
        if let Err(err) = r.validate() {
            return bad("mutation", &err);
        }
        if !(self.stats.confidence_level > 0.0 && self.stats.confidence_level < 1.0) {
            return bad("stats.confidence_level", "must lie in (0, 1)");
        }
        if self.stats.bootstrap_resamples == 0 {
            return bad("stats.bootstrap_resamples", "must be >= 1");
        }
        let sched = self.schedule.resolve(e.generations);
        if sched.first().map(|s| s.1) != Some(0) {
            return bad("environment.schedule", "must start at generation 0");
        }
        if sched.windows(2).any(|w| w[1].1 <= w[0].1) {
            return bad("environment.schedule", "transition generations must be strictly increasing");
        }
        e.validate().map_err(|err| ConfigError::ConstraintViolation {
            key: "evolution".into(),
            reason: err.to_string(),
        })
    }

    /// Effective configuration with every default resolved; parses back to
    /// an identical `Config`.
    pub fn to_text(&self) -> String {
        let e = &self.evolution;
        let m = &e.material;
        let env = &self.environment;
        let r = &e.rates;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("run.repetitions", self.repetitions.to_string());
        kv("run.master_seed", e.master_seed.to_string());
        kv("run.snapshot_interval", self.snapshot_interval.to_string());
        kv("run.trace_interval", self.trace_interval.to_string());
        kv("evolution.population_size", e.population_size.to_string());
        kv("evolution.generations", e.generations.to_string());
        kv("evolution.cycles_per_eval", e.protocol.cycles.to_string());
        kv("evolution.settle_time", format!("{:?}", e.protocol.settle_time));
        kv("evolution.ramp_cycles", format!("{:?}", e.protocol.ramp_cycles));
        kv("evolution.self_collision", e.protocol.self_collision.to_string());
        kv("grid.dims", format!("{}x{}x{}", e.dims.0, e.dims.1, e.dims.2));
        kv("material.elastic_modulus", format!("{:?}", m.elastic_modulus));
        kv("material.density", format!("{:?}", m.density));
        kv("material.damping_ratio", format!("{:?}", m.bond_damping_ratio));
        kv("material.friction_static", format!("{:?}", m.friction_static));
        kv("material.friction_kinetic", format!("{:?}", m.friction_kinetic));
        kv("material.actuation_amplitude", format!("{:?}", m.actuation_amplitude));
        kv("material.voxel_size", format!("{:?}", m.voxel_size));
        kv("environment.schedule", self.schedule.render());
        kv("environment.gravity", format!("{:?}", env.gravity));
        kv("environment.fluid_density", format!("{:?}", env.fluid_density));
        kv("environment.drag_coefficient", format!("{:?}", env.drag_coefficient));
        kv("environment.ground_stiffness", format!("{:?}", env.ground_contact_stiffness));
        kv("environment.ground_damping", format!("{:?}", env.ground_contact_damping));
        kv("expression.f_min", format!("{:?}", e.expression.f_min));
        kv("expression.f_max", format!("{:?}", e.expression.f_max));
        kv("mutation.perturb_weight", format!("{:?}", r.perturb_weight_prob));
        kv("mutation.perturb_per_connection", format!("{:?}", r.perturb_per_connection));
        kv("mutation.add_connection", format!("{:?}", r.add_connection_prob));
        kv("mutation.add_node", format!("{:?}", r.add_node_prob));
        kv("mutation.change_activation", format!("{:?}", r.change_activation_prob));
        kv("mutation.weight_sigma", format!("{:?}", r.weight_sigma));
        kv("stats.confidence_level", format!("{:?}", self.stats.confidence_level));
        kv("stats.bootstrap_resamples", self.stats.bootstrap_resamples.to_string());
        kv("stats.seed", self.stats.seed.to_string());
        s
    }

    /// Hex SHA-256 of [`Config::to_text`].
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_text().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
