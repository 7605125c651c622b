//! Python bindings: `import voxevo`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use voxevo_core::config::Config as CoreConfig;
use voxevo_core::cppn::{random_genome, Genome as CoreGenome};
use voxevo_core::descriptors::{describe, DescriptorSet};
use voxevo_core::evolution::{
    self as evo, hypervolume as core_hypervolume, nondominated_sort as core_sort, EvolutionRun as CoreRun,
    ObjectiveVector,
};
use voxevo_core::formats;
use voxevo_core::harness::{self, HarnessError};
use voxevo_core::lattice::EnvMode;
use voxevo_core::phenotype::{express, Material, Phenotype, VoxelBody as CoreBody};
use voxevo_core::seed::rng_for;
use voxevo_core::stats;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_env(env: &str) -> PyResult<EnvMode> {
    EnvMode::parse(env).ok_or_else(|| PyValueError::new_err(format!("unknown environment `{env}`")))
}

fn objectives_dict<'py>(py: Python<'py>, o: &ObjectiveVector) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("distance", o.distance)?;
    d.set_item("energy", o.energy)?;
    d.set_item("material", o.material)?;
    Ok(d)
}

fn descriptors_dict<'py>(py: Python<'py>, s: &DescriptorSet) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("s_x", s.s_x)?;
    d.set_item("s_y", s.s_y)?;
    d.set_item("s_z", s.s_z)?;
    d.set_item("G_SI", s.g_si)?;
    d.set_item("BI", s.bi)?;
    d.set_item("shape_entropy", s.shape_entropy)?;
    Ok(d)
}

/// Experiment configuration (flat `section.key = value` text).
#[pyclass(module = "voxevo", skip_from_py_object)]
#[derive(Clone)]
struct Config {
    inner: CoreConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        let inner = CoreConfig::parse(text).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = CoreConfig::load(&path).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn population_size(&self) -> usize {
        self.inner.evolution.population_size
    }

    #[getter]
    fn generations(&self) -> u32 {
        self.inner.evolution.generations
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        self.inner.evolution.dims
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.evolution.master_seed
    }

    fn __repr__(&self) -> String {
        format!("Config(hash={})", &self.inner.hash()[..12])
    }
}

/// A pair of CPPNs: morphology and control.
#[pyclass(module = "voxevo", skip_from_py_object)]
#[derive(Clone)]
struct Genome {
    inner: CoreGenome,
}

#[pymethods]
impl Genome {
    #[staticmethod]
    #[pyo3(signature = (seed, id = 0))]
    fn random(seed: u64, id: u64) -> Self {
        Self {
            inner: random_genome(&mut rng_for(&[seed]), id),
        }
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        formats::parse_genome(text).map(|inner| Self { inner }).map_err(value_err)
    }

    fn to_text(&self) -> String {
        formats::serialize_genome(&self.inner)
    }

    #[getter]
    fn id(&self) -> u64 {
        self.inner.id
    }

    #[getter]
    fn parent_id(&self) -> Option<u64> {
        self.inner.parent_id
    }

    /// Mutated copy using the mutation rates of `config`.
    fn mutate(&self, config: &Config, seed: u64, child_id: u64) -> Self {
        Self {
            inner: voxevo_core::cppn::mutate(&self.inner, &config.inner.evolution.rates, &mut rng_for(&[seed]), child_id),
        }
    }

    /// Express into a body and actuation frequency on the grid of `config`.
    fn express(&self, config: &Config) -> PyResult<(VoxelBody, f64)> {
        let e = &config.inner.evolution;
        let p = express(&self.inner, e.dims, &e.expression).map_err(value_err)?;
        Ok((VoxelBody { inner: p.body }, p.frequency))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// Voxel grid of empty / passive / active cells with per-cell phase.
#[pyclass(module = "voxevo", skip_from_py_object)]
#[derive(Clone)]
struct VoxelBody {
    inner: CoreBody,
}

#[pymethods]
impl VoxelBody {
    /// Build from a nested `[z][y][x]` list of `"."`, `"p"` or `"a"`.
    #[staticmethod]
    fn from_layers(layers: Vec<Vec<String>>) -> PyResult<Self> {
        let nz = layers.len();
        let ny = layers.first().map_or(0, Vec::len);
        let nx = layers.first().and_then(|l| l.first()).map_or(0, |r| r.chars().count());
        let mut text = format!("voxevo-body 1\ndims {nx} {ny} {nz}\n");
        for (z, layer) in layers.iter().enumerate() {
            text.push_str(&format!("layer {z}\n"));
            for row in layer {
                text.push_str(row);
                text.push('\n');
            }
        }
        Self::from_text(&text)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        formats::parse_body(text).map(|inner| Self { inner }).map_err(value_err)
    }

    fn to_text(&self) -> String {
        formats::serialize_body(&self.inner)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        self.inner.dims
    }

    fn full_count(&self) -> usize {
        self.inner.full_count()
    }

    fn active_count(&self) -> usize {
        self.inner.active_count()
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    /// Shape descriptors at the given voxel edge length (m).
    #[pyo3(signature = (voxel_size = 0.01))]
    fn descriptors<'py>(&self, py: Python<'py>, voxel_size: f64) -> PyResult<Bound<'py, PyDict>> {
        let d = describe(&self.inner, voxel_size).map_err(value_err)?;
        descriptors_dict(py, &d)
    }

    /// Simulate under `config` in `env` ("land" or "water") and return the objectives.
    fn evaluate<'py>(&self, py: Python<'py>, config: &Config, env: &str, frequency: f64) -> PyResult<Bound<'py, PyDict>> {
        let mode = parse_env(env)?;
        let e = &config.inner.evolution;
        let phenotype = Phenotype {
            body: self.inner.clone(),
            frequency,
        };
        let envspec = config.inner.env_for(mode);
        let o = py
            .detach(|| evo::evaluate(&phenotype, &envspec, &e.material, &e.protocol))
            .map_err(|err| PyRuntimeError::new_err(err.to_string()))?;
        objectives_dict(py, &o)
    }

    fn material_counts(&self) -> (usize, usize, usize) {
        let count = |m: Material| self.inner.material.iter().filter(|&&x| x == m).count();
        (count(Material::Empty), count(Material::Passive), count(Material::Active))
    }
}

/// A resumable evolutionary run driven one generation at a time.
#[pyclass(module = "voxevo")]
struct EvolutionRun {
    inner: CoreRun,
}

#[pymethods]
impl EvolutionRun {
    #[new]
    fn new(config: &Config) -> PyResult<Self> {
        CoreRun::new(config.inner.evolution.clone())
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn generation(&self) -> u32 {
        self.inner.generation
    }

    fn is_finished(&self) -> bool {
        self.inner.is_finished()
    }

    /// Run the next generation; returns its summary.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let inner = &mut self.inner;
        let s = py.detach(|| inner.step(|_| {}));
        let d = PyDict::new(py);
        d.set_item("generation", s.generation)?;
        d.set_item("env_mode", s.env_mode.name())?;
        d.set_item("best_distance", s.best_distance)?;
        d.set_item("mean_distance", s.mean_distance)?;
        d.set_item("front0_hypervolume", s.front0_hypervolume)?;
        d.set_item("survivor_ids", s.survivor_ids)?;
        d.set_item("reevaluated_mean_distance", s.reevaluated_mean_distance)?;
        Ok(d)
    }

    /// Current population as `(genome, objectives or None)` pairs.
    fn population<'py>(&self, py: Python<'py>) -> PyResult<Vec<(Genome, Option<Bound<'py, PyDict>>)>> {
        self.inner
            .population
            .iter()
            .map(|ind| {
                let obj = ind.fitness.as_ref().map(|o| objectives_dict(py, o)).transpose()?;
                Ok((Genome { inner: ind.genome.clone() }, obj))
            })
            .collect()
    }
}

/// Run all repetitions of `config` into `out_dir`; returns each repetition's best distance.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &Config, out_dir: PathBuf) -> PyResult<Vec<f64>> {
    let cfg = config.inner.clone();
    let report = py.detach(|| harness::run_experiment(&cfg, &out_dir)).map_err(harness_err)?;
    report
        .repetitions
        .into_iter()
        .map(|r| r.map(|o| o.best_distance).map_err(harness_err))
        .collect()
}

/// Continue a repetition from a snapshot file.
#[pyfunction]
fn resume(py: Python<'_>, snapshot: PathBuf) -> PyResult<u32> {
    py.detach(|| harness::resume(&snapshot))
        .map(|o| o.generations_run)
        .map_err(harness_err)
}

/// Re-simulate a genome; returns `(objectives, descriptors)`.
#[pyfunction]
#[pyo3(signature = (genome, config, env, trace = None))]
fn replay<'py>(
    py: Python<'py>,
    genome: &Genome,
    config: &Config,
    env: &str,
    trace: Option<PathBuf>,
) -> PyResult<(Bound<'py, PyDict>, Bound<'py, PyDict>)> {
    let mode = parse_env(env)?;
    let r = py
        .detach(|| harness::replay(&genome.inner, &config.inner, mode, trace.as_deref()))
        .map_err(harness_err)?;
    Ok((objectives_dict(py, &r.objectives)?, descriptors_dict(py, &r.descriptors)?))
}

/// Compare experiment directories and write the analysis tables to `out_dir`.
#[pyfunction]
#[pyo3(signature = (runs, out_dir, config = None))]
fn analyze(py: Python<'_>, runs: Vec<PathBuf>, out_dir: PathBuf, config: Option<&Config>) -> PyResult<Vec<(String, f64)>> {
    let opts = config.map(|c| c.inner.stats).unwrap_or_default();
    let report = py.detach(|| harness::analyze(&runs, &out_dir, &opts)).map_err(harness_err)?;
    Ok(report.summaries.into_iter().map(|s| (s.treatment, s.median)).collect())
}

/// Two-sided Mann-Whitney U test; returns `(U, p)`.
#[pyfunction]
fn mann_whitney_u(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = stats::mann_whitney_u(&a, &b).map_err(value_err)?;
    Ok((r.u_statistic, r.p_value))
}

/// Percentile bootstrap confidence interval of the mean.
#[pyfunction]
#[pyo3(signature = (samples, level = 0.95, resamples = 10_000, seed = 0))]
fn bootstrap_ci(samples: Vec<f64>, level: f64, resamples: usize, seed: u64) -> PyResult<(f64, f64)> {
    stats::bootstrap_ci(&samples, level, resamples, seed).map_err(value_err)
}

#[pyfunction]
fn bonferroni_adjust(p_values: Vec<f64>, m: usize) -> PyResult<Vec<f64>> {
    stats::bonferroni_adjust(&p_values, m).map_err(value_err)
}

fn to_objectives(points: &[(f64, f64, u32)]) -> Vec<ObjectiveVector> {
    points.iter().map(|&(d, e, m)| ObjectiveVector::new(d, e, m)).collect()
}

/// Pareto fronts of `(distance, energy, material)` triples as index lists.
#[pyfunction]
fn nondominated_sort(points: Vec<(f64, f64, u32)>) -> Vec<Vec<usize>> {
    let fits: Vec<Option<ObjectiveVector>> = to_objectives(&points).into_iter().map(Some).collect();
    core_sort(&fits)
}

#[pyfunction]
fn hypervolume(points: Vec<(f64, f64, u32)>, reference: (f64, f64, u32)) -> f64 {
    core_hypervolume(&to_objectives(&points), &ObjectiveVector::new(reference.0, reference.1, reference.2))
}

#[pymodule]
pub fn voxevo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<Genome>()?;
    m.add_class::<VoxelBody>()?;
    m.add_class::<EvolutionRun>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(resume, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_ci, m)?)?;
    m.add_function(wrap_pyfunction!(bonferroni_adjust, m)?)?;
    m.add_function(wrap_pyfunction!(nondominated_sort, m)?)?;
    m.add_function(wrap_pyfunction!(hypervolume, m)?)?;
    Ok(())
}
