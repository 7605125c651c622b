//! Expression of a genome into a voxel body with actuation parameters.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cppn::{CompiledCppn, Genome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Material {
    Empty,
    Passive,
    Active,
}

impl Material {
    #[inline]
    pub fn is_full(self) -> bool {
        self != Material::Empty
    }

    #[inline]
    pub fn is_active(self) -> bool {
        self == Material::Active
    }
}

/// Dense 3D material grid. Cell index = x + X·(y + Y·z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelBody {
    pub dims: (usize, usize, usize),
    pub material: Vec<Material>,
    /// Radians; zero everywhere except Active cells.
    pub phase: Vec<f64>,
}

impl VoxelBody {
    pub fn filled(dims: (usize, usize, usize), material: Material) -> Self {
        let n = dims.0 * dims.1 * dims.2;
        Self {
            dims,
            material: vec![material; n],
            phase: vec![0.0; n],
        }
    }

    /// Body of the given dims with the listed cells set to `material`.
    pub fn from_cells(dims: (usize, usize, usize), cells: &[(usize, usize, usize)], material: Material) -> Self {
        let mut body = Self::filled(dims, Material::Empty);
        for &(x, y, z) in cells {
            let i = body.index(x, y, z);
            body.material[i] = material;
        }
        body
    }

    pub fn len(&self) -> usize {
        self.material.len()
    }

    pub fn is_empty(&self) -> bool {
        self.material.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let (nx, ny, _) = self.dims;
        (i % nx, (i / nx) % ny, i / (nx * ny))
    }

    pub fn get(&self, x: i64, y: i64, z: i64) -> Material {
        let (nx, ny, nz) = self.dims;
        if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
            return Material::Empty;
        }
        self.material[self.index(x as usize, y as usize, z as usize)]
    }

    pub fn full_count(&self) -> usize {
        self.material.iter().filter(|m| m.is_full()).count()
    }

    pub fn active_count(&self) -> usize {
        self.material.iter().filter(|m| m.is_active()).count()
    }

    fn neighbors6(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y, z) = self.coords(i);
        let (x, y, z) = (x as i64, y as i64, z as i64);
        [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)]
            .into_iter()
            .filter_map(move |(dx, dy, dz)| {
                let (a, b, c) = (x + dx, y + dy, z + dz);
                let (nx, ny, nz) = self.dims;
                (a >= 0 && b >= 0 && c >= 0 && a < nx as i64 && b < ny as i64 && c < nz as i64)
                    .then(|| self.index(a as usize, b as usize, c as usize))
            })
    }

    /// 6-connected components of full cells, discovered in ascending order of
    /// their lowest cell index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![false; self.len()];
        let mut comps = Vec::new();
        for start in 0..self.len() {
            if label[start] || !self.material[start].is_full() {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            label[start] = true;
            while let Some(c) = queue.pop_front() {
                comp.push(c);
                for nb in self.neighbors6(c) {
                    if !label[nb] && self.material[nb].is_full() {
                        label[nb] = true;
                        queue.push_back(nb);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

/// Keep only the largest 6-connected component; ties go to the component
/// containing the lowest cell index.
pub fn prune_to_largest_component(body: &VoxelBody) -> VoxelBody {
    let comps = body.components();
    let mut best: Option<&Vec<usize>> = None;
    for c in &comps {
        if best.is_none_or(|b| c.len() > b.len()) {
            best = Some(c);
        }
    }
    let mut out = VoxelBody::filled(body.dims, Material::Empty);
    if let Some(keep) = best {
        for &i in keep {
            out.material[i] = body.material[i];
            out.phase[i] = body.phase[i];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpressionConfig {
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for ExpressionConfig {
    fn default() -> Self {
        Self { f_min: 0.5, f_max: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phenotype {
    pub body: VoxelBody,
    /// Hz
    pub frequency: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PhenotypeError {
    #[error("genome expresses no full voxels")]
    Infeasible,
    #[error("invalid grid dims {0:?}")]
    InvalidDims((usize, usize, usize)),
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Map raw control outputs to a frequency in [f_min, f_max] and a phase in [−π, π].
pub fn map_control(raw_freq_mean: f64, raw_phase: f64, cfg: &ExpressionConfig) -> (f64, f64) {
    let f = cfg.f_min + logistic(raw_freq_mean) * (cfg.f_max - cfg.f_min);
    (f.clamp(cfg.f_min, cfg.f_max), PI * raw_phase.clamp(-1.0, 1.0))
}

/// Grid coordinate normalized to [−1, 1]; a single cell maps to 0.
#[inline]
fn normalize(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

/// CPPN inputs (x, y, z, d, b) for a cell.
pub fn cell_inputs(dims: (usize, usize, usize), x: usize, y: usize, z: usize) -> [f64; 5] {
    let (u, v, w) = (normalize(x, dims.0), normalize(y, dims.1), normalize(z, dims.2));
    [u, v, w, (u * u + v * v + w * w).sqrt(), 1.0]
}

/// Express a genome over a grid of `dims` cells.
pub fn express(genome: &Genome, dims: (usize, usize, usize), cfg: &ExpressionConfig) -> Result<Phenotype, PhenotypeError> {
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(PhenotypeError::InvalidDims(dims));
    }
    let morph = CompiledCppn::new(&genome.morphology);
    let control = CompiledCppn::new(&genome.control);
    let mut body = VoxelBody::filled(dims, Material::Empty);
    let mut raw_freq = vec![0.0; body.len()];
    for i in 0..body.len() {
        let (x, y, z) = body.coords(i);
        let inputs = cell_inputs(dims, x, y, z);
        let [presence, activity] = morph.query(inputs);
        // NaN compares false and leaves the cell empty
        if !(presence >= 0.0) {
            continue;
        }
        let [freq, phase] = control.query(inputs);
        raw_freq[i] = freq;
        if activity >= 0.0 {
            body.material[i] = Material::Active;
            body.phase[i] = map_control(0.0, phase, cfg).1;
        } else {
            body.material[i] = Material::Passive;
        }
    }
    let body = prune_to_largest_component(&body);
    let full: Vec<usize> = (0..body.len()).filter(|&i| body.material[i].is_full()).collect();
    if full.is_empty() {
        return Err(PhenotypeError::Infeasible);
    }
    let mean = full.iter().map(|&i| raw_freq[i]).sum::<f64>() / full.len() as f64;
    let mean = if mean.is_finite() { mean } else { 0.0 };
    let (frequency, _) = map_control(mean, 0.0, cfg);
    Ok(Phenotype { body, frequency })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cppn::{random_genome, ActivationKind, Cppn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Net whose outputs ignore the inputs: output_k = act(bias_weight_k).
    fn constant_net(o0: f64, o1: f64) -> Cppn {
        let mut net = Cppn::random(&mut ChaCha8Rng::seed_from_u64(0));
        for n in &mut net.nodes {
            n.activation = ActivationKind::Identity;
        }
        for c in &mut net.connections {
            c.weight = match (c.source, c.target) {
                (4, 5) => o0,
                (4, 6) => o1,
                _ => 0.0,
            };
        }
        net
    }

    fn genome(m0: f64, m1: f64) -> Genome {
        let mut g = random_genome(&mut ChaCha8Rng::seed_from_u64(1), 0);
        g.morphology = constant_net(m0, m1);
        g.control = constant_net(0.0, 0.5);
        g
    }

    #[test]
    fn constant_positive_fills_grid() {
        let p = express(&genome(1.0, 1.0), (3, 4, 2), &ExpressionConfig::default()).unwrap();
        assert_eq!(p.body.full_count(), 24);
        assert_eq!(p.body.active_count(), 24);
        assert!((p.frequency - 5.25).abs() < 1e-12);
        assert!(p.body.phase.iter().all(|&ph| (ph - 0.5 * PI).abs() < 1e-12));
    }

    #[test]
    fn constant_negative_is_infeasible() {
        assert_eq!(
            express(&genome(-1.0, 1.0), (3, 3, 3), &ExpressionConfig::default()).unwrap_err(),
            PhenotypeError::Infeasible
        );
    }

    #[test]
    fn zero_output_counts_as_full() {
        let p = express(&genome(0.0, -1.0), (2, 2, 2), &ExpressionConfig::default()).unwrap();
        assert_eq!(p.body.full_count(), 8);
        assert_eq!(p.body.active_count(), 0);
        assert!(p.body.phase.iter().all(|&ph| ph == 0.0));
    }

    #[test]
    fn center_and_corner_distance_inputs() {
        let center = cell_inputs((3, 3, 3), 1, 1, 1);
        assert_eq!(center[3], 0.0);
        let corner = cell_inputs((3, 3, 3), 2, 2, 2);
        assert!((corner[3] - 1.7320508075688772).abs() < 1e-15);
        assert_eq!(corner[4], 1.0);
    }

    #[test]
    fn map_control_cases() {
        let cfg = ExpressionConfig::default();
        assert_eq!(map_control(0.0, 0.0, &cfg), (5.25, 0.0));
        assert_eq!(map_control(0.0, 5.0, &cfg).1, PI);
        assert_eq!(map_control(0.0, -5.0, &cfg).1, -PI);
    }

    #[test]
    fn pruning_rules() {
        let single = VoxelBody::from_cells((3, 1, 1), &[(0, 0, 0), (1, 0, 0)], Material::Passive);
        assert_eq!(prune_to_largest_component(&single), single);

        // sizes 3 and 5 along x with a gap at x = 3
        let cells: Vec<_> = [0, 1, 2, 4, 5, 6, 7, 8].iter().map(|&x| (x, 0, 0)).collect();
        let body = VoxelBody::from_cells((9, 1, 1), &cells, Material::Passive);
        let pruned = prune_to_largest_component(&body);
        assert_eq!(pruned.full_count(), 5);
        assert!(!pruned.material[0].is_full());

        // two 2-voxel components: the one holding cell 0 survives
        let body = VoxelBody::from_cells((5, 1, 1), &[(0, 0, 0), (1, 0, 0), (3, 0, 0), (4, 0, 0)], Material::Passive);
        let pruned = prune_to_largest_component(&body);
        assert!(pruned.material[0].is_full() && pruned.material[1].is_full());
        assert_eq!(pruned.full_count(), 2);
    }

    #[test]
    fn random_genomes_express_connected_bodies() {
        let cfg = ExpressionConfig::default();
        for s in 0..200 {
            let g = random_genome(&mut ChaCha8Rng::seed_from_u64(s), s);
            if let Ok(p) = express(&g, (6, 6, 5), &cfg) {
                assert!(p.body.is_connected());
                assert!(p.frequency >= cfg.f_min && p.frequency <= cfg.f_max);
                for i in 0..p.body.len() {
                    if !p.body.material[i].is_active() {
                        assert_eq!(p.body.phase[i], 0.0);
                    }
                }
                assert_eq!(express(&g, (6, 6, 5), &cfg).unwrap(), p);
            }
        }
    }
}
