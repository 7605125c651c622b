//! Soft voxel body dynamics as a damped spring lattice.
//!
//! Every full voxel is a point mass at its cell center. Six-neighbors are
//! joined by axial springs and face-diagonal neighbors by shear springs at
//! half the axial stiffness. Active voxels scale the rest length of their
//! bonds sinusoidally. Integration is semi-implicit Euler. On land the ground
//! is a penalty plane with Coulomb friction; the penalty force is solved
//! per voxel in linearly-implicit form so the contact stiffness never limits
//! the timestep.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phenotype::VoxelBody;
use crate::vec3::Vec3;

pub const NO_NEIGHBOR: u32 = u32::MAX;

/// Fallback timestep for bodies without bonds.
pub const UNBONDED_TIMESTEP: f64 = 1e-3;
pub const TIMESTEP_SAFETY: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("body has no full voxels")]
    EmptyBody,
    #[error("numerical blowup at t = {time} s")]
    NumericalBlowup { time: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("external force list has {got} entries, lattice has {expected} voxels")]
    ExternalForceMismatch { expected: usize, got: usize },
}

/// The five material stiffness treatments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stiffness {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Stiffness {
    pub const ALL: [Stiffness; 5] = [
        Stiffness::S1,
        Stiffness::S2,
        Stiffness::S3,
        Stiffness::S4,
        Stiffness::S5,
    ];

    /// Elastic modulus in Pa (S1 = 0.001 MPa ... S5 = 10 MPa).
    pub fn elastic_modulus(self) -> f64 {
        match self {
            Stiffness::S1 => 1e3,
            Stiffness::S2 => 1e4,
            Stiffness::S3 => 1e5,
            Stiffness::S4 => 1e6,
            Stiffness::S5 => 1e7,
        }
    }

    pub fn parse(s: &str) -> Option<Stiffness> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Some(Stiffness::S1),
            "S2" => Some(Stiffness::S2),
            "S3" => Some(Stiffness::S3),
            "S4" => Some(Stiffness::S4),
            "S5" => Some(Stiffness::S5),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stiffness::S1 => "S1",
            Stiffness::S2 => "S2",
            Stiffness::S3 => "S3",
            Stiffness::S4 => "S4",
            Stiffness::S5 => "S5",
        }
    }
}

/// Largest bond damping ratio for which explicit damping stays stable at
/// [`stable_timestep`] in a fully interior lattice.
pub const MAX_DAMPING_RATIO: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Pa
    pub elastic_modulus: f64,
    /// kg/m³
    pub density: f64,
    pub bond_damping_ratio: f64,
    pub friction_static: f64,
    pub friction_kinetic: f64,
    /// Linear strain amplitude of actuation.
    pub actuation_amplitude: f64,
    /// Voxel edge length in m.
    pub voxel_size: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            elastic_modulus: Stiffness::S3.elastic_modulus(),
            density: 1000.0,
            bond_damping_ratio: 0.5,
            friction_static: 1.0,
            friction_kinetic: 0.8,
            actuation_amplitude: 0.15,
            voxel_size: 0.01,
        }
    }
}

impl MaterialParams {
    pub fn with_stiffness(s: Stiffness) -> Self {
        Self {
            elastic_modulus: s.elastic_modulus(),
            ..Self::default()
        }
    }

    pub fn voxel_mass(&self) -> f64 {
        self.density * self.voxel_size.powi(3)
    }

    pub fn axial_stiffness(&self) -> f64 {
        self.elastic_modulus * self.voxel_size
    }

    pub fn validate(&self) -> Result<(), SimError> {
        fn bad(name: &'static str, reason: &str) -> Result<(), SimError> {
            Err(SimError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        }
        if !(self.elastic_modulus > 0.0 && self.elastic_modulus.is_finite()) {
            return bad("elastic_modulus", "must be > 0");
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("density", "must be > 0");
        }
        if !(0.0..=MAX_DAMPING_RATIO).contains(&self.bond_damping_ratio) {
            return bad("bond_damping_ratio", "must lie in [0, 0.6]");
        }
        if !(self.friction_kinetic >= 0.0 && self.friction_kinetic <= self.friction_static) {
            return bad("friction_kinetic", "need 0 <= kinetic <= static");
        }
        if !(self.actuation_amplitude >= 0.0 && self.actuation_amplitude < 0.5) {
            return bad("actuation_amplitude", "must lie in [0, 0.5)");
        }
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return bad("voxel_size", "must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvMode {
    Land,
    Water,
}

impl EnvMode {
    pub fn name(self) -> &'static str {
        match self {
            EnvMode::Land => "land",
            EnvMode::Water => "water",
        }
    }

    pub fn parse(s: &str) -> Option<EnvMode> {
        match s.trim().to_ascii_lowercase().as_str() {
            "land" => Some(EnvMode::Land),
            "water" => Some(EnvMode::Water),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub mode: EnvMode,
    /// m/s², acts along −z.
    pub gravity: f64,
    /// kg/m³, water only.
    pub fluid_density: f64,
    pub drag_coefficient: f64,
    /// N/m
    pub ground_contact_stiffness: f64,
    /// N·s/m
    pub ground_contact_damping: f64,
}

impl EnvironmentSpec {
    pub fn land() -> Self {
        Self {
            mode: EnvMode::Land,
            gravity: 9.81,
            fluid_density: 1000.0,
            drag_coefficient: 1.5,
            ground_contact_stiffness: 1e5,
            ground_contact_damping: 10.0,
        }
    }

    /// Neutrally buoyant fluid: no gravity, quadratic drag only.
    pub fn water() -> Self {
        Self {
            mode: EnvMode::Water,
            gravity: 0.0,
            ..Self::land()
        }
    }

    pub fn for_mode(mode: EnvMode) -> Self {
        match mode {
            EnvMode::Land => Self::land(),
            EnvMode::Water => Self::water(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |name, reason: &str| {
            Err(SimError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.mode == EnvMode::Water && self.gravity != 0.0 {
            return bad("gravity", "water is neutrally buoyant, gravity must be 0");
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return bad("gravity", "must be >= 0");
        }
        if !(self.fluid_density > 0.0) {
            return bad("fluid_density", "must be > 0");
        }
        if !(self.drag_coefficient > 0.0) {
            return bad("drag_coefficient", "must be > 0");
        }
        if !(self.ground_contact_stiffness > 0.0) {
            return bad("ground_contact_stiffness", "must be > 0");
        }
        if !(self.ground_contact_damping >= 0.0) {
            return bad("ground_contact_damping", "must be >= 0");
        }
        Ok(())
    }
}

/// Global actuation frequency plus per-voxel phase offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub frequency: f64,
    /// Aligned with `LatticeState::voxel_ids`; zero for passive voxels.
    phase: Vec<f64>,
    /// Aligned with `LatticeState::voxel_ids`.
    active: Vec<bool>,
    /// (sin φ, cos φ) for active voxels, (0, 0) for passive ones.
    trig: Vec<(f64, f64)>,
    pub amplitude: f64,
    /// Simulation time at which the oscillation starts (t = 0 of the sine).
    pub start_time: f64,
    /// Duration over which the amplitude grows linearly from 0 to
    /// `amplitude`; 0 switches actuation on at full strength.
    pub ramp_time: f64,
}

impl ControlSchedule {
    pub fn new(frequency: f64, phase: Vec<f64>, active: Vec<bool>, amplitude: f64) -> Self {
        assert_eq!(phase.len(), active.len(), "phase and active must align");
        let phase: Vec<f64> = phase.iter().zip(&active).map(|(&p, &a)| if a { p } else { 0.0 }).collect();
        let trig = phase
            .iter()
            .zip(&active)
            .map(|(&p, &a)| if a { p.sin_cos() } else { (0.0, 0.0) })
            .collect();
        Self {
            frequency,
            phase,
            active,
            trig,
            amplitude,
            start_time: 0.0,
            ramp_time: 0.0,
        }
    }

    pub fn from_body(body: &VoxelBody, state: &LatticeState, frequency: f64, amplitude: f64) -> Self {
        let active: Vec<bool> = state.voxel_ids.iter().map(|&c| body.material[c].is_active()).collect();
        let phase = state.voxel_ids.iter().map(|&c| body.phase[c]).collect();
        Self::new(frequency, phase, active, amplitude)
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// Envelope-scaled amplitude `t` seconds after `start_time`.
    #[inline]
    pub fn amplitude_at(&self, t: f64) -> f64 {
        if self.ramp_time > 0.0 && t < self.ramp_time {
            self.amplitude * (t / self.ramp_time).max(0.0)
        } else {
            self.amplitude
        }
    }

    /// (A(t)·sin ωt, A(t)·cos ωt) at simulation time `sim_time`.
    #[inline]
    fn carrier(&self, sim_time: f64) -> (f64, f64) {
        let t = sim_time - self.start_time;
        let a = self.amplitude_at(t);
        let (s, c) = (2.0 * PI * self.frequency * t).sin_cos();
        (a * s, a * c)
    }

    /// Rest-length multiplier of voxel `k` at simulation time `sim_time`;
    /// exactly 1 for passive voxels.
    #[inline]
    pub fn scale(&self, k: usize, sim_time: f64) -> f64 {
        let (s, c) = self.carrier(sim_time);
        let (sp, cp) = self.trig[k];
        1.0 + (s * cp + c * sp)
    }

    fn fill_scales(&self, sim_time: f64, out: &mut [f64]) {
        let (s, c) = self.carrier(sim_time);
        for (o, &(sp, cp)) in out.iter_mut().zip(&self.trig) {
            *o = 1.0 + (s * cp + c * sp);
        }
    }
}

/// Rest-length multiplier of an active voxel at time `t`.
#[inline]
pub fn actuation_scale(t: f64, frequency: f64, phase: f64, amplitude: f64) -> f64 {
    1.0 + amplitude * (2.0 * PI * frequency * t + phase).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BondKind {
    Axial,
    FaceDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub a: u32,
    pub b: u32,
    pub kind: BondKind,
    pub rest_length: f64,
    pub stiffness: f64,
    /// Axial damping coefficient c = ζ·2·√(k·m_reduced).
    pub damping: f64,
}

/// Mutable state of one simulated body.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    /// Linear grid index of each full voxel, ascending.
    pub voxel_ids: Vec<usize>,
    pub grid: Vec<[i32; 3]>,
    pub position: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    pub mass: Vec<f64>,
    pub bonds: Vec<Bond>,
    /// Per voxel, lattice index of the −x,+x,−y,+y,−z,+z neighbor or `NO_NEIGHBOR`.
    pub neighbors: Vec<[u32; 6]>,
    pub sim_time: f64,
    pub voxel_size: f64,
    /// Largest workspace dimension in m; the blowup guard is 10³ times this.
    pub workspace_extent: f64,
    pub friction_static: f64,
    pub friction_kinetic: f64,
    pub self_collision: bool,
    forces: Vec<Vec3>,
    scale: Vec<f64>,
}

const DIAGONAL_OFFSETS: [[i32; 3]; 6] = [
    [1, 1, 0],
    [1, -1, 0],
    [1, 0, 1],
    [1, 0, -1],
    [0, 1, 1],
    [0, 1, -1],
];

/// Build the spring lattice for `body`. The lowest full layer rests on z = 0.
pub fn build_lattice(body: &VoxelBody, mat: &MaterialParams) -> Result<LatticeState, SimError> {
    let (nx, ny, nz) = body.dims;
    let voxel_ids: Vec<usize> = (0..body.len()).filter(|&i| body.material[i].is_full()).collect();
    if voxel_ids.is_empty() {
        return Err(SimError::EmptyBody);
    }
    let l = mat.voxel_size;
    let m = mat.voxel_mass();
    let z_min = voxel_ids.iter().map(|&i| body.coords(i).2).min().unwrap_or(0);

    let mut lookup = vec![NO_NEIGHBOR; body.len()];
    for (k, &cell) in voxel_ids.iter().enumerate() {
        lookup[cell] = k as u32;
    }
    let at = |x: i32, y: i32, z: i32| -> u32 {
        if x < 0 || y < 0 || z < 0 || x >= nx as i32 || y >= ny as i32 || z >= nz as i32 {
            NO_NEIGHBOR
        } else {
            lookup[body.index(x as usize, y as usize, z as usize)]
        }
    };

    let grid: Vec<[i32; 3]> = voxel_ids
        .iter()
        .map(|&c| {
            let (x, y, z) = body.coords(c);
            [x as i32, y as i32, z as i32]
        })
        .collect();
    let position: Vec<Vec3> = grid
        .iter()
        .map(|g| {
            Vec3::new(
                (g[0] as f64 + 0.5) * l,
                (g[1] as f64 + 0.5) * l,
                ((g[2] - z_min as i32) as f64 + 0.5) * l,
            )
        })
        .collect();

    let k_ax = mat.axial_stiffness();
    let k_diag = 0.5 * k_ax;
    let m_red = 0.5 * m;
    let zeta = mat.bond_damping_ratio;
    let mut bonds = Vec::new();
    let mut neighbors = vec![[NO_NEIGHBOR; 6]; voxel_ids.len()];
    for (a, g) in grid.iter().enumerate() {
        for axis in 0..3 {
            let mut off = [0i32; 3];
            off[axis] = 1;
            let b = at(g[0] + off[0], g[1] + off[1], g[2] + off[2]);
            if b != NO_NEIGHBOR {
                neighbors[a][2 * axis + 1] = b;
                neighbors[b as usize][2 * axis] = a as u32;
                bonds.push(Bond {
                    a: a as u32,
                    b,
                    kind: BondKind::Axial,
                    rest_length: l,
                    stiffness: k_ax,
                    damping: zeta * 2.0 * (k_ax * m_red).sqrt(),
                });
            }
        }
        for off in DIAGONAL_OFFSETS {
            let b = at(g[0] + off[0], g[1] + off[1], g[2] + off[2]);
            if b != NO_NEIGHBOR {
                bonds.push(Bond {
                    a: a as u32,
                    b,
                    kind: BondKind::FaceDiagonal,
                    rest_length: std::f64::consts::SQRT_2 * l,
                    stiffness: k_diag,
                    damping: zeta * 2.0 * (k_diag * m_red).sqrt(),
                });
            }
        }
    }

    let n = voxel_ids.len();
    Ok(LatticeState {
        voxel_ids,
        grid,
        position,
        velocity: vec![Vec3::ZERO; n],
        mass: vec![m; n],
        bonds,
        neighbors,
        sim_time: 0.0,
        voxel_size: l,
        workspace_extent: nx.max(ny).max(nz) as f64 * l,
        friction_static: mat.friction_static,
        friction_kinetic: mat.friction_kinetic,
        self_collision: false,
        forces: vec![Vec3::ZERO; n],
        scale: vec![1.0; n],
    })
}

/// Largest stable timestep: 0.1 · 2 · √(m_min / k_max), or 1 ms without bonds.
pub fn stable_timestep(state: &LatticeState) -> f64 {
    let k_max = state.bonds.iter().map(|b| b.stiffness).fold(0.0, f64::max);
    if k_max <= 0.0 {
        return UNBONDED_TIMESTEP;
    }
    let m_min = state.mass.iter().copied().fold(f64::INFINITY, f64::min);
    TIMESTEP_SAFETY * 2.0 * (m_min / k_max).sqrt()
}

pub fn center_of_mass(state: &LatticeState) -> Vec3 {
    let mut total = 0.0;
    let mut acc = Vec3::ZERO;
    for (p, &m) in state.position.iter().zip(&state.mass) {
        acc += *p * m;
        total += m;
    }
    acc / total
}

impl LatticeState {
    pub fn len(&self) -> usize {
        self.voxel_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxel_ids.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn momentum(&self) -> Vec3 {
        let mut p = Vec3::ZERO;
        for (v, &m) in self.velocity.iter().zip(&self.mass) {
            p += *v * m;
        }
        p
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.velocity
            .iter()
            .zip(&self.mass)
            .map(|(v, &m)| 0.5 * m * v.norm_squared())
            .sum()
    }

    /// Spring potential measured against the unactuated rest lengths.
    pub fn spring_energy(&self) -> f64 {
        self.bonds
            .iter()
            .map(|b| {
                let d = (self.position[b.b as usize] - self.position[b.a as usize]).norm();
                0.5 * b.stiffness * (d - b.rest_length).powi(2)
            })
            .sum()
    }

    pub fn mechanical_energy(&self) -> f64 {
        self.kinetic_energy() + self.spring_energy()
    }

    /// Spring plus damping force that bond `i` exerts on its `a` endpoint;
    /// the `b` endpoint receives the exact negation.
    pub fn bond_force(&self, i: usize, ctrl: Option<&ControlSchedule>) -> Vec3 {
        let b = &self.bonds[i];
        let (sa, sb) = match ctrl {
            Some(c) => (c.scale(b.a as usize, self.sim_time), c.scale(b.b as usize, self.sim_time)),
            None => (1.0, 1.0),
        };
        self.pair_force(b, 0.5 * (sa + sb))
    }

    #[inline]
    fn pair_force(&self, b: &Bond, rest_scale: f64) -> Vec3 {
        let (ia, ib) = (b.a as usize, b.b as usize);
        let d = self.position[ib] - self.position[ia];
        let len2 = d.norm_squared();
        if len2 == 0.0 {
            return Vec3::ZERO;
        }
        let len = len2.sqrt();
        let inv = 1.0 / len;
        let stretch = len - b.rest_length * rest_scale;
        let v_rel = (self.velocity[ib] - self.velocity[ia]).dot(d) * inv;
        d * ((b.stiffness * stretch + b.damping * v_rel) * inv)
    }

    /// Advance by one semi-implicit Euler step.
    ///
    /// `external` forces (e.g. drag) must be aligned with `voxel_ids`.
    pub fn step(
        &mut self,
        dt: f64,
        env: &EnvironmentSpec,
        ctrl: Option<&ControlSchedule>,
        external: Option<&[Vec3]>,
    ) -> Result<(), SimError> {
        let n = self.len();
        if let Some(ext) = external {
            if ext.len() != n {
                return Err(SimError::ExternalForceMismatch {
                    expected: n,
                    got: ext.len(),
                });
            }
        }

        match ctrl {
            Some(c) if c.amplitude != 0.0 => c.fill_scales(self.sim_time, &mut self.scale),
            _ => self.scale.iter_mut().for_each(|s| *s = 1.0),
        }

        let mut forces = std::mem::take(&mut self.forces);
        forces.iter_mut().for_each(|f| *f = Vec3::ZERO);

        for b in &self.bonds {
            let (ia, ib) = (b.a as usize, b.b as usize);
            let f = self.pair_force(b, 0.5 * (self.scale[ia] + self.scale[ib]));
            forces[ia] += f;
            forces[ib] -= f;
        }

        if self.self_collision {
            self.add_self_collision(&mut forces);
        }

        if env.gravity != 0.0 {
            for (f, &m) in forces.iter_mut().zip(&self.mass) {
                f.z -= m * env.gravity;
            }
        }
        if let Some(ext) = external {
            for (f, e) in forces.iter_mut().zip(ext) {
                *f += *e;
            }
        }

        let half = 0.5 * self.voxel_size;
        let land = env.mode == EnvMode::Land;
        let limit = 1e3 * self.workspace_extent;
        let mut healthy = true;
        for k in 0..n {
            let m = self.mass[k];
            let mut v = self.velocity[k] + forces[k] * (dt / m);
            if land {
                let h = self.position[k].z - half;
                if h < 0.0 {
                    v = self.ground_contact(v, h, m, dt, env);
                }
            }
            let p = self.position[k] + v * dt;
            // written so that NaN fails every comparison
            healthy &= p.x.abs() <= limit && p.y.abs() <= limit && p.z.abs() <= limit && v.is_finite();
            self.velocity[k] = v;
            self.position[k] = p;
        }
        self.forces = forces;
        self.sim_time += dt;
        if !healthy {
            return Err(SimError::NumericalBlowup {
                time: self.sim_time,
            });
        }
        Ok(())
    }

    /// Penalty normal force, evaluated at the end of the step, plus Coulomb
    /// friction clamped at μ·F_n. `h < 0` is the penetration of the voxel bottom.
    fn ground_contact(&self, v_pred: Vec3, h: f64, m: f64, dt: f64, env: &EnvironmentSpec) -> Vec3 {
        let k = env.ground_contact_stiffness;
        let c = env.ground_contact_damping;
        let vz = (v_pred.z - dt * k * h / m) / (1.0 + dt * c / m + dt * dt * k / m);
        let normal_impulse = m * (vz - v_pred.z);
        if normal_impulse <= 0.0 {
            return v_pred;
        }
        let mut v = Vec3::new(v_pred.x, v_pred.y, vz);
        let vt = (v.x * v.x + v.y * v.y).sqrt();
        if vt > 0.0 {
            let stop = m * vt;
            if stop <= self.friction_static * normal_impulse {
                v.x = 0.0;
                v.y = 0.0;
            } else {
                let keep = 1.0 - self.friction_kinetic * normal_impulse / stop;
                v.x *= keep;
                v.y *= keep;
            }
        }
        v
    }

    /// Sphere repulsion (radius L/2) between voxel pairs that share no bond.
    fn add_self_collision(&self, forces: &mut [Vec3]) {
        let n = self.len();
        let l = self.voxel_size;
        let k = self.bonds.first().map(|b| b.stiffness).unwrap_or(0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let gi = self.grid[i];
                let gj = self.grid[j];
                let lattice_dist = (gi[0] - gj[0]).abs().max((gi[1] - gj[1]).abs()).max((gi[2] - gj[2]).abs());
                let taxicab = (gi[0] - gj[0]).abs() + (gi[1] - gj[1]).abs() + (gi[2] - gj[2]).abs();
                if lattice_dist <= 1 && taxicab <= 2 {
                    continue;
                }
                let d = self.position[j] - self.position[i];
                let dist = d.norm();
                if dist < l && dist > 0.0 {
                    let f = d * (k * (l - dist) / dist);
                    forces[i] -= f;
                    forces[j] += f;
                }
            }
        }
    }

    /// Lowest voxel-bottom height relative to the ground plane.
    pub fn min_bottom_height(&self) -> f64 {
        self.position
            .iter()
            .map(|p| p.z - 0.5 * self.voxel_size)
            .fold(f64::INFINITY, f64::min)
    }
}
