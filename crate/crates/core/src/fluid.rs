//! Surface extraction and resistive quadratic drag.
//!
//! Each exposed square face of a voxel is split into two triangles. A
//! triangle advancing into the fluid along its outward normal receives
//! F = −½·ρ·C_d·A·v_n²·n̂, where v_n is the owner voxel's velocity projected
//! on the normal. Trailing triangles receive nothing.

use serde::{Deserialize, Serialize};

use crate::lattice::{EnvironmentSpec, LatticeState, SimError, NO_NEIGHBOR};
use crate::phenotype::VoxelBody;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFacet {
    /// Lattice index of the owning voxel.
    pub owner: usize,
    pub vertices: [Vec3; 3],
    pub normal: Vec3,
    pub area: f64,
}

impl SurfaceFacet {
    pub fn from_triangle(owner: usize, a: Vec3, b: Vec3, c: Vec3) -> Self {
        let n = (b - a).cross(c - a);
        let len = n.norm();
        Self {
            owner,
            vertices: [a, b, c],
            normal: if len > 0.0 { n / len } else { Vec3::ZERO },
            area: 0.5 * len,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub facets: Vec<SurfaceFacet>,
}

impl SurfaceMesh {
    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.facets.iter().map(|f| f.area).sum()
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, s: f64) -> SurfaceMesh {
        SurfaceMesh {
            facets: self
                .facets
                .iter()
                .map(|f| SurfaceFacet {
                    vertices: f.vertices.map(|v| v * s),
                    area: f.area * s * s,
                    ..*f
                })
                .collect(),
        }
    }
}

/// Exposed faces as (lattice voxel, direction), direction = 2·axis + (1 if +).
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTopology {
    pub faces: Vec<(u32, u8)>,
}

impl SurfaceTopology {
    pub fn new(state: &LatticeState) -> Self {
        let mut faces = Vec::new();
        for (k, nb) in state.neighbors.iter().enumerate() {
            for (dir, &n) in nb.iter().enumerate() {
                if n == NO_NEIGHBOR {
                    faces.push((k as u32, dir as u8));
                }
            }
        }
        Self { faces }
    }
}

/// Half-extent vectors of voxel `k` along x, y, z, taken from its bonded
/// axial neighbors where present and the rigid L/2 offset otherwise.
#[inline]
fn half_extents(state: &LatticeState, k: usize) -> [Vec3; 3] {
    let p = state.position[k];
    let nb = &state.neighbors[k];
    let half = 0.5 * state.voxel_size;
    std::array::from_fn(|axis| {
        let (lo, hi) = (nb[2 * axis], nb[2 * axis + 1]);
        match (lo != NO_NEIGHBOR, hi != NO_NEIGHBOR) {
            (true, true) => (state.position[hi as usize] - state.position[lo as usize]) * 0.25,
            (false, true) => (state.position[hi as usize] - p) * 0.5,
            (true, false) => (p - state.position[lo as usize]) * 0.5,
            (false, false) => Vec3::axis(axis) * half,
        }
    })
}

/// Corner quad of a face, ordered counter-clockwise seen from outside.
#[inline]
fn face_quad(center: Vec3, h: &[Vec3; 3], dir: u8) -> [Vec3; 4] {
    let axis = (dir / 2) as usize;
    let sign = if dir % 2 == 1 { 1.0 } else { -1.0 };
    let (hb, hc) = (h[(axis + 1) % 3], h[(axis + 2) % 3]);
    let fc = center + h[axis] * sign;
    let q = [fc - hb - hc, fc + hb - hc, fc + hb + hc, fc - hb + hc];
    if sign > 0.0 {
        q
    } else {
        [q[0], q[3], q[2], q[1]]
    }
}

#[inline]
fn push_quad(out: &mut Vec<SurfaceFacet>, owner: usize, q: [Vec3; 4]) {
    out.push(SurfaceFacet::from_triangle(owner, q[0], q[1], q[2]));
    out.push(SurfaceFacet::from_triangle(owner, q[0], q[2], q[3]));
}

/// Triangulated exposed surface at the lattice's current (deformed) pose.
pub fn extract_surface_mesh(body: &VoxelBody, state: &LatticeState) -> Result<SurfaceMesh, SimError> {
    if body.full_count() == 0 || state.is_empty() {
        return Err(SimError::EmptyBody);
    }
    let topo = SurfaceTopology::new(state);
    let mut facets = Vec::with_capacity(2 * topo.faces.len());
    for &(k, dir) in &topo.faces {
        let k = k as usize;
        let h = half_extents(state, k);
        push_quad(&mut facets, k, face_quad(state.position[k], &h, dir));
    }
    Ok(SurfaceMesh { facets })
}

/// Undeformed surface with vertices on the exact grid (corner index · `scale`),
/// so faces of neighboring voxels share bit-identical vertices.
pub fn rest_surface_mesh(body: &VoxelBody, scale: f64) -> Result<SurfaceMesh, SimError> {
    let mut facets = Vec::new();
    let mut owner = 0usize;
    for i in 0..body.len() {
        if !body.material[i].is_full() {
            continue;
        }
        let (x, y, z) = body.coords(i);
        let g = [x as i64, y as i64, z as i64];
        for dir in 0..6u8 {
            let axis = (dir / 2) as usize;
            let step = if dir % 2 == 1 { 1 } else { -1 };
            let mut n = g;
            n[axis] += step;
            if body.get(n[0], n[1], n[2]).is_full() {
                continue;
            }
            // integer corners: center at g + ½, half extents ½
            let center = Vec3::new(g[0] as f64 + 0.5, g[1] as f64 + 0.5, g[2] as f64 + 0.5);
            let h = [Vec3::axis(0) * 0.5, Vec3::axis(1) * 0.5, Vec3::axis(2) * 0.5];
            let q = face_quad(center, &h, dir).map(|v| v * scale);
            push_quad(&mut facets, owner, q);
        }
        owner += 1;
    }
    if facets.is_empty() {
        return Err(SimError::EmptyBody);
    }
    Ok(SurfaceMesh { facets })
}

/// Drag on one facet moving with its owner voxel's velocity.
#[inline]
pub fn facet_drag_force(facet: &SurfaceFacet, voxel_velocity: Vec3, fluid_density: f64, drag_coefficient: f64) -> Vec3 {
    let vn = voxel_velocity.dot(facet.normal);
    if vn <= 0.0 {
        return Vec3::ZERO;
    }
    facet.normal * (-0.5 * fluid_density * drag_coefficient * facet.area * vn * vn)
}

/// Per-voxel sum of facet drag forces, aligned with `state.voxel_ids`.
pub fn apply_drag(mesh: &SurfaceMesh, state: &LatticeState, env: &EnvironmentSpec) -> Vec<Vec3> {
    let mut out = vec![Vec3::ZERO; state.len()];
    for f in &mesh.facets {
        out[f.owner] += facet_drag_force(f, state.velocity[f.owner], env.fluid_density, env.drag_coefficient);
    }
    out
}

/// Same result as `apply_drag(extract_surface_mesh(..))` without building
/// the mesh; used inside the integration loop.
pub fn drag_forces_into(topo: &SurfaceTopology, state: &LatticeState, env: &EnvironmentSpec, out: &mut [Vec3]) {
    out.iter_mut().for_each(|f| *f = Vec3::ZERO);
    let coef = 0.25 * env.fluid_density * env.drag_coefficient;
    let mut last = u32::MAX;
    let mut h = [Vec3::ZERO; 3];
    for &(k, dir) in &topo.faces {
        let ku = k as usize;
        let v = state.velocity[ku];
        if v == Vec3::ZERO {
            continue;
        }
        if k != last {
            h = half_extents(state, ku);
            last = k;
        }
        let q = face_quad(state.position[ku], &h, dir);
        // with c = (b − a) × (c − a): A = |c|/2 and n = c/|c|, so the facet
        // force −½ρC_d·A·(v·n)²·n collapses to −(ρC_d/4)·(v·c)²/|c|²·c
        for (b, c) in [(q[1], q[2]), (q[2], q[3])] {
            let cr = (b - q[0]).cross(c - q[0]);
            let vc = v.dot(cr);
            let c2 = cr.norm_squared();
            if vc > 0.0 && c2 > 0.0 {
                out[ku] -= cr * (coef * vc * vc / c2);
            }
        }
    }
}
