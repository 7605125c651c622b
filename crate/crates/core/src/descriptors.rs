//! Morphological descriptors computed on the rest pose of a voxel body:
//! slice-based symmetry indices, branching index (mesh vs. convex hull
//! volume) and shape entropy (entropy of discrete surface curvature).

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fluid::{rest_surface_mesh, SurfaceMesh};
use crate::phenotype::VoxelBody;
use crate::vec3::Vec3;

pub const ENTROPY_BINS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("slice has no occupied cells")]
    EmptySlice,
    #[error("body has no full voxels")]
    EmptyBody,
    #[error("mesh is not closed ({0} unmatched directed edges)")]
    OpenMesh(usize),
    #[error("points do not span a volume")]
    DegenerateHull,
}

/// 2D occupancy grid; cell (i, j) at index i + width·j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl Slice {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![false; width * height],
        }
    }

    pub fn from_cells(width: usize, height: usize, occupied: &[(usize, usize)]) -> Self {
        let mut s = Self::new(width, height);
        for &(i, j) in occupied {
            s.set(i, j, true);
        }
        s
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.cells[i + self.width * j] = v;
    }

    pub fn get(&self, i: i64, j: i64) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.width
            && (j as usize) < self.height
            && self.cells[i as usize + self.width * j as usize]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// The six overlap indices of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SliceSymmetry {
    pub r_v: f64,
    pub r_h: f64,
    pub r_pd: f64,
    pub r_sd: f64,
    pub t_v: f64,
    pub t_h: f64,
}

impl SliceSymmetry {
    pub fn as_array(&self) -> [f64; 6] {
        [self.r_v, self.r_h, self.r_pd, self.r_sd, self.t_v, self.t_h]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            r_v: a[0],
            r_h: a[1],
            r_pd: a[2],
            r_sd: a[3],
            t_v: a[4],
            t_h: a[5],
        }
    }

    pub fn mean(&self) -> f64 {
        self.as_array().iter().sum::<f64>() / 6.0
    }
}

/// Fraction of occupied cells that land on occupied cells under each of the
/// six transforms. Reflections act about the grid center; the diagonal ones
/// act on the square padding centered on the grid, so on grids whose width
/// and height differ by an odd count the images fall between cells and never
/// overlap. Translations shift by ⌈extent/2⌉ without wrapping.
pub fn slice_symmetry(slice: &Slice) -> Result<SliceSymmetry, DescriptorError> {
    let total = slice.count();
    if total == 0 {
        return Err(DescriptorError::EmptySlice);
    }
    let (w, h) = (slice.width as i64, slice.height as i64);
    let (sv, sh) = ((h + 1) / 2, (w + 1) / 2);
    let mut hits = [0usize; 6];
    for j in 0..h {
        for i in 0..w {
            if !slice.get(i, j) {
                continue;
            }
            // doubled coordinates relative to the grid center
            let (ci, cj) = (2 * i - (w - 1), 2 * j - (h - 1));
            let back = |ci2: i64, cj2: i64| -> bool {
                let (a, b) = (ci2 + (w - 1), cj2 + (h - 1));
                a % 2 == 0 && b % 2 == 0 && slice.get(a / 2, b / 2)
            };
            let tests = [
                slice.get(i, h - 1 - j),
                slice.get(w - 1 - i, j),
                back(cj, ci),
                back(-cj, -ci),
                slice.get(i, j + sv),
                slice.get(i + sh, j),
            ];
            for (k, t) in tests.into_iter().enumerate() {
                hits[k] += t as usize;
            }
        }
    }
    Ok(SliceSymmetry::from_array(hits.map(|c| c as f64 / total as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSymmetry {
    pub s_x: f64,
    pub s_y: f64,
    pub s_z: f64,
    pub g_si: f64,
    /// Slice-averaged indices per axis.
    pub per_axis: [SliceSymmetry; 3],
}

/// Bounding box (inclusive) of full cells.
pub fn bounding_box(body: &VoxelBody) -> Option<([usize; 3], [usize; 3])> {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for i in 0..body.len() {
        if body.material[i].is_full() {
            let (x, y, z) = body.coords(i);
            for (a, v) in [x, y, z].into_iter().enumerate() {
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }
            any = true;
        }
    }
    any.then_some((lo, hi))
}

/// Slices of the body's bounding box perpendicular to `axis`, nonempty only.
/// Slice axes are the remaining two in increasing order.
pub fn slices_along(body: &VoxelBody, axis: usize) -> Vec<Slice> {
    let Some((lo, hi)) = bounding_box(body) else {
        return Vec::new();
    };
    let (ua, va) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (w, h) = (hi[ua] - lo[ua] + 1, hi[va] - lo[va] + 1);
    let mut out = Vec::new();
    for s in lo[axis]..=hi[axis] {
        let mut slice = Slice::new(w, h);
        for j in 0..h {
            for i in 0..w {
                let mut c = [0usize; 3];
                c[axis] = s;
                c[ua] = lo[ua] + i;
                c[va] = lo[va] + j;
                if body.material[body.index(c[0], c[1], c[2])].is_full() {
                    slice.set(i, j, true);
                }
            }
        }
        if slice.count() > 0 {
            out.push(slice);
        }
    }
    out
}

pub fn axis_and_global_symmetry(body: &VoxelBody) -> Result<AxisSymmetry, DescriptorError> {
    let mut per_axis = [SliceSymmetry::default(); 3];
    for (axis, slot) in per_axis.iter_mut().enumerate() {
        let slices = slices_along(body, axis);
        if slices.is_empty() {
            return Err(DescriptorError::EmptyBody);
        }
        let mut acc = [0.0; 6];
        for s in &slices {
            for (a, v) in acc.iter_mut().zip(slice_symmetry(s)?.as_array()) {
                *a += v;
            }
        }
        *slot = SliceSymmetry::from_array(acc.map(|a| a / slices.len() as f64));
    }
    let [s_x, s_y, s_z] = per_axis.map(|s| s.mean());
    Ok(AxisSymmetry {
        s_x,
        s_y,
        s_z,
        g_si: (s_x + s_y + s_z) / 3.0,
        per_axis,
    })
}

type VertexKey = [u64; 3];

fn key(v: Vec3) -> VertexKey {
    // +0.0 and −0.0 are the same vertex
    [v.x + 0.0, v.y + 0.0, v.z + 0.0].map(f64::to_bits)
}

/// Count directed edges without a matching reverse edge.
pub fn unmatched_edges(mesh: &SurfaceMesh) -> usize {
    let mut edges: HashMap<(VertexKey, VertexKey), i64> = HashMap::new();
    for f in &mesh.facets {
        let k = f.vertices.map(key);
        for e in 0..3 {
            let (a, b) = (k[e], k[(e + 1) % 3]);
            *edges.entry((a, b)).or_default() += 1;
        }
    }
    edges
        .iter()
        .map(|(&(a, b), &n)| (n - edges.get(&(b, a)).copied().unwrap_or(0)).max(0) as usize)
        .sum()
}

/// Enclosed volume by the divergence theorem.
pub fn mesh_volume(mesh: &SurfaceMesh) -> Result<f64, DescriptorError> {
    let open = unmatched_edges(mesh);
    if open > 0 || mesh.is_empty() {
        return Err(DescriptorError::OpenMesh(open));
    }
    let six_v: f64 = mesh
        .facets
        .iter()
        .map(|f| f.vertices[0].dot(f.vertices[1].cross(f.vertices[2])))
        .sum();
    Ok((six_v / 6.0).abs())
}

#[inline]
fn orient(a: Vec3, b: Vec3, c: Vec3, p: Vec3) -> f64 {
    (b - a).cross(c - a).dot(p - a)
}

/// Volume of the convex hull, by incremental construction. Integer-valued
/// coordinates are handled exactly.
pub fn convex_hull_volume(points: &[Vec3]) -> Result<f64, DescriptorError> {
    let mut pts: Vec<Vec3> = points.to_vec();
    pts.sort_by(|a, b| a.to_array().partial_cmp(&b.to_array()).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() < 4 {
        return Err(DescriptorError::DegenerateHull);
    }
    let extent = pts
        .iter()
        .flat_map(|p| pts.first().map(|q| (*p - *q).max_abs()))
        .fold(0.0, f64::max);
    if extent == 0.0 {
        return Err(DescriptorError::DegenerateHull);
    }
    let eps = 1e-12 * extent.powi(3);

    // initial tetrahedron from extreme points
    let i0 = 0;
    let i1 = (0..pts.len())
        .max_by(|&a, &b| (pts[a] - pts[i0]).norm_squared().total_cmp(&(pts[b] - pts[i0]).norm_squared()))
        .unwrap();
    let line = pts[i1] - pts[i0];
    let i2 = (0..pts.len())
        .max_by(|&a, &b| {
            line.cross(pts[a] - pts[i0])
                .norm_squared()
                .total_cmp(&line.cross(pts[b] - pts[i0]).norm_squared())
        })
        .unwrap();
    if line.cross(pts[i2] - pts[i0]).norm() <= 1e-12 * extent * extent {
        return Err(DescriptorError::DegenerateHull);
    }
    let i3 = (0..pts.len())
        .max_by(|&a, &b| {
            orient(pts[i0], pts[i1], pts[i2], pts[a])
                .abs()
                .total_cmp(&orient(pts[i0], pts[i1], pts[i2], pts[b]).abs())
        })
        .unwrap();
    let o3 = orient(pts[i0], pts[i1], pts[i2], pts[i3]);
    if o3.abs() <= eps {
        return Err(DescriptorError::DegenerateHull);
    }

    // faces are wound so that orient(face, p) > 0 means p sees the face
    let mut faces: Vec<[usize; 3]> = if o3 < 0.0 {
        vec![[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i2, i3, i0]]
    } else {
        vec![[i0, i2, i1], [i0, i1, i3], [i1, i2, i3], [i2, i0, i3]]
    };

    for p in 0..pts.len() {
        if [i0, i1, i2, i3].contains(&p) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| orient(pts[f[0]], pts[f[1]], pts[f[2]], pts[p]) > eps)
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edge_count: HashMap<(usize, usize), ()> = HashMap::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            for e in 0..3 {
                edge_count.insert((f[e], f[(e + 1) % 3]), ());
            }
        }
        let mut horizon = Vec::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                if !edge_count.contains_key(&(b, a)) {
                    horizon.push((a, b));
                }
            }
        }
        let mut kept: Vec<[usize; 3]> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| !v)
            .map(|(f, _)| *f)
            .collect();
        kept.extend(horizon.into_iter().map(|(a, b)| [a, b, p]));
        faces = kept;
    }

    // signed volume about a hull vertex: exact for integer coordinates
    let o = pts[i0];
    let six_v: f64 = faces
        .iter()
        .map(|f| (pts[f[0]] - o).dot((pts[f[1]] - o).cross(pts[f[2]] - o)))
        .sum();
    Ok(six_v.abs() / 6.0)
}

/// Corner points of every full voxel in grid units.
pub fn voxel_corners(body: &VoxelBody) -> Vec<Vec3> {
    let mut out = Vec::new();
    for i in 0..body.len() {
        if body.material[i].is_full() {
            let (x, y, z) = body.coords(i);
            for c in 0..8 {
                out.push(Vec3::new(
                    (x + (c & 1)) as f64,
                    (y + ((c >> 1) & 1)) as f64,
                    (z + ((c >> 2) & 1)) as f64,
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingIndex {
    pub bi: f64,
    /// Body volume, m³.
    pub r_v: f64,
    /// Convex hull volume, m³.
    pub ch_v: f64,
}

/// 1 − body volume / hull volume, clamped to [0, 1).
pub fn branching_index(body: &VoxelBody, voxel_size: f64) -> Result<BranchingIndex, DescriptorError> {
    if body.full_count() == 0 {
        return Err(DescriptorError::EmptyBody);
    }
    let mesh = rest_surface_mesh(body, 1.0).map_err(|_| DescriptorError::EmptyBody)?;
    let r = mesh_volume(&mesh)?;
    let ch = convex_hull_volume(&voxel_corners(body))?;
    let l3 = voxel_size.powi(3);
    let bi = (1.0 - r / ch).max(0.0);
    Ok(BranchingIndex {
        bi,
        r_v: r * l3,
        ch_v: ch.max(r) * l3,
    })
}

/// Shannon entropy (bits) of per-vertex angle deficits binned into
/// [`ENTROPY_BINS`] uniform bins over [−2π, 2π].
pub fn shape_entropy(mesh: &SurfaceMesh) -> Result<f64, DescriptorError> {
    let open = unmatched_edges(mesh);
    if open > 0 || mesh.is_empty() {
        return Err(DescriptorError::OpenMesh(open));
    }
    let mut angle_sum: HashMap<VertexKey, f64> = HashMap::new();
    let mut order: Vec<VertexKey> = Vec::new();
    for f in &mesh.facets {
        for c in 0..3 {
            let v = f.vertices[c];
            let e1 = f.vertices[(c + 1) % 3] - v;
            let e2 = f.vertices[(c + 2) % 3] - v;
            let angle = e1.cross(e2).norm().atan2(e1.dot(e2));
            let k = key(v);
            let slot = angle_sum.entry(k).or_insert_with(|| {
                order.push(k);
                0.0
            });
            *slot += angle;
        }
    }
    let width = 4.0 * PI / ENTROPY_BINS as f64;
    let mut counts = [0usize; ENTROPY_BINS];
    for k in &order {
        let deficit = 2.0 * PI - angle_sum[k];
        // nudge so deficits sitting exactly on a bin edge land in the upper bin
        let pos = ((deficit + 2.0 * PI) / width + 1e-9).floor();
        let bin = pos.clamp(0.0, (ENTROPY_BINS - 1) as f64) as usize;
        counts[bin] += 1;
    }
    let n = order.len() as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSet {
    pub s_x: f64,
    pub s_y: f64,
    pub s_z: f64,
    pub g_si: f64,
    pub bi: f64,
    pub shape_entropy: f64,
    pub r_v: f64,
    pub ch_v: f64,
}

/// All descriptors of a body in its rest pose.
pub fn describe(body: &VoxelBody, voxel_size: f64) -> Result<DescriptorSet, DescriptorError> {
    let sym = axis_and_global_symmetry(body)?;
    let bi = branching_index(body, voxel_size)?;
    let mesh = rest_surface_mesh(body, voxel_size).map_err(|_| DescriptorError::EmptyBody)?;
    Ok(DescriptorSet {
        s_x: sym.s_x,
        s_y: sym.s_y,
        s_z: sym.s_z,
        g_si: sym.g_si,
        bi: bi.bi,
        shape_entropy: shape_entropy(&mesh)?,
        r_v: bi.r_v,
        ch_v: bi.ch_v,
    })
}
