use serde::{Deserialize, Serialize};

/// Objectives of one evaluation: distance is maximized, energy and material
/// are minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Net center-of-mass displacement in voxel lengths.
    pub distance: f64,
    /// Fraction of full voxels that are actuated.
    pub energy: f64,
    /// Number of full voxels.
    pub material: u32,
}

impl ObjectiveVector {
    pub fn new(distance: f64, energy: f64, material: u32) -> Self {
        Self {
            distance,
            energy,
            material,
        }
    }

    /// All three objectives as "smaller is better" values.
    #[inline]
    pub fn minimized(&self) -> [f64; 3] {
        [-self.distance, self.energy, self.material as f64]
    }
}

/// Pareto dominance: no worse everywhere, strictly better somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let (a, b) = (a.minimized(), b.minimized());
    let mut strictly = false;
    for k in 0..3 {
        if a[k] > b[k] {
            return false;
        }
        if a[k] < b[k] {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sorting. Entries that are `None` (infeasible) form a
/// final front behind all feasible ones. Indices inside a front ascend.
pub fn nondominated_sort(points: &[Option<ObjectiveVector>]) -> Vec<Vec<usize>> {
    let feasible: Vec<usize> = (0..points.len()).filter(|&i| points[i].is_some()).collect();
    let n = feasible.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in 0..n {
        let pa = points[feasible[a]].as_ref().unwrap();
        for b in (a + 1)..n {
            let pb = points[feasible[b]].as_ref().unwrap();
            if dominates(pa, pb) {
                dominates_list[a].push(b);
                dominated_by_count[b] += 1;
            } else if dominates(pb, pa) {
                dominates_list[b].push(a);
                dominated_by_count[a] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &a in &current {
            for &b in &dominates_list[a] {
                dominated_by_count[b] -= 1;
                if dominated_by_count[b] == 0 {
                    next.push(b);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current.iter().map(|&i| feasible[i]).collect());
        current = next;
    }
    let infeasible: Vec<usize> = (0..points.len()).filter(|&i| points[i].is_none()).collect();
    if !infeasible.is_empty() {
        fronts.push(infeasible);
    }
    fronts
}

/// Crowding distance within one front. Fronts of size ≤ 2 are all boundary.
/// An objective with zero spread contributes nothing.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0; n];
    for k in 0..3 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front[a].minimized()[k].total_cmp(&front[b].minimized()[k]).then(a.cmp(&b)));
        let lo = front[order[0]].minimized()[k];
        let hi = front[order[n - 1]].minimized()[k];
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let gap = front[order[w + 1]].minimized()[k] - front[order[w - 1]].minimized()[k];
            dist[order[w]] += gap / span;
        }
    }
    dist
}

/// Reference point for hypervolume: distance 0, energy 1, material = grid cell count.
pub fn reference_point(grid_cells: usize) -> ObjectiveVector {
    ObjectiveVector::new(0.0, 1.0, grid_cells as u32)
}

/// Hypervolume dominated by `points` and bounded by `reference`, by slicing
/// along material and sweeping the 2D (distance, energy) union per slab.
pub fn hypervolume(points: &[ObjectiveVector], reference: &ObjectiveVector) -> f64 {
    let r = reference.minimized();
    let mut pts: Vec<[f64; 3]> = points
        .iter()
        .map(|p| p.minimized())
        .filter(|q| (0..3).all(|k| q[k] < r[k]))
        .collect();
    if pts.is_empty() {
        return 0.0;
    }
    pts.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut total = 0.0;
    for i in 0..pts.len() {
        let z_lo = pts[i][2];
        let z_hi = if i + 1 < pts.len() { pts[i + 1][2] } else { r[2] };
        if z_hi <= z_lo {
            continue;
        }
        total += area_2d(&pts[..=i], r[0], r[1]) * (z_hi - z_lo);
    }
    total
}

fn area_2d(pts: &[[f64; 3]], r0: f64, r1: f64) -> f64 {
    let mut xy: Vec<(f64, f64)> = pts.iter().map(|p| (p[0], p[1])).collect();
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut best_y = r1;
    for (i, &(x, y)) in xy.iter().enumerate() {
        best_y = best_y.min(y);
        let x_next = if i + 1 < xy.len() { xy[i + 1].0 } else { r0 };
        area += (x_next - x) * (r1 - best_y);
    }
    area
}
