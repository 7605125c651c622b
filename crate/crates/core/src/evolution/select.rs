use std::collections::HashSet;

use super::pareto::{crowding_distance, dominates, nondominated_sort, ObjectiveVector};

/// One entry of the selection pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: u64,
    pub fitness: Option<ObjectiveVector>,
    /// Member of the current population (as opposed to a fresh offspring).
    pub is_parent: bool,
}

/// Pick `n` survivors by front rank, then crowding distance, then id.
///
/// When the first feasible front overflows, every nondominated parent keeps
/// a place: either itself, or, if an offspring now dominates it, its
/// lowest-id dominator. This keeps the first front's hypervolume from
/// shrinking between generations. Returned indices ascend by id.
pub fn select_survivors(pool: &[Candidate], n: usize) -> Vec<usize> {
    let fitness: Vec<Option<ObjectiveVector>> = pool.iter().map(|c| c.fitness).collect();
    let fronts = nondominated_sort(&fitness);
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for (rank, front) in fronts.iter().enumerate() {
        let need = n - chosen.len();
        if need == 0 {
            break;
        }
        if front.len() <= need {
            chosen.extend(front);
            continue;
        }
        let feasible = pool[front[0]].fitness.is_some();
        if !feasible {
            let mut rest = front.clone();
            rest.sort_by_key(|&i| pool[i].id);
            chosen.extend(rest.into_iter().take(need));
            break;
        }
        let objs: Vec<ObjectiveVector> = front.iter().map(|&i| pool[i].fitness.unwrap()).collect();
        let crowd = crowding_distance(&objs);

        let mut protected: Vec<usize> = Vec::new();
        if rank == 0 {
            protected = protected_parents(pool, front);
            protected.truncate(need);
        }
        let taken: HashSet<usize> = protected.iter().copied().collect();
        let mut rest: Vec<usize> = (0..front.len()).filter(|k| !taken.contains(&front[*k])).collect();
        rest.sort_by(|&a, &b| {
            crowd[b]
                .total_cmp(&crowd[a])
                .then(pool[front[a]].id.cmp(&pool[front[b]].id))
        });
        chosen.extend(protected.iter().copied());
        let fill = need - protected.len();
        chosen.extend(rest.into_iter().take(fill).map(|k| front[k]));
        break;
    }
    chosen.sort_by_key(|&i| pool[i].id);
    chosen
}

/// Members of `front` that stand in for the parents' own nondominated set.
fn protected_parents(pool: &[Candidate], front: &[usize]) -> Vec<usize> {
    let parents: Vec<usize> = (0..pool.len())
        .filter(|&i| pool[i].is_parent && pool[i].fitness.is_some())
        .collect();
    let parent_fit: Vec<Option<ObjectiveVector>> = parents.iter().map(|&i| pool[i].fitness).collect();
    let Some(parent_front) = nondominated_sort(&parent_fit).into_iter().next() else {
        return Vec::new();
    };
    let in_front: HashSet<usize> = front.iter().copied().collect();
    let mut out: Vec<usize> = Vec::new();
    let mut seen = HashSet::new();
    let mut by_id: Vec<usize> = parent_front.into_iter().map(|k| parents[k]).collect();
    by_id.sort_by_key(|&i| pool[i].id);
    for p in by_id {
        let keep = if in_front.contains(&p) {
            p
        } else {
            let pf = pool[p].fitness.unwrap();
            match front
                .iter()
                .copied()
                .filter(|&q| dominates(&pool[q].fitness.unwrap(), &pf))
                .min_by_key(|&q| pool[q].id)
            {
                Some(q) => q,
                None => continue,
            }
        };
        if seen.insert(keep) {
            out.push(keep);
        }
    }
    out
}
