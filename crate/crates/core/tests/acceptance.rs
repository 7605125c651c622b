//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary so the verdict lines are always printed. The two
//! desk-scale trend checks dominate the runtime (roughly 1.5 hours on one core).
//! Set `VOXEVO_ACCEPTANCE_SKIP_DESK=1` to skip them during development; skipped
//! criteria are reported as FAIL.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use voxevo_core::config::Config;
use voxevo_core::descriptors::{branching_index, convex_hull_volume, mesh_volume};
use voxevo_core::evolution::{
    dominates, evolve_run, hypervolume, nondominated_sort, reference_point, EvolutionConfig, GenerationSummary,
    ObjectiveVector,
};
use voxevo_core::fluid::{drag_forces_into, facet_drag_force, rest_surface_mesh, SurfaceFacet, SurfaceTopology};
use voxevo_core::harness::{repetition_seed, resume, run_experiment, RUNLOG_FILE, SNAPSHOTS_DIR};
use voxevo_core::lattice::{build_lattice, stable_timestep, ControlSchedule, EnvironmentSpec, MaterialParams};
use voxevo_core::phenotype::{prune_to_largest_component, Material, VoxelBody};
use voxevo_core::stats::{bonferroni_adjust, bootstrap_ci_exhaustive, mann_whitney_u, median};
use voxevo_core::vec3::Vec3;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_solid(rng: &mut ChaCha8Rng, dims: (usize, usize, usize), fill: f64) -> VoxelBody {
    let mut body = VoxelBody::filled(dims, Material::Empty);
    for i in 0..body.len() {
        if rng.gen_bool(fill) {
            body.material[i] = if rng.gen_bool(0.5) { Material::Active } else { Material::Passive };
        }
    }
    body.material[0] = Material::Passive;
    prune_to_largest_component(&body)
}

fn criterion_1() -> Outcome {
    let l = 0.01;
    // right triangle with legs of one voxel edge: area L^2 / 2, normal +z
    let facet = SurfaceFacet::from_triangle(0, Vec3::ZERO, Vec3::new(l, 0.0, 0.0), Vec3::new(0.0, l, 0.0));
    let v = Vec3::new(0.3, -0.2, 1.0);
    let f = facet_drag_force(&facet, v, 1000.0, 1.5);
    let expected = 0.5 * 1000.0 * 1.5 * 0.5e-4 * 1.0;
    let magnitude_ok = (f.norm() - expected).abs() <= 1e-9 * expected;
    let opposing = (f.dot(facet.normal) / f.norm() + 1.0).abs() < 1e-12;
    let quadratic = facet_drag_force(&facet, v * 2.0, 1000.0, 1.5) == f * 4.0;
    check(
        (facet.area - 0.5e-4).abs() < 1e-18 && magnitude_ok && opposing && quadratic,
        format!("|F| = {:.12} N (expected {expected}), opposing normal: {opposing}, x2 velocity gives x4 force: {quadratic}", f.norm()),
    )
}

fn criterion_2() -> Outcome {
    let mut counts = Vec::new();
    for n in 1..=4 {
        let body = VoxelBody::filled((n, n, n), Material::Passive);
        counts.push((n, rest_surface_mesh(&body, 0.01).unwrap().len()));
    }
    let ok = counts.iter().all(|&(n, c)| c == 12 * n * n);
    check(ok, format!("(n, triangles) = {counts:?}"))
}

fn criterion_3() -> Outcome {
    let slab = VoxelBody::filled((5, 5, 1), Material::Passive);
    let bi_slab = branching_index(&slab, 0.01).unwrap().bi;
    let mut x = VoxelBody::filled((5, 5, 1), Material::Empty);
    for i in 0..5 {
        let a = x.index(i, i, 0);
        let b = x.index(i, 4 - i, 0);
        x.material[a] = Material::Passive;
        x.material[b] = Material::Passive;
    }
    let bi_x = branching_index(&x, 0.01).unwrap().bi;
    check(
        bi_slab == 0.0 && (bi_x - 0.64).abs() <= 1e-6 && x.full_count() == 9,
        format!("slab BI = {bi_slab}, X BI = {bi_x:.9}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let l = 0.01;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dims = (rng.gen_range(1..=8), rng.gen_range(1..=8), rng.gen_range(1..=7));
        let fill = rng.gen_range(0.3..0.9);
        let body = random_solid(&mut rng, dims, fill);
        let want = body.full_count() as f64 * l * l * l;
        let got = mesh_volume(&rest_surface_mesh(&body, l).unwrap()).unwrap();
        worst = worst.max((got - want).abs() / want);
    }
    let mut corners = Vec::new();
    for i in 0..8 {
        corners.push(Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
    }
    let hull = convex_hull_volume(&corners).unwrap();
    check(
        worst <= 1e-9 && (hull - 1.0).abs() <= 1e-12,
        format!("worst relative mesh volume error {worst:.3e} over 100 solids; unit cube hull volume {hull}"),
    )
}

fn brute_force_fronts(points: &[Option<ObjectiveVector>]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..points.len()).filter(|&i| points[i].is_some()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominates(&points[j].unwrap(), &points[i].unwrap())))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    let infeasible: Vec<usize> = (0..points.len()).filter(|&i| points[i].is_none()).collect();
    if !infeasible.is_empty() {
        fronts.push(infeasible);
    }
    fronts
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for trial in 0..1000 {
        let n = rng.gen_range(0..=64);
        // coarse values in half the trials so ties and duplicates are common
        let coarse = trial % 2 == 0;
        let points: Vec<Option<ObjectiveVector>> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.05) {
                    return None;
                }
                Some(if coarse {
                    ObjectiveVector::new(rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64 / 4.0, rng.gen_range(1..6))
                } else {
                    ObjectiveVector::new(rng.gen_range(0.0..10.0), rng.gen(), rng.gen_range(1..448))
                })
            })
            .collect();
        if nondominated_sort(&points) != brute_force_fronts(&points) {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} of 1000 populations differ from the brute-force fronts"))
}

/// Histogram of U over every way to assign ranks 0..n+m to the first sample.
fn u_histogram(n: usize, m: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n * m + 1];
    for mask in 0u32..(1 << (n + m)) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let (mut u, mut below) = (0, 0);
        for r in 0..n + m {
            if mask & (1 << r) != 0 {
                u += below;
            } else {
                below += 1;
            }
        }
        counts[u] += 1;
    }
    counts
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut samples = 0u64;
    for n in 1..=8 {
        for m in 1..=8 {
            let counts = u_histogram(n, m);
            let total: u64 = counts.iter().sum();
            let oracle = |u: usize| {
                let lower: u64 = counts[..=u].iter().sum();
                let upper: u64 = counts[u..].iter().sum();
                (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
            };
            // every rank arrangement is one equivalence class of tie-free samples
            for mask in 0u32..(1 << (n + m)) {
                if mask.count_ones() as usize != n {
                    continue;
                }
                let (mut a, mut b) = (Vec::new(), Vec::new());
                for r in 0..n + m {
                    if mask & (1 << r) != 0 {
                        a.push(r as f64 * 1.5 + 0.25);
                    } else {
                        b.push(r as f64 * 1.5 + 0.25);
                    }
                }
                let res = mann_whitney_u(&a, &b).unwrap();
                worst = worst.max((res.p_value - oracle(res.u_statistic as usize)).abs());
                samples += 1;
            }
        }
    }
    let ci = bootstrap_ci_exhaustive(&[0.0, 1.0], 0.95).unwrap();
    let clamp = bonferroni_adjust(&[0.3, 0.6], 4).unwrap();
    check(
        worst <= 1e-12 && ci == (0.0, 1.0) && clamp == vec![1.0, 1.0],
        format!("max |p - oracle| = {worst:.2e} over {samples} rank arrangements; bootstrap CI {ci:?}; Bonferroni {clamp:?}"),
    )
}

fn criterion_7() -> Outcome {
    let mat = MaterialParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let body = random_solid(&mut rng, (4, 4, 3), 0.8);

    let mut s = build_lattice(&body, &mat).unwrap();
    for (p, v) in s.position.iter_mut().zip(s.velocity.iter_mut()) {
        *p += Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)) * mat.voxel_size;
        *v = Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
    }
    // no gravity, no ground, and no drag unless passed in as external force
    let free = EnvironmentSpec::water();
    let dt = stable_timestep(&s);
    let mut e = s.mechanical_energy();
    let e0 = e;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        s.step(dt, &free, None, None).unwrap();
        let next = s.mechanical_energy();
        if next > e + 1e-9 * e.abs() {
            violations += 1;
            worst = worst.max((next - e) / e.abs());
        }
        e = next;
    }
    let energy_ok = violations == 0;

    let passive = VoxelBody::filled((3, 2, 2), Material::Passive);
    let mut w = build_lattice(&passive, &mat).unwrap();
    let water = EnvironmentSpec::water();
    let topo = SurfaceTopology::new(&w);
    let start = w.position.clone();
    let dt_w = stable_timestep(&w);
    let mut drag = vec![Vec3::ZERO; w.len()];
    for _ in 0..(10.0 / dt_w).ceil() as usize {
        drag_forces_into(&topo, &w, &water, &mut drag);
        w.step(dt_w, &water, None, Some(&drag)).unwrap();
    }
    let drift = w.position.iter().zip(&start).map(|(p, q)| (*p - *q).norm()).fold(0.0, f64::max);

    let mut moving = build_lattice(&body, &mat).unwrap();
    for (p, v) in moving.position.iter_mut().zip(moving.velocity.iter_mut()) {
        *p += Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)) * mat.voxel_size;
        *v = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    }
    moving.sim_time = 0.0137;
    let ctrl = ControlSchedule::from_body(&body, &moving, 5.0, mat.actuation_amplitude);
    let mut swapped = moving.clone();
    for b in swapped.bonds.iter_mut() {
        std::mem::swap(&mut b.a, &mut b.b);
    }
    let mut unequal = 0;
    for i in 0..moving.bonds.len() {
        let on_a = moving.bond_force(i, Some(&ctrl));
        let on_b = swapped.bond_force(i, Some(&ctrl));
        if on_a + on_b != Vec3::ZERO {
            unequal += 1;
        }
    }

    check(
        energy_ok && drift < 1e-9 && unequal == 0,
        format!(
            "energy: {violations} increases in 1e5 steps (worst {worst:.2e}, E {e0:.3e} -> {e:.3e}); \
             buoyancy drift {drift:.2e} m over 10 s; {unequal} of {} bond pairs fail to cancel exactly",
            moving.bonds.len()
        ),
    )
}

const DETERMINISM_CONFIG: &str = "\
evolution.population_size = 6
evolution.generations = 100
evolution.cycles_per_eval = 1
evolution.settle_time = 0.1
grid.dims = 4x4x3
expression.f_min = 4
expression.f_max = 10
run.snapshot_interval = 10
run.master_seed = 8
";

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in std::fs::read_dir(from)? {
        let entry = entry?;
        let target = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_dir(&entry.path(), &target)?;
        } else {
            std::fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = Config::parse(DETERMINISM_CONFIG).map_err(|e| e.to_string())?;
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run_experiment(&cfg, &a).map_err(|e| e.to_string())?;
    run_experiment(&cfg, &b).map_err(|e| e.to_string())?;
    let read = |p: &Path| std::fs::read(p.join("rep_000").join(RUNLOG_FILE)).map_err(|e| e.to_string());
    let (log_a, log_b) = (read(&a)?, read(&b)?);
    copy_dir(&a, &c).map_err(|e| e.to_string())?;
    resume(&c.join("rep_000").join(SNAPSHOTS_DIR).join("gen_00050.snap")).map_err(|e| e.to_string())?;
    let log_c = read(&c)?;
    let rows = log_a.iter().filter(|&&ch| ch == b'\n').count() - 1;
    check(
        log_a == log_b && log_a == log_c,
        format!(
            "rerun identical: {}, resume from generation 50 identical: {} ({rows} rows)",
            log_a == log_b,
            log_a == log_c
        ),
    )
}

const DESK_SEEDS: u32 = 5;

fn desk_config(stiffness: &str, schedule: &str, generations: u32) -> Config {
    Config::parse(&format!(
        "grid.dims = 8x8x7\n\
         evolution.population_size = 16\n\
         evolution.generations = {generations}\n\
         evolution.cycles_per_eval = 2\n\
         material.stiffness = {stiffness}\n\
         environment.schedule = {schedule}\n"
    ))
    .expect("desk config parses")
}

fn desk_best(stiffness: &str, env: &str) -> Vec<f64> {
    let cfg = desk_config(stiffness, env, 100);
    (0..DESK_SEEDS)
        .map(|r| {
            let t = Instant::now();
            let evo = EvolutionConfig {
                master_seed: repetition_seed(cfg.evolution.master_seed, r),
                ..cfg.evolution.clone()
            };
            let log = evolve_run(evo).expect("valid desk config");
            let best = log.generations.last().map_or(0.0, |g| g.best_distance);
            println!("    {stiffness} {env} repetition {r}: best distance {best:.4} ({:.0} s)", t.elapsed().as_secs_f64());
            best
        })
        .collect()
}

fn skip_desk() -> bool {
    std::env::var("VOXEVO_ACCEPTANCE_SKIP_DESK").is_ok_and(|v| v == "1")
}

fn criterion_9() -> Outcome {
    if skip_desk() {
        return Err("skipped".into());
    }
    let s1 = desk_best("S1", "land");
    let s4 = desk_best("S4", "land");
    let (m1, m4) = (median(&s1), median(&s4));
    check(
        m4 >= 3.0 * m1,
        format!("median best distance on land: S4 {m4:.4} vs S1 {m1:.4} (ratio {:.2}, need >= 3)", m4 / m1),
    )
}

fn criterion_10() -> Outcome {
    if skip_desk() {
        return Err("skipped".into());
    }
    let s1 = desk_best("S1", "water");
    let s5 = desk_best("S5", "water");
    let (m1, m5) = (median(&s1), median(&s5));
    check(m1 >= m5, format!("median best distance in water: S1 {m1:.4} vs S5 {m5:.4} (need S1 >= S5)"))
}

/// Oracle hypervolume by inclusion-exclusion over all subsets of the front.
fn inclusion_exclusion(points: &[ObjectiveVector], reference: &ObjectiveVector) -> f64 {
    let r = reference.minimized();
    let pts: Vec<[f64; 3]> = points.iter().map(|p| p.minimized()).collect();
    let mut total = 0.0;
    for mask in 1u32..(1 << pts.len()) {
        let mut corner = [f64::NEG_INFINITY; 3];
        for (i, p) in pts.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for k in 0..3 {
                    corner[k] = corner[k].max(p[k]);
                }
            }
        }
        let vol: f64 = (0..3).map(|k| (r[k] - corner[k]).max(0.0)).product();
        total += if mask.count_ones() % 2 == 1 { vol } else { -vol };
    }
    total
}

fn transition_run() -> Vec<GenerationSummary> {
    let cfg = desk_config("S3", "land_water_halfway", 40);
    evolve_run(cfg.evolution).expect("valid transition config").generations
}

fn criterion_11(gens: &[GenerationSummary]) -> Outcome {
    let before = gens[19].mean_distance;
    let Some(after) = gens[20].reevaluated_mean_distance else {
        return Err("no re-evaluation recorded at generation 20".into());
    };
    check(
        gens[19].env_mode != gens[20].env_mode && after < 0.5 * before,
        format!("mean distance generation 19 (land) {before:.4}, generation 20 after re-evaluation in water {after:.4} (ratio {:.3}, need < 0.5)", after / before),
    )
}

fn criterion_12(transition: &[GenerationSummary]) -> Outcome {
    let mut runs: Vec<(String, Vec<GenerationSummary>, usize)> =
        vec![("S3 land->water".into(), transition.to_vec(), 8 * 8 * 7)];
    for (seed, schedule) in [(1u64, "land"), (2, "water"), (3, "land_water_halfway")] {
        let cfg = Config::parse(&format!(
            "{DETERMINISM_CONFIG}evolution.generations = 30\nenvironment.schedule = {schedule}\nrun.master_seed = {seed}\n"
        ))
        .expect("small config parses");
        let cells = cfg.evolution.grid_cells();
        runs.push((format!("small {schedule}"), evolve_run(cfg.evolution).unwrap().generations, cells));
    }
    let mut drops = Vec::new();
    let mut worst_oracle: f64 = 0.0;
    let mut largest_front = 0;
    let mut checked = 0;
    for (name, gens, cells) in &runs {
        let reference = reference_point(*cells);
        let oracle: Vec<f64> = gens
            .iter()
            .map(|g| {
                largest_front = largest_front.max(g.front0.len());
                let hv = inclusion_exclusion(&g.front0, &reference);
                worst_oracle = worst_oracle.max((hv - hypervolume(&g.front0, &reference)).abs() / hv.max(1e-300));
                hv
            })
            .collect();
        for k in 1..gens.len() {
            if gens[k].env_mode != gens[k - 1].env_mode {
                continue;
            }
            checked += 1;
            if oracle[k] < oracle[k - 1] * (1.0 - 1e-12) {
                drops.push(format!("{name} gen {}: {:.6e} -> {:.6e}", gens[k].generation, oracle[k - 1], oracle[k]));
            }
        }
    }
    check(
        drops.is_empty() && largest_front <= 20 && worst_oracle <= 1e-9,
        format!(
            "{checked} same-environment generation pairs, {} hypervolume drops {drops:?}; largest front {largest_front}; \
             max relative difference to oracle {worst_oracle:.2e}",
            drops.len()
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let outcome = f();
        let (verdict, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{verdict} criterion {id:>2} [{name}] {detail} ({:.1} s)", t.elapsed().as_secs_f64());
        results.push((id, name, outcome));
    };
    run(1, "drag formula", &criterion_1);
    run(2, "facet exposure", &criterion_2);
    run(3, "branching index", &criterion_3);
    run(4, "mesh volume", &criterion_4);
    run(5, "dominance machinery", &criterion_5);
    run(6, "statistics", &criterion_6);
    run(7, "physics invariants", &criterion_7);
    run(8, "determinism", &criterion_8);
    run(9, "land stiffness trend", &criterion_9);
    run(10, "water stiffness trend", &criterion_10);
    let transition = transition_run();
    run(11, "transition re-evaluation", &|| criterion_11(&transition));
    run(12, "front hypervolume elitism", &|| criterion_12(&transition));

    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} in {:.0} s",
        results.len() - failed.len(),
        failed.len(),
        failed,
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
