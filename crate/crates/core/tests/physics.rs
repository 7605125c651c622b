use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use voxevo_core::fluid::{apply_drag, extract_surface_mesh, facet_drag_force, rest_surface_mesh};
use voxevo_core::lattice::{
    build_lattice, stable_timestep, ControlSchedule, EnvironmentSpec, LatticeState, MaterialParams,
};
use voxevo_core::phenotype::{prune_to_largest_component, Material, VoxelBody};
use voxevo_core::vec3::Vec3;

fn random_body(seed: u64, dims: (usize, usize, usize), fill: f64) -> VoxelBody {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut body = VoxelBody::filled(dims, Material::Empty);
    for i in 0..body.len() {
        let r: f64 = rng.gen();
        if r < fill {
            body.material[i] = if rng.gen_bool(0.5) { Material::Active } else { Material::Passive };
            body.phase[i] = if body.material[i] == Material::Active { rng.gen_range(-3.0..3.0) } else { 0.0 };
        }
    }
    body.material[0] = Material::Passive;
    body.phase[0] = 0.0;
    prune_to_largest_component(&body)
}

/// Randomly displaced and moving lattice.
fn perturbed(body: &VoxelBody, mat: &MaterialParams, seed: u64, amp: f64, speed: f64) -> LatticeState {
    let mut s = build_lattice(body, mat).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let l = mat.voxel_size;
    for p in s.position.iter_mut() {
        *p += Vec3::new(rng.gen_range(-amp..=amp), rng.gen_range(-amp..=amp), rng.gen_range(-amp..=amp)) * l;
    }
    for v in s.velocity.iter_mut() {
        *v = Vec3::new(
            rng.gen_range(-speed..=speed),
            rng.gen_range(-speed..=speed),
            rng.gen_range(-speed..=speed),
        );
    }
    s
}

/// Free space: no gravity and no ground.
fn free_space() -> EnvironmentSpec {
    EnvironmentSpec::water()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stepping_is_deterministic(seed in any::<u64>(), land in any::<bool>()) {
        let body = random_body(seed, (3, 3, 2), 0.7);
        let mat = MaterialParams::default();
        let env = if land { EnvironmentSpec::land() } else { EnvironmentSpec::water() };
        let run = || {
            let mut s = perturbed(&body, &mat, seed, 0.05, 0.05);
            let ctrl = ControlSchedule::from_body(&body, &s, 3.0, 0.15);
            let dt = stable_timestep(&s);
            let ext: Vec<Vec3> = (0..s.len()).map(|k| Vec3::new(1e-4 * k as f64, 0.0, -1e-4)).collect();
            for _ in 0..200 {
                s.step(dt, &env, Some(&ctrl), Some(&ext)).unwrap();
            }
            s
        };
        let (a, b) = (run(), run());
        for (p, q) in a.position.iter().zip(&b.position) {
            prop_assert_eq!(p.to_array().map(f64::to_bits), q.to_array().map(f64::to_bits));
        }
        for (p, q) in a.velocity.iter().zip(&b.velocity) {
            prop_assert_eq!(p.to_array().map(f64::to_bits), q.to_array().map(f64::to_bits));
        }
    }

    #[test]
    fn bond_forces_are_equal_and_opposite(seed in any::<u64>()) {
        let body = random_body(seed, (3, 3, 3), 0.8);
        let s = perturbed(&body, &MaterialParams::default(), seed, 0.2, 0.3);
        let ctrl = ControlSchedule::from_body(&body, &s, 2.0, 0.15);
        let mut net = vec![Vec3::ZERO; s.len()];
        for (i, b) in s.bonds.iter().enumerate() {
            let f = s.bond_force(i, Some(&ctrl));
            let g = -f;
            prop_assert_eq!(f + g, Vec3::ZERO);
            net[b.a as usize] += f;
            net[b.b as usize] += g;
        }
        let total = net.iter().fold(Vec3::ZERO, |acc, f| acc + *f);
        let scale = net.iter().map(|f| f.norm()).fold(0.0, f64::max).max(1e-300);
        prop_assert!(total.norm() <= 1e-12 * scale * s.len() as f64);
    }

    #[test]
    fn damped_lattice_loses_energy(
        seed in any::<u64>(),
        dims in (2usize..=4, 2usize..=4, 2usize..=4),
        zeta in 0.1f64..=0.6,
        amp in 0.01f64..0.3,
    ) {
        let body = VoxelBody::filled(dims, Material::Passive);
        let mat = MaterialParams { bond_damping_ratio: zeta, ..MaterialParams::default() };
        let mut s = perturbed(&body, &mat, seed, amp, 0.1);
        let dt = stable_timestep(&s);
        let env = free_space();
        let mut e = s.mechanical_energy();
        for step in 0..3000 {
            s.step(dt, &env, None, None).unwrap();
            let next = s.mechanical_energy();
            prop_assert!(next <= e + 1e-9 * e.abs(), "step {}: {} -> {}", step, e, next);
            e = next;
        }
    }

    /// Sparse bodies can contain unbraced chains whose bending is neither
    /// stiff nor damped, so only the overall decay is checked.
    #[test]
    fn sparse_lattice_energy_decays(seed in any::<u64>(), zeta in 0.1f64..=0.6, amp in 0.01f64..0.3) {
        let body = random_body(seed, (3, 3, 3), 0.8);
        let mat = MaterialParams { bond_damping_ratio: zeta, ..MaterialParams::default() };
        let mut s = perturbed(&body, &mat, seed, amp, 0.1);
        let dt = stable_timestep(&s);
        let env = free_space();
        let e0 = s.mechanical_energy();
        for step in 0..3000 {
            s.step(dt, &env, None, None).unwrap();
            prop_assert!(s.mechanical_energy() <= e0, "step {}", step);
        }
        prop_assert!(s.mechanical_energy() < e0);
    }

    #[test]
    fn momentum_is_conserved_in_free_space(seed in any::<u64>()) {
        let body = random_body(seed, (3, 3, 3), 0.8);
        let mut s = perturbed(&body, &MaterialParams::default(), seed, 0.2, 0.2);
        let ctrl = ControlSchedule::from_body(&body, &s, 4.0, 0.15);
        let dt = stable_timestep(&s);
        let env = free_space();
        let p0 = s.momentum();
        let scale = s.velocity.iter().zip(&s.mass).map(|(v, &m)| m * v.norm()).sum::<f64>();
        let steps = 2000;
        for _ in 0..steps {
            s.step(dt, &env, Some(&ctrl), None).unwrap();
        }
        let drift = (s.momentum() - p0).norm();
        prop_assert!(drift <= 1e-12 * scale * steps as f64, "drift {} scale {}", drift, scale);
    }

    #[test]
    fn settled_bodies_respect_penetration_bound(seed in any::<u64>()) {
        let body = random_body(seed, (3, 3, 2), 0.7);
        let mat = MaterialParams::default();
        let env = EnvironmentSpec::land();
        let mut s = build_lattice(&body, &mat).unwrap();
        let dt = stable_timestep(&s);
        for _ in 0..((1.0 / dt) as usize) {
            s.step(dt, &env, None, None).unwrap();
        }
        // the whole weight can rest on one contact voxel at worst
        let bound = s.total_mass() * env.gravity / env.ground_contact_stiffness;
        prop_assert!(s.min_bottom_height() >= -bound - 1e-9, "min {} bound {}", s.min_bottom_height(), bound);
    }

    #[test]
    fn zero_amplitude_is_passive(seed in any::<u64>()) {
        let body = random_body(seed, (3, 2, 2), 0.9);
        let mat = MaterialParams::default();
        let env = EnvironmentSpec::land();
        let mut a = perturbed(&body, &mat, seed, 0.05, 0.0);
        let mut b = a.clone();
        let ctrl = ControlSchedule::from_body(&body, &a, 5.0, 0.0);
        let dt = stable_timestep(&a);
        for _ in 0..300 {
            a.step(dt, &env, Some(&ctrl), None).unwrap();
            b.step(dt, &env, None, None).unwrap();
        }
        prop_assert_eq!(a.position, b.position);
    }

    #[test]
    fn zero_velocity_means_zero_drag(seed in any::<u64>()) {
        let body = random_body(seed, (3, 3, 3), 0.6);
        let s = perturbed(&body, &MaterialParams::default(), seed, 0.2, 0.0);
        let mesh = extract_surface_mesh(&body, &s).unwrap();
        for f in apply_drag(&mesh, &s, &EnvironmentSpec::water()) {
            prop_assert_eq!(f, Vec3::ZERO);
        }
    }

    #[test]
    fn facet_drag_opposes_normal_and_scales_quadratically(
        seed in any::<u64>(),
        vx in -2.0f64..2.0, vy in -2.0f64..2.0, vz in -2.0f64..2.0,
    ) {
        let body = random_body(seed, (2, 2, 2), 0.7);
        let s = build_lattice(&body, &MaterialParams::default()).unwrap();
        let mesh = extract_surface_mesh(&body, &s).unwrap();
        let v = Vec3::new(vx, vy, vz);
        for facet in &mesh.facets {
            let f = facet_drag_force(facet, v, 1000.0, 1.5);
            let f2 = facet_drag_force(facet, v * 2.0, 1000.0, 1.5);
            prop_assert_eq!(f2, f * 4.0);
            if f != Vec3::ZERO {
                let cos = f.dot(facet.normal) / f.norm();
                prop_assert!((cos + 1.0).abs() < 1e-12, "cos {}", cos);
            }
        }
    }

    #[test]
    fn per_voxel_drag_is_sum_of_facets(seed in any::<u64>()) {
        let body = random_body(seed, (3, 3, 2), 0.7);
        let s = perturbed(&body, &MaterialParams::default(), seed, 0.1, 0.5);
        let env = EnvironmentSpec::water();
        let mesh = extract_surface_mesh(&body, &s).unwrap();
        let got = apply_drag(&mesh, &s, &env);
        let mut want = vec![Vec3::ZERO; s.len()];
        for facet in &mesh.facets {
            want[facet.owner] += facet_drag_force(facet, s.velocity[facet.owner], env.fluid_density, env.drag_coefficient);
        }
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((*g - *w).norm() <= 1e-12 * w.norm().max(1e-300));
        }
    }

    #[test]
    fn rest_mesh_covers_exactly_the_exposed_faces(seed in any::<u64>()) {
        let body = random_body(seed, (4, 3, 3), 0.6);
        let l = 0.01;
        let mesh = rest_surface_mesh(&body, l).unwrap();
        let mut exposed = 0usize;
        for i in 0..body.len() {
            if !body.material[i].is_full() {
                continue;
            }
            let (x, y, z) = body.coords(i);
            let (x, y, z) = (x as i64, y as i64, z as i64);
            for (dx, dy, dz) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
                if !body.get(x + dx, y + dy, z + dz).is_full() {
                    exposed += 1;
                }
            }
        }
        prop_assert_eq!(mesh.len(), 2 * exposed);
        prop_assert!((mesh.total_area() - exposed as f64 * l * l).abs() <= 1e-12 * exposed as f64 * l * l);
        // no facet lies on a face shared by two full voxels
        for facet in &mesh.facets {
            let c = (facet.vertices[0] + facet.vertices[1] + facet.vertices[2]) / 3.0;
            let probe = c + facet.normal * (0.5 * l);
            let cell = |v: f64| (v / l).floor() as i64;
            prop_assert!(!body.get(cell(probe.x), cell(probe.y), cell(probe.z)).is_full());
        }
    }
}

#[test]
fn passive_body_is_neutrally_buoyant() {
    let body = VoxelBody::filled((3, 2, 2), Material::Passive);
    let mut s = build_lattice(&body, &MaterialParams::default()).unwrap();
    let env = EnvironmentSpec::water();
    let dt = stable_timestep(&s);
    let start = s.position.clone();
    let steps = (10.0 / dt).ceil() as usize;
    let mesh_topology = voxevo_core::fluid::SurfaceTopology::new(&s);
    let mut drag = vec![Vec3::ZERO; s.len()];
    for _ in 0..steps {
        voxevo_core::fluid::drag_forces_into(&mesh_topology, &s, &env, &mut drag);
        s.step(dt, &env, None, Some(&drag)).unwrap();
    }
    let drift = s.position.iter().zip(&start).map(|(p, q)| (*p - *q).norm()).fold(0.0, f64::max);
    assert!(drift < 1e-9, "drift {drift}");
}
