use serde::{Deserialize, Serialize};

use super::pareto::ObjectiveVector;
use crate::fluid::{drag_forces_into, SurfaceTopology};
use crate::lattice::{
    build_lattice, center_of_mass, stable_timestep, ControlSchedule, EnvMode, EnvironmentSpec, LatticeState,
    MaterialParams, SimError,
};
use crate::phenotype::Phenotype;
use crate::vec3::Vec3;

/// How a phenotype is simulated for scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    /// Actuation cycles in the measurement window.
    pub cycles: u32,
    /// Unactuated settling before measurement, land only (s).
    pub settle_time: f64,
    /// Cycles over which the actuation amplitude ramps up from zero at the
    /// start of the measurement window.
    pub ramp_cycles: f64,
    pub self_collision: bool,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            cycles: 8,
            settle_time: 0.5,
            ramp_cycles: 1.0,
            self_collision: false,
        }
    }
}

/// Step counts of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    pub settle_steps: u64,
    pub measure_steps: u64,
}

impl StepPlan {
    pub fn total(&self) -> u64 {
        self.settle_steps + self.measure_steps
    }
}

pub fn plan_steps(state: &LatticeState, frequency: f64, env: &EnvironmentSpec, protocol: &EvalProtocol) -> StepPlan {
    let dt = stable_timestep(state);
    let settle = if env.mode == EnvMode::Land { protocol.settle_time } else { 0.0 };
    let window = protocol.cycles as f64 / frequency;
    StepPlan {
        dt,
        settle_steps: (settle / dt).ceil() as u64,
        measure_steps: (window / dt).ceil() as u64,
    }
}

/// Net COM displacement in voxel lengths: horizontal on land, full 3D in water.
pub fn displacement(start: Vec3, end: Vec3, mode: EnvMode, voxel_size: f64) -> f64 {
    let d = end - start;
    let norm = match mode {
        EnvMode::Land => (d.x * d.x + d.y * d.y).sqrt(),
        EnvMode::Water => d.norm(),
    };
    norm / voxel_size
}

/// Run the full protocol, calling `observe(step_index, state)` before every
/// step and once more after the last one. Returns the objectives.
pub fn simulate<F>(
    phenotype: &Phenotype,
    env: &EnvironmentSpec,
    mat: &MaterialParams,
    protocol: &EvalProtocol,
    mut observe: F,
) -> Result<ObjectiveVector, SimError>
where
    F: FnMut(u64, &LatticeState),
{
    let mut state = build_lattice(&phenotype.body, mat)?;
    state.self_collision = protocol.self_collision;
    let plan = plan_steps(&state, phenotype.frequency, env, protocol);
    let mut ctrl = ControlSchedule::from_body(&phenotype.body, &state, phenotype.frequency, mat.actuation_amplitude);
    let water = env.mode == EnvMode::Water;
    let topo = water.then(|| SurfaceTopology::new(&state));
    let mut drag = vec![Vec3::ZERO; state.len()];

    let mut step_index = 0u64;
    for _ in 0..plan.settle_steps {
        observe(step_index, &state);
        state.step(plan.dt, env, None, None)?;
        step_index += 1;
    }
    ctrl.start_time = state.sim_time;
    ctrl.ramp_time = protocol.ramp_cycles / phenotype.frequency;
    let start = center_of_mass(&state);
    for _ in 0..plan.measure_steps {
        observe(step_index, &state);
        let external = match &topo {
            Some(t) => {
                drag_forces_into(t, &state, env, &mut drag);
                Some(drag.as_slice())
            }
            None => None,
        };
        state.step(plan.dt, env, Some(&ctrl), external)?;
        step_index += 1;
    }
    observe(step_index, &state);
    let end = center_of_mass(&state);

    let full = phenotype.body.full_count();
    Ok(ObjectiveVector {
        distance: displacement(start, end, env.mode, mat.voxel_size),
        energy: phenotype.body.active_count() as f64 / full as f64,
        material: full as u32,
    })
}

/// Score a feasible phenotype.
pub fn evaluate(
    phenotype: &Phenotype,
    env: &EnvironmentSpec,
    mat: &MaterialParams,
    protocol: &EvalProtocol,
) -> Result<ObjectiveVector, SimError> {
    simulate(phenotype, env, mat, protocol, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phenotype::{Material, VoxelBody};

    fn phenotype(body: VoxelBody) -> Phenotype {
        Phenotype { body, frequency: 4.0 }
    }

    #[test]
    fn passive_body_barely_moves() {
        let p = phenotype(VoxelBody::filled((3, 2, 2), Material::Passive));
        for env in [EnvironmentSpec::land(), EnvironmentSpec::water()] {
            let o = evaluate(&p, &env, &MaterialParams::default(), &EvalProtocol::default()).unwrap();
            assert!(o.distance < 0.05, "{:?}: {}", env.mode, o.distance);
            assert_eq!(o.energy, 0.0);
            assert_eq!(o.material, 12);
        }
    }

    #[test]
    fn counting_objectives() {
        let mut body = VoxelBody::filled((10, 1, 1), Material::Passive);
        for i in 0..4 {
            body.material[i] = Material::Active;
        }
        let o = evaluate(&phenotype(body), &EnvironmentSpec::land(), &MaterialParams::default(), &EvalProtocol {
            cycles: 1,
            ..EvalProtocol::default()
        })
        .unwrap();
        assert_eq!(o.energy, 0.4);
        assert_eq!(o.material, 10);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let mut body = VoxelBody::filled((3, 2, 2), Material::Active);
        for (i, ph) in body.phase.iter_mut().enumerate() {
            *ph = 0.5 * i as f64 - 1.0;
        }
        let p = phenotype(body);
        for env in [EnvironmentSpec::land(), EnvironmentSpec::water()] {
            let a = evaluate(&p, &env, &MaterialParams::default(), &EvalProtocol::default()).unwrap();
            let b = evaluate(&p, &env, &MaterialParams::default(), &EvalProtocol::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn observer_sees_every_step() {
        let p = phenotype(VoxelBody::filled((2, 1, 1), Material::Active));
        let mat = MaterialParams::default();
        let env = EnvironmentSpec::land();
        let protocol = EvalProtocol { cycles: 1, ..EvalProtocol::default() };
        let st = build_lattice(&p.body, &mat).unwrap();
        let plan = plan_steps(&st, p.frequency, &env, &protocol);
        let mut calls = 0u64;
        simulate(&p, &env, &mat, &protocol, |_, _| calls += 1).unwrap();
        assert_eq!(calls, plan.total() + 1);
    }
}
