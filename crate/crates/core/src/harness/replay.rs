use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{io_err, HarnessError};
use crate::config::Config;
use crate::cppn::Genome;
use crate::descriptors::{describe, DescriptorSet};
use crate::evolution::{plan_steps, simulate, ObjectiveVector};
use crate::lattice::{build_lattice, center_of_mass, EnvMode};
use crate::phenotype::express;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub objectives: ObjectiveVector,
    pub descriptors: DescriptorSet,
    pub frequency: f64,
    pub total_steps: u64,
    pub trace_rows: u64,
}

/// Re-simulate `genome` under the evaluation protocol of `config` in `mode`.
/// With `trace_out`, every `config.trace_interval`-th step writes the centre
/// of mass and each voxel's position.
pub fn replay(genome: &Genome, config: &Config, mode: EnvMode, trace_out: Option<&Path>) -> Result<ReplayReport, HarnessError> {
    let evo = &config.evolution;
    let phenotype =
        express(genome, evo.dims, &evo.expression).map_err(|e| HarnessError::InfeasiblePhenotype(e.to_string()))?;
    let env = config.env_for(mode);
    let descriptors =
        describe(&phenotype.body, evo.material.voxel_size).map_err(|e| HarnessError::InfeasiblePhenotype(e.to_string()))?;
    let plan = plan_steps(&build_lattice(&phenotype.body, &evo.material)?, phenotype.frequency, &env, &evo.protocol);
    let total = plan.total();
    let interval = config.trace_interval.max(1);

    let mut writer = match trace_out {
        Some(path) => Some((BufWriter::new(File::create(path).map_err(io_err(path))?), path)),
        None => None,
    };
    let mut io_failure: Option<std::io::Error> = None;
    let mut rows = 0u64;
    if let Some((w, _)) = writer.as_mut() {
        let mut header = String::from("step,time,com_x,com_y,com_z");
        for k in 0..phenotype.body.full_count() {
            header.push_str(&format!(",v{k}_x,v{k}_y,v{k}_z"));
        }
        if let Err(e) = writeln!(w, "{header}") {
            io_failure = Some(e);
        }
    }
    let objectives = simulate(&phenotype, &env, &evo.material, &evo.protocol, |step, state| {
        if step >= total || step % interval != 0 {
            return;
        }
        rows += 1;
        let Some((w, _)) = writer.as_mut() else { return };
        if io_failure.is_some() {
            return;
        }
        let c = center_of_mass(state);
        let mut line = format!("{step},{:?},{:?},{:?},{:?}", state.sim_time, c.x, c.y, c.z);
        for p in &state.position {
            line.push_str(&format!(",{:?},{:?},{:?}", p.x, p.y, p.z));
        }
        if let Err(e) = writeln!(w, "{line}") {
            io_failure = Some(e);
        }
    })?;
    if let Some((mut w, path)) = writer {
        if let Some(e) = io_failure {
            return Err(io_err(path)(e));
        }
        w.flush().map_err(io_err(path))?;
    }
    Ok(ReplayReport {
        objectives,
        descriptors,
        frequency: phenotype.frequency,
        total_steps: total,
        trace_rows: rows,
    })
}
