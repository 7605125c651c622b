use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use voxevo_core::config::Config;
use voxevo_core::descriptors::describe;
use voxevo_core::harness::{self, HarnessError};
use voxevo_core::lattice::EnvMode;

#[derive(Parser)]
#[command(name = "voxevo", version, about = "Evolve walking and swimming voxel soft robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvArg {
    Land,
    Water,
}

impl From<EnvArg> for EnvMode {
    fn from(e: EnvArg) -> Self {
        match e {
            EnvArg::Land => EnvMode::Land,
            EnvArg::Water => EnvMode::Water,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every repetition of an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "VOXEVO_OUT_DIR")]
        out: PathBuf,
        /// Override `run.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Override `run.repetitions`.
        #[arg(long)]
        repetitions: Option<u32>,
    },
    /// Continue a repetition from one of its snapshots.
    Resume {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Re-simulate a genome, optionally writing a position trace.
    Replay {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long, value_enum)]
        env: EnvArg,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Config supplying the evaluation protocol; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare experiment directories.
    Analyze {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, env = "VOXEVO_OUT_DIR")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the shape descriptors of a body file.
    Descriptors {
        #[arg(long)]
        body: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config, HarnessError> {
    let config = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            repetitions,
        } => {
            let mut cfg = load_config(Some(&config))?;
            if let Some(s) = seed {
                cfg.evolution.master_seed = s;
            }
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            let report = harness::run_experiment(&cfg, &out)?;
            for rep in &report.repetitions {
                match rep {
                    Ok(o) => println!(
                        "rep {:03}: {} generations, best distance {:.4}",
                        o.repetition, o.generations_run, o.best_distance
                    ),
                    Err(e) => eprintln!("repetition failed: {e}"),
                }
            }
            let failed = report.failed();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(HarnessError::RepetitionsFailed(failed))
            }
        }
        Command::Resume { snapshot } => {
            let o = harness::resume(&snapshot)?;
            println!(
                "rep {:03}: {} generations, best distance {:.4}",
                o.repetition, o.generations_run, o.best_distance
            );
            Ok(())
        }
        Command::Replay {
            genome,
            env,
            trace,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let g = harness::read_genome(&genome)?;
            let r = harness::replay(&g, &cfg, env.into(), trace.as_deref())?;
            let (o, d) = (r.objectives, r.descriptors);
            println!("distance {:?}", o.distance);
            println!("energy {:?}", o.energy);
            println!("material {}", o.material);
            println!("frequency {:?}", r.frequency);
            print_descriptors(&d);
            if trace.is_some() {
                println!("trace_rows {}", r.trace_rows);
            }
            Ok(())
        }
        Command::Analyze { runs, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let report = harness::analyze(&runs, &out, &cfg.stats)?;
            for s in &report.summaries {
                println!(
                    "{}: n={} median {:.4} mean {:.4} CI [{:.4}, {:.4}]",
                    s.treatment, s.repetitions, s.median, s.mean, s.ci_low, s.ci_high
                );
            }
            Ok(())
        }
        Command::Descriptors { body, config } => {
            let cfg = load_config(config.as_deref())?;
            let b = harness::read_body(&body)?;
            let d = describe(&b, cfg.evolution.material.voxel_size)
                .map_err(|e| HarnessError::InvalidInput(e.to_string()))?;
            print_descriptors(&d);
            Ok(())
        }
    }
}

fn print_descriptors(d: &voxevo_core::descriptors::DescriptorSet) {
    println!("s_x {:?}", d.s_x);
    println!("s_y {:?}", d.s_y);
    println!("s_z {:?}", d.s_z);
    println!("G_SI {:?}", d.g_si);
    println!("BI {:?}", d.bi);
    println!("shape_entropy {:?}", d.shape_entropy);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
