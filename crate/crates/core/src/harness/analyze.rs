use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::{GENERATIONS_FILE, RUNLOG_FILE};
use super::runlog::{read_generations, read_runlog};
use super::{create_dir, csv_err, io_err, HarnessError};
use crate::config::StatsOptions;
use crate::stats::{aggregate_pareto, bootstrap_ci, mann_whitney_u, mean, median, quantile, LoggedRun, Method};

/// Final best distances of one experiment directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreatmentSummary {
    pub treatment: String,
    pub repetitions: usize,
    pub mean: f64,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ComparisonRow {
    treatment_a: String,
    treatment_b: String,
    median_a: f64,
    median_b: f64,
    u: f64,
    p: f64,
    adjusted_p: f64,
    method: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FrontRow<'a> {
    treatment: &'a str,
    run_id: &'a str,
    individual_id: u64,
    generation: u32,
    distance: f64,
    energy: f64,
    material: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct QuantileRow<'a> {
    treatment: &'a str,
    generation: u32,
    runs: usize,
    min: f64,
    q25: f64,
    median: f64,
    q75: f64,
    max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub summaries: Vec<TreatmentSummary>,
    pub comparisons: usize,
}

struct Treatment {
    name: String,
    /// Per repetition: best distance of each generation.
    curves: Vec<Vec<(u32, f64)>>,
    runs: Vec<LoggedRun>,
}

fn load_treatment(dir: &Path) -> Result<Treatment, HarnessError> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let mut rep_dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(RUNLOG_FILE).is_file())
        .collect();
    rep_dirs.sort();
    if rep_dirs.is_empty() {
        return Err(HarnessError::InvalidInput(format!("{}: no repetition directories", dir.display())));
    }
    let mut curves = Vec::new();
    let mut runs = Vec::new();
    for rep in rep_dirs {
        let run_id = format!("{name}/{}", rep.file_name().unwrap_or_default().to_string_lossy());
        let gens = read_generations(&rep.join(GENERATIONS_FILE))?;
        curves.push(gens.iter().map(|g| (g.generation, g.best_distance)).collect());
        let rows = read_runlog(&rep.join(RUNLOG_FILE))?;
        runs.push(LoggedRun {
            run_id,
            rows: rows.iter().map(|r| r.logged_eval()).collect(),
        });
    }
    Ok(Treatment { name, curves, runs })
}

fn finals(t: &Treatment) -> Vec<f64> {
    t.curves.iter().filter_map(|c| c.last().map(|&(_, d)| d)).collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Compare experiment directories (one per treatment) and write
/// `summary.csv`, `comparisons.csv`, `fronts.csv` and `fitness_quantiles.csv`.
pub fn analyze(run_dirs: &[PathBuf], out_dir: &Path, opts: &StatsOptions) -> Result<AnalysisReport, HarnessError> {
    if run_dirs.is_empty() {
        return Err(HarnessError::InvalidInput("no run directories given".into()));
    }
    let treatments: Vec<Treatment> = run_dirs.iter().map(|d| load_treatment(d)).collect::<Result<_, _>>()?;
    create_dir(out_dir)?;

    let mut summaries = Vec::new();
    for t in &treatments {
        let xs = finals(t);
        let (ci_low, ci_high) = bootstrap_ci(&xs, opts.confidence_level, opts.bootstrap_resamples, opts.seed)?;
        summaries.push(TreatmentSummary {
            treatment: t.name.clone(),
            repetitions: xs.len(),
            mean: mean(&xs),
            median: median(&xs),
            ci_low,
            ci_high,
        });
    }
    write_csv(&out_dir.join("summary.csv"), &summaries)?;

    let pairs: Vec<(usize, usize)> = (0..treatments.len())
        .flat_map(|a| (a + 1..treatments.len()).map(move |b| (a, b)))
        .collect();
    let mut comparisons = Vec::new();
    for &(a, b) in &pairs {
        let (xa, xb) = (finals(&treatments[a]), finals(&treatments[b]));
        let test = mann_whitney_u(&xa, &xb)?.adjusted(pairs.len());
        comparisons.push(ComparisonRow {
            treatment_a: treatments[a].name.clone(),
            treatment_b: treatments[b].name.clone(),
            median_a: median(&xa),
            median_b: median(&xb),
            u: test.u_statistic,
            p: test.p_value,
            adjusted_p: test.adjusted_p,
            method: match test.method {
                Method::ExactEnumeration => "exact",
                Method::NormalApproximation => "normal",
            },
        });
    }
    write_csv(&out_dir.join("comparisons.csv"), &comparisons)?;

    let mut fronts = Vec::new();
    let aggregates: Vec<_> = treatments.iter().map(|t| aggregate_pareto(&t.runs)).collect();
    for (t, front) in treatments.iter().zip(&aggregates) {
        for p in front {
            fronts.push(FrontRow {
                treatment: &t.name,
                run_id: &p.run_id,
                individual_id: p.individual_id,
                generation: p.generation,
                distance: p.objectives.distance,
                energy: p.objectives.energy,
                material: p.objectives.material,
            });
        }
    }
    write_csv(&out_dir.join("fronts.csv"), &fronts)?;

    let mut quantiles = Vec::new();
    for t in &treatments {
        let last = t.curves.iter().filter_map(|c| c.last().map(|&(g, _)| g)).max().unwrap_or(0);
        for g in 0..=last {
            let mut xs: Vec<f64> = t
                .curves
                .iter()
                .filter_map(|c| c.iter().find(|&&(cg, _)| cg == g).map(|&(_, d)| d))
                .collect();
            if xs.is_empty() {
                continue;
            }
            xs.sort_by(f64::total_cmp);
            quantiles.push(QuantileRow {
                treatment: &t.name,
                generation: g,
                runs: xs.len(),
                min: xs[0],
                q25: quantile(&xs, 0.25),
                median: quantile(&xs, 0.5),
                q75: quantile(&xs, 0.75),
                max: xs[xs.len() - 1],
            });
        }
    }
    write_csv(&out_dir.join("fitness_quantiles.csv"), &quantiles)?;

    Ok(AnalysisReport {
        summaries,
        comparisons: comparisons.len(),
    })
}
