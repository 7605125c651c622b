//! Bootstrap intervals, Mann-Whitney U, Bonferroni, and aggregate fronts.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::evolution::{dominates, ObjectiveVector};
use crate::seed::rng_for;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("resample count must be at least 1")]
    NoResamples,
    #[error("confidence level {0} outside (0, 1)")]
    BadLevel(f64),
    #[error("comparison count {m} is smaller than the {len} p-values given")]
    TooFewComparisons { m: usize, len: usize },
}

/// Arithmetic mean, kept inside the sample range despite rounding.
pub fn mean(xs: &[f64]) -> f64 {
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    (xs.iter().sum::<f64>() / xs.len() as f64).clamp(lo, hi)
}

/// Nearest-rank percentile interval of an already computed set of statistics.
pub fn percentile_interval(stats: &mut [f64], level: f64) -> (f64, f64) {
    stats.sort_by(f64::total_cmp);
    let b = stats.len();
    let alpha = 1.0 - level;
    let lo = ((alpha / 2.0) * b as f64).floor() as usize;
    let hi = (((1.0 - alpha / 2.0) * b as f64).ceil() as usize).clamp(1, b) - 1;
    (stats[lo.min(b - 1)], stats[hi.max(lo.min(b - 1))])
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_ci(samples: &[f64], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64), StatsError> {
    check_inputs(samples, level)?;
    if resamples == 0 {
        return Err(StatsError::NoResamples);
    }
    let n = samples.len();
    let mut rng = rng_for(&[seed, n as u64, resamples as u64]);
    let mut draw = vec![0.0; n];
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            draw.iter_mut().for_each(|d| *d = samples[rng.gen_range(0..n)]);
            mean(&draw)
        })
        .collect();
    Ok(percentile_interval(&mut means, level))
}

/// The same interval computed over all nⁿ ordered resamples instead of
/// random draws. Only feasible for tiny samples.
pub fn bootstrap_ci_exhaustive(samples: &[f64], level: f64) -> Result<(f64, f64), StatsError> {
    check_inputs(samples, level)?;
    let n = samples.len();
    let total = n.checked_pow(n as u32).filter(|&t| t <= 1 << 24).expect("sample too large for exhaustive bootstrap");
    let mut means = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    let mut draw = vec![0.0; n];
    for _ in 0..total {
        draw.iter_mut().zip(&idx).for_each(|(d, &i)| *d = samples[i]);
        means.push(mean(&draw));
        for d in idx.iter_mut() {
            *d += 1;
            if *d < n {
                break;
            }
            *d = 0;
        }
    }
    Ok(percentile_interval(&mut means, level))
}

fn check_inputs(samples: &[f64], level: f64) -> Result<(), StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::BadLevel(level));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ExactEnumeration,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub u_statistic: f64,
    pub p_value: f64,
    /// Equal to `p_value` until [`TestResult::adjusted`] is applied.
    pub adjusted_p: f64,
    pub method: Method,
}

impl TestResult {
    pub fn adjusted(mut self, comparisons: usize) -> Self {
        self.adjusted_p = (self.p_value * comparisons.max(1) as f64).min(1.0);
        self
    }
}

/// Largest sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 12;

/// U = Σᵢⱼ [aᵢ > bⱼ] + ½[aᵢ = bⱼ].
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .map(|&x| {
            b.iter()
                .map(|&y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 })
                .sum::<f64>()
        })
        .sum()
}

/// Two-sided Mann-Whitney U test of `a` against `b`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let u = u_statistic(a, b);
    let (n, m) = (a.len(), b.len());
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let tie_sizes = tie_groups(&pooled);
    let tied = tie_sizes.iter().any(|&t| t > 1);

    let (p, method) = if n <= EXACT_LIMIT && m <= EXACT_LIMIT && !tied {
        (exact_p(u, n, m), Method::ExactEnumeration)
    } else {
        (normal_p(u, n, m, &tie_sizes), Method::NormalApproximation)
    };
    Ok(TestResult {
        u_statistic: u,
        p_value: p,
        adjusted_p: p,
        method,
    })
}

/// The normal approximation regardless of sample size or ties.
pub fn mann_whitney_u_normal(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let u = u_statistic(a, b);
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let p = normal_p(u, a.len(), b.len(), &tie_groups(&pooled));
    Ok(TestResult {
        u_statistic: u,
        p_value: p,
        adjusted_p: p,
        method: Method::NormalApproximation,
    })
}

fn tie_groups(sorted: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

/// Number of arrangements of n and m distinct values giving each U, by the
/// recurrence c(n, m, u) = c(n−1, m, u−m) + c(n, m−1, u).
fn u_distribution(n: usize, m: usize) -> Vec<f64> {
    let max_u = n * m;
    // table[j] holds counts for the current i (a-count) and j (b-count)
    let mut prev: Vec<Vec<f64>> = (0..=m).map(|_| vec![1.0]).collect();
    for i in 1..=n {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        cur.push(vec![1.0]);
        for j in 1..=m {
            let len = i * j + 1;
            let mut c = vec![0.0; len];
            for (u, slot) in c.iter_mut().enumerate() {
                let from_a = if u >= j { prev[j].get(u - j).copied().unwrap_or(0.0) } else { 0.0 };
                let from_b = cur[j - 1].get(u).copied().unwrap_or(0.0);
                *slot = from_a + from_b;
            }
            cur.push(c);
        }
        prev = cur;
    }
    let mut dist = prev.swap_remove(m);
    dist.resize(max_u + 1, 0.0);
    dist
}

fn exact_p(u: f64, n: usize, m: usize) -> f64 {
    let dist = u_distribution(n, m);
    let total: f64 = dist.iter().sum();
    let k = u.round() as usize;
    let lower: f64 = dist[..=k].iter().sum();
    let upper: f64 = dist[k..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(u: f64, n: usize, m: usize, ties: &[usize]) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let big_n = nf + mf;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    let var = nf * mf / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - nf * mf / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// pᵢ ↦ min(1, m·pᵢ).
pub fn bonferroni_adjust(p_values: &[f64], m: usize) -> Result<Vec<f64>, StatsError> {
    if m < p_values.len() {
        return Err(StatsError::TooFewComparisons { m, len: p_values.len() });
    }
    Ok(p_values.iter().map(|&p| (m as f64 * p).min(1.0)).collect())
}

/// A member of an aggregate front, traceable to its log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub objectives: ObjectiveVector,
    pub run_id: String,
    pub individual_id: u64,
    pub generation: u32,
}

/// One logged evaluation, reduced to what aggregation needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedEval {
    pub generation: u32,
    pub individual_id: u64,
    pub fitness: Option<ObjectiveVector>,
}

/// Logged evaluations of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRun {
    pub run_id: String,
    pub rows: Vec<LoggedEval>,
}

/// Nondominated set of every feasible evaluation across `runs`. Identical
/// objective vectors collapse onto the first occurrence; output is sorted by
/// distance descending.
pub fn aggregate_pareto(runs: &[LoggedRun]) -> Vec<ParetoPoint> {
    let mut archive: Vec<ParetoPoint> = Vec::new();
    for run in runs {
        for row in &run.rows {
            let Some(obj) = row.fitness else { continue };
            if archive
                .iter()
                .any(|p| p.objectives == obj || dominates(&p.objectives, &obj))
            {
                continue;
            }
            archive.retain(|p| !dominates(&obj, &p.objectives));
            archive.push(ParetoPoint {
                objectives: obj,
                run_id: run.run_id.clone(),
                individual_id: row.individual_id,
                generation: row.generation,
            });
        }
    }
    archive.sort_by(|a, b| {
        b.objectives
            .distance
            .total_cmp(&a.objectives.distance)
            .then(a.objectives.energy.total_cmp(&b.objectives.energy))
            .then(a.objectives.material.cmp(&b.objectives.material))
    });
    archive
}

/// Linear-interpolation quantile of `sorted` (ascending) at `q ∈ [0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_bootstrap() {
        assert_eq!(bootstrap_ci(&[2.5; 3], 0.95, 1000, 1).unwrap(), (2.5, 2.5));
        assert_eq!(bootstrap_ci_exhaustive(&[0.0, 1.0], 0.95).unwrap(), (0.0, 1.0));
        assert_eq!(bootstrap_ci(&[1.0, 5.0, 2.0], 0.95, 500, 9), bootstrap_ci(&[1.0, 5.0, 2.0], 0.95, 500, 9));
        assert_eq!(bootstrap_ci(&[], 0.95, 10, 0), Err(StatsError::EmptySample));
    }

    #[test]
    fn mann_whitney_examples() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u_statistic, 0.0);
        assert!((r.p_value - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.method, Method::ExactEnumeration);
        let r = mann_whitney_u(&[1.0], &[2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = mann_whitney_u(&[1.0, 1.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(r.method, Method::NormalApproximation);
        assert_eq!(r.u_statistic + u_statistic(&[1.0, 3.0], &[1.0, 1.0, 2.0]), 6.0);
    }

    #[test]
    fn distribution_counts() {
        let d = u_distribution(2, 2);
        assert_eq!(d, vec![1.0, 1.0, 2.0, 1.0, 1.0]);
        let d = u_distribution(12, 12);
        assert_eq!(d.iter().sum::<f64>(), 2_704_156.0);
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni_adjust(&[0.5], 3).unwrap(), vec![1.0]);
        let adj = bonferroni_adjust(&[0.004, 0.02], 10).unwrap();
        assert!((adj[0] - 0.04).abs() < 1e-15 && (adj[1] - 0.2).abs() < 1e-15);
        assert!(bonferroni_adjust(&[0.1, 0.2], 1).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }
}
