use proptest::prelude::*;

use voxevo_core::evolution::{dominates, ObjectiveVector};
use voxevo_core::stats::{
    aggregate_pareto, bonferroni_adjust, bootstrap_ci, bootstrap_ci_exhaustive, mann_whitney_u,
    mann_whitney_u_normal, u_statistic, LoggedEval, LoggedRun, Method,
};

/// Exact two-sided p-values for every U, by enumerating which of the n+m
/// ranks belong to the first sample.
fn enumerated_p_table(n: usize, m: usize) -> Vec<f64> {
    let total_bits = n + m;
    let mut counts = vec![0u64; n * m + 1];
    for mask in 0u32..(1 << total_bits) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let mut u = 0;
        let mut b_below = 0;
        for r in 0..total_bits {
            if mask & (1 << r) != 0 {
                u += b_below;
            } else {
                b_below += 1;
            }
        }
        counts[u] += 1;
    }
    let total: u64 = counts.iter().sum();
    (0..=n * m)
        .map(|u| {
            let lower: u64 = counts[..=u].iter().sum();
            let upper: u64 = counts[u..].iter().sum();
            (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
        })
        .collect()
}

fn distinct(values: &[u32]) -> Vec<f64> {
    let mut seen = std::collections::HashSet::new();
    values.iter().filter(|v| seen.insert(**v)).map(|&v| v as f64).collect()
}

#[test]
fn exact_p_matches_enumeration_for_small_samples() {
    for n in 1..=6 {
        for m in 1..=6 {
            let table = enumerated_p_table(n, m);
            // b takes ranks 0..m spread out, a takes the rest in various shifts
            for shift in 0..=(m as i64 + 1) {
                let a: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + shift as f64 + 0.5).collect();
                let b: Vec<f64> = (0..m).map(|j| 2.0 * j as f64).collect();
                let r = mann_whitney_u(&a, &b).unwrap();
                assert_eq!(r.method, Method::ExactEnumeration);
                let want = table[r.u_statistic as usize];
                assert!((r.p_value - want).abs() < 1e-12, "n={n} m={m} U={}", r.u_statistic);
            }
        }
    }
}

#[test]
fn fixed_examples() {
    let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert_eq!(r.u_statistic, 0.0);
    assert!((r.p_value - 2.0 / 6.0).abs() < 1e-15);
    assert_eq!(mann_whitney_u(&[1.0], &[2.0]).unwrap().p_value, 1.0);
    assert_eq!(bootstrap_ci_exhaustive(&[0.0, 1.0], 0.95).unwrap(), (0.0, 1.0));
    assert_eq!(bootstrap_ci(&[3.5, 3.5, 3.5], 0.95, 500, 1).unwrap(), (3.5, 3.5));
    assert_eq!(bonferroni_adjust(&[0.01], 5).unwrap(), vec![0.05]);
    assert_eq!(bonferroni_adjust(&[0.5], 3).unwrap(), vec![1.0]);
    let adj = bonferroni_adjust(&[0.004, 0.02], 10).unwrap();
    assert!((adj[0] - 0.04).abs() < 1e-15 && (adj[1] - 0.2).abs() < 1e-15);
    assert!(bonferroni_adjust(&[0.1, 0.2], 1).is_err());
}

fn point(d: u8, e: u8, m: u8) -> ObjectiveVector {
    ObjectiveVector::new(d as f64 / 4.0, e as f64 / 8.0, m as u32)
}

fn run(id: &str, points: &[ObjectiveVector]) -> LoggedRun {
    LoggedRun {
        run_id: id.to_string(),
        rows: points
            .iter()
            .enumerate()
            .map(|(i, p)| LoggedEval {
                generation: (i / 4) as u32,
                individual_id: i as u64,
                fitness: Some(*p),
            })
            .collect(),
    }
}

#[test]
fn aggregate_examples() {
    let a = [point(8, 1, 2), point(6, 0, 3)];
    let b = [point(1, 7, 9), point(2, 6, 8), point(3, 7, 7)];
    let agg = aggregate_pareto(&[run("a", &a), run("b", &b)]);
    let got: Vec<ObjectiveVector> = agg.iter().map(|p| p.objectives).collect();
    assert_eq!(got, vec![a[0], a[1]]);
    assert!(agg.iter().all(|p| p.run_id == "a"));

    let dup = aggregate_pareto(&[run("x", &a), run("y", &a)]);
    assert_eq!(dup.len(), 2);
    assert!(dup.iter().all(|p| p.run_id == "x"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn u_statistics_are_complementary(a in prop::collection::vec(0u8..20, 1..15), b in prop::collection::vec(0u8..20, 1..15)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        prop_assert_eq!(u_statistic(&a, &b) + u_statistic(&b, &a), (a.len() * b.len()) as f64);
        let p = mann_whitney_u(&a, &b).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn exact_and_normal_agree_at_ten(values in prop::collection::vec(0u32..1_000_000, 40)) {
        let v = distinct(&values);
        prop_assume!(v.len() >= 20);
        let (a, b) = (&v[..10], &v[10..20]);
        let exact = mann_whitney_u(a, b).unwrap();
        prop_assert_eq!(exact.method, Method::ExactEnumeration);
        let approx = mann_whitney_u_normal(a, b).unwrap();
        prop_assert!((exact.p_value - approx.p_value).abs() <= 0.02,
            "exact {} normal {}", exact.p_value, approx.p_value);
    }

    #[test]
    fn bootstrap_is_deterministic_and_ordered(xs in prop::collection::vec(-100.0f64..100.0, 1..30), seed in any::<u64>()) {
        let a = bootstrap_ci(&xs, 0.95, 400, seed).unwrap();
        let b = bootstrap_ci(&xs, 0.95, 400, seed).unwrap();
        prop_assert_eq!(a, b);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= a.0 && a.0 <= a.1 && a.1 <= hi);
    }

    #[test]
    fn aggregate_front_is_the_nondominated_set(
        runs in prop::collection::vec(prop::collection::vec((0u8..8, 0u8..8, 0u8..8), 1..20), 1..4)
    ) {
        let logged: Vec<LoggedRun> = runs
            .iter()
            .enumerate()
            .map(|(k, pts)| run(&format!("r{k}"), &pts.iter().map(|&(d, e, m)| point(d, e, m)).collect::<Vec<_>>()))
            .collect();
        let all: Vec<ObjectiveVector> = logged.iter().flat_map(|r| r.rows.iter().filter_map(|e| e.fitness)).collect();
        let agg = aggregate_pareto(&logged);
        for p in &agg {
            for q in &agg {
                prop_assert!(!dominates(&p.objectives, &q.objectives));
            }
        }
        let mut want: Vec<ObjectiveVector> = Vec::new();
        for p in &all {
            if !all.iter().any(|q| dominates(q, p)) && !want.contains(p) {
                want.push(*p);
            }
        }
        prop_assert_eq!(agg.len(), want.len());
        for w in &want {
            prop_assert!(agg.iter().any(|p| p.objectives == *w));
        }
        for pair in agg.windows(2) {
            prop_assert!(pair[0].objectives.distance >= pair[1].objectives.distance);
        }
    }
}
