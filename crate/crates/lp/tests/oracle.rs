//! Simplex results against brute-force vertex enumeration and, when SciPy is
//! available, against HiGHS through the external-solver adapter.

use std::path::PathBuf;
use std::process::Command;

use flexenv_lp::{
    Direction, ExternalSolver, LinExpr, LpModel, LpSolver, LpStatus, Sense, SimplexSolver,
};
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct SmallLp {
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<(Vec<f64>, Sense, f64)>,
    cost: Vec<f64>,
}

fn build(lp: &SmallLp, lazy: bool) -> LpModel {
    let mut m = LpModel::new(Direction::Maximize);
    let vars: Vec<_> = (0..lp.n)
        .map(|j| m.add_variable(lp.lower[j], lp.upper[j]).unwrap())
        .collect();
    for (a, sense, b) in &lp.rows {
        let mut e = LinExpr::new();
        for (j, &c) in a.iter().enumerate() {
            e.add_term(vars[j], c);
        }
        if lazy {
            m.add_lazy_constraint(e, *sense, *b).unwrap();
        } else {
            m.add_constraint(e, *sense, *b).unwrap();
        }
    }
    let mut obj = LinExpr::new();
    for (j, &c) in lp.cost.iter().enumerate() {
        obj.add_term(vars[j], c);
    }
    m.set_objective(Direction::Maximize, obj).unwrap();
    m
}

/// Gaussian elimination on a tiny dense system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Best objective over all basic feasible points, `None` when infeasible.
fn enumerate_vertices(lp: &SmallLp) -> Option<f64> {
    let n = lp.n;
    let mut planes: Vec<(Vec<f64>, f64)> = lp.rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-8;
        (0..n).all(|j| x[j] >= lp.lower[j] - tol && x[j] <= lp.upper[j] + tol)
            && lp.rows.iter().all(|(a, s, b)| {
                let act: f64 = a.iter().zip(x).map(|(c, v)| c * v).sum();
                match s {
                    Sense::Le => act <= b + tol,
                    Sense::Ge => act >= b - tol,
                    Sense::Eq => (act - b).abs() <= tol,
                }
            })
    };
    let mut best: Option<f64> = None;
    let k = planes.len();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_dense(a, b) {
            if feasible(&x) {
                let v: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn small_lp() -> impl Strategy<Value = SmallLp> {
    (2usize..=3).prop_flat_map(|n| {
        let coef = -5i32..=5;
        (
            prop::collection::vec((-4i32..=0, 1i32..=4), n),
            prop::collection::vec(
                (prop::collection::vec(coef.clone(), n), 0u8..3, -6i32..=8),
                1..=4,
            ),
            prop::collection::vec(coef, n),
        )
            .prop_map(move |(bounds, rows, cost)| SmallLp {
                n,
                lower: bounds.iter().map(|b| b.0 as f64).collect(),
                upper: bounds.iter().map(|b| b.1 as f64).collect(),
                rows: rows
                    .into_iter()
                    .map(|(a, s, b)| {
                        let sense = match s {
                            0 => Sense::Le,
                            1 => Sense::Ge,
                            _ => Sense::Eq,
                        };
                        (a.into_iter().map(f64::from).collect(), sense, f64::from(b))
                    })
                    .collect(),
                cost: cost.into_iter().map(f64::from).collect(),
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_vertex_enumeration(lp in small_lp()) {
        let oracle = enumerate_vertices(&lp);
        for lazy in [false, true] {
            let model = build(&lp, lazy);
            let sol = SimplexSolver::default().solve(&model).unwrap();
            match oracle {
                None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
                Some(best) => {
                    prop_assert_eq!(sol.status, LpStatus::Optimal);
                    prop_assert!((sol.objective_value - best).abs() <= 1e-7 * (1.0 + best.abs()),
                        "simplex {} vs oracle {}", sol.objective_value, best);
                    prop_assert!(model.max_violation(&sol.primal) <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn solves_are_bit_identical(lp in small_lp()) {
        let model = build(&lp, false);
        let a = SimplexSolver::default().solve(&model).unwrap();
        let b = SimplexSolver::default().solve(&model).unwrap();
        prop_assert_eq!(a.status, b.status);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.primal), bits(&b.primal));
    }
}

fn highs_script() -> Option<PathBuf> {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts/highs_solve.py");
    let ok = Command::new("python3")
        .args(["-c", "import scipy.optimize"])
        .status()
        .map(|s| s.success())
        .unwrap_or(false);
    (ok && script.exists()).then_some(script)
}

/// Deterministic pseudo-random medium LPs (LCG, no external RNG needed).
fn medium_lp(seed: u64) -> SmallLp {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as f64) / ((1u64 << 31) as f64)
    };
    let n = 25;
    let lower: Vec<f64> = (0..n).map(|_| -10.0 * next()).collect();
    let upper: Vec<f64> = (0..n).map(|_| 1.0 + 10.0 * next()).collect();
    let rows = (0..40)
        .map(|i| {
            let a: Vec<f64> = (0..n)
                .map(|_| if next() < 0.3 { 4.0 * next() - 2.0 } else { 0.0 })
                .collect();
            let sense = match i % 5 {
                0 => Sense::Ge,
                1 => Sense::Eq,
                _ => Sense::Le,
            };
            let rhs = if sense == Sense::Eq { 0.0 } else { 5.0 * next() - 1.0 };
            (a, sense, rhs)
        })
        .collect();
    let cost = (0..n).map(|_| 2.0 * next() - 1.0).collect();
    SmallLp { n, lower, upper, rows, cost }
}

#[test]
fn agrees_with_highs_on_random_battery() {
    let Some(script) = highs_script() else {
        eprintln!("python3 with scipy not available; skipping external cross-check");
        return;
    };
    let external = ExternalSolver::new(script);
    let mut optimal = 0;
    for seed in 0..15 {
        let model = build(&medium_lp(seed), false);
        let ours = SimplexSolver::default().solve(&model).unwrap();
        let theirs = external.solve(&model).unwrap();
        assert_eq!(ours.status, theirs.status, "seed {seed}");
        if ours.status == LpStatus::Optimal {
            optimal += 1;
            let rel = (ours.objective_value - theirs.objective_value).abs()
                / (1.0 + theirs.objective_value.abs());
            assert!(rel <= 1e-6, "seed {seed}: {} vs {}", ours.objective_value, theirs.objective_value);
        }
    }
    assert!(optimal >= 5, "battery should mostly be feasible, got {optimal}");
}
