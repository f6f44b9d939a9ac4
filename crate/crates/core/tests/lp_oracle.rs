//! The simplex solver against brute-force vertex enumeration.

use mismatch_core::optim::{lp_solve, LinearProgram, LpStatus, SolverConfig};
use proptest::prelude::*;

/// Solves a square system by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
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

/// Maximum of `c.x` over `{x >= 0, A x <= b}` by visiting every basic
/// point; `None` when the region is empty.
fn vertex_max(c: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<f64> {
    let n = c.len();
    let mut all: Vec<(Vec<f64>, f64)> = rows.to_vec();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = -1.0;
        all.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let m = all.len();
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let chosen: Vec<&(Vec<f64>, f64)> = (0..m).filter(|&i| mask >> i & 1 == 1).map(|i| &all[i]).collect();
        let a = chosen.iter().map(|r| r.0.clone()).collect();
        let b = chosen.iter().map(|r| r.1).collect();
        if let Some(x) = solve(a, b) {
            let ok = all
                .iter()
                .all(|(row, rhs)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-7);
            if ok {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<(Vec<f64>, f64)>)> {
    (2usize..=4, 1usize..=3).prop_flat_map(|(n, m)| {
        let c = prop::collection::vec(-5i32..=5, n);
        let rows = prop::collection::vec((prop::collection::vec(-3i32..=3, n), -2i32..=6), m);
        (c, rows).prop_map(move |(c, rows)| {
            let c = c.into_iter().map(f64::from).collect();
            let mut rows: Vec<(Vec<f64>, f64)> = rows
                .into_iter()
                .map(|(r, b)| (r.into_iter().map(f64::from).collect(), f64::from(b)))
                .collect();
            // A box keeps every instance bounded.
            rows.push((vec![1.0; n], 10.0));
            (c, rows)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn simplex_matches_vertex_enumeration((c, rows) in instance()) {
        let mut lp = LinearProgram::new(c.clone());
        for (r, b) in &rows {
            lp.add_le(r.clone(), *b);
        }
        let sol = lp_solve(&lp, &SolverConfig::default()).unwrap();
        match vertex_max(&c, &rows) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(v) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.value - v).abs() < 1e-7, "{} vs {}", sol.value, v);
                prop_assert!(lp.residual(&sol.x) < 1e-8);
                prop_assert!((lp.value_at(&sol.x) - sol.value).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn equality_rows_match_split_inequalities((c, rows) in instance(), k in 0usize..3) {
        // Replace one row by an equality, written for the oracle as two
        // opposite inequalities.
        let k = k % rows.len();
        let mut lp = LinearProgram::new(c.clone());
        let mut split = Vec::new();
        for (i, (r, b)) in rows.iter().enumerate() {
            if i == k {
                lp.add_eq(r.clone(), *b);
                split.push((r.clone(), *b));
                split.push((r.iter().map(|v| -v).collect(), -b));
            } else {
                lp.add_le(r.clone(), *b);
                split.push((r.clone(), *b));
            }
        }
        let sol = lp_solve(&lp, &SolverConfig::default()).unwrap();
        match vertex_max(&c, &split) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(v) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.value - v).abs() < 1e-7, "{} vs {}", sol.value, v);
            }
        }
    }
}
