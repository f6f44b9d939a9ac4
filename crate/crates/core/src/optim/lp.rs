use serde::Serialize;

use super::SolverConfig;
use crate::error::{Error, Result};

/// Pivot entries smaller than this are treated as zero.
const PIVOT_EPS: f64 = 1e-11;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Eq,
    Le,
}

/// `maximize c.x` subject to linear rows and `x >= 0`.
///
/// Inequality rows get a private slack column when the program is solved;
/// solutions only report the structural variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, RowKind, f64)>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    /// A program with `n` variables and a zero objective.
    pub fn feasibility(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) {
        assert_eq!(objective.len(), self.objective.len());
        self.objective = objective;
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.num_vars(), "row length");
        self.rows.push((row, RowKind::Eq, rhs));
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.num_vars(), "row length");
        self.rows.push((row, RowKind::Le, rhs));
    }

    /// Largest violation of the rows and of nonnegativity at `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for (row, kind, rhs) in &self.rows {
            let lhs: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match kind {
                RowKind::Eq => (lhs - rhs).abs(),
                RowKind::Le => (lhs - rhs).max(0.0),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective at `x`; `+inf` when unbounded, `NaN` when infeasible.
    pub value: f64,
    pub x: Vec<f64>,
    /// Phase-one residual (sum of artificials) at the end of phase one.
    pub infeasibility: f64,
    pub pivots: usize,
}

/// Two-phase dense tableau simplex with Dantzig pricing and a fallback to
/// Bland's rule on degenerate stalls.
pub fn lp_solve(lp: &LinearProgram, cfg: &SolverConfig) -> Result<LpSolution> {
    let n = lp.num_vars();
    if let Some(bad) = lp.rows.iter().find(|(_, _, rhs)| !rhs.is_finite()) {
        return Err(Error::InvalidArgument(format!("right-hand side {} is not finite", bad.2)));
    }
    let slacks = lp.rows.iter().filter(|r| r.1 == RowKind::Le).count();
    let m = lp.rows.len();
    let cols = n + slacks;

    // Standard form A x = b with b >= 0.
    let mut a = vec![vec![0.0; cols]; m];
    let mut b = vec![0.0; m];
    let mut s = n;
    for (i, (row, kind, rhs)) in lp.rows.iter().enumerate() {
        a[i][..n].copy_from_slice(row);
        if *kind == RowKind::Le {
            a[i][s] = 1.0;
            s += 1;
        }
        b[i] = *rhs;
        if b[i] < 0.0 {
            a[i].iter_mut().for_each(|v| *v = -*v);
            b[i] = -b[i];
        }
    }
    let mut c = vec![0.0; cols];
    c[..n].copy_from_slice(&lp.objective);

    let mut t = Tableau::new(a, b, cfg.max_iters);
    let infeasibility = t.phase_one()?;
    if infeasibility > cfg.feas_tol {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            value: f64::NAN,
            x: vec![0.0; n],
            infeasibility,
            pivots: t.pivots,
        });
    }
    t.drop_artificials();
    let bounded = t.optimize(&c)?;
    let mut x = t.primal();
    x.truncate(n);
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    let (status, value) = if bounded {
        (LpStatus::Optimal, lp.value_at(&x))
    } else {
        (LpStatus::Unbounded, f64::INFINITY)
    };
    Ok(LpSolution {
        status,
        value,
        x,
        infeasibility,
        pivots: t.pivots,
    })
}

struct Tableau {
    /// `m` constraint rows of width `cols + 1`, the last entry being the rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Number of real (non-artificial) columns.
    real: usize,
    /// Total columns, artificials included.
    width: usize,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn new(a: Vec<Vec<f64>>, b: Vec<f64>, max_pivots: usize) -> Self {
        let m = a.len();
        let real = a.first().map_or(0, Vec::len);
        let width = real + m;
        let rows = a
            .into_iter()
            .zip(b)
            .enumerate()
            .map(|(i, (mut row, rhs))| {
                row.resize(width, 0.0);
                row[real + i] = 1.0;
                row.push(rhs);
                row
            })
            .collect();
        Self {
            rows,
            basis: (real..width).collect(),
            real,
            width,
            pivots: 0,
            max_pivots,
        }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn phase_one(&mut self) -> Result<f64> {
        let mut cost = vec![0.0; self.width];
        cost[self.real..].iter_mut().for_each(|v| *v = -1.0);
        self.optimize_over(&cost, self.width)?;
        Ok((0..self.rows.len())
            .filter(|&i| self.basis[i] >= self.real)
            .map(|i| self.rhs(i))
            .sum())
    }

    /// Pivots artificials out of the basis; rows where that is impossible
    /// are linearly dependent and get removed.
    fn drop_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.real {
                let col = (0..self.real)
                    .filter(|&j| self.rows[i][j].abs() > 1e-9)
                    .max_by(|&p, &q| self.rows[i][p].abs().total_cmp(&self.rows[i][q].abs()));
                match col {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for row in &mut self.rows {
            let rhs = row[self.width];
            row.truncate(self.real);
            row.push(rhs);
        }
        self.width = self.real;
    }

    fn optimize(&mut self, c: &[f64]) -> Result<bool> {
        self.optimize_over(c, self.real)
    }

    /// Maximizes `c.x`, entering only columns below `enter_limit`.
    /// Returns `false` when unbounded.
    fn optimize_over(&mut self, c: &[f64], enter_limit: usize) -> Result<bool> {
        let mut bland = false;
        let mut degenerate_run = 0;
        loop {
            let reduced = self.reduced_costs(c);
            let entering = if bland {
                (0..enter_limit).find(|&j| reduced[j] > PIVOT_EPS)
            } else {
                (0..enter_limit)
                    .filter(|&j| reduced[j] > PIVOT_EPS)
                    .max_by(|&p, &q| reduced[p].total_cmp(&reduced[q]))
            };
            let Some(j) = entering else {
                return Ok(true);
            };
            let Some(i) = self.ratio_test(j, bland) else {
                return Ok(false);
            };
            if self.rhs(i) <= PIVOT_EPS {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_LIMIT {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            if self.pivots >= self.max_pivots {
                return Err(Error::LpIterationCap(self.max_pivots));
            }
            self.pivot(i, j);
        }
    }

    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = c[..self.width].to_vec();
        for (row, &bj) in self.rows.iter().zip(&self.basis) {
            let cb = c[bj];
            if cb != 0.0 {
                for (rj, a) in r.iter_mut().zip(row) {
                    *rj -= cb * a;
                }
            }
        }
        for &bj in &self.basis {
            r[bj] = 0.0;
        }
        r
    }

    fn ratio_test(&self, j: usize, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = row[j];
            if a <= PIVOT_EPS {
                continue;
            }
            let ratio = row[self.width].max(0.0) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((k, r)) => {
                    let tie = (ratio - r).abs() <= 1e-12 * (1.0 + r.abs());
                    let better = if tie {
                        if bland {
                            self.basis[i] < self.basis[k]
                        } else {
                            a > self.rows[k][j]
                        }
                    } else {
                        ratio < r
                    };
                    if better {
                        Some((i, ratio))
                    } else {
                        Some((k, r))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, i: usize, j: usize) {
        self.pivots += 1;
        let p = self.rows[i][j];
        self.rows[i].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[i].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == i {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        self.basis[i] = j;
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.width];
        for (i, &bj) in self.basis.iter().enumerate() {
            x[bj] = self.rhs(i);
        }
        x
    }
}
