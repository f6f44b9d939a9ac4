//! Small dense optimization: a simplex LP solver, Frank-Wolfe over
//! polytopes, and brute-force simplex grids used as test oracles.

mod fw;
mod lp;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub use fw::{min_convex_over_polytope, ConvexObjective, ConvexSolution};
pub use lp::{lp_solve, LinearProgram, LpSolution, LpStatus};

/// Largest grid `grid_minimax_oracle` will walk.
pub const GRID_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Constraint residual accepted as feasible.
    pub feas_tol: f64,
    /// Target optimality gap (nats for rate problems).
    pub opt_tol: f64,
    pub max_iters: usize,
    /// Points per axis for grid searches.
    pub grid_resolution: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-6,
            max_iters: 10_000,
            grid_resolution: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.opt_tol > 0.0) || self.max_iters == 0 || self.grid_resolution < 2 {
            return Err(Error::InvalidArgument(format!("bad solver configuration {self:?}")));
        }
        Ok(())
    }
}

/// Number of compositions of `steps` into `parts` nonnegative parts.
pub fn simplex_grid_size(parts: usize, steps: usize) -> usize {
    // C(steps + parts - 1, parts - 1), saturating.
    let mut n: usize = 1;
    for i in 1..parts {
        n = n.saturating_mul(steps + i) / i;
    }
    n
}

/// All points of the simplex in `parts` dimensions whose coordinates are
/// multiples of `1/steps`, in lexicographic order of the counts.
pub fn simplex_grid(parts: usize, steps: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(simplex_grid_size(parts, steps));
    let mut counts = vec![0usize; parts];
    fn rec(i: usize, left: usize, counts: &mut Vec<usize>, steps: usize, out: &mut Vec<Vec<f64>>) {
        if i + 1 == counts.len() {
            counts[i] = left;
            out.push(counts.iter().map(|&c| c as f64 / steps as f64).collect());
            return;
        }
        for c in (0..=left).rev() {
            counts[i] = c;
            rec(i + 1, left - c, counts, steps, out);
        }
    }
    if parts > 0 {
        rec(0, steps, &mut counts, steps, &mut out);
    }
    out
}

/// `max` over a simplex grid with `resolution` points per axis of an inner
/// value, returning the value and the maximizing grid point.
pub fn grid_minimax_oracle<F>(parts: usize, resolution: usize, inner: F) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if resolution < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points per axis".into()));
    }
    let steps = resolution - 1;
    let size = simplex_grid_size(parts, steps);
    if size > GRID_CAP {
        return Err(Error::SizeCap {
            what: "grid points",
            needed: size,
            cap: GRID_CAP,
        });
    }
    let grid = simplex_grid(parts, steps);
    let values = grid
        .par_iter()
        .map(|p| inner(p))
        .collect::<Result<Vec<f64>>>()?;
    let (k, v) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
    Ok((v, grid[k].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(simplex_grid(2, 100).len(), 101);
        assert_eq!(simplex_grid_size(2, 100), 101);
        assert_eq!(simplex_grid(3, 4).len(), simplex_grid_size(3, 4));
        assert_eq!(simplex_grid_size(3, 4), 15);
        for p in simplex_grid(4, 5) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_counts_inner_solves() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let calls = AtomicUsize::new(0);
        let (v, at) = grid_minimax_oracle(2, 101, |p| {
            calls.fetch_add(1, Ordering::Relaxed);
            Ok(-(p[0] - 0.3).powi(2))
        })
        .unwrap();
        assert_eq!(calls.into_inner(), 101);
        assert!(v.abs() < 1e-12 && (at[0] - 0.3).abs() < 1e-12);
        assert!(matches!(
            grid_minimax_oracle(6, 200, |_| Ok(0.0)),
            Err(Error::SizeCap { .. })
        ));
    }
}
