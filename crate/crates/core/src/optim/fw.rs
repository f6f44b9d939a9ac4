use serde::Serialize;

use super::lp::{lp_solve, LinearProgram, LpStatus};
use super::SolverConfig;
use crate::error::{Error, Result};

/// A convex function with a gradient, defined on the nonnegative orthant
/// (or at least on the polytope it is minimized over).
pub trait ConvexObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexSolution {
    pub value: f64,
    pub point: Vec<f64>,
    /// Frank-Wolfe gap at `point`; `value - gap` is a certified lower bound.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ConvexSolution {
    pub fn lower_bound(&self) -> f64 {
        self.value - self.gap
    }
}

/// Away-step Frank-Wolfe. The polytope is the feasible set of `polytope`
/// (its objective is ignored). `start`, if given, must be feasible; it
/// joins the active set as an ordinary atom.
///
/// Stops when the Frank-Wolfe gap drops below `cfg.opt_tol`, or after
/// `cfg.max_iters` iterations with `converged = false`.
pub fn min_convex_over_polytope(
    f: &dyn ConvexObjective,
    polytope: &LinearProgram,
    start: Option<Vec<f64>>,
    cfg: &SolverConfig,
) -> Result<ConvexSolution> {
    let n = polytope.num_vars();
    let mut lp = polytope.clone();
    let first = match start {
        Some(x) => {
            if x.len() != n || polytope.residual(&x) > cfg.feas_tol.max(1e-8) {
                return Err(Error::InvalidArgument("start point is not in the polytope".into()));
            }
            x
        }
        None => {
            lp.set_objective(vec![0.0; n]);
            let s = lp_solve(&lp, cfg)?;
            if s.status != LpStatus::Optimal {
                return Err(Error::EmptyPolytope);
            }
            s.x
        }
    };

    let mut atoms: Vec<(Vec<f64>, f64)> = vec![(first.clone(), 1.0)];
    let mut x = first;
    let mut fx = f.value(&x);
    let mut grad = vec![0.0; n];
    let mut gap = f64::INFINITY;
    for it in 1..=cfg.max_iters {
        f.gradient(&x, &mut grad);
        lp.set_objective(grad.iter().map(|g| -g).collect());
        let s = lp_solve(&lp, cfg)?;
        match s.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::EmptyPolytope),
            LpStatus::Unbounded => {
                return Err(Error::InvalidArgument("polytope is unbounded".into()))
            }
        }
        let vertex = s.x;
        gap = dot(&grad, &x) - dot(&grad, &vertex);
        if gap < cfg.opt_tol {
            return Ok(ConvexSolution {
                value: fx,
                point: x,
                gap: gap.max(0.0),
                iterations: it,
                converged: true,
            });
        }

        let (away, away_gap) = atoms
            .iter()
            .enumerate()
            .map(|(k, (a, _))| (k, dot(&grad, a) - dot(&grad, &x)))
            .max_by(|p, q| p.1.total_cmp(&q.1))
            .expect("active set is never empty");
        let use_away = away_gap > gap && atoms.len() > 1;
        let (dir, max_step): (Vec<f64>, f64) = if use_away {
            let w = atoms[away].1;
            let d = x.iter().zip(&atoms[away].0).map(|(xi, ai)| xi - ai).collect();
            (d, w / (1.0 - w))
        } else {
            (vertex.iter().zip(&x).map(|(v, xi)| v - xi).collect(), 1.0)
        };

        let at = |step: f64| -> Vec<f64> { x.iter().zip(&dir).map(|(xi, d)| (xi + step * d).max(0.0)).collect() };
        let mut step = line_search(|s| f.value(&at(s)), max_step);
        if step <= 0.0 && use_away && f.value(&at(max_step)) <= fx + 1e-15 * (1.0 + fx.abs()) {
            // An atom with vanishing weight leaves too short a step for the
            // line search to see; dropping it costs nothing.
            step = max_step;
        }
        if step <= 0.0 {
            // No descent along the chosen direction; the gap is a true bound.
            return Ok(ConvexSolution {
                value: fx,
                point: x,
                gap,
                iterations: it,
                converged: false,
            });
        }
        x = at(step);
        fx = f.value(&x);

        if use_away {
            for (_, w) in atoms.iter_mut() {
                *w *= 1.0 + step;
            }
            atoms[away].1 -= step;
            if step >= max_step * (1.0 - 1e-12) {
                atoms.swap_remove(away);
            }
        } else {
            for (_, w) in atoms.iter_mut() {
                *w *= 1.0 - step;
            }
            if step >= 1.0 - 1e-12 {
                atoms.clear();
                atoms.push((vertex, 1.0));
            } else if let Some(slot) = atoms.iter_mut().find(|(a, _)| same_point(a, &vertex)) {
                slot.1 += step;
            } else {
                atoms.push((vertex, step));
            }
        }
        atoms.retain(|(_, w)| *w > 1e-15);
    }
    Ok(ConvexSolution {
        value: fx,
        point: x,
        gap,
        iterations: cfg.max_iters,
        converged: false,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

/// Golden-section search for the minimizer of a convex `phi` on
/// `[0, hi]`; returns 0 unless some positive step strictly improves.
pub(crate) fn line_search(phi: impl Fn(f64) -> f64, hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let f0 = phi(0.0);
    let (mut lo, mut up) = (0.0, hi);
    let mut a = up - ratio * (up - lo);
    let mut b = lo + ratio * (up - lo);
    let (mut fa, mut fb) = (phi(a), phi(b));
    for _ in 0..80 {
        if up - lo < 1e-13 * hi.max(1.0) {
            break;
        }
        if fa <= fb {
            up = b;
            b = a;
            fb = fa;
            a = up - ratio * (up - lo);
            fa = phi(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (up - lo);
            fb = phi(b);
        }
    }
    let mut best = (0.0, f0);
    for (s, v) in [(a, fa), (b, fb), (hi, phi(hi))] {
        if v < best.1 {
            best = (s, v);
        }
    }
    best.0
}
