//! Achievable rates for a fixed decoding metric.
//!
//! Both rates minimize `D(P~ || Q x P_Y)` over joint laws `P~` on `X x Y`
//! with `P~_Y = P_Y` and `E_{P~} q >= E_P q`, where `P = Q x W`. The LM
//! rate adds `P~_X = Q`, under which the divergence equals `I_{P~}(X;Y)`.
//! The constraint set is a polytope, so both are solved by Frank-Wolfe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::AdditiveMetric;
use crate::optim::{min_convex_over_polytope, simplex_grid, ConvexObjective, LinearProgram, SolverConfig};
use crate::prob::{ProbVector, RateValue, StochasticMatrix};

/// Restarts for the ascent used on input alphabets above three symbols.
const ASCENT_STARTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Gmi,
    Lm,
}

struct Divergence {
    /// `(x, y, reference mass)` per variable.
    cells: Vec<(usize, usize, f64)>,
}

impl ConvexObjective for Divergence {
    fn value(&self, t: &[f64]) -> f64 {
        self.cells
            .iter()
            .zip(t)
            .filter(|(_, &m)| m > 0.0)
            .map(|(&(_, _, r), &m)| m * (m / r).ln())
            .sum()
    }

    fn gradient(&self, t: &[f64], g: &mut [f64]) {
        for ((gi, &(_, _, r)), &m) in g.iter_mut().zip(&self.cells).zip(t) {
            *gi = (m.max(1e-300) / r).ln() + 1.0;
        }
    }
}

fn check(w: &StochasticMatrix, q: &AdditiveMetric, input: &ProbVector) -> Result<()> {
    if q.inputs() != w.inputs() || q.outputs() != w.outputs() || input.len() != w.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "channel {}x{}, metric {}x{}, input law of {} symbols",
            w.inputs(),
            w.outputs(),
            q.inputs(),
            q.outputs(),
            input.len()
        )));
    }
    Ok(())
}

fn rate(kind: Kind, w: &StochasticMatrix, q: &AdditiveMetric, input: &[f64], cfg: &SolverConfig) -> Result<f64> {
    let (nx, ny) = (w.inputs(), w.outputs());
    let py = w.output_distribution(input);
    let target: f64 = (0..nx)
        .flat_map(|x| (0..ny).map(move |y| (x, y)))
        .filter(|&(x, y)| input[x] * w.get(x, y) > 0.0)
        .map(|(x, y)| input[x] * w.get(x, y) * q.get(x, y))
        .sum();
    // A true law with mass on a -inf score makes the metric row vacuous.
    let metric_row = target.is_finite();

    let mut cells = Vec::new();
    let mut start = Vec::new();
    for x in 0..nx {
        for y in 0..ny {
            let r = input[x] * py[y];
            if r <= 0.0 || (metric_row && q.get(x, y) == f64::NEG_INFINITY) {
                continue;
            }
            cells.push((x, y, r));
            start.push(input[x] * w.get(x, y));
        }
    }
    let n = cells.len();
    let mut lp = LinearProgram::feasibility(n);
    for y in 0..ny {
        if py[y] > 0.0 {
            let row = cells.iter().map(|c| if c.1 == y { 1.0 } else { 0.0 }).collect();
            lp.add_eq(row, py[y]);
        }
    }
    if kind == Kind::Lm {
        for x in 0..nx {
            if input[x] > 0.0 {
                let row = cells.iter().map(|c| if c.0 == x { 1.0 } else { 0.0 }).collect();
                lp.add_eq(row, input[x]);
            }
        }
    }
    if metric_row {
        let row = cells.iter().map(|c| -q.get(c.0, c.1)).collect();
        lp.add_le(row, -target);
    }
    let f = Divergence { cells };
    // The true joint law is feasible; round-off in the metric row is
    // absorbed by the start-point tolerance.
    let sol = min_convex_over_polytope(&f, &lp, Some(start), cfg)?;
    Ok(sol.value.max(0.0))
}

/// The GMI at input law `input`, in nats.
pub fn gmi_rate(w: &StochasticMatrix, q: &AdditiveMetric, input: &ProbVector, cfg: &SolverConfig) -> Result<RateValue> {
    check(w, q, input)?;
    rate(Kind::Gmi, w, q, input.as_slice(), cfg).map(RateValue::from_nats)
}

/// The LM rate at input law `input`, in nats.
pub fn lm_rate(w: &StochasticMatrix, q: &AdditiveMetric, input: &ProbVector, cfg: &SolverConfig) -> Result<RateValue> {
    check(w, q, input)?;
    rate(Kind::Lm, w, q, input.as_slice(), cfg).map(RateValue::from_nats)
}

pub fn gmi_rate_max(w: &StochasticMatrix, q: &AdditiveMetric, cfg: &SolverConfig) -> Result<(RateValue, ProbVector)> {
    maximize(Kind::Gmi, w, q, cfg)
}

/// The LM rate maximized over input laws: an exhaustive grid (step 1/200
/// for two inputs, 1/50 for three) refined by two zoomed local grids, or a
/// seeded multi-start ascent for larger alphabets.
pub fn lm_rate_max(w: &StochasticMatrix, q: &AdditiveMetric, cfg: &SolverConfig) -> Result<(RateValue, ProbVector)> {
    maximize(Kind::Lm, w, q, cfg)
}

fn maximize(kind: Kind, w: &StochasticMatrix, q: &AdditiveMetric, cfg: &SolverConfig) -> Result<(RateValue, ProbVector)> {
    check(w, q, &ProbVector::uniform(w.inputs()))?;
    let nx = w.inputs();
    let eval = |p: &[f64]| rate(kind, w, q, p, cfg);
    let (mut best_p, mut best) = match nx {
        1 => (vec![1.0], eval(&[1.0])?),
        2 | 3 => {
            let steps = if nx == 2 { 200 } else { 50 };
            let (p, v) = best_of(simplex_grid(nx, steps), &eval)?;
            let mut p = p;
            let mut v = v;
            let mut radius = 1.0 / steps as f64;
            for _ in 0..2 {
                let local = local_grid(&p, radius, 10);
                let (lp, lv) = best_of(local, &eval)?;
                if lv > v {
                    p = lp;
                    v = lv;
                }
                radius /= 5.0;
            }
            (p, v)
        }
        _ => multistart_ascent(nx, &eval)?,
    };
    best = best.max(0.0);
    let total: f64 = best_p.iter().sum();
    best_p.iter_mut().for_each(|v| *v /= total);
    Ok((RateValue::from_nats(best), ProbVector::new(best_p)?))
}

fn best_of(points: Vec<Vec<f64>>, eval: &(dyn Fn(&[f64]) -> Result<f64> + Sync)) -> Result<(Vec<f64>, f64)> {
    let values = points.par_iter().map(|p| eval(p)).collect::<Result<Vec<f64>>>()?;
    let (k, v) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (k, &v)| if v > b.1 { (k, v) } else { b });
    Ok((points[k].clone(), v))
}

/// Points `center + radius * (d / steps)` on the simplex for every integer
/// displacement `d` summing to zero with `|d_i| <= steps`.
fn local_grid(center: &[f64], radius: f64, steps: i64) -> Vec<Vec<f64>> {
    let n = center.len();
    let mut out = Vec::new();
    let mut d = vec![0i64; n];
    fn rec(i: usize, d: &mut Vec<i64>, steps: i64, center: &[f64], radius: f64, out: &mut Vec<Vec<f64>>) {
        let n = d.len();
        if i + 1 == n {
            let s: i64 = d[..n - 1].iter().sum();
            if s.abs() > steps {
                return;
            }
            d[n - 1] = -s;
            let p: Vec<f64> = center
                .iter()
                .zip(d.iter())
                .map(|(c, &k)| c + radius * k as f64 / steps as f64)
                .collect();
            if p.iter().all(|&v| v >= -1e-12) {
                // Round-off residue would otherwise create reference cells of
                // mass ~1e-18 that stall the inner solver.
                out.push(p.into_iter().map(|v| if v < 1e-12 { 0.0 } else { v }).collect());
            }
            return;
        }
        for k in -steps..=steps {
            d[i] = k;
            rec(i + 1, d, steps, center, radius, out);
        }
    }
    rec(0, &mut d, steps, center, radius, &mut out);
    out
}

fn multistart_ascent(nx: usize, eval: &(dyn Fn(&[f64]) -> Result<f64> + Sync)) -> Result<(Vec<f64>, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let mut starts = vec![vec![1.0 / nx as f64; nx]];
    for _ in 1..ASCENT_STARTS {
        let raw: Vec<f64> = (0..nx).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
        let t: f64 = raw.iter().sum();
        starts.push(raw.into_iter().map(|v| v / t).collect());
    }
    let runs = starts
        .into_par_iter()
        .map(|p| pairwise_ascent(p, eval))
        .collect::<Result<Vec<_>>>()?;
    Ok(runs
        .into_iter()
        .fold((vec![], f64::NEG_INFINITY), |b, r| if r.1 > b.1 { r } else { b }))
}

/// Moves mass between pairs of inputs, halving the step when no move helps.
fn pairwise_ascent(mut p: Vec<f64>, eval: &(dyn Fn(&[f64]) -> Result<f64> + Sync)) -> Result<(Vec<f64>, f64)> {
    let n = p.len();
    let mut v = eval(&p)?;
    let mut step: f64 = 0.1;
    while step > 1e-4 {
        let mut moved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || p[j] <= 0.0 {
                    continue;
                }
                let s = step.min(p[j]);
                let mut cand = p.clone();
                cand[i] += s;
                cand[j] -= s;
                let cv = eval(&cand)?;
                if cv > v + 1e-12 {
                    p = cand;
                    v = cv;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((p, v))
}
