//! The surely-degraded upper bound
//!
//! `max_P min { I(P, P_{Z|X}) : P_{YZ|X} in Gamma(q, rho), P_{Y|X} = W }`
//!
//! and its special case `rho = q`.
//!
//! Each outer iteration re-solves the inner minimization at the current
//! input law (warm-started), then takes an exponentiated-gradient step on
//! the input law. Two certificates bracket the saddle value:
//!
//! * lower: `I(P_t, V_t) - gap_t`, valid for the current `P_t`;
//! * upper: every `V_k` seen so far gives the linear function
//!   `P -> sum_x P(x) D(V_k(.|x) || Q_k)`, which dominates the inner minimum
//!   for all `P`; the maximum over `P` of their pointwise minimum is a small
//!   LP (Kelley's cutting-plane model).
//!
//! When the ascent stalls, the maximizer of the cutting-plane model is used
//! as the next input law.

pub(crate) mod inner;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{lift_metric, AdditiveMetric, SupportPattern, DEFAULT_TIE_TOL};
use crate::optim::{lp_solve, LinearProgram, LpStatus, SolverConfig};
use crate::prob::{divergence, BroadcastChannel, ProbVector, RateValue, StochasticMatrix};

pub use inner::{minimize_information, ChannelPolytope, InnerSolution};

/// Cuts kept in the cutting-plane model.
const MAX_CUTS: usize = 64;

/// Iterations with negligible progress on the lower bound before a cutting-plane
/// proposal replaces the ascent step.
const STALL_LIMIT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConfig {
    pub tie_tol: f64,
    /// Stop once `upper - lower` (nats) falls below this.
    pub opt_tol: f64,
    pub max_outer_iters: usize,
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    /// Alphabet cap for lifted (k-letter) problems.
    pub size_cap: usize,
    /// Run exactly this many outer iterations instead of stopping on the
    /// bracket; the last one is evaluated at the best input found.
    pub fixed_iters: Option<usize>,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            tie_tol: DEFAULT_TIE_TOL,
            opt_tol: 1e-6,
            max_outer_iters: 2_000,
            inner_tol: 1e-8,
            max_inner_iters: 20_000,
            size_cap: 256,
            fixed_iters: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundResult {
    pub rate: RateValue,
    /// Certified bracket on the saddle value, nats.
    pub lower: f64,
    pub upper: f64,
    pub argmin_channel: BroadcastChannel,
    pub argmin_z_marginal: StochasticMatrix,
    pub argmax_input: ProbVector,
    /// `I(P_t, V_t)` per outer iteration, nats.
    pub trace: Vec<f64>,
}

impl BoundResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// `(t, value in bits)`, one row per outer iteration, `t` from 1.
pub fn export_trace(result: &BoundResult) -> Vec<(usize, f64)> {
    result
        .trace
        .iter()
        .enumerate()
        .map(|(i, &v)| (i + 1, RateValue::from_nats(v).bits()))
        .collect()
}

pub fn sd_bound(
    w: &StochasticMatrix,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    cfg: &BoundConfig,
) -> Result<BoundResult> {
    if q.inputs() != w.inputs() || q.outputs() != w.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}x{}, q is {}x{}",
            w.inputs(),
            w.outputs(),
            q.inputs(),
            q.outputs()
        )));
    }
    let pattern = SupportPattern::from_metrics(q, rho, cfg.tie_tol)?;
    sd_bound_for_pattern(w, &pattern, cfg)
}

/// The bound with `rho = q`.
pub fn kg_bound(w: &StochasticMatrix, q: &AdditiveMetric, cfg: &BoundConfig) -> Result<BoundResult> {
    sd_bound(w, q, q, cfg)
}

/// The bound for the `k`-letter extension with block-additive metrics,
/// normalized per letter.
pub fn sd_bound_k(
    w: &StochasticMatrix,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    k: usize,
    cfg: &BoundConfig,
) -> Result<BoundResult> {
    let wk = w.power(k, cfg.size_cap)?;
    let qk = lift_metric(q, k, cfg.size_cap)?;
    let rk = lift_metric(rho, k, cfg.size_cap)?;
    let mut r = sd_bound(&wk, &qk, &rk, cfg)?;
    let scale = 1.0 / k as f64;
    r.rate = RateValue::from_nats(r.rate.nats() * scale);
    r.lower *= scale;
    r.upper *= scale;
    r.trace.iter_mut().for_each(|v| *v *= scale);
    Ok(r)
}

struct Cut {
    coeffs: Vec<f64>,
}

struct Best {
    lower: f64,
    p: Vec<f64>,
    inner: InnerSolution,
}

/// The saddle value for an explicit support pattern.
pub fn sd_bound_for_pattern(
    w: &StochasticMatrix,
    pattern: &SupportPattern,
    cfg: &BoundConfig,
) -> Result<BoundResult> {
    let poly = ChannelPolytope::new(w, pattern)?;
    let nx = w.inputs();
    let nz = pattern.dims().2;
    let mut p = vec![1.0 / nx as f64; nx];
    let mut t = poly.center();
    let mut trace = Vec::new();
    let mut cuts: Vec<Cut> = Vec::new();
    let mut best: Option<Best> = None;
    let mut upper = f64::INFINITY;
    let mut proposal = p.clone();
    let mut eta: f64 = 1.0;
    let mut stalled = 0;
    let mut last_value = f64::NEG_INFINITY;

    if cfg.fixed_iters == Some(0) {
        return Err(Error::InvalidArgument("fixed iteration count must be positive".into()));
    }
    let rounds = cfg.fixed_iters.unwrap_or(cfg.max_outer_iters);
    for round in 1..=rounds {
        if let (Some(_), true, Some(b)) = (cfg.fixed_iters, round == rounds, best.as_ref()) {
            p = b.p.clone();
            t = b.inner.t.clone();
        }
        let sol = minimize_information(&poly, &p, t, cfg.inner_tol, cfg.max_inner_iters);
        trace.push(sol.value);
        let lower = sol.value - sol.gap;

        cuts.push(Cut {
            coeffs: cut_coefficients(&sol.v, &sol.q, nx, nz),
        });
        if cuts.len() > MAX_CUTS {
            cuts.remove(0);
        }
        if let Some((u, arg)) = cutting_plane_max(&cuts, nx)? {
            if u < upper {
                upper = u;
            }
            proposal = arg;
        }

        let gain = best.as_ref().map_or(f64::INFINITY, |b| lower - b.lower);
        // Gains far below the tolerance count as a stall: the ascent is
        // crawling and the cutting-plane proposal should take over.
        if gain < 0.1 * cfg.opt_tol {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if gain > 1e-12 {
            best = Some(Best {
                lower,
                p: p.clone(),
                inner: sol.clone(),
            });
        }
        let lower_best = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.lower);
        let settled = upper - lower_best < cfg.opt_tol;
        if cfg.fixed_iters.is_some() {
            if round == rounds {
                let b = best.expect("set on the first iteration");
                return Ok(BoundResult {
                    rate: RateValue::from_nats(sol.value),
                    lower: lower_best,
                    upper,
                    argmin_channel: poly.to_channel(&sol.t),
                    argmin_z_marginal: poly.to_matrix(&sol.v),
                    argmax_input: ProbVector::new(b.p)?,
                    trace,
                });
            }
            if settled {
                // Hold the certified iterate; further cutting-plane moves
                // would only revisit inputs already ruled out.
                let b = best.as_ref().expect("set on the first iteration");
                p = b.p.clone();
                t = b.inner.t.clone();
                continue;
            }
        } else if settled {
            let b = best.expect("set on the first iteration");
            let inner = if b.p == p {
                sol
            } else {
                // Finish on the certified iterate so the trace ends at the rate.
                let s = minimize_information(&poly, &b.p, b.inner.t.clone(), cfg.inner_tol, cfg.max_inner_iters);
                trace.push(s.value);
                s
            };
            return Ok(BoundResult {
                rate: RateValue::from_nats(inner.value),
                lower: lower_best,
                upper,
                argmin_channel: poly.to_channel(&inner.t),
                argmin_z_marginal: poly.to_matrix(&inner.v),
                argmax_input: ProbVector::new(b.p)?,
                trace,
            });
        }

        if sol.value < last_value - 1e-12 {
            eta = (eta * 0.5).max(1.0 / 64.0);
        }
        last_value = sol.value;
        t = sol.t.clone();
        if stalled >= STALL_LIMIT {
            stalled = 0;
            p = proposal.clone();
        } else {
            p = ascent_step(&p, &sol.v, &sol.q, nz, eta);
        }
    }
    let lower = best.map_or(0.0, |b| b.lower);
    Err(Error::NonConvergence {
        iterations: cfg.max_outer_iters,
        lower,
        upper,
    })
}

/// `D(V(.|x) || Q~)` per input, with `Q~` the output law mixed slightly
/// toward the average row so that the divergences stay finite.
fn cut_coefficients(v: &[f64], q: &[f64], nx: usize, nz: usize) -> Vec<f64> {
    let mut reference = q.to_vec();
    let needs_mix = (0..nx).any(|x| (0..nz).any(|z| v[x * nz + z] > 0.0 && q[z] <= 0.0));
    if needs_mix {
        let eps = 1e-6;
        for z in 0..nz {
            let mean: f64 = (0..nx).map(|x| v[x * nz + z]).sum::<f64>() / nx as f64;
            reference[z] = (1.0 - eps) * q[z] + eps * mean;
        }
    }
    (0..nx)
        .map(|x| divergence(&v[x * nz..(x + 1) * nz], &reference))
        .collect()
}

/// `max_P min_k sum_x P(x) c_k(x)` as an LP over `(P, s)`.
fn cutting_plane_max(cuts: &[Cut], nx: usize) -> Result<Option<(f64, Vec<f64>)>> {
    let n = nx + 1;
    let mut objective = vec![0.0; n];
    objective[nx] = 1.0;
    let mut lp = LinearProgram::new(objective);
    let mut row = vec![1.0; n];
    row[nx] = 0.0;
    lp.add_eq(row, 1.0);
    for cut in cuts {
        let mut row: Vec<f64> = cut.coeffs.iter().map(|c| -c).collect();
        row.push(1.0);
        lp.add_le(row, 0.0);
    }
    let s = lp_solve(&lp, &SolverConfig::default())?;
    if s.status != LpStatus::Optimal {
        return Ok(None);
    }
    let mut p = s.x[..nx].to_vec();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(Some((s.value, p)))
}

fn ascent_step(p: &[f64], v: &[f64], q: &[f64], nz: usize, eta: f64) -> Vec<f64> {
    let d: Vec<f64> = (0..p.len())
        .map(|x| divergence(&v[x * nz..(x + 1) * nz], q).min(50.0))
        .collect();
    let top = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut next: Vec<f64> = p
        .iter()
        .zip(&d)
        .map(|(px, dx)| px * (eta * (dx - top)).exp())
        .collect();
    let total: f64 = next.iter().sum();
    next.iter_mut().for_each(|v| *v /= total);
    next
}
