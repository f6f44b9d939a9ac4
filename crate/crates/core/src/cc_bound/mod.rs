//! Composition-dependent surely-degraded sets and the bound built on them.
//!
//! A channel belongs to `Gamma(q, rho, P)` when no joint law
//! `V(x, y, z, x~)` with both input marginals equal to `P`, `V_XYZ`
//! absolutely continuous w.r.t. `P x channel`, and
//! `E rho(X, Z) <= E rho(X~, Z)` has `E q(X, Y) > E q(X~, Y)`. With additive
//! metrics this is one LP. `Gamma*(q, P)` replaces the `rho` row by
//! `V_XZ = V_X~Z`.
//!
//! Membership depends on the channel only through its support, so for a
//! fixed `P` the bound is a minimum over admissible support patterns, each
//! of which is a polytope handled by the rectangular inner solver.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{AdditiveMetric, SupportPattern};
use crate::optim::{lp_solve, simplex_grid, LinearProgram, LpStatus, SolverConfig};
use crate::prob::{BroadcastChannel, JointPmf, ProbVector, RateValue, StochasticMatrix};
use crate::sd_bound::{minimize_information, BoundConfig, ChannelPolytope};

/// Largest number of free `(x, y, z)` cells whose supports are enumerated.
pub const CC_CELL_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcMembership {
    pub member: bool,
    /// Optimum of the LP; never below zero since the diagonal law is feasible.
    pub lp_value: f64,
    /// A maximizing joint law on `X x Y x Z x X~` when not a member.
    pub witness: Option<JointPmf>,
}

pub fn gamma_cc_membership(
    channel: &BroadcastChannel,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    p: &ProbVector,
    cfg: &SolverConfig,
) -> Result<CcMembership> {
    if rho.inputs() != channel.nx() || rho.outputs() != channel.nz() {
        return Err(Error::DimensionMismatch(format!(
            "rho is {}x{}, channel is {}x{}x{}",
            rho.inputs(),
            rho.outputs(),
            channel.nx(),
            channel.ny(),
            channel.nz()
        )));
    }
    let support = support_of(channel);
    cc_lp(&support, channel.ny(), channel.nz(), q, Some(rho), p.as_slice(), cfg)
}

pub fn gamma_star_membership(
    channel: &BroadcastChannel,
    q: &AdditiveMetric,
    p: &ProbVector,
    cfg: &SolverConfig,
) -> Result<CcMembership> {
    let support = support_of(channel);
    cc_lp(&support, channel.ny(), channel.nz(), q, None, p.as_slice(), cfg)
}

fn support_of(channel: &BroadcastChannel) -> SupportPattern {
    SupportPattern::from_fn(channel.nx(), channel.ny(), channel.nz(), |x, y, z| {
        channel.get(x, y, z) > 0.0
    })
}

/// The membership LP for channels supported exactly on `support`.
pub(crate) fn cc_lp(
    support: &SupportPattern,
    ny: usize,
    nz: usize,
    q: &AdditiveMetric,
    rho: Option<&AdditiveMetric>,
    p: &[f64],
    cfg: &SolverConfig,
) -> Result<CcMembership> {
    let nx = p.len();
    if q.inputs() != nx || q.outputs() != ny || support.dims() != (nx, ny, nz) {
        return Err(Error::DimensionMismatch(format!(
            "q is {}x{}, channel is {:?}, composition has {nx} symbols",
            q.inputs(),
            q.outputs(),
            support.dims()
        )));
    }
    let inputs: Vec<usize> = (0..nx).filter(|&x| p[x] > 0.0).collect();
    let mut vars = Vec::new();
    for &x in &inputs {
        for y in 0..ny {
            for z in 0..nz {
                if support.allows(x, y, z) {
                    for &xt in &inputs {
                        vars.push((x, y, z, xt));
                    }
                }
            }
        }
    }
    let finite = |v: f64, what: &str| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidMetric(format!("{what} score {v} cannot enter a linear program")))
        }
    };
    let mut objective = Vec::with_capacity(vars.len());
    for &(x, y, _, xt) in &vars {
        objective.push(finite(q.get(x, y), "q")? - finite(q.get(xt, y), "q")?);
    }
    let mut lp = LinearProgram::new(objective);
    for &a in &inputs {
        lp.add_eq(vars.iter().map(|v| if v.0 == a { 1.0 } else { 0.0 }).collect(), p[a]);
        lp.add_eq(vars.iter().map(|v| if v.3 == a { 1.0 } else { 0.0 }).collect(), p[a]);
    }
    match rho {
        Some(rho) => {
            let mut row = Vec::with_capacity(vars.len());
            for &(x, _, z, xt) in &vars {
                row.push(finite(rho.get(x, z), "rho")? - finite(rho.get(xt, z), "rho")?);
            }
            lp.add_le(row, 0.0);
        }
        None => {
            for &a in &inputs {
                for z in 0..nz {
                    let row: Vec<f64> = vars
                        .iter()
                        .map(|v| {
                            let mut c = 0.0;
                            if v.0 == a && v.2 == z {
                                c += 1.0;
                            }
                            if v.3 == a && v.2 == z {
                                c -= 1.0;
                            }
                            c
                        })
                        .collect();
                    if row.iter().any(|&c| c != 0.0) {
                        lp.add_eq(row, 0.0);
                    }
                }
            }
        }
    }
    let sol = lp_solve(&lp, cfg)?;
    let value = match sol.status {
        LpStatus::Optimal => sol.value.max(0.0),
        // The program is bounded and the diagonal law is feasible whenever
        // every input in the composition has some support.
        LpStatus::Infeasible => {
            return Err(Error::InvalidArgument(
                "channel has no support for an input of the composition".into(),
            ))
        }
        LpStatus::Unbounded => unreachable!("variables are bounded by the marginals"),
    };
    let scale = 1.0 + q.as_flat().iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let member = value <= cfg.feas_tol * scale;
    let witness = if member {
        None
    } else {
        let mut mass = vec![0.0; nx * ny * nz * nx];
        for (&(x, y, z, xt), &m) in vars.iter().zip(&sol.x) {
            mass[((x * ny + y) * nz + z) * nx + xt] += m;
        }
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|v| *v /= total);
        Some(JointPmf::new(vec![nx, ny, nz, nx], mass)?)
    };
    Ok(CcMembership {
        member,
        lp_value: value,
        witness,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CcBoundResult {
    pub rate: RateValue,
    pub argmax_input: ProbVector,
    pub argmin_channel: BroadcastChannel,
    pub argmin_z_marginal: StochasticMatrix,
    /// The support pattern of the minimizing polytope, `(x, y, z)` order.
    pub pattern: Vec<bool>,
    /// Spacing of the input-law grid; the maximization is exact only up
    /// to this granularity.
    pub grid_step: f64,
    /// Grid points at which no support pattern was admissible.
    pub empty_points: usize,
}

/// `max_P min I(P, P_{Z|X})` over channels in the composition-dependent
/// set with `Y`-marginal `W`, by support enumeration. `nz` fixes the
/// second output alphabet and must match `rho` when one is given; `None`
/// selects `Gamma*`.
pub fn cc_bound_desk(
    w: &StochasticMatrix,
    q: &AdditiveMetric,
    rho: Option<&AdditiveMetric>,
    nz: usize,
    solver: &SolverConfig,
    bound: &BoundConfig,
) -> Result<CcBoundResult> {
    let (nx, ny) = (w.inputs(), w.outputs());
    if q.inputs() != nx || q.outputs() != ny {
        return Err(Error::DimensionMismatch(format!(
            "channel is {nx}x{ny}, q is {}x{}",
            q.inputs(),
            q.outputs()
        )));
    }
    if let Some(r) = rho {
        if r.inputs() != nx || r.outputs() != nz {
            return Err(Error::DimensionMismatch(format!(
                "rho is {}x{}, expected {nx}x{nz}",
                r.inputs(),
                r.outputs()
            )));
        }
    }
    let cells: Vec<(usize, usize, usize)> = (0..nx)
        .flat_map(|x| (0..ny).flat_map(move |y| (0..nz).map(move |z| (x, y, z))))
        .filter(|&(x, y, _)| w.get(x, y) > 0.0)
        .collect();
    if cells.len() > CC_CELL_CAP {
        return Err(Error::SizeCap {
            what: "support cells",
            needed: cells.len(),
            cap: CC_CELL_CAP,
        });
    }
    // Masks that give every (x, y) block of W at least one output, largest
    // first, then lexicographically smallest pattern first.
    let mut masks: Vec<Vec<bool>> = (0u32..(1 << cells.len()))
        .map(|m| {
            let mut flat = vec![false; nx * ny * nz];
            for (i, &(x, y, z)) in cells.iter().enumerate() {
                if m >> i & 1 == 1 {
                    flat[(x * ny + y) * nz + z] = true;
                }
            }
            flat
        })
        .filter(|flat| {
            (0..nx).all(|x| {
                (0..ny).all(|y| w.get(x, y) <= 0.0 || (0..nz).any(|z| flat[(x * ny + y) * nz + z]))
            })
        })
        .collect();
    masks.sort_by(|a, b| {
        let ca = a.iter().filter(|&&v| v).count();
        let cb = b.iter().filter(|&&v| v).count();
        cb.cmp(&ca).then_with(|| a.cmp(b))
    });

    let steps = match nx {
        2 => 50,
        3 => 20,
        _ => 10,
    };
    let grid = simplex_grid(nx, steps);
    let per_point = grid
        .par_iter()
        .map(|p| best_pattern(w, q, rho, p, &masks, nz, solver, bound))
        .collect::<Result<Vec<_>>>()?;

    let mut empty_points = 0;
    let mut best: Option<(usize, PointResult)> = None;
    for (k, r) in per_point.into_iter().enumerate() {
        match r {
            None => empty_points += 1,
            Some(r) => {
                if best.as_ref().is_none_or(|(_, b)| r.value > b.value + 1e-12) {
                    best = Some((k, r));
                }
            }
        }
    }
    let Some((k, r)) = best else {
        return Err(Error::EmptyPolytope);
    };
    Ok(CcBoundResult {
        rate: RateValue::from_nats(r.value),
        argmax_input: ProbVector::new(grid[k].clone())?,
        argmin_channel: r.channel,
        argmin_z_marginal: r.z_marginal,
        pattern: r.pattern,
        grid_step: 1.0 / steps as f64,
        empty_points,
    })
}

struct PointResult {
    value: f64,
    channel: BroadcastChannel,
    z_marginal: StochasticMatrix,
    pattern: Vec<bool>,
}

#[allow(clippy::too_many_arguments)]
fn best_pattern(
    w: &StochasticMatrix,
    q: &AdditiveMetric,
    rho: Option<&AdditiveMetric>,
    p: &[f64],
    masks: &[Vec<bool>],
    nz: usize,
    solver: &SolverConfig,
    bound: &BoundConfig,
) -> Result<Option<PointResult>> {
    let (nx, ny) = (w.inputs(), w.outputs());
    // Only inputs in the support of P matter for membership.
    let restrict = |flat: &[bool]| {
        SupportPattern::from_fn(nx, ny, nz, |x, y, z| p[x] > 0.0 && flat[(x * ny + y) * nz + z])
    };
    let mut admissible: Vec<&Vec<bool>> = Vec::new();
    let mut best: Option<PointResult> = None;
    for mask in masks {
        if admissible.iter().any(|a| is_subset(mask, a)) {
            continue;
        }
        let m = cc_lp(&restrict(mask), ny, nz, q, rho, p, solver)?;
        if !m.member {
            continue;
        }
        admissible.push(mask);
        let pattern = SupportPattern::from_fn(nx, ny, nz, |x, y, z| mask[(x * ny + y) * nz + z]);
        let poly = ChannelPolytope::new(w, &pattern)?;
        let sol = minimize_information(&poly, p, poly.center(), bound.inner_tol, bound.max_inner_iters);
        if best.as_ref().is_none_or(|b| sol.value < b.value - 1e-12) {
            best = Some(PointResult {
                value: sol.value,
                channel: poly.to_channel(&sol.t),
                z_marginal: poly.to_matrix(&sol.v),
                pattern: mask.clone(),
            });
        }
    }
    Ok(best)
}

fn is_subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y)
}
