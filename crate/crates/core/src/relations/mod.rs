//! Superiority and isomorphism between channel-metric pairs.
//!
//! `(W1, q)` is superior to `(W2, rho)` when some broadcast channel with
//! marginals `W1` and `W2` is surely degraded for `(q, rho)`. Since the set
//! is described by a support pattern, existence splits into one
//! transportation problem per input.

use rayon::prelude::*;
use serde::Serialize;

use crate::cc_bound::{cc_lp, CC_CELL_CAP};
use crate::error::{Error, Result};
use crate::metric::{gamma_membership, AdditiveMetric, SupportPattern};
use crate::optim::{lp_solve, LinearProgram, LpStatus, SolverConfig};
use crate::prob::{channel_capacity, compose_channels, BroadcastChannel, ProbVector, RateValue, StochasticMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationCertificate {
    pub direction: Direction,
    pub coupling: BroadcastChannel,
    /// Largest marginal deviation of the coupling, per input.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Superiority {
    pub holds: bool,
    pub certificate: Option<RelationCertificate>,
    /// First input whose transportation problem is infeasible.
    pub blocking_x: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Isomorphism {
    pub holds: bool,
    pub forward: Superiority,
    pub backward: Superiority,
}

fn check_pair(w1: &StochasticMatrix, q: &AdditiveMetric, w2: &StochasticMatrix, rho: &AdditiveMetric) -> Result<()> {
    if w1.inputs() != w2.inputs()
        || (q.inputs(), q.outputs()) != (w1.inputs(), w1.outputs())
        || (rho.inputs(), rho.outputs()) != (w2.inputs(), w2.outputs())
    {
        return Err(Error::DimensionMismatch(format!(
            "pairs are {}x{} with {}x{} and {}x{} with {}x{}",
            w1.inputs(),
            w1.outputs(),
            q.inputs(),
            q.outputs(),
            w2.inputs(),
            w2.outputs(),
            rho.inputs(),
            rho.outputs()
        )));
    }
    Ok(())
}

/// A joint slice with marginals `W1(.|x)` and `W2(.|x)` supported where
/// `allow` holds, or `None` when there is none.
fn transport(
    x: usize,
    w1: &StochasticMatrix,
    w2: &StochasticMatrix,
    allow: impl Fn(usize, usize) -> bool,
    cfg: &SolverConfig,
) -> Result<Option<Vec<f64>>> {
    let (ny, nz) = (w1.outputs(), w2.outputs());
    let vars: Vec<(usize, usize)> = (0..ny)
        .flat_map(|y| (0..nz).map(move |z| (y, z)))
        .filter(|&(y, z)| w1.get(x, y) > 0.0 && w2.get(x, z) > 0.0 && allow(y, z))
        .collect();
    let mut lp = LinearProgram::feasibility(vars.len());
    for y in (0..ny).filter(|&y| w1.get(x, y) > 0.0) {
        lp.add_eq(vars.iter().map(|v| (v.0 == y) as u8 as f64).collect(), w1.get(x, y));
    }
    for z in (0..nz).filter(|&z| w2.get(x, z) > 0.0) {
        lp.add_eq(vars.iter().map(|v| (v.1 == z) as u8 as f64).collect(), w2.get(x, z));
    }
    let sol = lp_solve(&lp, cfg)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let mut slice = vec![0.0; ny * nz];
    for (&(y, z), &m) in vars.iter().zip(&sol.x) {
        slice[y * nz + z] = m.max(0.0);
    }
    Ok(Some(slice))
}

fn residuals(coupling: &BroadcastChannel, w1: &StochasticMatrix, w2: &StochasticMatrix) -> Vec<f64> {
    let (ym, zm) = (coupling.y_marginal(), coupling.z_marginal());
    (0..w1.inputs())
        .map(|x| {
            let a = (0..w1.outputs()).map(|y| (ym.get(x, y) - w1.get(x, y)).abs());
            let b = (0..w2.outputs()).map(|z| (zm.get(x, z) - w2.get(x, z)).abs());
            a.chain(b).fold(0.0, f64::max)
        })
        .collect()
}

fn assemble(
    slices: Vec<Vec<f64>>,
    w1: &StochasticMatrix,
    w2: &StochasticMatrix,
    direction: Direction,
) -> RelationCertificate {
    let (nx, ny, nz) = (w1.inputs(), w1.outputs(), w2.outputs());
    let coupling = BroadcastChannel::from_flat_unchecked(nx, ny, nz, slices.concat());
    let residuals = residuals(&coupling, w1, w2);
    RelationCertificate {
        direction,
        coupling,
        residuals,
    }
}

fn superior_in(
    w1: &StochasticMatrix,
    q: &AdditiveMetric,
    w2: &StochasticMatrix,
    rho: &AdditiveMetric,
    direction: Direction,
    tie_tol: f64,
    cfg: &SolverConfig,
) -> Result<Superiority> {
    check_pair(w1, q, w2, rho)?;
    let pattern = SupportPattern::from_metrics(q, rho, tie_tol)?;
    let slices = (0..w1.inputs())
        .into_par_iter()
        .map(|x| transport(x, w1, w2, |y, z| pattern.allows(x, y, z), cfg))
        .collect::<Result<Vec<_>>>()?;
    if let Some(x) = slices.iter().position(Option::is_none) {
        return Ok(Superiority {
            holds: false,
            certificate: None,
            blocking_x: Some(x),
        });
    }
    let slices = slices.into_iter().map(Option::unwrap).collect();
    Ok(Superiority {
        holds: true,
        certificate: Some(assemble(slices, w1, w2, direction)),
        blocking_x: None,
    })
}

/// Whether `(W1, q)` is superior to `(W2, rho)`.
pub fn superior(
    w1: &StochasticMatrix,
    q: &AdditiveMetric,
    w2: &StochasticMatrix,
    rho: &AdditiveMetric,
    tie_tol: f64,
    cfg: &SolverConfig,
) -> Result<Superiority> {
    superior_in(w1, q, w2, rho, Direction::Forward, tie_tol, cfg)
}

/// Superiority in both directions. The backward certificate couples
/// `W2` (first output) with `W1`.
pub fn isomorphic(
    w1: &StochasticMatrix,
    q: &AdditiveMetric,
    w2: &StochasticMatrix,
    rho: &AdditiveMetric,
    tie_tol: f64,
    cfg: &SolverConfig,
) -> Result<Isomorphism> {
    let forward = superior_in(w1, q, w2, rho, Direction::Forward, tie_tol, cfg)?;
    let backward = superior_in(w2, rho, w1, q, Direction::Backward, tie_tol, cfg)?;
    Ok(Isomorphism {
        holds: forward.holds && backward.holds,
        forward,
        backward,
    })
}

/// Chains `(A, q1) -> (B, .)` and `(B, .) -> (C, q3)` into `(A, q1) -> (C, q3)`.
/// A composed coupling outside `Gamma(q1, q3)` is reported as an error.
pub fn compose_superiority(
    first: &RelationCertificate,
    second: &RelationCertificate,
    q1: &AdditiveMetric,
    q3: &AdditiveMetric,
    tie_tol: f64,
) -> Result<RelationCertificate> {
    let coupling = compose_channels(&first.coupling, &second.coupling)?;
    let m = gamma_membership(&coupling, q1, q3, tie_tol)?;
    if let Some(v) = m.violation {
        return Err(Error::LemmaViolation {
            x: v.x,
            y1: v.y,
            y3: v.z,
        });
    }
    let residuals = residuals(
        &coupling,
        &first.coupling.y_marginal(),
        &second.coupling.z_marginal(),
    );
    Ok(RelationCertificate {
        direction: Direction::Forward,
        coupling,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tightness {
    /// Both links of the chain hold in both directions.
    pub certified: bool,
    /// Matched capacity of the candidate; the mismatch capacity of `W`
    /// when certified.
    pub capacity: RateValue,
    /// `(W, q) <-> (candidate, q)`.
    pub to_candidate: Isomorphism,
    /// `(candidate, q) <-> (candidate, log candidate)`.
    pub to_matched: Isomorphism,
}

/// Checks the two-link chain from `(W, q)` through `(candidate, q)` to the
/// matched pair `(candidate, log candidate)`.
pub fn tightness_certificate(
    w: &StochasticMatrix,
    q: &AdditiveMetric,
    candidate: &StochasticMatrix,
    tie_tol: f64,
    cfg: &SolverConfig,
) -> Result<Tightness> {
    if candidate.outputs() != q.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "candidate has {} outputs, q has {}",
            candidate.outputs(),
            q.outputs()
        )));
    }
    let matched = AdditiveMetric::matched(candidate);
    let to_candidate = isomorphic(w, q, candidate, q, tie_tol, cfg)?;
    let to_matched = isomorphic(candidate, q, candidate, &matched, tie_tol, cfg)?;
    let capacity = channel_capacity(candidate, cfg.opt_tol * 1e-3)?.rate;
    Ok(Tightness {
        certified: to_candidate.holds && to_matched.holds,
        capacity,
        to_candidate,
        to_matched,
    })
}

/// Scans binary-output candidates for a binary-input `W` on a grid with
/// `steps` intervals per row, returning the first certified one.
pub fn scan_matched_candidates(
    w: &StochasticMatrix,
    q: &AdditiveMetric,
    steps: usize,
    tie_tol: f64,
    cfg: &SolverConfig,
) -> Result<Option<(StochasticMatrix, Tightness)>> {
    if w.inputs() != 2 || w.outputs() != 2 || steps == 0 {
        return Err(Error::InvalidArgument(
            "candidate scan needs a binary channel and at least one step".into(),
        ));
    }
    for a in 0..=steps {
        for b in 0..=steps {
            let (a, b) = (a as f64 / steps as f64, b as f64 / steps as f64);
            let cand = StochasticMatrix::new(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]])?;
            let t = tightness_certificate(w, q, &cand, tie_tol, cfg)?;
            if t.certified {
                return Ok(Some((cand, t)));
            }
        }
    }
    Ok(None)
}

/// Whether some coupling of `W1` and `W2` lies in `Gamma(q, rho, P)`.
/// Support patterns are enumerated largest first; inputs outside the
/// support of `P` are unconstrained and get the product coupling.
pub fn superior_cc(
    p: &ProbVector,
    w1: &StochasticMatrix,
    q: &AdditiveMetric,
    w2: &StochasticMatrix,
    rho: &AdditiveMetric,
    cfg: &SolverConfig,
) -> Result<Superiority> {
    check_pair(w1, q, w2, rho)?;
    let (nx, ny, nz) = (w1.inputs(), w1.outputs(), w2.outputs());
    if p.len() != nx {
        return Err(Error::DimensionMismatch(format!("composition has {} symbols, channel {nx}", p.len())));
    }
    let cells: Vec<(usize, usize, usize)> = (0..nx)
        .filter(|&x| p[x] > 0.0)
        .flat_map(|x| (0..ny).flat_map(move |y| (0..nz).map(move |z| (x, y, z))))
        .filter(|&(x, y, z)| w1.get(x, y) > 0.0 && w2.get(x, z) > 0.0)
        .collect();
    if cells.len() > CC_CELL_CAP {
        return Err(Error::SizeCap {
            what: "support cells",
            needed: cells.len(),
            cap: CC_CELL_CAP,
        });
    }
    let mut masks: Vec<u32> = (0u32..(1 << cells.len())).collect();
    masks.sort_by(|a, b| b.count_ones().cmp(&a.count_ones()).then(a.cmp(b)));
    let pattern_of = |m: u32| {
        let mut flat = vec![false; nx * ny * nz];
        for (i, &(x, y, z)) in cells.iter().enumerate() {
            if m >> i & 1 == 1 {
                flat[(x * ny + y) * nz + z] = true;
            }
        }
        SupportPattern::from_fn(nx, ny, nz, |x, y, z| flat[(x * ny + y) * nz + z])
    };
    let mut blocked: Vec<u32> = Vec::new();
    for m in masks {
        if blocked.iter().any(|&b| m & !b == 0) {
            continue;
        }
        let pattern = pattern_of(m);
        let mut slices = Vec::with_capacity(nx);
        for x in 0..nx {
            let slice = if p[x] > 0.0 {
                transport(x, w1, w2, |y, z| pattern.allows(x, y, z), cfg)?
            } else {
                Some((0..ny).flat_map(|y| (0..nz).map(move |z| w1.get(x, y) * w2.get(x, z))).collect())
            };
            match slice {
                Some(s) => slices.push(s),
                None => break,
            }
        }
        if slices.len() < nx {
            blocked.push(m);
            continue;
        }
        if cc_lp(&pattern, ny, nz, q, Some(rho), p.as_slice(), cfg)?.member {
            return Ok(Superiority {
                holds: true,
                certificate: Some(assemble(slices, w1, w2, Direction::Forward)),
                blocking_x: None,
            });
        }
    }
    Ok(Superiority {
        holds: false,
        certificate: None,
        blocking_x: None,
    })
}
