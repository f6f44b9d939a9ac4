#![allow(dead_code)]

use mismatch_core::cc_bound::{cc_bound_desk, gamma_cc_membership};
use mismatch_core::lower_bounds::{gmi_rate_max, lm_rate, lm_rate_max};
use mismatch_core::metric::{gamma_membership, gamma_nonempty_given_marginal, AdditiveMetric, SupportPattern, DEFAULT_TIE_TOL};
use mismatch_core::optim::{grid_minimax_oracle, min_convex_over_polytope, ConvexObjective, LinearProgram, SolverConfig};
use mismatch_core::prob::{channel_capacity, BroadcastChannel, ProbVector, StochasticMatrix};
use mismatch_core::relations::{compose_superiority, superior};
use mismatch_core::sd_bound::{kg_bound, sd_bound, BoundConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn random_channel(rng: &mut ChaCha20Rng, nx: usize, ny: usize) -> StochasticMatrix {
    let rows = (0..nx)
        .map(|_| {
            let r: Vec<f64> = (0..ny).map(|_| rng.gen::<f64>() + 0.05).collect();
            let t: f64 = r.iter().sum();
            r.into_iter().map(|v| v / t).collect()
        })
        .collect();
    StochasticMatrix::new(rows).unwrap()
}

pub fn random_integer_metric(rng: &mut ChaCha20Rng, nx: usize, ny: usize) -> AdditiveMetric {
    let rows = (0..nx)
        .map(|_| (0..ny).map(|_| rng.gen_range(0..3) as f64).collect())
        .collect();
    AdditiveMetric::new(rows).unwrap()
}

/// `I(P, V)` as a function of the free cells of a broadcast channel.
pub struct InformationOverCells {
    pub p: Vec<f64>,
    pub cells: Vec<(usize, usize, usize)>,
    pub nx: usize,
    pub nz: usize,
}

impl InformationOverCells {
    fn marginals(&self, t: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut v = vec![0.0; self.nx * self.nz];
        for (&(x, _, z), &m) in self.cells.iter().zip(t) {
            v[x * self.nz + z] += m;
        }
        let mut q = vec![0.0; self.nz];
        for x in 0..self.nx {
            for z in 0..self.nz {
                q[z] += self.p[x] * v[x * self.nz + z];
            }
        }
        (v, q)
    }
}

impl ConvexObjective for InformationOverCells {
    fn value(&self, t: &[f64]) -> f64 {
        let (v, q) = self.marginals(t);
        let mut total = 0.0;
        for x in 0..self.nx {
            for z in 0..self.nz {
                let vz = v[x * self.nz + z];
                if self.p[x] > 0.0 && vz > 0.0 {
                    total += self.p[x] * vz * (vz / q[z]).ln();
                }
            }
        }
        total
    }

    fn gradient(&self, t: &[f64], g: &mut [f64]) {
        let (v, q) = self.marginals(t);
        for (gi, &(x, _, z)) in g.iter_mut().zip(&self.cells) {
            let vz = v[x * self.nz + z].max(1e-300);
            *gi = if q[z] > 0.0 { self.p[x] * (vz / q[z]).ln() } else { 0.0 };
        }
    }
}

/// Inner minimum by Frank-Wolfe over the explicit polytope; an
/// implementation path independent of the production solver.
pub fn inner_min_fw(w: &StochasticMatrix, pattern: &SupportPattern, p: &[f64]) -> f64 {
    let (nx, ny, nz) = pattern.dims();
    let cells: Vec<(usize, usize, usize)> = (0..nx)
        .flat_map(|x| (0..ny).flat_map(move |y| (0..nz).map(move |z| (x, y, z))))
        .filter(|&(x, y, z)| w.get(x, y) > 0.0 && pattern.allows(x, y, z))
        .collect();
    let mut lp = LinearProgram::feasibility(cells.len());
    for x in 0..nx {
        for y in 0..ny {
            if w.get(x, y) > 0.0 {
                let row = cells.iter().map(|&(a, b, _)| if (a, b) == (x, y) { 1.0 } else { 0.0 }).collect();
                lp.add_eq(row, w.get(x, y));
            }
        }
    }
    let f = InformationOverCells {
        p: p.to_vec(),
        cells,
        nx,
        nz,
    };
    let cfg = SolverConfig {
        opt_tol: 1e-7,
        max_iters: 5_000,
        ..SolverConfig::default()
    };
    min_convex_over_polytope(&f, &lp, None, &cfg).unwrap().value
}

/// A random coupling whose `Y`-marginal is `w` (or free when `None`) and
/// whose support lies in the pattern of `(q, rho)`; `None` when some block
/// has no admissible output.
pub fn random_coupling(
    rng: &mut ChaCha20Rng,
    w: Option<&StochasticMatrix>,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
) -> Option<BroadcastChannel> {
    let pattern = SupportPattern::from_metrics(q, rho, DEFAULT_TIE_TOL).unwrap();
    let (nx, ny, nz) = pattern.dims();
    let mut t = vec![0.0; nx * ny * nz];
    for x in 0..nx {
        let row: Vec<f64> = match w {
            Some(w) => (0..ny).map(|y| w.get(x, y)).collect(),
            None => {
                // Spread over outputs that have some admissible z.
                let ok: Vec<bool> = (0..ny).map(|y| pattern.admissible_z(x, y).next().is_some()).collect();
                let r: Vec<f64> = ok.iter().map(|&o| if o { rng.gen::<f64>() + 0.1 } else { 0.0 }).collect();
                let s: f64 = r.iter().sum();
                if s == 0.0 {
                    return None;
                }
                r.iter().map(|v| v / s).collect()
            }
        };
        for y in 0..ny {
            if row[y] == 0.0 {
                continue;
            }
            let zs: Vec<usize> = pattern.admissible_z(x, y).collect();
            if zs.is_empty() {
                return None;
            }
            let weights: Vec<f64> = zs.iter().map(|_| rng.gen::<f64>() + 0.1).collect();
            let s: f64 = weights.iter().sum();
            for (&z, wt) in zs.iter().zip(&weights) {
                t[(x * ny + y) * nz + z] = row[y] * wt / s;
            }
        }
    }
    Some(BroadcastChannel::new(nx, ny, nz, t).unwrap())
}

pub const RES: usize = 20;

/// All ways to write `total` as an ordered sum of `parts` naturals.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Grid maximum of the membership objective, in metric units times `RES`.
pub fn grid_max(ch: &BroadcastChannel, q: &AdditiveMetric, rho: &AdditiveMetric, units: [usize; 2]) -> i64 {
    let groups: Vec<Vec<(usize, usize, usize, usize)>> = (0..2)
        .map(|x| {
            let mut v = Vec::new();
            for y in 0..2 {
                for z in 0..2 {
                    if ch.get(x, y, z) > 0.0 {
                        for xt in 0..2 {
                            v.push((x, y, z, xt));
                        }
                    }
                }
            }
            v
        })
        .collect();
    let c0 = compositions(units[0], groups[0].len());
    let c1 = compositions(units[1], groups[1].len());
    let int = |v: f64| v as i64;
    let mut best = i64::MIN;
    for a in &c0 {
        for b in &c1 {
            let cells = groups[0].iter().zip(a).chain(groups[1].iter().zip(b));
            let (mut xt0, mut rho_gap, mut obj) = (0usize, 0i64, 0i64);
            for (&(x, y, z, xt), &m) in cells {
                let m = m as i64;
                if xt == 0 {
                    xt0 += m as usize;
                }
                rho_gap += m * (int(rho.get(x, z)) - int(rho.get(xt, z)));
                obj += m * (int(q.get(x, y)) - int(q.get(xt, y)));
            }
            if xt0 == units[0] && rho_gap <= 0 {
                best = best.max(obj);
            }
        }
    }
    best
}

/// Combined tolerance of the ordering checks, nats.
pub const ORDER_TOL: f64 = 2e-2;

fn capacity_nats(w: &StochasticMatrix) -> f64 {
    channel_capacity(w, 1e-7).unwrap().rate.nats()
}

/// Checks `gmi <= lm <= every upper bound <= capacity of its own minimizer`.
pub fn check_ordering(
    w: &StochasticMatrix,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    with_cc: bool,
) -> Result<(), String> {
    let solver = SolverConfig::default();
    let bound = BoundConfig::default();
    let (gmi, _) = gmi_rate_max(w, q, &solver).map_err(|e| e.to_string())?;
    let (lm, p_lm) = lm_rate_max(w, q, &solver).map_err(|e| e.to_string())?;
    ensure(gmi.nats() <= lm.nats() + 1e-5, || format!("gmi {} lm {}", gmi.nats(), lm.nats()))?;
    let lm_at = lm_rate(w, q, &p_lm, &solver).map_err(|e| e.to_string())?.nats();
    ensure(lm_at <= capacity_nats(w) + 1e-6, || format!("lm {lm_at} above capacity"))?;

    let kg = kg_bound(w, q, &bound).map_err(|e| e.to_string())?;
    let mut uppers = vec![(kg.rate.nats(), capacity_nats(&kg.argmin_z_marginal))];
    if let Ok(sd) = sd_bound(w, q, rho, &bound) {
        uppers.push((sd.rate.nats(), capacity_nats(&sd.argmin_z_marginal)));
    }
    if with_cc {
        let same = cc_bound_desk(w, q, Some(q), q.outputs(), &solver, &bound).map_err(|e| e.to_string())?;
        ensure(same.rate.nats() <= kg.rate.nats() + ORDER_TOL, || format!("cc {} kg {}", same.rate.nats(), kg.rate.nats()))?;
        uppers.push((same.rate.nats(), capacity_nats(&same.argmin_z_marginal)));
        if let Ok(cc) = cc_bound_desk(w, q, Some(rho), rho.outputs(), &solver, &bound) {
            uppers.push((cc.rate.nats(), capacity_nats(&cc.argmin_z_marginal)));
        }
        let star = cc_bound_desk(w, q, None, q.outputs(), &solver, &bound).map_err(|e| e.to_string())?;
        ensure(star.rate.nats() <= same.rate.nats() + ORDER_TOL, || format!("star {} above cc {}", star.rate.nats(), same.rate.nats()))?;
        uppers.push((star.rate.nats(), capacity_nats(&star.argmin_z_marginal)));
    }
    for (value, cap) in uppers {
        ensure(lm.nats() <= value + ORDER_TOL, || format!("lm {} above bound {}", lm.nats(), value))?;
        ensure(value <= cap + ORDER_TOL, || format!("bound {value} above its channel capacity {cap}"))?;
    }
    Ok(())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `sd_bound` against the grid minimax on `count` random binary instances
/// with a nonempty channel set.
pub fn sd_oracle_agreement(seed: u64, count: usize) -> Result<(), String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut checked = 0;
    while checked < count {
        let w = random_channel(&mut rng, 2, 2);
        let q = random_integer_metric(&mut rng, 2, 2);
        let rho = random_integer_metric(&mut rng, 2, 2);
        if !gamma_nonempty_given_marginal(&w, &q, &rho, DEFAULT_TIE_TOL).unwrap().feasible {
            continue;
        }
        checked += 1;
        let pattern = SupportPattern::from_metrics(&q, &rho, DEFAULT_TIE_TOL).unwrap();
        let r = sd_bound(&w, &q, &rho, &BoundConfig::default()).map_err(|e| e.to_string())?;
        let (oracle, _) = grid_minimax_oracle(2, 101, |p| Ok(inner_min_fw(&w, &pattern, p))).unwrap();
        let got = r.rate.nats();
        ensure((got - oracle).abs() < 1e-2, || format!("instance {checked}: sd {got} vs oracle {oracle}"))?;
        ensure(r.lower <= oracle + 1e-4, || format!("lower {} above oracle {oracle}", r.lower))?;
    }
    Ok(())
}

/// Composition-dependent membership against the brute-force grid over the
/// joint law on `count` random instances; returns the number of
/// non-members.
pub fn cc_grid_agreement(seed: u64, count: usize) -> Result<usize, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cfg = SolverConfig::default();
    let mut non_members = 0;
    for i in 0..count {
        let q = random_integer_metric(&mut rng, 2, 2);
        let rho = random_integer_metric(&mut rng, 2, 2);
        let mut t = vec![0.0; 8];
        for x in 0..2 {
            let mut cells = [0usize, 1, 2, 3];
            cells.shuffle(&mut rng);
            let w = rng.gen_range(0.2..0.8);
            t[x * 4 + cells[0]] = w;
            t[x * 4 + cells[1]] = 1.0 - w;
        }
        let ch = BroadcastChannel::new(2, 2, 2, t).unwrap();
        let k = rng.gen_range(4..=16);
        let p = ProbVector::new(vec![k as f64 / RES as f64, (RES - k) as f64 / RES as f64]).unwrap();
        let lp = gamma_cc_membership(&ch, &q, &rho, &p, &cfg).map_err(|e| e.to_string())?;
        let grid = grid_max(&ch, &q, &rho, [k, RES - k]);
        ensure(grid as f64 / RES as f64 <= lp.lp_value + 1e-9, || {
            format!("instance {i}: grid value {} above LP {}", grid as f64 / RES as f64, lp.lp_value)
        })?;
        ensure(lp.member == (grid <= 0), || format!("instance {i}: lp {} grid {grid}", lp.lp_value))?;
        non_members += usize::from(!lp.member);
    }
    Ok(non_members)
}

/// Builds `count` random composable 3x3x3 superiority chains and checks
/// that each composed coupling is a member and realizes the direct relation.
pub fn composable_chains(seed: u64, count: usize) -> Result<(), String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cfg = SolverConfig::default();
    let tol = DEFAULT_TIE_TOL;
    let mut done = 0;
    let mut attempts = 0;
    while done < count {
        attempts += 1;
        ensure(attempts < 10_000, || "could not generate chains".into())?;
        let q1 = random_integer_metric(&mut rng, 3, 3);
        let q2 = random_integer_metric(&mut rng, 3, 3);
        let q3 = random_integer_metric(&mut rng, 3, 3);
        let Some(t12) = random_coupling(&mut rng, None, &q1, &q2) else { continue };
        let b = t12.z_marginal();
        let Some(t23) = random_coupling(&mut rng, Some(&b), &q2, &q3) else { continue };
        let (a, c) = (t12.y_marginal(), t23.z_marginal());
        let err = |e: mismatch_core::Error| e.to_string();
        let ab = superior(&a, &q1, &b, &q2, tol, &cfg).map_err(err)?;
        let bc = superior(&b, &q2, &c, &q3, tol, &cfg).map_err(err)?;
        ensure(ab.holds && bc.holds, || format!("chain {done}: generated links must hold"))?;
        let composed =
            compose_superiority(ab.certificate.as_ref().unwrap(), bc.certificate.as_ref().unwrap(), &q1, &q3, tol)
                .map_err(err)?;
        let member = gamma_membership(&composed.coupling, &q1, &q3, tol).map_err(err)?.member;
        ensure(member, || format!("chain {done}: composed coupling is not a member"))?;
        for x in 0..3 {
            for y in 0..3 {
                let dy = (composed.coupling.y_marginal().get(x, y) - a.get(x, y)).abs();
                let dz = (composed.coupling.z_marginal().get(x, y) - c.get(x, y)).abs();
                ensure(dy < 1e-8 && dz < 1e-8, || format!("chain {done}: marginals off by {dy:.1e}, {dz:.1e}"))?;
            }
        }
        let direct = superior(&a, &q1, &c, &q3, tol, &cfg).map_err(err)?;
        ensure(direct.holds, || format!("chain {done}: direct relation fails"))?;
        done += 1;
    }
    Ok(())
}
