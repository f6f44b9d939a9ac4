//! `min I(P, V)` over broadcast channels with a fixed `Y`-marginal and a
//! support pattern, where `V` is the `Z`-marginal.
//!
//! The feasible set is a product over `(x, y)` of scaled simplices on the
//! admissible `z`. The minimization uses the multiplicative update
//! `T(y,z|x) <- T(y,z|x) Q(z) / V(z|x)`, renormalized per block, and is
//! certified by the Frank-Wolfe gap, which for this polytope is a closed
//! form per block.

use crate::error::{Error, Result};
use crate::metric::SupportPattern;
use crate::prob::{BroadcastChannel, StochasticMatrix};

#[derive(Debug, Clone)]
pub struct ChannelPolytope {
    nx: usize,
    ny: usize,
    nz: usize,
    w: Vec<f64>,
    /// Admissible `z` per `(x, y)` block with positive mass.
    allowed: Vec<Vec<usize>>,
}

impl ChannelPolytope {
    pub fn new(w: &StochasticMatrix, pattern: &SupportPattern) -> Result<Self> {
        let (nx, ny, nz) = pattern.dims();
        if (w.inputs(), w.outputs()) != (nx, ny) {
            return Err(Error::DimensionMismatch(format!(
                "channel is {}x{}, pattern is {nx}x{ny}x{nz}",
                w.inputs(),
                w.outputs()
            )));
        }
        let mut allowed = Vec::with_capacity(nx * ny);
        for x in 0..nx {
            for y in 0..ny {
                let zs: Vec<usize> = if w.get(x, y) > 0.0 {
                    pattern.admissible_z(x, y).collect()
                } else {
                    Vec::new()
                };
                if w.get(x, y) > 0.0 && zs.is_empty() {
                    return Err(Error::EmptyFeasibleSet { x, y });
                }
                allowed.push(zs);
            }
        }
        Ok(Self {
            nx,
            ny,
            nz,
            w: w.as_flat().to_vec(),
            allowed,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    /// Each block spread evenly over its admissible outputs.
    pub fn center(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.nx * self.ny * self.nz];
        for (b, zs) in self.allowed.iter().enumerate() {
            for &z in zs {
                t[b * self.nz + z] = self.w[b] / zs.len() as f64;
            }
        }
        t
    }

    pub fn z_marginal(&self, t: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.nx * self.nz];
        for x in 0..self.nx {
            for y in 0..self.ny {
                let base = (x * self.ny + y) * self.nz;
                for z in 0..self.nz {
                    v[x * self.nz + z] += t[base + z];
                }
            }
        }
        v
    }

    pub fn to_channel(&self, t: &[f64]) -> BroadcastChannel {
        BroadcastChannel::from_flat_unchecked(self.nx, self.ny, self.nz, t.to_vec())
    }

    pub fn to_matrix(&self, v: &[f64]) -> StochasticMatrix {
        StochasticMatrix::from_flat_unchecked(self.nx, self.nz, v.to_vec())
    }

    fn output_law(&self, p: &[f64], v: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.nz];
        for x in 0..self.nx {
            if p[x] > 0.0 {
                for z in 0..self.nz {
                    q[z] += p[x] * v[x * self.nz + z];
                }
            }
        }
        q
    }

    /// `I(P, V)` and the Frank-Wolfe gap of `T` for the linearized problem.
    fn value_and_gap(&self, p: &[f64], t: &[f64], v: &[f64], q: &[f64]) -> (f64, f64) {
        let nz = self.nz;
        let mut value = 0.0;
        let mut gap = 0.0;
        // Partial derivative per (x, z); at Q(z) = 0 zero is a subgradient
        // because the objective restricted to that output is a nonnegative
        // homogeneous function vanishing at the current point.
        let grad = |x: usize, z: usize| -> f64 {
            let (vz, qz) = (v[x * nz + z], q[z]);
            if qz <= 0.0 {
                0.0
            } else if vz <= 0.0 {
                f64::NEG_INFINITY
            } else {
                (vz / qz).ln()
            }
        };
        for x in 0..self.nx {
            if p[x] <= 0.0 {
                continue;
            }
            for z in 0..nz {
                let vz = v[x * nz + z];
                if vz > 0.0 {
                    value += p[x] * vz * (vz / q[z]).ln();
                }
            }
            let mut block_gap = 0.0;
            for y in 0..self.ny {
                let b = x * self.ny + y;
                if self.allowed[b].is_empty() {
                    continue;
                }
                let mut current = 0.0;
                for &z in &self.allowed[b] {
                    let tz = t[b * nz + z];
                    if tz > 0.0 {
                        current += tz * grad(x, z);
                    }
                }
                let best = self.allowed[b]
                    .iter()
                    .map(|&z| grad(x, z))
                    .fold(f64::INFINITY, f64::min);
                block_gap += current - self.w[b] * best;
            }
            gap += p[x] * block_gap;
        }
        (value.max(0.0), gap.max(0.0))
    }

    fn step(&self, t: &mut [f64], v: &[f64], q: &[f64]) {
        let nz = self.nz;
        for x in 0..self.nx {
            for y in 0..self.ny {
                let b = x * self.ny + y;
                let zs = &self.allowed[b];
                if zs.len() < 2 {
                    continue;
                }
                let mut total = 0.0;
                for &z in zs {
                    let cell = &mut t[b * nz + z];
                    let vz = v[x * nz + z];
                    // Outputs unused under P give no signal; leave them be.
                    if q[z] > 0.0 && vz > 0.0 {
                        *cell *= q[z] / vz;
                    }
                    total += *cell;
                }
                if total > 0.0 {
                    let scale = self.w[b] / total;
                    for &z in zs {
                        t[b * nz + z] *= scale;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    /// `I(P, V)` in nats.
    pub value: f64,
    /// Frank-Wolfe gap; `value - gap` lower-bounds the minimum.
    pub gap: f64,
    pub iterations: usize,
}

/// Runs multiplicative updates from `t` until the gap is below `tol` or
/// `max_iters` updates have been made.
pub fn minimize_information(
    poly: &ChannelPolytope,
    p: &[f64],
    mut t: Vec<f64>,
    tol: f64,
    max_iters: usize,
) -> InnerSolution {
    let mut iterations = 0;
    loop {
        let v = poly.z_marginal(&t);
        let q = poly.output_law(p, &v);
        let (value, gap) = poly.value_and_gap(p, &t, &v, &q);
        if gap < tol || iterations >= max_iters {
            return InnerSolution {
                t,
                v,
                q,
                value,
                gap,
                iterations,
            };
        }
        poly.step(&mut t, &v, &q);
        iterations += 1;
    }
}
