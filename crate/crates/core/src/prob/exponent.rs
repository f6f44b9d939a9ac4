//! Exponent of the probability of correct decoding above capacity for
//! constant-composition codes:
//!
//! `E(R) = min_V D(V || W | P) + |R - I(P x V)|_+`.
//!
//! The objective is not convex in `V`, but `|t|_+ = max_{0<=l<=1} l t` and
//! `D - l I = (1 - l) D + l (D - I)` is convex for every `l` in `[0, 1]`,
//! so the min and max exchange and
//!
//! `E(R) = max_{0<=l<=1} [ l R + min_V (D(V || W | P) - l I(P x V)) ]`.
//!
//! The inner problem is solved by Arimoto-style alternating updates
//! `V(z|x) ~ W(z|x) (V(z|x) / Q(z))^l`, the outer one by golden-section
//! search on the concave function of `l`.

use super::info::{divergence, mutual_information_raw};
use super::{ProbVector, RateValue, StochasticMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct ExponentConfig {
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub outer_tol: f64,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        Self {
            inner_iters: 20_000,
            inner_tol: 1e-14,
            outer_tol: 1e-9,
        }
    }
}

/// Returns the exponent in nats.
pub fn correct_decoding_exponent(
    composition: &ProbVector,
    channel: &StochasticMatrix,
    rate: RateValue,
    cfg: &ExponentConfig,
) -> Result<f64> {
    if composition.len() != channel.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "composition has {} symbols, channel has {} inputs",
            composition.len(),
            channel.inputs()
        )));
    }
    let r = rate.nats();
    let p = composition.as_slice();
    if r <= mutual_information_raw(p, channel) {
        return Ok(0.0);
    }
    let h = |lambda: f64| lambda * r + tilted_minimum(p, channel, lambda, cfg);

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (h(a), h(b));
    while hi - lo > cfg.outer_tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = h(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = h(a);
        }
    }
    let best = [h(0.0), h(1.0), fa, fb]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best.max(0.0))
}

/// `min_V D(V || W | P) - lambda I(P x V)`.
fn tilted_minimum(p: &[f64], w: &StochasticMatrix, lambda: f64, cfg: &ExponentConfig) -> f64 {
    let (nx, nz) = (w.inputs(), w.outputs());
    let mut v = w.as_flat().to_vec();
    let objective = |v: &[f64]| {
        let vm = StochasticMatrix::from_flat_unchecked(nx, nz, v.to_vec());
        let d: f64 = (0..nx)
            .filter(|&x| p[x] > 0.0)
            .map(|x| p[x] * divergence(vm.row(x), w.row(x)))
            .sum();
        d - lambda * mutual_information_raw(p, &vm)
    };
    let mut current = objective(&v);
    for _ in 0..cfg.inner_iters {
        let mut q = vec![0.0; nz];
        for x in 0..nx {
            for z in 0..nz {
                q[z] += p[x] * v[x * nz + z];
            }
        }
        for x in 0..nx {
            if p[x] <= 0.0 {
                continue;
            }
            let row = &mut v[x * nz..(x + 1) * nz];
            let mut total = 0.0;
            for z in 0..nz {
                let wz = w.get(x, z);
                row[z] = if wz > 0.0 && row[z] > 0.0 {
                    wz * (row[z] / q[z]).powf(lambda)
                } else {
                    0.0
                };
                total += row[z];
            }
            row.iter_mut().for_each(|e| *e /= total);
        }
        let next = objective(&v);
        let done = current - next < cfg.inner_tol;
        current = next.min(current);
        if done {
            break;
        }
    }
    current
}
