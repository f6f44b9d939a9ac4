use serde::Serialize;

use super::info::divergence;
use super::{ProbVector, RateValue, StochasticMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY_ITERS: usize = 100_000;

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    pub rate: RateValue,
    pub input: ProbVector,
    /// `I(P; W)` at the returned input, in nats.
    pub lower: f64,
    /// `max_x D(W(.|x) || PW)`, an upper bound on capacity, in nats.
    pub upper: f64,
    pub iterations: usize,
}

/// Blahut–Arimoto with the usual capacity bracket; stops once
/// `upper - lower < tol` (nats).
pub fn channel_capacity(channel: &StochasticMatrix, tol: f64) -> Result<CapacityResult> {
    channel_capacity_with_cap(channel, tol, DEFAULT_CAPACITY_ITERS)
}

pub fn channel_capacity_with_cap(
    channel: &StochasticMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let nx = channel.inputs();
    let mut p = vec![1.0 / nx as f64; nx];
    let mut d = vec![0.0; nx];
    let (mut lower, mut upper) = (0.0, f64::INFINITY);
    for it in 1..=max_iters {
        let out = channel.output_distribution(&p);
        for (dx, row) in d.iter_mut().zip(channel.rows()) {
            *dx = divergence(row, &out);
        }
        lower = p.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower < tol {
            let rate = RateValue::from_nats(lower);
            return Ok(CapacityResult {
                rate,
                input: ProbVector::new(p)?,
                lower,
                upper,
                iterations: it,
            });
        }
        // Shift by the max before exponentiating; rows with p = 0 stay at 0.
        let mut total = 0.0;
        for (px, dx) in p.iter_mut().zip(&d) {
            *px *= (dx - upper).exp();
            total += *px;
        }
        p.iter_mut().for_each(|v| *v /= total);
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        lower,
        upper,
    })
}
