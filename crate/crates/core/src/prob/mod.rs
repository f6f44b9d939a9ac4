//! Small dense probability objects: distributions on finite alphabets,
//! channels, broadcast channels and joint pmfs, together with the
//! information measures computed on them.
//!
//! Everything here is exact-size and dense. Alphabets are `0..n` and
//! tensors are stored flat in row-major order.

mod algebra;
mod capacity;
mod exponent;
mod info;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use algebra::{compose_channels, product_channel, DEFAULT_PRODUCT_CAP};
pub use capacity::{channel_capacity, channel_capacity_with_cap, CapacityResult, DEFAULT_CAPACITY_ITERS};
pub use exponent::{correct_decoding_exponent, ExponentConfig};
pub use info::{conditional_kl, divergence, entropy, kl_divergence, mutual_information};

/// Absolute tolerance on the total mass of a distribution.
pub const SIMPLEX_TOL: f64 = 1e-9;

fn check_simplex(probs: &mut [f64], what: &str) -> Result<()> {
    if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "{what} has entry {bad}; entries must be finite and nonnegative"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {total}, not 1"
        )));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateUnit {
    Nats,
    Bits,
}

/// A rate in nats or bits per channel use.
///
/// Internally every optimizer works in nats; bits only appear when a value
/// is presented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateValue {
    value: f64,
    unit: RateUnit,
}

impl RateValue {
    /// Round-off below zero is clamped away. `+inf` is allowed and marks a
    /// vacuous bound.
    pub fn new(value: f64, unit: RateUnit) -> Self {
        debug_assert!(!value.is_nan(), "rate is NaN");
        debug_assert!(value >= -1e-6, "rate {value} is negative");
        Self {
            value: value.max(0.0),
            unit,
        }
    }

    pub fn from_nats(value: f64) -> Self {
        Self::new(value, RateUnit::Nats)
    }

    pub fn from_bits(value: f64) -> Self {
        Self::new(value, RateUnit::Bits)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn unit(&self) -> RateUnit {
        self.unit
    }

    pub fn to(self, unit: RateUnit) -> Self {
        let value = match (self.unit, unit) {
            (RateUnit::Nats, RateUnit::Bits) => self.value * std::f64::consts::LOG2_E,
            (RateUnit::Bits, RateUnit::Nats) => self.value / std::f64::consts::LOG2_E,
            _ => self.value,
        };
        Self { value, unit }
    }

    pub fn nats(&self) -> f64 {
        self.to(RateUnit::Nats).value
    }

    pub fn bits(&self) -> f64 {
        self.to(RateUnit::Bits).value
    }
}

impl std::fmt::Display for RateValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let unit = match self.unit {
            RateUnit::Nats => "nats",
            RateUnit::Bits => "bits",
        };
        write!(f, "{:.4} {unit}", self.value)
    }
}

/// A point on the probability simplex over `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates the entries. Sums within [`SIMPLEX_TOL`] of one are
    /// renormalized; anything further off is rejected.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        check_simplex(&mut probs, "distribution")?;
        Ok(Self(probs))
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0);
        Self(vec![1.0 / len as f64; len])
    }

    /// Point mass on `at`.
    pub fn point(len: usize, at: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Self(probs)
    }

    /// Exact type of a length-`n` sequence with the given symbol counts.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidDistribution("all counts are zero".into()));
        }
        Ok(Self(counts.iter().map(|&c| c as f64 / n as f64).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| i)
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A conditional law `W(y|x)`, stored row-major with one row per input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticMatrix {
    inputs: usize,
    outputs: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let inputs = rows.len();
        let outputs = rows.first().map_or(0, Vec::len);
        if inputs == 0 || outputs == 0 {
            return Err(Error::InvalidDistribution("empty channel matrix".into()));
        }
        let mut data = Vec::with_capacity(inputs * outputs);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != outputs {
                return Err(Error::DimensionMismatch(format!(
                    "channel row {x} has {} entries, expected {outputs}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::from_flat(inputs, outputs, data)
    }

    pub fn from_flat(inputs: usize, outputs: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != inputs * outputs {
            return Err(Error::DimensionMismatch(format!(
                "channel data has {} entries, expected {inputs}x{outputs}",
                data.len()
            )));
        }
        for (x, row) in data.chunks_mut(outputs).enumerate() {
            check_simplex(row, &format!("channel row {x}"))?;
        }
        Ok(Self {
            inputs,
            outputs,
            data,
        })
    }

    pub fn from_fn(inputs: usize, outputs: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..inputs)
            .flat_map(|x| (0..outputs).map(move |y| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::from_flat(inputs, outputs, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |x, y| if x == y { 1.0 } else { 0.0 }).expect("identity is stochastic")
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.outputs + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.outputs..(x + 1) * self.outputs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.outputs)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Output law when the input is drawn from `input`.
    pub fn output_distribution(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        for (px, row) in input.iter().zip(self.rows()) {
            if *px > 0.0 {
                out.iter_mut().zip(row).for_each(|(o, w)| *o += px * w);
            }
        }
        out
    }

    /// The `k`-fold memoryless extension, inputs and outputs indexed in
    /// mixed radix with the first letter most significant.
    pub fn power(&self, k: usize, cap: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let nx = checked_pow(self.inputs, k, cap, "product input alphabet")?;
        let ny = checked_pow(self.outputs, k, cap, "product output alphabet")?;
        checked_mul(nx, ny, cap.saturating_mul(cap), "product channel")?;
        Self::from_fn(nx, ny, |xs, ys| {
            let (mut xs, mut ys) = (xs, ys);
            let mut p = 1.0;
            for _ in 0..k {
                p *= self.get(xs % self.inputs, ys % self.outputs);
                xs /= self.inputs;
                ys /= self.outputs;
            }
            p
        })
    }

    pub(crate) fn from_flat_unchecked(inputs: usize, outputs: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), inputs * outputs);
        Self {
            inputs,
            outputs,
            data,
        }
    }
}

pub(crate) fn checked_pow(base: usize, k: usize, cap: usize, what: &'static str) -> Result<usize> {
    let mut n: usize = 1;
    for _ in 0..k {
        n = n.saturating_mul(base);
    }
    if n > cap {
        return Err(Error::SizeCap {
            what,
            needed: n,
            cap,
        });
    }
    Ok(n)
}

fn checked_mul(a: usize, b: usize, cap: usize, what: &'static str) -> Result<usize> {
    let n = a.saturating_mul(b);
    if n > cap {
        return Err(Error::SizeCap {
            what,
            needed: n,
            cap,
        });
    }
    Ok(n)
}

/// A conditional law `P(y,z|x)` from `X` to `Y x Z`.
///
/// Stored with `x` slowest and `z` fastest: index `(x * ny + y) * nz + z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BroadcastChannel {
    nx: usize,
    ny: usize,
    nz: usize,
    data: Vec<f64>,
}

impl BroadcastChannel {
    pub fn new(nx: usize, ny: usize, nz: usize, mut data: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidDistribution("empty broadcast channel".into()));
        }
        if data.len() != nx * ny * nz {
            return Err(Error::DimensionMismatch(format!(
                "broadcast channel data has {} entries, expected {nx}x{ny}x{nz}",
                data.len()
            )));
        }
        for (x, slice) in data.chunks_mut(ny * nz).enumerate() {
            check_simplex(slice, &format!("broadcast slice x={x}"))?;
        }
        Ok(Self { nx, ny, nz, data })
    }

    pub fn from_fn(
        nx: usize,
        ny: usize,
        nz: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(nx * ny * nz);
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(nx, ny, nz, data)
    }

    /// `W(y|x) * 1{z = y}`.
    pub fn splice(w: &StochasticMatrix) -> Self {
        let n = w.outputs();
        Self::from_fn(w.inputs(), n, n, |x, y, z| if y == z { w.get(x, y) } else { 0.0 })
            .expect("splice of a channel is a broadcast channel")
    }

    /// `P(y|x) * P(z|x)`: outputs conditionally independent given the input.
    pub fn independent(y_channel: &StochasticMatrix, z_channel: &StochasticMatrix) -> Result<Self> {
        if y_channel.inputs() != z_channel.inputs() {
            return Err(Error::DimensionMismatch("input alphabets differ".into()));
        }
        Self::from_fn(
            y_channel.inputs(),
            y_channel.outputs(),
            z_channel.outputs(),
            |x, y, z| y_channel.get(x, y) * z_channel.get(x, z),
        )
    }

    pub(crate) fn from_flat_unchecked(nx: usize, ny: usize, nz: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), nx * ny * nz);
        Self { nx, ny, nz, data }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[(x * self.ny + y) * self.nz + z]
    }

    /// The joint pmf on `Y x Z` for input `x`, `z` fastest.
    pub fn slice(&self, x: usize) -> &[f64] {
        let len = self.ny * self.nz;
        &self.data[x * len..(x + 1) * len]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn y_marginal(&self) -> StochasticMatrix {
        let mut out = vec![0.0; self.nx * self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                out[x * self.ny + y] = (0..self.nz).map(|z| self.get(x, y, z)).sum();
            }
        }
        StochasticMatrix::from_flat_unchecked(self.nx, self.ny, out)
    }

    pub fn z_marginal(&self) -> StochasticMatrix {
        let mut out = vec![0.0; self.nx * self.nz];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    out[x * self.nz + z] += self.get(x, y, z);
                }
            }
        }
        StochasticMatrix::from_flat_unchecked(self.nx, self.nz, out)
    }

    /// The same law with the roles of the two outputs exchanged.
    pub fn swap_outputs(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    data[(x * self.nz + z) * self.ny + y] = self.get(x, y, z);
                }
            }
        }
        Self::from_flat_unchecked(self.nx, self.nz, self.ny, data)
    }

    /// Nested `[x][y][z]` form, used for serialization.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.nx)
            .map(|x| {
                (0..self.ny)
                    .map(|y| (0..self.nz).map(|z| self.get(x, y, z)).collect())
                    .collect()
            })
            .collect()
    }

    pub fn from_nested(tensor: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let nx = tensor.len();
        let ny = tensor.first().map_or(0, Vec::len);
        let nz = tensor
            .first()
            .and_then(|s| s.first())
            .map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nx * ny * nz);
        for (x, slice) in tensor.into_iter().enumerate() {
            if slice.len() != ny {
                return Err(Error::DimensionMismatch(format!(
                    "broadcast slice x={x} has {} rows, expected {ny}",
                    slice.len()
                )));
            }
            for (y, row) in slice.into_iter().enumerate() {
                if row.len() != nz {
                    return Err(Error::DimensionMismatch(format!(
                        "broadcast row (x={x}, y={y}) has {} entries, expected {nz}",
                        row.len()
                    )));
                }
                data.extend(row);
            }
        }
        Self::new(nx, ny, nz, data)
    }
}

/// A joint pmf over several finite variables, mixed-radix indexed with the
/// last variable fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointPmf {
    dims: Vec<usize>,
    mass: Vec<f64>,
}

impl JointPmf {
    pub fn new(dims: Vec<usize>, mut mass: Vec<f64>) -> Result<Self> {
        let size: usize = dims.iter().product();
        if dims.is_empty() || size == 0 {
            return Err(Error::InvalidDistribution("joint pmf with an empty alphabet".into()));
        }
        if mass.len() != size {
            return Err(Error::DimensionMismatch(format!(
                "joint pmf has {} entries, dims {dims:?} need {size}",
                mass.len()
            )));
        }
        check_simplex(&mut mass, "joint pmf")?;
        Ok(Self { dims, mass })
    }

    /// `input(x) * channel(y|x)` as a pmf on `X x Y`.
    pub fn from_input_and_channel(input: &ProbVector, channel: &StochasticMatrix) -> Result<Self> {
        if input.len() != channel.inputs() {
            return Err(Error::DimensionMismatch(format!(
                "input law has {} symbols, channel has {} inputs",
                input.len(),
                channel.inputs()
            )));
        }
        let mass = (0..channel.inputs())
            .flat_map(|x| channel.row(x).iter().map(move |w| input[x] * w))
            .collect();
        Self::new(vec![channel.inputs(), channel.outputs()], mass)
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.mass[self.flat_index(index)]
    }

    fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Marginal on the variables listed in `keep`, in that order.
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() || keep.iter().any(|&k| k >= self.arity()) {
            return Err(Error::InvalidArgument(format!(
                "cannot keep axes {keep:?} of an arity-{} pmf",
                self.arity()
            )));
        }
        let dims: Vec<usize> = keep.iter().map(|&k| self.dims[k]).collect();
        let mut mass = vec![0.0; dims.iter().product()];
        let mut index = vec![0; self.arity()];
        for &m in &self.mass {
            let target = keep.iter().fold(0, |acc, &k| acc * self.dims[k] + index[k]);
            mass[target] += m;
            for axis in (0..index.len()).rev() {
                index[axis] += 1;
                if index[axis] < self.dims[axis] {
                    break;
                }
                index[axis] = 0;
            }
        }
        Ok(Self { dims, mass })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sums_and_renormalizes_close_ones() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        let p = ProbVector::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rate_conversion_round_trips() {
        let r = RateValue::from_nats(5f64.ln());
        assert!((r.bits() - 5f64.log2()).abs() < 1e-12);
        let back = r.to(RateUnit::Bits).to(RateUnit::Nats);
        assert!((back.value() - r.value()).abs() <= 1e-12 * r.value());
    }

    #[test]
    fn broadcast_marginals() {
        let w = StochasticMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let ch = BroadcastChannel::splice(&w);
        assert_eq!(ch.y_marginal(), w);
        assert_eq!(ch.z_marginal(), w);
        assert_eq!(ch.swap_outputs(), ch);
        let v = StochasticMatrix::new(vec![vec![0.3, 0.3, 0.4], vec![1.0, 0.0, 0.0]]).unwrap();
        let ind = BroadcastChannel::independent(&w, &v).unwrap();
        let close = |a: &StochasticMatrix, b: &StochasticMatrix| {
            a.as_flat().iter().zip(b.as_flat()).all(|(u, v)| (u - v).abs() < 1e-12)
        };
        assert!(close(&ind.z_marginal(), &v));
        assert!(close(&ind.swap_outputs().y_marginal(), &v));
    }

    #[test]
    fn joint_marginal_keeps_order() {
        let p = JointPmf::new(vec![2, 3], vec![0.1, 0.2, 0.0, 0.3, 0.1, 0.3]).unwrap();
        let py = p.marginal(&[1]).unwrap();
        assert_eq!(py.dims(), &[3]);
        let expected = [0.4, 0.3, 0.3];
        for (a, b) in py.mass().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let swapped = p.marginal(&[1, 0]).unwrap();
        assert_eq!(swapped.get(&[2, 1]), p.get(&[1, 2]));
    }

    #[test]
    fn power_entries_are_products() {
        let w = StochasticMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let w2 = w.power(2, 64).unwrap();
        assert_eq!(w2.inputs(), 4);
        // (x1,x2)=(1,0) -> index 2, (y1,y2)=(0,1) -> index 1
        assert!((w2.get(2, 1) - 0.2 * 0.1).abs() < 1e-15);
        assert!(matches!(w.power(20, 64), Err(Error::SizeCap { .. })));
    }
}
