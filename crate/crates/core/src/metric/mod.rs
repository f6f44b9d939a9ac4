//! Additive decoding metrics and the surely-degraded support machinery.
//!
//! For a pair of metrics `q` on `X x Y` and `rho` on `X x Z`, the tilt of an
//! input `x` at `(y, z)` is `rho(x,z) - q(x,y)`. Its maximum over `x` is
//! `tau(y,z)`, and the inputs attaining it form the support set `S(y,z)`.
//! A broadcast channel belongs to `Gamma(q, rho)` when it puts no mass on a
//! triple `(x,y,z)` whose tilt falls short of `tau(y,z)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{checked_pow, BroadcastChannel, StochasticMatrix};

/// Tolerance below `tau` within which a tilt still counts as maximal.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Mass at or below this is treated as a structural zero.
pub const ZERO_MASS: f64 = 1e-12;

/// A per-letter score `q(x, y)`, summed over a block by the decoder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditiveMetric {
    inputs: usize,
    outputs: usize,
    scores: Vec<f64>,
    log_likelihood: bool,
}

impl AdditiveMetric {
    /// A metric with finite scores.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows, false)
    }

    /// A metric that may contain `-inf`, as the log of a channel with
    /// structural zeros does.
    pub fn log_likelihood(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows, true)
    }

    /// The matched metric `log W(y|x)` (natural log).
    pub fn matched(channel: &StochasticMatrix) -> Self {
        let scores = channel
            .as_flat()
            .iter()
            .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
            .collect();
        Self {
            inputs: channel.inputs(),
            outputs: channel.outputs(),
            scores,
            log_likelihood: true,
        }
    }

    pub fn from_fn(inputs: usize, outputs: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let rows = (0..inputs)
            .map(|x| (0..outputs).map(|y| f(x, y)).collect())
            .collect();
        Self::new(rows)
    }

    fn from_rows(rows: Vec<Vec<f64>>, log_likelihood: bool) -> Result<Self> {
        let inputs = rows.len();
        let outputs = rows.first().map_or(0, Vec::len);
        if inputs == 0 || outputs == 0 {
            return Err(Error::InvalidMetric("empty score matrix".into()));
        }
        let mut scores = Vec::with_capacity(inputs * outputs);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != outputs {
                return Err(Error::DimensionMismatch(format!(
                    "metric row {x} has {} entries, expected {outputs}",
                    row.len()
                )));
            }
            for (y, &s) in row.iter().enumerate() {
                let ok = s.is_finite() || (log_likelihood && s == f64::NEG_INFINITY);
                if !ok {
                    return Err(Error::InvalidMetric(format!("score ({x}, {y}) is {s}")));
                }
            }
            scores.extend(row);
        }
        Ok(Self {
            inputs,
            outputs,
            scores,
            log_likelihood,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.scores[x * self.outputs + y]
    }

    pub fn is_log_likelihood(&self) -> bool {
        self.log_likelihood
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.scores
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.scores.chunks(self.outputs).map(<[f64]>::to_vec).collect()
    }

    /// `a * q + b`; with `a > 0` this decodes identically.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("affine map ({a}, {b}) is not increasing")));
        }
        Ok(Self {
            scores: self.scores.iter().map(|s| a * s + b).collect(),
            ..self.clone()
        })
    }
}

/// `q(x,y) + b(x)`.
pub fn add_input_score(q: &AdditiveMetric, b: &[f64]) -> Result<AdditiveMetric> {
    if b.len() != q.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "input score has {} entries, metric has {} inputs",
            b.len(),
            q.inputs()
        )));
    }
    if let Some(bad) = b.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidMetric(format!("input score {bad} is not finite")));
    }
    let scores = q
        .scores
        .chunks(q.outputs)
        .zip(b)
        .flat_map(|(row, bx)| row.iter().map(move |s| s + bx))
        .collect();
    Ok(AdditiveMetric {
        scores,
        ..q.clone()
    })
}

/// The block metric on `k`-tuples, `(1/k) sum_i q(x_i, y_i)`. Tuples are
/// indexed in mixed radix with the first letter most significant.
pub fn lift_metric(q: &AdditiveMetric, k: usize, cap: usize) -> Result<AdditiveMetric> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let kx = checked_pow(q.inputs, k, cap, "lifted input alphabet")?;
    let ky = checked_pow(q.outputs, k, cap, "lifted output alphabet")?;
    let mut scores = Vec::with_capacity(kx * ky);
    for xs in 0..kx {
        for ys in 0..ky {
            let (mut a, mut b, mut total) = (xs, ys, 0.0);
            for _ in 0..k {
                total += q.get(a % q.inputs, b % q.outputs);
                a /= q.inputs;
                b /= q.outputs;
            }
            scores.push(total / k as f64);
        }
    }
    Ok(AdditiveMetric {
        inputs: kx,
        outputs: ky,
        scores,
        log_likelihood: q.log_likelihood,
    })
}

fn check_pair(q: &AdditiveMetric, rho: &AdditiveMetric) -> Result<()> {
    if q.inputs != rho.inputs {
        return Err(Error::DimensionMismatch(format!(
            "q has {} inputs, rho has {}",
            q.inputs, rho.inputs
        )));
    }
    Ok(())
}

/// `rho(x,z) - q(x,y)` in extended arithmetic: a `-inf` under `rho` is
/// never preferred, a `-inf` under `q` (with finite `rho`) always is.
fn tilt(q: &AdditiveMetric, rho: &AdditiveMetric, x: usize, y: usize, z: usize) -> f64 {
    let (r, s) = (rho.get(x, z), q.get(x, y));
    if r == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if s == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        r - s
    }
}

fn attains(value: f64, tau: f64, tie_tol: f64) -> bool {
    if tau.is_infinite() {
        value == tau
    } else {
        value >= tau - tie_tol
    }
}

/// `max_x [rho(x,z) - q(x,y)]`.
pub fn tau(q: &AdditiveMetric, rho: &AdditiveMetric, y: usize, z: usize) -> Result<f64> {
    check_pair(q, rho)?;
    if y >= q.outputs || z >= rho.outputs {
        return Err(Error::InvalidArgument(format!("(y, z) = ({y}, {z}) out of range")));
    }
    Ok(tau_unchecked(q, rho, y, z))
}

fn tau_unchecked(q: &AdditiveMetric, rho: &AdditiveMetric, y: usize, z: usize) -> f64 {
    (0..q.inputs)
        .map(|x| tilt(q, rho, x, y, z))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The inputs attaining `tau(y,z)` within `tie_tol`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportSet {
    pub y: usize,
    pub z: usize,
    pub members: Vec<usize>,
}

pub fn support_set(
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    y: usize,
    z: usize,
    tie_tol: f64,
) -> Result<SupportSet> {
    let t = tau(q, rho, y, z)?;
    if !(tie_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tie tolerance {tie_tol} is negative")));
    }
    let members = (0..q.inputs)
        .filter(|&x| attains(tilt(q, rho, x, y, z), t, tie_tol))
        .collect();
    Ok(SupportSet { y, z, members })
}

/// `allowed(x,y,z)` iff `x` is in `S(y,z)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportPattern {
    nx: usize,
    ny: usize,
    nz: usize,
    allowed: Vec<bool>,
}

impl SupportPattern {
    pub fn from_metrics(q: &AdditiveMetric, rho: &AdditiveMetric, tie_tol: f64) -> Result<Self> {
        check_pair(q, rho)?;
        if !(tie_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tie tolerance {tie_tol} is negative")));
        }
        let (nx, ny, nz) = (q.inputs, q.outputs, rho.outputs);
        let mut allowed = vec![false; nx * ny * nz];
        for y in 0..ny {
            for z in 0..nz {
                let t = tau_unchecked(q, rho, y, z);
                for x in 0..nx {
                    allowed[(x * ny + y) * nz + z] = attains(tilt(q, rho, x, y, z), t, tie_tol);
                }
            }
        }
        Ok(Self { nx, ny, nz, allowed })
    }

    /// A pattern given cell by cell.
    pub fn from_fn(nx: usize, ny: usize, nz: usize, f: impl Fn(usize, usize, usize) -> bool) -> Self {
        let mut allowed = Vec::with_capacity(nx * ny * nz);
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    allowed.push(f(x, y, z));
                }
            }
        }
        Self { nx, ny, nz, allowed }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    pub fn allows(&self, x: usize, y: usize, z: usize) -> bool {
        self.allowed[(x * self.ny + y) * self.nz + z]
    }

    pub fn admissible_z(&self, x: usize, y: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nz).filter(move |&z| self.allows(x, y, z))
    }

    pub fn as_flat(&self) -> &[bool] {
        &self.allowed
    }

    /// The set `S(y,z)` read back from the pattern.
    pub fn support_set(&self, y: usize, z: usize) -> SupportSet {
        SupportSet {
            y,
            z,
            members: (0..self.nx).filter(|&x| self.allows(x, y, z)).collect(),
        }
    }

    /// First `(x, y)` with `W(y|x) > 0` and no admissible `z`.
    pub fn blocking_pair(&self, w: &StochasticMatrix) -> Option<(usize, usize)> {
        (0..self.nx)
            .flat_map(|x| (0..self.ny).map(move |y| (x, y)))
            .find(|&(x, y)| w.get(x, y) > 0.0 && self.admissible_z(x, y).next().is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// The first offending triple in `(x, y, z)` order.
    pub violation: Option<Violation>,
}

/// Checks `channel` against a precomputed pattern.
pub fn pattern_membership(channel: &BroadcastChannel, pattern: &SupportPattern) -> Result<Membership> {
    if (channel.nx(), channel.ny(), channel.nz()) != pattern.dims() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}x{}x{}, pattern is {:?}",
            channel.nx(),
            channel.ny(),
            channel.nz(),
            pattern.dims()
        )));
    }
    for x in 0..channel.nx() {
        for y in 0..channel.ny() {
            for z in 0..channel.nz() {
                let mass = channel.get(x, y, z);
                if mass > ZERO_MASS && !pattern.allows(x, y, z) {
                    return Ok(Membership {
                        member: false,
                        violation: Some(Violation { x, y, z, mass }),
                    });
                }
            }
        }
    }
    Ok(Membership {
        member: true,
        violation: None,
    })
}

/// Membership in `Gamma(q, rho)`.
pub fn gamma_membership(
    channel: &BroadcastChannel,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    tie_tol: f64,
) -> Result<Membership> {
    if q.outputs != channel.ny() || rho.outputs != channel.nz() || q.inputs != channel.nx() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}x{}x{}, metrics are {}x{} and {}x{}",
            channel.nx(),
            channel.ny(),
            channel.nz(),
            q.inputs,
            q.outputs,
            rho.inputs,
            rho.outputs
        )));
    }
    let pattern = SupportPattern::from_metrics(q, rho, tie_tol)?;
    pattern_membership(channel, &pattern)
}

/// Membership in the `k`-letter set, where the constraint compares the
/// summed tilt of a tuple with the summed per-letter `tau`. Equivalent to
/// single-letter membership for the lifted (averaged) metrics.
pub fn gamma_k_membership(
    channel: &BroadcastChannel,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    k: usize,
    tie_tol: f64,
    cap: usize,
) -> Result<Membership> {
    let qk = lift_metric(q, k, cap)?;
    let rk = lift_metric(rho, k, cap)?;
    gamma_membership(channel, &qk, &rk, tie_tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalCertificate {
    /// A member of the set with the requested `Y`-marginal.
    Coupling { channel: BroadcastChannel },
    /// `W(y|x) > 0` but no `z` admits `x` at `(y, z)`.
    Blocking { x: usize, y: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalFeasibility {
    pub feasible: bool,
    pub certificate: MarginalCertificate,
}

/// Decides whether `Gamma(q, rho)` has a member with `Y`-marginal `W`.
///
/// The constraint set is a product over `(x, y)` of simplices on the
/// admissible `z`, so it is nonempty iff no such block is empty. The
/// returned coupling spreads `W(y|x)` uniformly over admissible `z`.
pub fn gamma_nonempty_given_marginal(
    w: &StochasticMatrix,
    q: &AdditiveMetric,
    rho: &AdditiveMetric,
    tie_tol: f64,
) -> Result<MarginalFeasibility> {
    if q.inputs != w.inputs() || q.outputs != w.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}x{}, q is {}x{}",
            w.inputs(),
            w.outputs(),
            q.inputs,
            q.outputs
        )));
    }
    let pattern = SupportPattern::from_metrics(q, rho, tie_tol)?;
    Ok(feasibility_for_pattern(w, &pattern))
}

pub(crate) fn feasibility_for_pattern(w: &StochasticMatrix, pattern: &SupportPattern) -> MarginalFeasibility {
    if let Some((x, y)) = pattern.blocking_pair(w) {
        return MarginalFeasibility {
            feasible: false,
            certificate: MarginalCertificate::Blocking { x, y },
        };
    }
    let (nx, ny, nz) = pattern.dims();
    let mut data = vec![0.0; nx * ny * nz];
    for x in 0..nx {
        for y in 0..ny {
            let mass = w.get(x, y);
            if mass <= 0.0 {
                continue;
            }
            let zs: Vec<usize> = pattern.admissible_z(x, y).collect();
            for &z in &zs {
                data[(x * ny + y) * nz + z] = mass / zs.len() as f64;
            }
        }
    }
    MarginalFeasibility {
        feasible: true,
        certificate: MarginalCertificate::Coupling {
            channel: BroadcastChannel::from_flat_unchecked(nx, ny, nz, data),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pentagon_q() -> AdditiveMetric {
        AdditiveMetric::from_fn(5, 5, |x, y| {
            if [0, 1, 4].contains(&((y + 5 - x) % 5)) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn c5_rho() -> AdditiveMetric {
        AdditiveMetric::from_fn(5, 5, |x, z| if [0, 1].contains(&((z + 5 - x) % 5)) { 1.0 } else { 0.0 })
            .unwrap()
    }

    fn typewriter() -> StochasticMatrix {
        StochasticMatrix::from_fn(5, 5, |x, z| if [0, 1].contains(&((z + 5 - x) % 5)) { 0.5 } else { 0.0 })
            .unwrap()
    }

    #[test]
    fn rejects_non_finite_scores_unless_flagged() {
        assert!(AdditiveMetric::new(vec![vec![0.0, f64::NEG_INFINITY]]).is_err());
        assert!(AdditiveMetric::new(vec![vec![0.0, f64::NAN]]).is_err());
        assert!(AdditiveMetric::log_likelihood(vec![vec![0.0, f64::NEG_INFINITY]]).is_ok());
        assert!(AdditiveMetric::log_likelihood(vec![vec![0.0, f64::INFINITY]]).is_err());
    }

    #[test]
    fn tau_examples() {
        let q = pentagon_q();
        for y in 0..5 {
            assert_eq!(tau(&q, &q, y, y).unwrap(), 0.0);
        }
        assert_eq!(tau(&q, &c5_rho(), 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn pentagon_support_sets() {
        let q = pentagon_q();
        let s = |y, z| support_set(&q, &q, y, z, DEFAULT_TIE_TOL).unwrap().members;
        assert_eq!(s(0, 1), vec![2]);
        assert_eq!(s(4, 3), vec![2]);
        assert_eq!(s(0, 2), vec![2, 3]);
        assert_eq!(s(2, 0), vec![0, 4]);
        assert_eq!(s(3, 3), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn splice_and_pentagon_coupling_are_members() {
        let q = pentagon_q();
        let w5 = StochasticMatrix::identity(5);
        let splice = BroadcastChannel::splice(&w5);
        assert!(gamma_membership(&splice, &q, &q, DEFAULT_TIE_TOL).unwrap().member);
        let coupling = BroadcastChannel::independent(&w5, &typewriter()).unwrap();
        assert!(gamma_membership(&coupling, &q, &c5_rho(), DEFAULT_TIE_TOL).unwrap().member);
        let f = gamma_nonempty_given_marginal(&w5, &q, &c5_rho(), DEFAULT_TIE_TOL).unwrap();
        assert!(f.feasible);
    }

    #[test]
    fn certificate_is_a_member() {
        let w = StochasticMatrix::new(vec![vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap();
        let q = AdditiveMetric::new(vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let f = gamma_nonempty_given_marginal(&w, &q, &q, DEFAULT_TIE_TOL).unwrap();
        match f.certificate {
            MarginalCertificate::Coupling { channel } => {
                assert!(gamma_membership(&channel, &q, &q, DEFAULT_TIE_TOL).unwrap().member);
                assert_eq!(channel.y_marginal(), w);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn input_score_empties_gamma() {
        let a = AdditiveMetric::from_fn(3, 3, |x, y| ((x * 7 + y * 3) % 5) as f64 / 4.0).unwrap();
        let q = add_input_score(&a, &[0.0, -10.0, 0.0]).unwrap();
        assert_eq!(add_input_score(&a, &[0.0; 3]).unwrap(), a);
        let w = StochasticMatrix::from_fn(3, 3, |_, _| 1.0 / 3.0).unwrap();
        let f = gamma_nonempty_given_marginal(&w, &q, &a, DEFAULT_TIE_TOL).unwrap();
        assert!(!f.feasible);
        // Only the penalized input survives in every support set.
        for y in 0..3 {
            for z in 0..3 {
                assert_eq!(support_set(&q, &a, y, z, 0.0).unwrap().members, vec![1]);
            }
        }
    }

    #[test]
    fn minus_infinity_rules() {
        let q = AdditiveMetric::log_likelihood(vec![vec![0.0, f64::NEG_INFINITY], vec![0.0, 0.0]]).unwrap();
        let rho = AdditiveMetric::log_likelihood(vec![vec![f64::NEG_INFINITY, 0.0], vec![0.0, 0.0]]).unwrap();
        // q(0,1) = -inf with rho(0,1) finite: x = 0 dominates.
        assert_eq!(tau(&q, &rho, 1, 1).unwrap(), f64::INFINITY);
        assert_eq!(support_set(&q, &rho, 1, 1, 0.0).unwrap().members, vec![0]);
        // rho(0,0) = -inf: x = 0 never attains.
        assert_eq!(support_set(&q, &rho, 0, 0, 0.0).unwrap().members, vec![1]);
        let all_neg = AdditiveMetric::log_likelihood(vec![vec![f64::NEG_INFINITY]; 2]).unwrap();
        let q1 = AdditiveMetric::new(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(tau(&q1, &all_neg, 0, 0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(support_set(&q1, &all_neg, 0, 0, 0.0).unwrap().members, vec![0, 1]);
    }

    #[test]
    fn lifting_and_product_membership() {
        use crate::prob::{product_channel, DEFAULT_PRODUCT_CAP};
        let q = AdditiveMetric::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let q1 = lift_metric(&q, 1, 64).unwrap();
        assert_eq!(q1, q);
        let q2 = lift_metric(&q, 2, 64).unwrap();
        assert_eq!(q2.get(2, 1), 0.5 * (q.get(1, 0) + q.get(0, 1)));

        let w = StochasticMatrix::new(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let member = BroadcastChannel::splice(&w);
        let p2 = product_channel(&member, 2, DEFAULT_PRODUCT_CAP).unwrap();
        assert!(gamma_k_membership(&p2, &q, &q, 2, DEFAULT_TIE_TOL, 64).unwrap().member);

        let swapped = BroadcastChannel::from_fn(2, 2, 2, |x, y, z| if z != y { w.get(x, y) } else { 0.0 }).unwrap();
        assert!(!gamma_membership(&swapped, &q, &q, DEFAULT_TIE_TOL).unwrap().member);
        let p2 = product_channel(&swapped, 2, DEFAULT_PRODUCT_CAP).unwrap();
        assert!(!gamma_k_membership(&p2, &q, &q, 2, DEFAULT_TIE_TOL, 64).unwrap().member);
    }
}
