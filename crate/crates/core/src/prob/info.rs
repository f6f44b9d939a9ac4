use super::{JointPmf, ProbVector, RateValue, StochasticMatrix};
use crate::error::{Error, Result};

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// `D(p || q)` in nats. Mass of `p` where `q` vanishes gives `+inf`.
pub fn divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            d += a * (a / b).ln();
        }
    }
    d.max(0.0)
}

/// `I(X;Y)` for raw rows, `sum_x p(x) D(W(.|x) || pW)`.
pub(crate) fn mutual_information_raw(input: &[f64], channel: &StochasticMatrix) -> f64 {
    let out = channel.output_distribution(input);
    input
        .iter()
        .zip(channel.rows())
        .filter(|(&px, _)| px > 0.0)
        .map(|(&px, row)| px * divergence(row, &out))
        .sum::<f64>()
        .max(0.0)
}

pub fn mutual_information(input: &ProbVector, channel: &StochasticMatrix) -> Result<RateValue> {
    if input.len() != channel.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "input law has {} symbols, channel has {} inputs",
            input.len(),
            channel.inputs()
        )));
    }
    Ok(RateValue::from_nats(mutual_information_raw(
        input.as_slice(),
        channel,
    )))
}

pub fn kl_divergence(p: &JointPmf, q: &JointPmf) -> Result<f64> {
    if p.dims() != q.dims() {
        return Err(Error::DimensionMismatch(format!(
            "pmf dims {:?} vs {:?}",
            p.dims(),
            q.dims()
        )));
    }
    Ok(divergence(p.mass(), q.mass()))
}

/// `D(V || W | P) = sum_x P(x) D(V(.|x) || W(.|x))`.
pub fn conditional_kl(v: &StochasticMatrix, w: &StochasticMatrix, p: &ProbVector) -> Result<f64> {
    if v.inputs() != w.inputs() || v.outputs() != w.outputs() || p.len() != v.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "V is {}x{}, W is {}x{}, P has {} symbols",
            v.inputs(),
            v.outputs(),
            w.inputs(),
            w.outputs(),
            p.len()
        )));
    }
    let mut total = 0.0;
    for x in p.support() {
        let d = divergence(v.row(x), w.row(x));
        if d.is_infinite() {
            return Ok(f64::INFINITY);
        }
        total += p[x] * d;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn typewriter5() -> StochasticMatrix {
        StochasticMatrix::from_fn(5, 5, |x, z| {
            if z == x || z == (x + 1) % 5 {
                0.5
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn noiseless_channel_gives_input_entropy() {
        let i = mutual_information(&ProbVector::uniform(5), &StochasticMatrix::identity(5)).unwrap();
        assert!((i.nats() - 5f64.ln()).abs() < 1e-12);
        assert!((i.bits() - 2.321928).abs() < 1e-6);
    }

    #[test]
    fn constant_rows_give_zero() {
        let w = StochasticMatrix::new(vec![vec![0.2, 0.8]; 3]).unwrap();
        let p = ProbVector::new(vec![0.1, 0.3, 0.6]).unwrap();
        assert!(mutual_information(&p, &w).unwrap().nats().abs() < 1e-15);
    }

    #[test]
    fn typewriter_uniform_input() {
        // H(Z) - H(Z|X) = log 5 - log 2
        let i = mutual_information(&ProbVector::uniform(5), &typewriter5()).unwrap();
        assert!((i.nats() - (2.5f64).ln()).abs() < 1e-12);
        assert!((i.bits() - 1.321928).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let w = StochasticMatrix::identity(3);
        assert!(matches!(
            mutual_information(&ProbVector::uniform(2), &w),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn kl_examples() {
        let p = JointPmf::new(vec![2], vec![1.0, 0.0]).unwrap();
        let q = JointPmf::new(vec![2], vec![0.5, 0.5]).unwrap();
        assert!((kl_divergence(&p, &q).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
        assert_eq!(kl_divergence(&q, &p).unwrap(), f64::INFINITY);
    }

    #[test]
    fn conditional_kl_ignores_rows_outside_support() {
        let v = StochasticMatrix::new(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let w = StochasticMatrix::new(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let only_first = ProbVector::point(2, 0);
        assert_eq!(conditional_kl(&v, &w, &only_first).unwrap(), 0.0);
        let both = ProbVector::uniform(2);
        assert_eq!(conditional_kl(&v, &w, &both).unwrap(), f64::INFINITY);
    }
}
