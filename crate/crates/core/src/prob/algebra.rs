use super::{checked_pow, BroadcastChannel};
use crate::error::{Error, Result};

/// Largest alphabet a product construction may create.
pub const DEFAULT_PRODUCT_CAP: usize = 1024;

const MARGINAL_TOL: f64 = 1e-8;

/// Chains `P(y1,y2|x)` with `P(y2,y3|x)` through the shared middle output:
///
/// `P(y1,y3|x) = sum_y2 P(y1,y2|x) P(y3|x,y2)`,
///
/// where `P(y3|x,y2)` is read off `second`. Middle symbols with zero
/// probability under `second` contribute nothing. The two channels must
/// agree on the law of the middle output.
pub fn compose_channels(first: &BroadcastChannel, second: &BroadcastChannel) -> Result<BroadcastChannel> {
    if first.nx() != second.nx() || first.nz() != second.ny() {
        return Err(Error::DimensionMismatch(format!(
            "cannot chain {}x{}x{} with {}x{}x{}",
            first.nx(),
            first.ny(),
            first.nz(),
            second.nx(),
            second.ny(),
            second.nz()
        )));
    }
    let (nx, n1, n2, n3) = (first.nx(), first.ny(), first.nz(), second.nz());
    let mid_first = first.z_marginal();
    let mid_second = second.y_marginal();
    for x in 0..nx {
        for y2 in 0..n2 {
            let (a, b) = (mid_first.get(x, y2), mid_second.get(x, y2));
            if (a - b).abs() > MARGINAL_TOL {
                return Err(Error::InvalidArgument(format!(
                    "middle marginals differ at (x={x}, y2={y2}): {a} vs {b}"
                )));
            }
        }
    }
    let mut data = vec![0.0; nx * n1 * n3];
    for x in 0..nx {
        for y2 in 0..n2 {
            let mass = mid_second.get(x, y2);
            if mass <= 0.0 {
                continue;
            }
            for y1 in 0..n1 {
                let a = first.get(x, y1, y2);
                if a == 0.0 {
                    continue;
                }
                for y3 in 0..n3 {
                    data[(x * n1 + y1) * n3 + y3] += a * second.get(x, y2, y3) / mass;
                }
            }
        }
    }
    BroadcastChannel::new(nx, n1, n3, data)
}

/// The `k`-letter memoryless extension. Tuples are indexed in mixed radix
/// with the first letter most significant.
pub fn product_channel(channel: &BroadcastChannel, k: usize, cap: usize) -> Result<BroadcastChannel> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let (nx, ny, nz) = (channel.nx(), channel.ny(), channel.nz());
    let kx = checked_pow(nx, k, cap, "product input alphabet")?;
    let ky = checked_pow(ny, k, cap, "product first-output alphabet")?;
    let kz = checked_pow(nz, k, cap, "product second-output alphabet")?;
    let mut data = vec![0.0; kx * ky * kz];
    let digits = |mut v: usize, base: usize| {
        let mut d = vec![0; k];
        for slot in d.iter_mut().rev() {
            *slot = v % base;
            v /= base;
        }
        d
    };
    for xs in 0..kx {
        let dx = digits(xs, nx);
        for ys in 0..ky {
            let dy = digits(ys, ny);
            for zs in 0..kz {
                let dz = digits(zs, nz);
                let mut p = 1.0;
                for i in 0..k {
                    p *= channel.get(dx[i], dy[i], dz[i]);
                    if p == 0.0 {
                        break;
                    }
                }
                data[(xs * ky + ys) * kz + zs] = p;
            }
        }
    }
    Ok(BroadcastChannel::from_flat_unchecked(kx, ky, kz, data))
}
