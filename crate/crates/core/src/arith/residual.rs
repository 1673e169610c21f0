//! `‖m·θ‖` with an `i128` fixed-point fast path and a refinable big-integer path.

use num_bigint::BigInt;
use num_traits::Signed;

use super::interval::CertifiedReal;
use super::source::TargetVector;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_BITS: u32 = 4096;

/// Maximum working precision, from `TWISTEDBAD_MAX_BITS` if set.
pub fn max_bits_from_env() -> u32 {
    std::env::var("TWISTEDBAD_MAX_BITS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&b: &u32| b >= 32)
        .unwrap_or(DEFAULT_MAX_BITS)
}

/// Enclosure of `‖m·θ‖` at roughly `bits` bits of precision.
pub fn residual_at(m: &[i64], theta: &TargetVector, bits: u32) -> CertifiedReal {
    let big: Vec<BigInt> = m.iter().map(|&x| BigInt::from(x)).collect();
    theta.dot(&big, bits).dist_to_nearest_int()
}

/// `‖m·θ‖`, refined until it is certified positive.
///
/// Returns an exact zero when `m·θ` is provably an integer and
/// `PrecisionExhausted` when positivity cannot be certified by `max_bits`.
pub fn dot_residual(m: &[i64], theta: &TargetVector, max_bits: u32) -> Result<CertifiedReal> {
    if m.len() != theta.n() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if m.iter().all(|&x| x == 0) {
        return Err(Error::InvalidInput("zero vector".into()));
    }
    if let Ok(Some(r)) = theta.exact_dot_i64(m) {
        return Ok(CertifiedReal::from_rational(&r, 64).dist_to_nearest_int());
    }
    let mut bits = 64u32.min(max_bits);
    loop {
        let d = residual_at(m, theta, bits);
        if d.is_positive() {
            return Ok(d);
        }
        if bits >= max_bits || theta.declared_bits().is_some_and(|b| b < bits) {
            return Err(Error::PrecisionExhausted {
                bits, context: format!("cannot certify ‖m·θ‖ > 0 for m = {m:?}")
            });
        }
        bits = (bits * 2).min(max_bits);
    }
}

/// θ stored as `i128` enclosures at a fixed scale for fast residual sweeps.
#[derive(Debug, Clone)]
pub struct FixedTheta {
    scale: u32,
    lo: Vec<i128>,
    hi: Vec<i128>,
}

impl FixedTheta {
    /// Chooses the largest scale at which `Σ|m_i|·|θ_i|` cannot overflow for
    /// `|m_i| ≤ max_coord`. Returns `None` if that leaves fewer than 48 bits.
    pub fn new(theta: &TargetVector, max_coord: u64) -> Option<Self> {
        let coarse = theta.enclose(32);
        let mag_bits = coarse
            .iter()
            .map(|c| {
                let m = c.lo_raw().abs().max(c.hi_raw().abs());
                (m.bits() as i64 - c.scale() as i64).max(0) as u32 + 1
            })
            .max()
            .unwrap_or(1);
        let coord_bits = 64 - max_coord.max(1).leading_zeros();
        let n_bits = 64 - (theta.n() as u64).leading_zeros();
        let headroom = 124i64 - mag_bits as i64 - coord_bits as i64 - n_bits as i64;
        if headroom < 48 {
            return None;
        }
        let scale = headroom.min(110) as u32;
        let mut lo = Vec::with_capacity(theta.n());
        let mut hi = Vec::with_capacity(theta.n());
        for c in theta.components() {
            let e = super::source::Refinable::enclose(c, scale).rescale(scale);
            lo.push(i128::try_from(e.lo_raw().clone()).ok()?);
            hi.push(i128::try_from(e.hi_raw().clone()).ok()?);
        }
        Some(FixedTheta { scale, lo, hi })
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// Enclosure of `c·θ_t`.
    #[inline]
    pub fn dot_term(&self, t: usize, c: i64) -> (i128, i128) {
        let c = c as i128;
        if c >= 0 {
            (c * self.lo[t], c * self.hi[t])
        } else {
            (c * self.hi[t], c * self.lo[t])
        }
    }

    /// Enclosure `[lo, hi]·2^-scale` of `m·θ`.
    #[inline]
    pub fn dot(&self, m: &[i64]) -> (i128, i128) {
        let mut lo = 0i128;
        let mut hi = 0i128;
        for ((&c, &a), &b) in m.iter().zip(&self.lo).zip(&self.hi) {
            let c = c as i128;
            if c >= 0 {
                lo += c * a;
                hi += c * b;
            } else {
                lo += c * b;
                hi += c * a;
            }
        }
        (lo, hi)
    }

    /// Enclosure of `‖x‖` for `x ∈ [lo, hi]·2^-scale`.
    #[inline]
    pub fn tent(&self, lo: i128, hi: i128) -> (i128, i128) {
        let unit = 1i128 << self.scale;
        let half = unit >> 1;
        let width = hi - lo;
        if width >= unit {
            return (0, half);
        }
        let l = lo & (unit - 1);
        let h = l + width;
        let t = |v: i128| {
            let r = v & (unit - 1);
            r.min(unit - r)
        };
        let (tl, th) = (t(l), t(h));
        let min = if h >= unit || l == 0 { 0 } else { tl.min(th) };
        let max = if (l <= half && half <= h) || (l <= unit + half && unit + half <= h) { half } else { tl.max(th) };
        (min, max)
    }

    #[inline]
    pub fn residual(&self, m: &[i64]) -> (i128, i128) {
        let (lo, hi) = self.dot(m);
        self.tent(lo, hi)
    }

    pub fn to_certified(&self, r: (i128, i128)) -> CertifiedReal {
        CertifiedReal::from_parts(BigInt::from(r.0), BigInt::from(r.1), self.scale)
    }
}

/// `true` if `m` is nonzero with its first nonzero entry positive.
pub fn is_sign_normalized(m: &[i64]) -> bool {
    m.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

pub fn sign_normalize(m: &mut [i64]) {
    if let Some(&x) = m.iter().find(|&&x| x != 0) {
        if x < 0 {
            m.iter_mut().for_each(|v| *v = -*v);
        }
    }
}
