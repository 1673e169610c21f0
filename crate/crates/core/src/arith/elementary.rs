//! Certified natural logarithm.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::interval::{rational_floor_scaled, CertifiedReal};

/// Fixed-point `atanh(z)` for `0 ≤ z < 1/3`, returned as `(S, err)` with
/// `|atanh(z) − S·2^-w| ≤ err·2^-w`.
fn atanh_fixed(z: &BigRational, w: u32) -> (BigInt, BigInt) {
    let zf = rational_floor_scaled(z, w);
    if zf.is_zero() {
        // z < 2^-w, so atanh(z) < 2^-w · 9/8
        return (BigInt::zero(), BigInt::from(2));
    }
    let z2 = (&zf * &zf) >> w;
    let mut power = zf.clone();
    let mut sum = BigInt::zero();
    let mut terms: u64 = 0;
    let mut i: u64 = 0;
    while !power.is_zero() {
        sum += &power / BigInt::from(2 * i + 1);
        power = (&power * &z2) >> w;
        i += 1;
        terms += 1;
    }
    // input truncation ≤ 9/8 ulp; each term loses < 2 ulp; tail < 2 ulp
    let err = BigInt::from(4 * terms + 8);
    (sum, err)
}

/// Enclosure of `ln x` for a positive rational, accurate to about `bits` bits.
pub fn ln_rational(x: &BigRational, bits: u32) -> CertifiedReal {
    assert!(x.is_positive(), "ln of non-positive value");
    let num = x.numer();
    let den = x.denom();
    // x = 2^e · m with 1 ≤ m < 2
    let mut e: i64 = num.bits() as i64 - den.bits() as i64;
    let pow2 = |k: i64| -> BigRational {
        if k >= 0 {
            BigRational::from_integer(BigInt::one() << (k as u32))
        } else {
            BigRational::new(BigInt::one(), BigInt::one() << ((-k) as u32))
        }
    };
    let mut m = x / pow2(e);
    if m < BigRational::one() {
        e -= 1;
        m = x / pow2(e);
    }
    debug_assert!(m >= BigRational::one() && m < BigRational::from_integer(BigInt::from(2)));
    let w = bits + 32 + (64 - e.unsigned_abs().leading_zeros());
    let one = BigRational::one();
    let z = (&m - &one) / (&m + &one);
    let (s_m, err_m) = atanh_fixed(&z, w);
    let third = BigRational::new(BigInt::one(), BigInt::from(3));
    let (s_2, err_2) = atanh_fixed(&third, w);
    // ln x = 2·atanh(z) + e·2·atanh(1/3)
    let e_big = BigInt::from(e);
    let center = (&s_m << 1) + (&s_2 << 1) * &e_big;
    let err = (&err_m << 1) + (&err_2 << 1) * e_big.abs() + 1;
    CertifiedReal::from_parts(&center - &err, &center + &err, w).rescale(bits + 8)
}

pub fn ln2(bits: u32) -> CertifiedReal {
    ln_rational(&BigRational::from_integer(BigInt::from(2)), bits)
}

/// Certified `log2` of a positive integer; exact for powers of two.
pub fn log2_int(r: &BigInt, bits: u32) -> CertifiedReal {
    assert!(r.is_positive());
    if (r & (r - 1u32)).is_zero() {
        return CertifiedReal::exact_int(BigInt::from(r.bits() - 1));
    }
    let x = BigRational::from_integer(r.clone());
    ln_rational(&x, bits + 8).div(&ln2(bits + 8)).expect("ln 2 > 0")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn ln2_matches_known_digits() {
        let l = ln2(200);
        assert!(l.precision_bits() >= 190);
        let lo = l.to_decimal(30);
        assert!(lo.starts_with("0.69314718055994530941723212145"), "{lo}");
    }

    #[test]
    fn ln_of_small_and_large_values() {
        let a = ln_rational(&q(1, 1000), 100);
        assert!((a.to_f64() - (0.001f64).ln()).abs() < 1e-14);
        let b = ln_rational(&q(1000, 1), 100);
        assert!((b.to_f64() - 1000f64.ln()).abs() < 1e-12);
        let one = ln_rational(&q(1, 1), 64);
        assert!(one.contains_zero());
        let e_approx = ln_rational(&q(271_828_182_845_904_523, 100_000_000_000_000_000), 80);
        assert!((e_approx.to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log2_exact_on_powers_of_two() {
        let l = log2_int(&BigInt::from(1u64 << 26), 64);
        assert!(l.is_point());
        assert_eq!(l.lower(), q(26, 1));
        let l3 = log2_int(&BigInt::from(3), 80);
        assert!((l3.to_f64() - 3f64.log2()).abs() < 1e-15);
    }
}
