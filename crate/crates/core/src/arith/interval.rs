//! Fixed-point dyadic intervals with outward rounding.
//!
//! A [`CertifiedReal`] is the closed interval `[lo, hi] · 2^-scale` with
//! arbitrary-precision integer endpoints. Every operation rounds its result
//! outward, so the true value of any expression built from enclosures stays
//! inside the computed enclosure.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CertifiedReal {
    lo: BigInt,
    hi: BigInt,
    scale: u32,
}

pub(crate) fn shr_floor(x: &BigInt, d: u32) -> BigInt {
    if d == 0 {
        return x.clone();
    }
    x.div_floor(&(BigInt::one() << d))
}

pub(crate) fn shr_ceil(x: &BigInt, d: u32) -> BigInt {
    if d == 0 {
        return x.clone();
    }
    -((-x).div_floor(&(BigInt::one() << d)))
}

pub(crate) fn div_ceil(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

/// Floor of `r · 2^scale`.
pub(crate) fn rational_floor_scaled(r: &BigRational, scale: u32) -> BigInt {
    (r.numer() << scale).div_floor(r.denom())
}

pub(crate) fn rational_ceil_scaled(r: &BigRational, scale: u32) -> BigInt {
    div_ceil(&(r.numer() << scale), r.denom())
}

impl CertifiedReal {
    pub fn from_parts(lo: BigInt, hi: BigInt, scale: u32) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        CertifiedReal { lo, hi, scale }
    }

    pub fn zero() -> Self {
        Self::exact_int(0)
    }

    pub fn one() -> Self {
        Self::exact_int(1)
    }

    pub fn exact_int<T: Into<BigInt>>(v: T) -> Self {
        let v = v.into();
        CertifiedReal { lo: v.clone(), hi: v, scale: 0 }
    }

    /// Outward enclosure of a rational at `scale` fractional bits.
    pub fn from_rational(r: &BigRational, scale: u32) -> Self {
        let lo = rational_floor_scaled(r, scale);
        let hi = rational_ceil_scaled(r, scale);
        CertifiedReal { lo, hi, scale }
    }

    /// Hull of two rationals (in either order), rounded outward.
    pub fn from_rational_bounds(a: &BigRational, b: &BigRational, scale: u32) -> Self {
        let (l, h) = if a <= b { (a, b) } else { (b, a) };
        CertifiedReal { lo: rational_floor_scaled(l, scale), hi: rational_ceil_scaled(h, scale), scale }
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn lo_raw(&self) -> &BigInt {
        &self.lo
    }

    pub fn hi_raw(&self) -> &BigInt {
        &self.hi
    }

    fn unit(&self) -> BigInt {
        BigInt::one() << self.scale
    }

    pub fn lower(&self) -> BigRational {
        BigRational::new(self.lo.clone(), self.unit())
    }

    pub fn upper(&self) -> BigRational {
        BigRational::new(self.hi.clone(), self.unit())
    }

    pub fn midpoint(&self) -> BigRational {
        BigRational::new(&self.lo + &self.hi, self.unit() << 1)
    }

    pub fn width(&self) -> BigRational {
        BigRational::new(&self.hi - &self.lo, self.unit())
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// Largest `p` with `width ≤ 2^-p`; `u32::MAX` for a point interval.
    pub fn precision_bits(&self) -> u32 {
        if self.is_point() {
            return u32::MAX;
        }
        let w: BigInt = &self.hi - &self.lo - 1u32;
        let ceil_log2 = w.bits() as i64;
        (self.scale as i64 - ceil_log2).max(0) as u32
    }

    /// Re-express at another scale; lowering the scale rounds outward.
    pub fn rescale(&self, scale: u32) -> Self {
        match scale.cmp(&self.scale) {
            Ordering::Equal => self.clone(),
            Ordering::Greater => {
                let d = scale - self.scale;
                CertifiedReal { lo: &self.lo << d, hi: &self.hi << d, scale }
            }
            Ordering::Less => {
                let d = self.scale - scale;
                CertifiedReal { lo: shr_floor(&self.lo, d), hi: shr_ceil(&self.hi, d), scale }
            }
        }
    }

    fn aligned(&self, other: &Self) -> (Self, Self) {
        let s = self.scale.max(other.scale);
        (self.rescale(s), other.rescale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        CertifiedReal { lo: a.lo + b.lo, hi: a.hi + b.hi, scale: a.scale }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        CertifiedReal { lo: a.lo - b.hi, hi: a.hi - b.lo, scale: a.scale }
    }

    pub fn neg(&self) -> Self {
        CertifiedReal { lo: -&self.hi, hi: -&self.lo, scale: self.scale }
    }

    pub fn mul_int(&self, k: &BigInt) -> Self {
        let a = &self.lo * k;
        let b = &self.hi * k;
        if k.is_negative() {
            CertifiedReal { lo: b, hi: a, scale: self.scale }
        } else {
            CertifiedReal { lo: a, hi: b, scale: self.scale }
        }
    }

    /// Interval product, returned at the larger of the two scales.
    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        let s = a.scale;
        let products = [&a.lo * &b.lo, &a.lo * &b.hi, &a.hi * &b.lo, &a.hi * &b.hi];
        let min = products.iter().min().unwrap();
        let max = products.iter().max().unwrap();
        CertifiedReal { lo: shr_floor(min, s), hi: shr_ceil(max, s), scale: s }
    }

    /// Quotient at the larger of the two scales. Fails if the divisor straddles zero.
    pub fn div(&self, other: &Self) -> Result<Self> {
        if other.contains_zero() {
            return Err(Error::InvalidInput("division by an interval containing zero".into()));
        }
        let (a, b) = self.aligned(other);
        let s = a.scale;
        // (x / 2^s) / (y / 2^s) · 2^s = x · 2^s / y
        let mut lo: Option<BigInt> = None;
        let mut hi: Option<BigInt> = None;
        for x in [&a.lo, &a.hi] {
            for y in [&b.lo, &b.hi] {
                let num = x << s;
                let f = num.div_floor(y);
                let c = div_ceil(&num, y);
                lo = Some(match lo {
                    Some(v) if v <= f => v,
                    _ => f,
                });
                hi = Some(match hi {
                    Some(v) if v >= c => v,
                    _ => c,
                });
            }
        }
        Ok(CertifiedReal { lo: lo.unwrap(), hi: hi.unwrap(), scale: s })
    }

    pub fn div_int(&self, k: &BigInt) -> Result<Self> {
        self.div(&CertifiedReal::exact_int(k.clone()))
    }

    pub fn abs(&self) -> Self {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            let m = if -&self.lo > self.hi { -&self.lo } else { self.hi.clone() };
            CertifiedReal { lo: BigInt::zero(), hi: m, scale: self.scale }
        }
    }

    pub fn min(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        CertifiedReal { lo: a.lo.min(b.lo), hi: a.hi.min(b.hi), scale: a.scale }
    }

    pub fn max(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        CertifiedReal { lo: a.lo.max(b.lo), hi: a.hi.max(b.hi), scale: a.scale }
    }

    pub fn hull(&self, other: &Self) -> Self {
        let (a, b) = self.aligned(other);
        CertifiedReal { lo: a.lo.min(b.lo), hi: a.hi.max(b.hi), scale: a.scale }
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.lo.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.hi.is_negative()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }

    /// `true` when every point of `self` is strictly below every point of `other`.
    pub fn certainly_lt(&self, other: &Self) -> bool {
        let (a, b) = self.aligned(other);
        a.hi < b.lo
    }

    pub fn certainly_le(&self, other: &Self) -> bool {
        let (a, b) = self.aligned(other);
        a.hi <= b.lo
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        let (a, b) = self.aligned(other);
        a.lo <= b.hi && b.lo <= a.hi
    }

    pub fn contains_rational(&self, r: &BigRational) -> bool {
        &self.lower() <= r && r <= &self.upper()
    }

    /// Certified floor, if both endpoints have the same integer part.
    pub fn floor(&self) -> Option<BigInt> {
        let a = shr_floor(&self.lo, self.scale);
        let b = shr_floor(&self.hi, self.scale);
        (a == b).then_some(a)
    }

    /// Enclosure of the distance to the nearest integer, `‖x‖ ∈ [0, 1/2]`.
    pub fn dist_to_nearest_int(&self) -> Self {
        // need at least one fractional bit to represent 1/2 exactly
        let x = if self.scale == 0 { self.rescale(1) } else { self.clone() };
        let s = x.scale;
        let unit = BigInt::one() << s;
        let half = BigInt::one() << (s - 1);
        if &x.hi - &x.lo >= unit {
            return CertifiedReal { lo: BigInt::zero(), hi: half, scale: s };
        }
        let k = x.lo.div_floor(&unit);
        let base = &k * &unit;
        let l = &x.lo - &base;
        let h = &x.hi - &base;
        let tent = |v: &BigInt| -> BigInt {
            let r = v.mod_floor(&unit);
            let other = &unit - &r;
            if r < other {
                r
            } else {
                other
            }
        };
        let tl = tent(&l);
        let th = tent(&h);
        let lo = if h >= unit || l.is_zero() { BigInt::zero() } else { tl.clone().min(th.clone()) };
        let three_half = &unit + &half;
        let hi = if (l <= half && half <= h) || (l <= three_half && three_half <= h) { half } else { tl.max(th) };
        CertifiedReal { lo, hi, scale: s }
    }

    pub fn pow_u32(&self, k: u32) -> Self {
        if k == 0 {
            return CertifiedReal::one();
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.mul(self);
        }
        if k.is_multiple_of(2) && self.contains_zero() {
            // even power of a sign-straddling interval is nonnegative
            let s = acc.scale;
            let hi = acc.hi.clone();
            return CertifiedReal { lo: BigInt::zero(), hi, scale: s };
        }
        acc
    }

    /// Outward enclosure of the `k`-th root of a nonnegative interval.
    pub fn nth_root(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("zeroth root".into()));
        }
        if self.lo.is_negative() {
            return Err(Error::InvalidInput("root of a negative interval".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let s = self.scale;
        // x^(1/k) · 2^s = (X · 2^(s(k-1)))^(1/k) where x = X / 2^s
        let shift = s as u64 * (k as u64 - 1);
        let shift = u32::try_from(shift).map_err(|_| Error::InvalidInput("root scale overflow".into()))?;
        let lo_arg = &self.lo << shift;
        let hi_arg = &self.hi << shift;
        let lo = lo_arg.nth_root(k);
        let mut hi = hi_arg.nth_root(k);
        if hi.pow(k) < hi_arg {
            hi += 1;
        }
        Ok(CertifiedReal { lo, hi, scale: s })
    }

    /// `x^(p/q)` for a nonnegative interval.
    pub fn pow_ratio(&self, p: u32, q: u32) -> Result<Self> {
        self.pow_u32(p).nth_root(q)
    }

    /// Natural logarithm of a strictly positive interval.
    pub fn ln(&self) -> Result<Self> {
        if !self.is_positive() {
            return Err(Error::InvalidInput("logarithm of a non-positive interval".into()));
        }
        let bits = self.scale.max(64) + 16;
        let a = crate::arith::elementary::ln_rational(&self.lower(), bits);
        if self.is_point() {
            return Ok(a);
        }
        let b = crate::arith::elementary::ln_rational(&self.upper(), bits);
        Ok(a.hull(&b))
    }

    pub fn to_f64(&self) -> f64 {
        let m = self.midpoint();
        rational_to_f64(&m)
    }

    pub fn lower_f64(&self) -> f64 {
        rational_to_f64(&self.lower()).next_down()
    }

    pub fn upper_f64(&self) -> f64 {
        rational_to_f64(&self.upper()).next_up()
    }

    /// Decimal rendering of the midpoint with `sig` significant digits.
    pub fn to_decimal(&self, sig: usize) -> String {
        format_rational(&self.midpoint(), sig)
    }

    /// Decimal rendering that is certified: `Some` only when both endpoints
    /// round to the same `sig`-digit string.
    pub fn certified_decimal(&self, sig: usize) -> Option<String> {
        let a = format_rational(&self.lower(), sig);
        let b = format_rational(&self.upper(), sig);
        (a == b).then_some(a)
    }
}

impl fmt::Display for CertifiedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            write!(f, "{}", format_rational(&self.lower(), 20))
        } else {
            write!(f, "[{}, {}]", format_rational(&self.lower(), 20), format_rational(&self.upper(), 20))
        }
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    // keep ~64 significant bits before converting
    let n = r.numer();
    let d = r.denom();
    let shift = 64i64 - (n.bits() as i64 - d.bits() as i64);
    let q = if shift >= 0 { (n << shift as u32) / d } else { n / (d << (-shift) as u32) };
    let qf = q.to_f64().unwrap_or(f64::NAN);
    qf * 2f64.powi(-(shift as i32))
}

fn pow10(k: u32) -> BigInt {
    num_traits::pow(BigInt::from(10u32), k as usize)
}

/// Round-half-up decimal rendering with `sig` significant digits. Values
/// with a short exact decimal expansion are printed exactly.
pub fn format_rational(r: &BigRational, sig: usize) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let x = r.abs();
    // exact short decimal?
    if let Some(s) = exact_decimal(&x, sig) {
        return if neg { format!("-{s}") } else { s };
    }
    // decimal exponent e with 10^e ≤ x < 10^(e+1)
    let mut e: i64 =
        ((x.numer().bits() as f64 - x.denom().bits() as f64) * std::f64::consts::LOG10_2).floor() as i64 - 1;
    let pow = |k: i64| -> BigRational {
        if k >= 0 {
            BigRational::from_integer(pow10(k as u32))
        } else {
            BigRational::new(BigInt::one(), pow10((-k) as u32))
        }
    };
    while pow(e + 1) <= x {
        e += 1;
    }
    while pow(e) > x {
        e -= 1;
    }
    let shift = sig as i64 - 1 - e;
    let scaled = &x * pow(shift);
    let mut digits = (scaled + BigRational::new(BigInt::one(), BigInt::from(2))).floor().to_integer();
    if digits >= pow10(sig as u32) {
        digits /= 10;
        e += 1;
    }
    let ds = digits.to_string();
    let body = place_point(&ds, e);
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

fn place_point(ds: &str, e: i64) -> String {
    // ds has sig digits, value = 0.ds × 10^(e+1)
    if !(-8..=40).contains(&e) {
        let (a, b) = ds.split_at(1);
        return if b.is_empty() { format!("{a}e{e}") } else { format!("{a}.{b}e{e}") };
    }
    if e >= 0 {
        let int_len = (e + 1) as usize;
        if ds.len() <= int_len {
            let mut s = ds.to_string();
            s.extend(std::iter::repeat_n('0', int_len - ds.len()));
            s
        } else {
            format!("{}.{}", &ds[..int_len], &ds[int_len..])
        }
    } else {
        let zeros = (-e - 1) as usize;
        format!("0.{}{}", "0".repeat(zeros), ds)
    }
}

fn exact_decimal(x: &BigRational, sig: usize) -> Option<String> {
    // denominator must be 2^a 5^b
    let mut d = x.denom().clone();
    let mut k = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut a, mut b) = (0u32, 0u32);
    while (&d % &two).is_zero() {
        d /= &two;
        a += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        b += 1;
    }
    if !d.is_one() {
        return None;
    }
    k += a.max(b);
    let scaled = (x * BigRational::from_integer(pow10(k))).to_integer();
    let s = scaled.to_string();
    let significant = s.trim_start_matches('0').trim_end_matches('0').len();
    if significant > sig {
        return None;
    }
    if k == 0 {
        return Some(s);
    }
    let k = k as usize;
    let out = if s.len() > k {
        format!("{}.{}", &s[..s.len() - k], &s[s.len() - k..])
    } else {
        format!("0.{}{}", "0".repeat(k - s.len()), s)
    };
    Some(out)
}
