//! Exactly specified reals: rationals, quadratic irrationals and decimal
//! literals with a declared precision.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use num_bigint::BigInt;
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use regex::Regex;

use super::interval::{rational_ceil_scaled, rational_floor_scaled, CertifiedReal};
use crate::error::{Error, Result};

/// A real number that can be enclosed to any requested precision.
pub trait Refinable: Send + Sync {
    /// Enclosure of width at most `2^-bits`, unless the source is itself
    /// only known to a coarser precision.
    fn enclose(&self, bits: u32) -> CertifiedReal;

    /// The exact value, when it is rational.
    fn exact(&self) -> Option<BigRational> {
        None
    }
}

impl Refinable for BigRational {
    fn enclose(&self, bits: u32) -> CertifiedReal {
        CertifiedReal::from_rational(self, bits)
    }

    fn exact(&self) -> Option<BigRational> {
        Some(self.clone())
    }
}

/// A fixed enclosure is opaque: refinement cannot improve it.
impl Refinable for CertifiedReal {
    fn enclose(&self, _bits: u32) -> CertifiedReal {
        self.clone()
    }

    fn exact(&self) -> Option<BigRational> {
        self.is_point().then(|| self.lower())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Less,
    Greater,
    EqualExact,
    Undecided,
}

/// Three-valued comparison. Refines both operands, doubling the precision
/// from 32 bits up to `max_bits`.
pub fn certified_compare(a: &dyn Refinable, b: &dyn Refinable, max_bits: u32) -> Comparison {
    if let (Some(x), Some(y)) = (a.exact(), b.exact()) {
        return match x.cmp(&y) {
            std::cmp::Ordering::Less => Comparison::Less,
            std::cmp::Ordering::Greater => Comparison::Greater,
            std::cmp::Ordering::Equal => Comparison::EqualExact,
        };
    }
    let mut bits = 32.min(max_bits.max(1));
    loop {
        let ea = a.enclose(bits);
        let eb = b.enclose(bits);
        if ea.certainly_lt(&eb) {
            return Comparison::Less;
        }
        if eb.certainly_lt(&ea) {
            return Comparison::Greater;
        }
        if bits >= max_bits {
            return Comparison::Undecided;
        }
        bits = bits.saturating_mul(2).min(max_bits);
    }
}

/// `(a + b·√d) / c` with `d > 1` squarefree, `b ≠ 0` and `c > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuadraticIrrational {
    a: BigInt,
    b: BigInt,
    d: BigInt,
    c: BigInt,
}

/// Splits `d = s²·r` with `r` squarefree.
fn squarefree_split(d: u64) -> (u64, u64) {
    let (mut s, mut free, mut r) = (1u64, 1u64, d);
    let mut p = 2u64;
    while p * p * p <= r {
        if r % p == 0 {
            let mut e = 0;
            while r % p == 0 {
                r /= p;
                e += 1;
            }
            s *= p.pow(e / 2);
            if e % 2 == 1 {
                free *= p;
            }
        }
        p += 1;
    }
    // r has no factor below p and r < p³: it is 1, a prime, a square of a prime, or a semiprime
    let t = r.sqrt();
    if r > 1 && t * t == r {
        s *= t;
    } else {
        free *= r;
    }
    (s, free)
}

impl QuadraticIrrational {
    pub fn a(&self) -> &BigInt {
        &self.a
    }
    pub fn b(&self) -> &BigInt {
        &self.b
    }
    pub fn d(&self) -> &BigInt {
        &self.d
    }
    pub fn c(&self) -> &BigInt {
        &self.c
    }

    fn enclose(&self, bits: u32) -> CertifiedReal {
        // √d at scale t, then (a·2^t + b·√d·2^t) / c
        let t = bits + 2 + self.b.bits() as u32;
        let scaled: BigInt = &self.d << (2 * t);
        let r = scaled.sqrt();
        let exact_root = &r * &r == scaled;
        let r_hi = if exact_root { r.clone() } else { &r + 1u32 };
        let (blo, bhi) =
            if self.b.is_negative() { (&self.b * &r_hi, &self.b * &r) } else { (&self.b * &r, &self.b * &r_hi) };
        let a_scaled = &self.a << t;
        let lo = BigRational::new(&a_scaled + blo, &self.c << t);
        let hi = BigRational::new(&a_scaled + bhi, &self.c << t);
        let s = bits + 2;
        CertifiedReal::from_parts(rational_floor_scaled(&lo, s), rational_ceil_scaled(&hi, s), s)
    }
}

/// The declared source of one real component.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RealSource {
    Rational(BigRational),
    Quadratic(QuadraticIrrational),
    /// An unknown real in `[value − 2^-bits, value + 2^-bits]`.
    Decimal {
        value: BigRational,
        bits: u32,
    },
}

impl RealSource {
    pub fn rational(r: BigRational) -> Self {
        RealSource::Rational(r)
    }

    pub fn from_ints(p: i64, q: i64) -> Self {
        RealSource::Rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    /// Builds `(a + b√d)/c`, collapsing to a rational when `b = 0` or `d` is a square.
    pub fn quadratic(a: BigInt, b: BigInt, d: BigInt, c: BigInt) -> Result<Self> {
        if c.is_zero() {
            return Err(Error::Parse("quadratic irrational with zero denominator".into()));
        }
        if d.is_negative() {
            return Err(Error::Parse("negative radicand".into()));
        }
        let d64 = d.to_u64().filter(|v| *v < (1u64 << 62)).ok_or_else(|| Error::Parse("radicand too large".into()))?;
        let (s, r) = squarefree_split(d64);
        let (mut a, mut b, mut c) = (a, b * BigInt::from(s), c);
        if c.is_negative() {
            a = -a;
            b = -b;
            c = -c;
        }
        if b.is_zero() || r <= 1 {
            let root = if r == 1 { b } else { BigInt::zero() };
            return Ok(RealSource::Rational(BigRational::new(a + root, c)));
        }
        let g = num_integer::Integer::gcd(&num_integer::Integer::gcd(&a, &b), &c);
        if !g.is_one() && !g.is_zero() {
            a /= &g;
            b /= &g;
            c /= &g;
        }
        Ok(RealSource::Quadratic(QuadraticIrrational { a, b, d: BigInt::from(r), c }))
    }

    pub fn decimal(value: BigRational, bits: u32) -> Self {
        RealSource::Decimal { value, bits }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, RealSource::Rational(_))
    }

    /// Precision ceiling of the declaration, if any.
    pub fn declared_bits(&self) -> Option<u32> {
        match self {
            RealSource::Decimal { bits, .. } => Some(*bits),
            _ => None,
        }
    }

    /// Adds `k·self` into an exact linear form, or fails for decimal sources.
    fn accumulate(&self, k: &BigInt, form: &mut ExactForm) -> bool {
        if k.is_zero() {
            return true;
        }
        match self {
            RealSource::Rational(r) => {
                form.rational += r * BigRational::from_integer(k.clone());
                true
            }
            RealSource::Quadratic(q) => {
                form.rational += BigRational::new(&q.a * k, q.c.clone());
                let e = form.surds.entry(q.d.clone()).or_insert_with(BigRational::zero);
                *e += BigRational::new(&q.b * k, q.c.clone());
                true
            }
            RealSource::Decimal { .. } => false,
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.enclose(64).to_f64()
    }
}

impl Refinable for RealSource {
    fn enclose(&self, bits: u32) -> CertifiedReal {
        match self {
            RealSource::Rational(r) => CertifiedReal::from_rational(r, bits),
            RealSource::Quadratic(q) => q.enclose(bits),
            RealSource::Decimal { value, bits: declared } => {
                let _ = bits;
                let eps = BigRational::new(BigInt::one(), BigInt::one() << *declared);
                let s = declared + 8;
                CertifiedReal::from_rational_bounds(&(value - &eps), &(value + &eps), s)
            }
        }
    }

    fn exact(&self) -> Option<BigRational> {
        match self {
            RealSource::Rational(r) => Some(r.clone()),
            _ => None,
        }
    }
}

/// Rational part plus one rational coefficient per squarefree radicand.
#[derive(Debug, Default)]
struct ExactForm {
    rational: BigRational,
    surds: BTreeMap<BigInt, BigRational>,
}

impl ExactForm {
    fn new() -> Self {
        ExactForm { rational: BigRational::zero(), surds: BTreeMap::new() }
    }

    /// The value, if every irrational part cancels.
    fn as_rational(&self) -> Option<&BigRational> {
        self.surds.values().all(|c| c.is_zero()).then_some(&self.rational)
    }
}

static QUAD_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\(\s*([+-]?\d+)\s*([+-])\s*(\d+)\s*\*\s*sqrt\(\s*(\d+)\s*\)\s*\)\s*/\s*(\d+)\s*(?:([+-])\s*(\d+))?$")
        .unwrap()
});

static DEC_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([+-]?)(\d*)(?:\.(\d*))?@(\d+)$").unwrap());

fn parse_int(s: &str) -> Result<BigInt> {
    BigInt::from_str(s.trim()).map_err(|_| Error::Parse(format!("bad integer '{s}'")))
}

/// Parses `p/q`, `p`, or a decimal such as `0.25` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let q = parse_int(q)?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in '{s}'")));
        }
        return Ok(BigRational::new(parse_int(p)?, q));
    }
    if let Some((mant, exp)) = s.split_once(['e', 'E']) {
        let m = parse_rational(mant)?;
        let e: i32 = exp.parse().map_err(|_| Error::Parse(format!("bad exponent in '{s}'")))?;
        let ten = BigInt::from(10);
        let p = num_traits::pow(ten, e.unsigned_abs() as usize);
        return Ok(if e >= 0 { m * BigRational::from_integer(p) } else { m / BigRational::from_integer(p) });
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let int = int.trim_start_matches(['+', '-']);
        let digits = format!("{}{}", if int.is_empty() { "0" } else { int }, frac);
        let n = parse_int(&digits)?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    Ok(BigRational::from_integer(parse_int(s)?))
}

impl FromStr for RealSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(body) = s.strip_prefix("rational:") {
            return Ok(RealSource::Rational(parse_rational(body)?));
        }
        if let Some(body) = s.strip_prefix("quad:") {
            let caps =
                QUAD_RE.captures(body.trim()).ok_or_else(|| Error::Parse(format!("bad quadratic irrational '{s}'")))?;
            let a = parse_int(&caps[1])?;
            let mut b = parse_int(&caps[3])?;
            if &caps[2] == "-" {
                b = -b;
            }
            let d = parse_int(&caps[4])?;
            let c = parse_int(&caps[5])?;
            let mut a = a;
            if let (Some(sign), Some(k)) = (caps.get(6), caps.get(7)) {
                let k = parse_int(k.as_str())? * &c;
                if sign.as_str() == "-" {
                    a -= k;
                } else {
                    a += k;
                }
            }
            return RealSource::quadratic(a, b, d, c);
        }
        if let Some(body) = s.strip_prefix("decimal:") {
            let caps =
                DEC_RE.captures(body.trim()).ok_or_else(|| Error::Parse(format!("bad decimal literal '{s}'")))?;
            let int = &caps[2];
            let frac = caps.get(3).map(|m| m.as_str()).unwrap_or("");
            if int.is_empty() && frac.is_empty() {
                return Err(Error::Parse(format!("empty decimal literal '{s}'")));
            }
            let mut value = parse_rational(&format!("{}.{}", if int.is_empty() { "0" } else { int }, frac))?;
            if &caps[1] == "-" {
                value = -value;
            }
            let bits: u32 = caps[4].parse().map_err(|_| Error::Parse(format!("bad precision in '{s}'")))?;
            if bits == 0 {
                return Err(Error::Parse("decimal precision must be positive".into()));
            }
            return Ok(RealSource::Decimal { value, bits });
        }
        Err(Error::Parse(format!(
            "unrecognised real '{s}' (expected rational:p/q, quad:(a+b*sqrt(d))/c or decimal:<digits>@<bits>)"
        )))
    }
}

fn fmt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for RealSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RealSource::Rational(r) => write!(f, "rational:{}", fmt_rational(r)),
            RealSource::Quadratic(q) => {
                let sign = if q.b.is_negative() { '-' } else { '+' };
                write!(f, "quad:({}{}{}*sqrt({}))/{}", q.a, sign, q.b.abs(), q.d, q.c)
            }
            RealSource::Decimal { value, bits } => {
                write!(f, "decimal:{}@{}", decimal_digits(value), bits)
            }
        }
    }
}

/// Exact decimal expansion of a rational whose denominator is a power of ten.
fn decimal_digits(r: &BigRational) -> String {
    let mut k = 0usize;
    let ten = BigInt::from(10);
    let mut den = BigInt::one();
    while !(r * BigRational::from_integer(den.clone())).is_integer() && k < 10_000 {
        den *= &ten;
        k += 1;
    }
    let scaled = (r * BigRational::from_integer(den)).to_integer();
    let neg = scaled.is_negative();
    let s = scaled.abs().to_string();
    let body = if k == 0 {
        s
    } else if s.len() > k {
        format!("{}.{}", &s[..s.len() - k], &s[s.len() - k..])
    } else {
        format!("0.{}{}", "0".repeat(k - s.len()), s)
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// θ or η: a vector of declared reals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TargetVector {
    components: Vec<RealSource>,
}

impl TargetVector {
    pub fn new(components: Vec<RealSource>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("empty vector".into()));
        }
        Ok(TargetVector { components })
    }

    pub fn from_rationals(v: &[BigRational]) -> Self {
        TargetVector { components: v.iter().cloned().map(RealSource::Rational).collect() }
    }

    pub fn zero(n: usize) -> Self {
        TargetVector { components: vec![RealSource::Rational(BigRational::zero()); n] }
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[RealSource] {
        &self.components
    }

    pub fn source_description(&self) -> Vec<String> {
        self.components.iter().map(|c| c.to_string()).collect()
    }

    pub fn enclose(&self, bits: u32) -> Vec<CertifiedReal> {
        self.components.iter().map(|c| c.enclose(bits)).collect()
    }

    /// Smallest declared precision over the components.
    pub fn declared_bits(&self) -> Option<u32> {
        self.components.iter().filter_map(|c| c.declared_bits()).min()
    }

    pub fn is_rational(&self) -> bool {
        self.components.iter().all(|c| c.is_rational())
    }

    /// The exact rational value of `v·self`, if its irrational parts cancel.
    /// `Err(())` means a decimal source makes the question undecidable.
    #[allow(clippy::result_unit_err)]
    pub fn exact_dot(&self, v: &[BigInt]) -> std::result::Result<Option<BigRational>, ()> {
        let mut form = ExactForm::new();
        for (c, k) in self.components.iter().zip(v) {
            if !c.accumulate(k, &mut form) {
                return Err(());
            }
        }
        Ok(form.as_rational().cloned())
    }

    /// Like [`Self::exact_dot`] for machine integers.
    #[allow(clippy::result_unit_err)]
    pub fn exact_dot_i64(&self, v: &[i64]) -> std::result::Result<Option<BigRational>, ()> {
        let big: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
        self.exact_dot(&big)
    }

    /// Enclosure of `v·self` with width at most `2^-bits`.
    pub fn dot(&self, v: &[BigInt], bits: u32) -> CertifiedReal {
        let weight: u64 = v.iter().map(|x| x.bits()).max().unwrap_or(0) + (self.n() as u64).ilog2() as u64 + 2;
        let inner = bits + weight as u32;
        let mut acc = CertifiedReal::zero().rescale(inner);
        for (c, k) in self.components.iter().zip(v) {
            if k.is_zero() {
                continue;
            }
            acc = acc.add(&c.enclose(inner).mul_int(k));
        }
        acc
    }
}

impl FromStr for TargetVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Result<Vec<RealSource>> = s.split(',').map(RealSource::from_str).collect();
        TargetVector::new(parts?)
    }
}

impl fmt::Display for TargetVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source_description().join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_all_three_forms() {
        let r: RealSource = "rational:3/6".parse().unwrap();
        assert_eq!(r, RealSource::Rational(q(1, 2)));
        let s: RealSource = "quad:(0+1*sqrt(2))/1-1".parse().unwrap();
        let e = s.enclose(100);
        assert!((e.to_f64() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(s.to_string(), "quad:(-1+1*sqrt(2))/1");
        let g: RealSource = "quad:(-1+1*sqrt(5))/2".parse().unwrap();
        assert!((g.to_f64() - 0.6180339887498949).abs() < 1e-15);
        let d: RealSource = "decimal:0.6180339887@30".parse().unwrap();
        assert_eq!(d.declared_bits(), Some(30));
        assert_eq!(d.to_string(), "decimal:0.6180339887@30");
        assert!("quad:1+sqrt(2)".parse::<RealSource>().is_err());
        assert!("float:0.5".parse::<RealSource>().is_err());
    }

    #[test]
    fn square_radicands_collapse() {
        let r = RealSource::quadratic(1.into(), 2.into(), 9.into(), 7.into()).unwrap();
        assert_eq!(r, RealSource::Rational(q(1, 1)));
        let s = RealSource::quadratic(0.into(), 1.into(), 12.into(), 1.into()).unwrap();
        match s {
            RealSource::Quadratic(ref qi) => {
                assert_eq!(qi.d(), &BigInt::from(3));
                assert_eq!(qi.b(), &BigInt::from(2));
            }
            _ => panic!("expected a surd"),
        }
        assert_eq!(squarefree_split(72), (6, 2));
        assert_eq!(squarefree_split(1_000_003 * 1_000_003), (1_000_003, 1));
        assert_eq!(squarefree_split(1_000_003 * 999_983), (1, 1_000_003 * 999_983));
        assert_eq!(squarefree_split(2 * 1_000_003 * 1_000_003), (1_000_003, 2));
    }

    #[test]
    fn enclosures_meet_requested_width() {
        let s: RealSource = "quad:(3-7*sqrt(11))/5".parse().unwrap();
        for bits in [8, 64, 300] {
            assert!(s.enclose(bits).precision_bits() >= bits);
        }
        let d: RealSource = "decimal:1.5@20".parse().unwrap();
        assert!(d.enclose(200).precision_bits() <= 20);
    }

    #[test]
    fn compare_examples() {
        assert_eq!(certified_compare(&q(1, 3), &q(1, 2), 128), Comparison::Less);
        assert_eq!(certified_compare(&q(2, 4), &q(1, 2), 128), Comparison::EqualExact);
        let x: RealSource = "quad:(0+1*sqrt(2))/1".parse().unwrap();
        let max_bits = 96;
        let shifted = RealSource::quadratic(
            BigInt::one(),
            BigInt::one() << (max_bits + 5),
            2.into(),
            BigInt::one() << (max_bits + 5),
        )
        .unwrap();
        assert_eq!(certified_compare(&x, &shifted, max_bits), Comparison::Undecided);
        assert_eq!(certified_compare(&x, &shifted, 2 * max_bits), Comparison::Less);
    }

    #[test]
    fn exact_dot_detects_relations() {
        let t: TargetVector = "rational:1/3,rational:1/3".parse().unwrap();
        assert_eq!(t.exact_dot_i64(&[2, 1]).unwrap(), Some(q(1, 1)));
        let g: TargetVector = "quad:(-1+1*sqrt(5))/2,quad:(3-1*sqrt(5))/2".parse().unwrap();
        assert_eq!(g.exact_dot_i64(&[1, 1]).unwrap(), Some(q(1, 1)));
        assert_eq!(g.exact_dot_i64(&[1, 2]).unwrap(), None);
        let d: TargetVector = "decimal:0.5@10".parse().unwrap();
        assert!(d.exact_dot_i64(&[1]).is_err());
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("1e6").unwrap(), q(1_000_000, 1));
        assert_eq!(parse_rational("0.5").unwrap(), q(1, 2));
        assert_eq!(parse_rational("-3/9").unwrap(), q(-1, 3));
        assert_eq!(parse_rational("2.5e-1").unwrap(), q(1, 4));
        assert!(parse_rational("1/0").is_err());
    }
}
