//! Weight vectors and exact weighted heights.
//!
//! Writing `j_i = w_i / D` over a common denominator and `L = lcm(w_i)`,
//! the weighted height `M = max |m_i|^(1/j_i)` equals `H^(D/L)` for the
//! integer height power `H = max |m_i|^(L/w_i)`. All height comparisons go
//! through `H`, so they are exact.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::interval::CertifiedReal;
use super::source::parse_rational;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightVector {
    weights: Vec<BigRational>,
    denom: u64,
    numers: Vec<u64>,
    lcm: u64,
    exps: Vec<u32>,
}

impl WeightVector {
    pub fn new(weights: Vec<BigRational>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(Error::InvalidInput("weights must be positive".into()));
        }
        let sum: BigRational = weights.iter().sum();
        if !sum.is_one() {
            return Err(Error::InvalidInput(format!("weights sum to {sum}, not 1")));
        }
        let mut denom = BigInt::one();
        for w in &weights {
            denom = denom.lcm(w.denom());
        }
        let denom_u = denom
            .to_u64()
            .filter(|d| *d <= 1 << 20)
            .ok_or_else(|| Error::InvalidInput("weight denominators too large".into()))?;
        let numers: Vec<u64> = weights.iter().map(|w| (w.numer() * (&denom / w.denom())).to_u64().unwrap()).collect();
        let lcm = numers.iter().fold(1u64, |acc, &x| acc.lcm(&x));
        let exps: Vec<u32> = numers
            .iter()
            .map(|&w| u32::try_from(lcm / w).map_err(|_| Error::InvalidInput("weight exponents too large".into())))
            .collect::<Result<_>>()?;
        if exps.iter().any(|&e| e > 64) {
            return Err(Error::InvalidInput("weight ratios too extreme (L/w_i > 64)".into()));
        }
        Ok(WeightVector { weights, denom: denom_u, numers, lcm, exps })
    }

    /// Equal weights `1/n`.
    pub fn uniform(n: usize) -> Self {
        let w = BigRational::new(BigInt::one(), BigInt::from(n));
        WeightVector::new(vec![w; n]).expect("uniform weights are valid")
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn j_min(&self) -> BigRational {
        self.weights.iter().min().unwrap().clone()
    }

    pub fn j_max(&self) -> BigRational {
        self.weights.iter().max().unwrap().clone()
    }

    /// Common denominator `D`.
    pub fn denom(&self) -> u64 {
        self.denom
    }

    /// Numerators `w_i` over `D`.
    pub fn numers(&self) -> &[u64] {
        &self.numers
    }

    /// `L = lcm(w_i)`.
    pub fn lcm(&self) -> u64 {
        self.lcm
    }

    /// Exponents `e_i = L / w_i` of the height power.
    pub fn exps(&self) -> &[u32] {
        &self.exps
    }

    pub fn all_equal(&self) -> bool {
        self.weights.iter().all(|w| w == &self.weights[0])
    }

    /// Integer height power `max |m_i|^(e_i)`, or `None` on overflow.
    pub fn height_power(&self, m: &[i64]) -> Option<u128> {
        let mut h = 0u128;
        for (&x, &e) in m.iter().zip(&self.exps) {
            let v = (x.unsigned_abs() as u128).checked_pow(e)?;
            h = h.max(v);
        }
        Some(h)
    }

    pub fn height_power_big(&self, m: &[BigInt]) -> BigInt {
        m.iter().zip(&self.exps).map(|(x, &e)| num_traits::pow(x.abs(), e as usize)).max().unwrap_or_else(BigInt::zero)
    }

    /// Enclosure of `M = H^(D/L)`; exact when `L` divides `D`.
    pub fn height_from_power(&self, h: &BigInt, bits: u32) -> CertifiedReal {
        let g = self.denom.gcd(&self.lcm);
        let (p, q) = ((self.denom / g) as u32, (self.lcm / g) as u32);
        if q == 1 {
            return CertifiedReal::exact_int(num_traits::pow(h.clone(), p as usize));
        }
        let hp = num_traits::pow(h.clone(), p as usize);
        CertifiedReal::exact_int(hp).rescale(bits + 2).nth_root(q).expect("nonnegative")
    }

    /// Largest height power `H` with `H^(D/L) ≤ bound`.
    pub fn max_height_power(&self, bound: &BigRational) -> BigInt {
        if !bound.is_positive() {
            return BigInt::zero();
        }
        // H^D ≤ bound^L
        let num = num_traits::pow(bound.numer().clone(), self.lcm as usize);
        let den = num_traits::pow(bound.denom().clone(), self.lcm as usize);
        let q = num / den;
        q.nth_root(self.denom as u32)
    }

    /// `true` iff `H^(D/L) < R^k`, i.e. `H^D < R^(k·L)`.
    pub fn height_below_power(&self, h: &BigInt, r: &BigInt, k: u32) -> bool {
        let lhs = num_traits::pow(h.clone(), self.denom as usize);
        let rhs = num_traits::pow(r.clone(), (k as u64 * self.lcm) as usize);
        lhs < rhs
    }

    /// Largest `c ≥ 0` with `c^(e_i) ≤ h`.
    pub fn coord_limit(&self, i: usize, h: u128) -> u128 {
        h.nth_root(self.exps[i])
    }

    /// `R^(j_i)` when it is an integer.
    pub fn exact_power(&self, r: &BigInt, i: usize) -> Option<BigInt> {
        exact_rational_power(r, &self.weights[i])
    }
}

/// `r^x` for a rational exponent `x ≥ 0`, when the result is an integer.
pub fn exact_rational_power(r: &BigInt, x: &BigRational) -> Option<BigInt> {
    let p = x.numer().to_u32()?;
    let q = x.denom().to_u32()?;
    let base = num_traits::pow(r.clone(), p as usize);
    let root = base.nth_root(q);
    (num_traits::pow(root.clone(), q as usize) == base).then_some(root)
}

/// Enclosure of `r^x` for a rational exponent.
pub fn rational_power(r: &BigInt, x: &BigRational, bits: u32) -> CertifiedReal {
    if let Some(v) = exact_rational_power(r, x) {
        return CertifiedReal::exact_int(v);
    }
    let p = x.numer().to_u32().expect("small exponent");
    let q = x.denom().to_u32().expect("small exponent");
    CertifiedReal::exact_int(r.clone()).rescale(bits + 8).pow_ratio(p, q).expect("positive base")
}

/// `max_i |m_i|^(1/j_i)`.
pub fn weighted_height(m: &[i64], j: &WeightVector) -> Result<CertifiedReal> {
    if m.len() != j.n() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if m.iter().all(|&x| x == 0) {
        return Err(Error::InvalidInput("zero vector has no height".into()));
    }
    let big: Vec<BigInt> = m.iter().map(|&x| BigInt::from(x)).collect();
    Ok(j.height_from_power(&j.height_power_big(&big), 128))
}

impl FromStr for WeightVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let w: Result<Vec<BigRational>> = s.split(',').map(parse_rational).collect();
        WeightVector::new(w?)
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .weights
            .iter()
            .map(|w| if w.is_integer() { w.numer().to_string() } else { format!("{}/{}", w.numer(), w.denom()) })
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn height_examples() {
        let half: WeightVector = "1/2,1/2".parse().unwrap();
        assert_eq!(weighted_height(&[3, -2], &half).unwrap().lower(), q(9, 1));
        assert_eq!(weighted_height(&[1, 0], &half).unwrap().lower(), q(1, 1));
        let one: WeightVector = "1".parse().unwrap();
        let h = weighted_height(&[5], &one).unwrap();
        assert!(h.is_point());
        assert_eq!(h.lower(), q(5, 1));
        assert!(weighted_height(&[0, 0], &half).is_err());
    }

    #[test]
    fn mixed_weights_use_integer_power() {
        let j: WeightVector = "2/3,1/3".parse().unwrap();
        assert_eq!((j.denom(), j.lcm()), (3, 2));
        assert_eq!(j.exps(), &[1, 2]);
        // m = (4, 3): max(4^(3/2), 3^3) = 27 ; H = max(4, 9) = 9, M = 9^(3/2) = 27
        assert_eq!(j.height_power(&[4, 3]), Some(9));
        let m = weighted_height(&[4, 3], &j).unwrap();
        assert!(m.contains_rational(&q(27, 1)));
        let m2 = weighted_height(&[2, 1], &j).unwrap();
        assert!((m2.to_f64() - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!("1/2,1/3".parse::<WeightVector>().is_err());
        assert!("1,0".parse::<WeightVector>().is_err());
        assert!("3/2,-1/2".parse::<WeightVector>().is_err());
        let j: WeightVector = "1/4,3/4".parse().unwrap();
        assert_eq!(j.j_min(), q(1, 4));
        assert_eq!(j.j_max(), q(3, 4));
        assert_eq!(j.to_string(), "1/4,3/4");
    }

    #[test]
    fn bounds_and_thresholds() {
        let half = WeightVector::uniform(2);
        assert_eq!(half.max_height_power(&q(15, 1)), BigInt::from(3));
        assert_eq!(half.max_height_power(&q(16, 1)), BigInt::from(4));
        assert_eq!(half.max_height_power(&q(1, 2)), BigInt::from(0));
        let r = BigInt::from(16);
        assert!(half.height_below_power(&BigInt::from(3), &r, 1));
        assert!(!half.height_below_power(&BigInt::from(4), &r, 1));
        assert_eq!(half.exact_power(&r, 0), Some(BigInt::from(4)));
        assert_eq!(half.exact_power(&BigInt::from(8), 0), None);
        let p = rational_power(&BigInt::from(2), &q(1, 2), 64);
        assert!((p.to_f64() - 2f64.sqrt()).abs() < 1e-15);
    }
}
