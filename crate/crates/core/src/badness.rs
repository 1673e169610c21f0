//! Twisted, classical, coordinate and dual badness over finite scans, and
//! the check of the best-approximation criterion for twisted badness.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::interval::rational_to_f64;
use crate::arith::source::Refinable;
use crate::arith::weights::rational_power;
use crate::arith::{CertifiedReal, RealSource, TargetVector, WeightVector};
use crate::bestapprox::BestApproxSequence;
use crate::error::{Error, Result};

/// A term counts as evaluated once its `‖·‖` enclosure is this narrow.
const TERM_TOLERANCE_BITS: u32 = 24;
/// Relative slack applied to floating-point bounds.
const F64_SLACK: f64 = 1e-12;
const BLOCK: u64 = 1 << 14;

#[derive(Debug, Clone)]
pub struct BadnessProfile {
    pub functional: String,
    pub value: CertifiedReal,
    pub argmin_q: u64,
    pub scan_bound: u64,
    /// The minimum is attained at `argmin_q` alone, certifiably.
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileJson {
    pub functional: String,
    #[serde(rename = "Q")]
    pub q: u64,
    pub value: String,
    /// `None` when the value is exact.
    pub precision_bits: Option<u32>,
    pub argmin_q: u64,
    pub certified: bool,
}

impl BadnessProfile {
    pub fn to_json(&self) -> ProfileJson {
        ProfileJson {
            functional: self.functional.clone(),
            q: self.scan_bound,
            value: self.value.to_decimal(30),
            precision_bits: (!self.value.is_point()).then(|| self.value.precision_bits()),
            argmin_q: self.argmin_q,
            certified: self.certified,
        }
    }
}

/// `θ_i` and `η_i` in `i128` fixed point.
#[derive(Debug, Clone)]
struct FixedPairs {
    scale: u32,
    theta: Vec<(i128, i128)>,
    eta: Vec<(i128, i128)>,
}

impl FixedPairs {
    fn new(theta: &TargetVector, eta: &TargetVector, max_q: u64) -> Option<Self> {
        let mag = |t: &TargetVector| -> u32 {
            t.enclose(16)
                .iter()
                .map(|c| {
                    let m = c.lo_raw().abs().max(c.hi_raw().abs());
                    (m.bits() as i64 - c.scale() as i64).max(0) as u32 + 1
                })
                .max()
                .unwrap_or(1)
        };
        let q_bits = 64 - max_q.max(1).leading_zeros();
        let headroom = 122i64 - mag(theta).max(mag(eta)) as i64 - q_bits as i64;
        if headroom < 40 {
            return None;
        }
        let scale = headroom.min(100) as u32;
        let conv = |t: &TargetVector| -> Option<Vec<(i128, i128)>> {
            t.components()
                .iter()
                .map(|c| {
                    let e = c.enclose(scale).rescale(scale);
                    Some((i128::try_from(e.lo_raw().clone()).ok()?, i128::try_from(e.hi_raw().clone()).ok()?))
                })
                .collect()
        };
        Some(FixedPairs { scale, theta: conv(theta)?, eta: conv(eta)? })
    }

    /// Enclosure of `‖qθ_i − η_i‖` as `f64` bounds, or `None` if too wide.
    #[inline]
    fn coord(&self, q: u64, i: usize) -> Option<(f64, f64)> {
        let q = q as i128;
        let (a, b) = self.theta[i];
        let (c, d) = self.eta[i];
        let lo = q * a - d;
        let hi = q * b - c;
        let unit = 1i128 << self.scale;
        let half = unit >> 1;
        let width = hi - lo;
        if width >= unit >> TERM_TOLERANCE_BITS {
            return None;
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
        let s = (-(self.scale as i32)) as f64;
        let k = 2f64.powf(s);
        Some(((min as f64).next_down().max(0.0) * k, (max as f64).next_up() * k))
    }
}

impl FixedPairs {
    /// Per-coordinate thresholds `⌈τ_i·2^scale⌉` for `τ_i = bound·a^(−j_i)`,
    /// rounded up, valid for every `q ≥ a`.
    fn thresholds(&self, bound: f64, a: u64, jf: &[f64]) -> Vec<i128> {
        let unit = 2f64.powi(self.scale as i32);
        jf.iter().map(|&ji| (bound / (a as f64).powf(ji) * (1.0 + 1e-9) * unit).ceil() as i128 + 1).collect()
    }

    /// True when some `‖qθ_i − η_i‖` certainly exceeds its threshold.
    #[inline]
    fn exceeds(&self, q: u64, thr: &[i128]) -> bool {
        let q = q as i128;
        let unit = 1i128 << self.scale;
        for (i, &t) in thr.iter().enumerate() {
            let (a, b) = self.theta[i];
            let (c, d) = self.eta[i];
            let lo = q * a - d;
            let width = q * b - c - lo;
            if width >= unit >> 1 {
                continue;
            }
            let l = lo & (unit - 1);
            let h = l + width;
            if h >= unit || l == 0 {
                continue;
            }
            if l.min(unit - l).min(h.min(unit - h)) > t {
                return true;
            }
        }
        false
    }
}

/// Certified enclosure of `‖qθ_i − η_i‖`, exact when both sources allow it.
fn coord_residual(q: u64, theta_i: &RealSource, eta_i: &RealSource, bits: u32) -> CertifiedReal {
    let pair = TargetVector::new(vec![theta_i.clone(), eta_i.clone()]).expect("nonempty");
    let v = [BigInt::from(q), -BigInt::one()];
    if let Ok(Some(r)) = pair.exact_dot(&v) {
        return CertifiedReal::from_rational(&r, bits).dist_to_nearest_int();
    }
    pair.dot(&v, bits).dist_to_nearest_int()
}

/// Certified `max_i q^(j_i)·‖qθ_i − η_i‖`, refined until every `‖·‖` is
/// narrower than the term tolerance or provably zero.
fn certified_term(
    q: u64,
    theta: &TargetVector,
    eta: &TargetVector,
    j: &WeightVector,
    max_bits: u32,
) -> Result<CertifiedReal> {
    let qb = BigInt::from(q);
    let mut acc: Option<CertifiedReal> = None;
    for i in 0..j.n() {
        let mut bits = 96u32;
        let d = loop {
            let d = coord_residual(q, &theta.components()[i], &eta.components()[i], bits);
            if d.is_point() || d.precision_bits() >= TERM_TOLERANCE_BITS + 8 {
                break d;
            }
            let saturated = bits >= max_bits
                || theta.components()[i].declared_bits().is_some_and(|b| b + 8 < bits)
                || eta.components()[i].declared_bits().is_some_and(|b| b + 8 < bits);
            if saturated {
                if d.precision_bits() >= TERM_TOLERANCE_BITS {
                    break d;
                }
                return Err(Error::PrecisionExhausted {
                    bits,
                    context: format!("‖qθ_{} − η_{}‖ undetermined at q = {q}", i + 1, i + 1),
                });
            }
            bits = (bits * 2).min(max_bits);
        };
        let w = rational_power(&qb, &j.weights()[i], 96);
        let term = w.mul(&d);
        acc = Some(match acc {
            None => term,
            Some(a) => a.max(&term),
        });
    }
    Ok(acc.expect("n ≥ 1"))
}

#[derive(Debug, Clone)]
struct Contender {
    q: u64,
    lo: f64,
}

fn weights_f64(j: &WeightVector) -> Vec<f64> {
    j.weights().iter().map(rational_to_f64).collect()
}

/// Fast bounds on the twisted term; `None` where a coordinate is too wide.
#[inline]
fn fast_term(fp: &FixedPairs, jf: &[f64], q: u64) -> Option<(f64, f64)> {
    let mut lo = 0f64;
    let mut hi = 0f64;
    let qf = q as f64;
    for (i, &ji) in jf.iter().enumerate() {
        let (a, b) = fp.coord(q, i)?;
        let p = qf.powf(ji);
        lo = lo.max(p * a * (1.0 - F64_SLACK));
        hi = hi.max(p * b * (1.0 + F64_SLACK));
    }
    Some((lo, hi))
}

/// `min_{1≤q≤Q} max_i q^(j_i)·‖qθ_i − η_i‖`.
pub fn twisted_badness(
    theta: &TargetVector,
    eta: &TargetVector,
    j: &WeightVector,
    scan_bound: u64,
    max_bits: u32,
) -> Result<BadnessProfile> {
    scan_functional("twisted", theta, eta, j, scan_bound, max_bits)
}

/// `min_{1≤q≤Q} max_i q^(j_i)·‖qθ_i‖`, the twisted functional at `η = 0`.
pub fn classical_badness(
    theta: &TargetVector,
    j: &WeightVector,
    scan_bound: u64,
    max_bits: u32,
) -> Result<BadnessProfile> {
    scan_functional("classical", theta, &TargetVector::zero(theta.n()), j, scan_bound, max_bits)
}

/// `min_{1≤q≤Q} q·‖q·η_i‖`.
pub fn coordinate_badness(eta_i: &RealSource, scan_bound: u64, max_bits: u32) -> Result<BadnessProfile> {
    let t = TargetVector::new(vec![eta_i.clone()])?;
    scan_functional("coordinate", &t, &TargetVector::zero(1), &WeightVector::uniform(1), scan_bound, max_bits)
}

fn scan_functional(
    name: &str,
    theta: &TargetVector,
    eta: &TargetVector,
    j: &WeightVector,
    scan_bound: u64,
    max_bits: u32,
) -> Result<BadnessProfile> {
    if scan_bound == 0 {
        return Err(Error::InvalidInput("scan bound Q must be ≥ 1".into()));
    }
    if theta.n() != j.n() || eta.n() != j.n() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let fp = FixedPairs::new(theta, eta, scan_bound);
    let jf = weights_f64(j);
    let blocks: Vec<(u64, u64)> =
        (0..scan_bound.div_ceil(BLOCK)).map(|b| (b * BLOCK + 1, ((b + 1) * BLOCK).min(scan_bound))).collect();

    // per block: the smallest upper bound and every q whose lower bound reaches it
    let per_block: Vec<Result<(f64, Vec<Contender>)>> = blocks
        .par_iter()
        .map(|&(a, b)| {
            let mut best_hi = f64::INFINITY;
            let mut cands: Vec<Contender> = Vec::new();
            for q in a..=b {
                let fast = fp.as_ref().and_then(|fp| fast_term(fp, &jf, q));
                let (lo, hi) = match fast {
                    Some(x) => x,
                    None => {
                        let t = certified_term(q, theta, eta, j, max_bits)?;
                        (t.lower_f64(), t.upper_f64())
                    }
                };
                if hi < best_hi {
                    best_hi = hi;
                }
                if lo <= best_hi {
                    cands.push(Contender { q, lo });
                }
            }
            cands.retain(|c| c.lo <= best_hi);
            Ok((best_hi, cands))
        })
        .collect();

    let mut global_hi = f64::INFINITY;
    let mut all = Vec::new();
    for r in per_block {
        let (h, c) = r?;
        global_hi = global_hi.min(h);
        all.extend(c);
    }
    all.retain(|c| c.lo <= global_hi);

    // certify the surviving contenders
    let mut certified_terms: Vec<(u64, CertifiedReal)> = Vec::with_capacity(all.len());
    for c in &all {
        certified_terms.push((c.q, certified_term(c.q, theta, eta, j, max_bits)?));
    }
    let (arg_idx, _) = certified_terms
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.upper().cmp(&b.1 .1.upper()).then(a.1 .0.cmp(&b.1 .0)))
        .expect("at least one contender");
    let (argmin_q, arg_val) = certified_terms[arg_idx].clone();
    let mut value = arg_val.clone();
    for (_, v) in &certified_terms {
        value = value.min(v);
    }
    let unique = certified_terms
        .iter()
        .enumerate()
        .all(|(k, (_, v))| k == arg_idx || arg_val.certainly_lt(v) || (arg_val.is_exact_zero() && k > arg_idx));
    Ok(BadnessProfile { functional: name.to_string(), value, argmin_q, scan_bound, certified: unique })
}

/// `min_ν ‖m_ν·η‖` over the sequence.
pub fn dual_badness(eta: &TargetVector, seq: &BestApproxSequence, max_bits: u32) -> Result<CertifiedReal> {
    if seq.is_empty() {
        return Err(Error::InvalidInput("empty best-approximation sequence".into()));
    }
    if eta.n() != seq.weights.n() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let mut out: Option<CertifiedReal> = None;
    for e in &seq.entries {
        let r = match eta.exact_dot_i64(&e.m) {
            Ok(Some(x)) => CertifiedReal::from_rational(&x, 128).dist_to_nearest_int(),
            _ => {
                let mut bits = 128u32;
                loop {
                    let r = crate::arith::residual_at(&e.m, eta, bits);
                    if r.precision_bits() >= 64 || bits >= max_bits {
                        break r;
                    }
                    if eta.declared_bits().is_some_and(|b| b + 8 < bits) {
                        return Err(Error::PrecisionExhausted {
                            bits,
                            context: format!("‖m·η‖ undetermined for m = {:?}", e.m),
                        });
                    }
                    bits = (bits * 2).min(max_bits);
                }
            }
        };
        out = Some(match out {
            None => r,
            Some(o) => o.min(&r),
        });
    }
    Ok(out.unwrap())
}

#[derive(Debug, Clone)]
pub struct PropositionConstants {
    pub gamma: CertifiedReal,
    pub c: CertifiedReal,
    pub bound: CertifiedReal,
}

/// `c = min_i (γ/2)^(j_i)` and `bound = γc/(2n)`.
pub fn proposition_bound(gamma: &CertifiedReal, j: &WeightVector, n: usize) -> Result<PropositionConstants> {
    if !gamma.is_positive() || !gamma.certainly_lt(&CertifiedReal::one()) {
        return Err(Error::InvalidInput("γ must lie in (0, 1)".into()));
    }
    let bits = gamma.scale().max(96);
    let half = gamma.rescale(bits + 1).div_int(&BigInt::from(2))?;
    let mut c: Option<CertifiedReal> = None;
    for w in j.weights() {
        let p = w.numer().to_u32().expect("small weight");
        let q = w.denom().to_u32().expect("small weight");
        let t = half.pow_ratio(p, q)?;
        c = Some(match c {
            None => t,
            Some(x) => x.min(&t),
        });
    }
    let c = c.expect("n ≥ 1");
    let bound = gamma.mul(&c).div_int(&BigInt::from(2 * n as u64))?;
    Ok(PropositionConstants { gamma: gamma.clone(), c, bound })
}

#[derive(Debug, Clone, Serialize)]
pub struct PropositionReport {
    pub precondition_met: bool,
    pub gamma: String,
    pub dual_badness: String,
    pub c: String,
    pub bound: String,
    /// Checked range `1 ≤ q ≤ q_max` with `q_max = ⌊γ/(2ζ_N)⌋`.
    pub q_max: u64,
    /// `⌈γ/(2ζ_1)⌉`, where the sandwich argument starts.
    pub sandwich_start: u64,
    pub checked: u64,
    pub violations: Vec<u64>,
    pub inconclusive: Vec<u64>,
    pub sequence_len: usize,
    pub pass: bool,
}

/// Checks `max_i q^(j_i)‖qθ_i − η_i‖ > γc/(2n)` for every `q ≤ γ/(2ζ_N)`,
/// where `γ` is a certified lower bound for the dual badness of `η`.
pub fn verify_proposition(
    theta: &TargetVector,
    eta: &TargetVector,
    j: &WeightVector,
    seq: &BestApproxSequence,
    max_bits: u32,
) -> Result<PropositionReport> {
    let dual = dual_badness(eta, seq, max_bits)?;
    let n = j.n();
    let unmet = |dual: &CertifiedReal| PropositionReport {
        precondition_met: false,
        gamma: "0".into(),
        dual_badness: dual.to_decimal(30),
        c: "0".into(),
        bound: "0".into(),
        q_max: 0,
        sandwich_start: 0,
        checked: 0,
        violations: vec![],
        inconclusive: vec![],
        sequence_len: seq.len(),
        pass: false,
    };
    if !dual.is_positive() {
        return Ok(unmet(&dual));
    }
    // γ slightly below the certified lower bound, so ‖m_ν·η‖ > γ strictly
    let shrink = BigRational::one() - BigRational::new(BigInt::one(), BigInt::one() << 32);
    let gamma_q = dual.lower() * shrink;
    let gamma_q = gamma_q.min(BigRational::new(BigInt::from(999), BigInt::from(1000)));
    let gamma = CertifiedReal::from_rational(&gamma_q, 128);
    let consts = proposition_bound(&gamma, j, n)?;
    let zeta_n = seq.last_residual().expect("nonempty");
    let zeta_1 = &seq.entries[0].residual;
    let q_max = (&gamma_q / (zeta_n.upper() * BigInt::from(2))).floor().to_integer();
    let q_max = q_max.to_u64().ok_or_else(|| Error::HeightOverflow("q range exceeds 64 bits".into()))?;
    let start = (&gamma_q / (zeta_1.lower() * BigInt::from(2))).ceil().to_integer().to_u64().unwrap_or(0);

    let b_hi = consts.bound.upper_f64() * (1.0 + F64_SLACK);
    let fp = FixedPairs::new(theta, eta, q_max.max(1));
    let jf = weights_f64(j);
    let blocks: Vec<(u64, u64)> =
        (0..q_max.div_ceil(BLOCK)).map(|b| (b * BLOCK + 1, ((b + 1) * BLOCK).min(q_max))).collect();
    let results: Vec<Result<(Vec<u64>, Vec<u64>)>> = blocks
        .par_iter()
        .map(|&(a, b)| {
            let mut bad = Vec::new();
            let mut unsure = Vec::new();
            let thr = fp.as_ref().map(|fp| fp.thresholds(b_hi, a, &jf));
            for q in a..=b {
                if let (Some(fp), Some(t)) = (&fp, &thr) {
                    if fp.exceeds(q, t) {
                        continue;
                    }
                }
                let quick = fp.as_ref().and_then(|fp| fast_term(fp, &jf, q));
                if quick.is_some_and(|(lo, _)| lo > b_hi) {
                    continue;
                }
                match certified_term(q, theta, eta, j, max_bits) {
                    Ok(t) => {
                        if consts.bound.certainly_lt(&t) {
                            continue;
                        }
                        if t.certainly_le(&consts.bound) {
                            bad.push(q);
                        } else {
                            unsure.push(q);
                        }
                    }
                    Err(Error::PrecisionExhausted { .. }) => unsure.push(q),
                    Err(e) => return Err(e),
                }
            }
            Ok((bad, unsure))
        })
        .collect();
    let mut violations = Vec::new();
    let mut inconclusive = Vec::new();
    for r in results {
        let (b, u) = r?;
        violations.extend(b);
        inconclusive.extend(u);
    }
    let pass = violations.is_empty() && inconclusive.is_empty();
    Ok(PropositionReport {
        precondition_met: true,
        gamma: gamma.to_decimal(30),
        dual_badness: dual.to_decimal(30),
        c: consts.c.to_decimal(30),
        bound: consts.bound.to_decimal(30),
        q_max,
        sandwich_start: start,
        checked: q_max,
        violations,
        inconclusive,
        sequence_len: seq.len(),
        pass,
    })
}

/// Exact `‖x‖` of a rational.
pub fn rational_dist(x: &BigRational) -> BigRational {
    let f = x - x.floor();
    let g = BigRational::one() - &f;
    if f < g {
        f
    } else {
        g
    }
}
