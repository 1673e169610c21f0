//! Weighted best approximations.
//!
//! The sweep visits every sign-normalized integer vector in order of its
//! integer height power `H`, one "shell" `{H(m) = h}` at a time. A shell
//! produces a new best approximation exactly when its smallest residual is
//! certified below every other residual in the shell and below the residual
//! of the previous best approximation, which is the minimum over all lower
//! shells. Shell chunks are scanned in parallel with the `i128` fast path
//! and merged in order; only near-ties fall back to the big-integer path.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::interval::format_rational;
use crate::arith::residual::{residual_at, FixedTheta};
use crate::arith::source::Refinable;
use crate::arith::{CertifiedReal, TargetVector, WeightVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestApproximation {
    /// 1-based position `ν` in the sequence.
    pub index: usize,
    pub m: Vec<i64>,
    /// Integer height power `H(m)`; the height is `H^(D/L)`.
    pub height_power: u128,
    pub height: CertifiedReal,
    pub residual: CertifiedReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sweep,
    ContinuedFraction,
    Fabricated,
}

#[derive(Debug, Clone)]
pub struct BestApproxSequence {
    pub target: TargetVector,
    pub weights: WeightVector,
    pub entries: Vec<BestApproximation>,
    /// Enumeration cutoff on the weighted height.
    pub height_bound: BigRational,
    /// Largest height power covered, `max{H : H^(D/L) ≤ height_bound}`.
    pub max_height_power: BigInt,
    pub method: Method,
}

impl BestApproxSequence {
    /// Wraps hand-made entries; no best-approximation property is checked.
    pub fn fabricated(
        target: TargetVector,
        weights: WeightVector,
        entries: Vec<BestApproximation>,
        height_bound: BigRational,
    ) -> Self {
        let max_height_power = weights.max_height_power(&height_bound);
        BestApproxSequence { target, weights, entries, height_bound, max_height_power, method: Method::Fabricated }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_residual(&self) -> Option<&CertifiedReal> {
        self.entries.last().map(|e| &e.residual)
    }

    /// The entries with weighted height at most `bound`.
    pub fn truncated(&self, bound: &BigRational) -> BestApproxSequence {
        let cap = self.weights.max_height_power(bound);
        let entries = self.entries.iter().filter(|e| BigInt::from(e.height_power) <= cap).cloned().collect();
        BestApproxSequence {
            target: self.target.clone(),
            weights: self.weights.clone(),
            entries,
            height_bound: bound.clone().min(self.height_bound.clone()),
            max_height_power: cap.min(self.max_height_power.clone()),
            method: self.method,
        }
    }

    /// CSV with columns `index,m,height,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,m,height,residual\n");
        for e in &self.entries {
            let r = ExportRecord::from_entry(e, &self.weights, &self.target);
            let _ = writeln!(out, "{},\"{}\",{},{}", r.index, r.m_text(), r.height, r.residual);
        }
        out
    }

    /// One JSON object per entry.
    pub fn export_records(&self) -> Vec<ExportRecord> {
        self.entries.iter().map(|e| ExportRecord::from_entry(e, &self.weights, &self.target)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportRecord {
    pub index: usize,
    pub m: Vec<i64>,
    pub height: String,
    pub residual: String,
}

impl ExportRecord {
    fn from_entry(e: &BestApproximation, j: &WeightVector, theta: &TargetVector) -> Self {
        let height = decimal30(|bits| j.height_from_power(&BigInt::from(e.height_power), bits), &e.height);
        let residual = decimal30(|bits| residual_at(&e.m, theta, bits), &e.residual);
        ExportRecord { index: e.index, m: e.m.clone(), height, residual }
    }

    pub fn m_text(&self) -> String {
        self.m.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    }
}

/// 30 significant digits, certified when refinement allows it.
fn decimal30(refine: impl Fn(u32) -> CertifiedReal, fallback: &CertifiedReal) -> String {
    for bits in [128, 256, 512] {
        if let Some(s) = refine(bits).certified_decimal(30) {
            return s;
        }
    }
    if fallback.is_point() {
        return format_rational(&fallback.lower(), 30);
    }
    refine(512).to_decimal(30)
}

#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    pub max_bits: u32,
    /// Above this height power, `n = 1` switches to continued fractions.
    pub n1_sweep_limit: u128,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions { max_bits: crate::arith::max_bits_from_env(), n1_sweep_limit: 1 << 24 }
    }
}

/// Rational components make `1, θ_1, …, θ_n` dependent.
fn rational_component_relation(theta: &TargetVector) -> Option<Error> {
    for (i, c) in theta.components().iter().enumerate() {
        if let Some(r) = c.exact() {
            let mut v = vec![0i64; theta.n()];
            v[i] = r.denom().to_i64().unwrap_or(i64::MAX);
            return Some(Error::IntegerRelation { v, p: (-r.numer()).to_string() });
        }
    }
    None
}

fn validate(theta: &TargetVector, j: &WeightVector) -> Result<()> {
    if theta.n() != j.n() {
        return Err(Error::InvalidInput(format!("θ has {} components but j has {}", theta.n(), j.n())));
    }
    if let Some(e) = rational_component_relation(theta) {
        return Err(e);
    }
    Ok(())
}

fn height_cap(j: &WeightVector, bound: &BigRational) -> Result<(BigInt, u128)> {
    let cap = j.max_height_power(bound);
    let cap_u = cap.to_u128().ok_or_else(|| Error::HeightOverflow(format!("height bound {bound} too large")))?;
    Ok((cap, cap_u))
}

/// Weighted best approximations with `M ≤ height_bound`, ordered by height.
pub fn enumerate_best_approximations(
    theta: &TargetVector,
    j: &WeightVector,
    height_bound: &BigRational,
    opts: &EnumerationOptions,
) -> Result<BestApproxSequence> {
    validate(theta, j)?;
    let (_, cap) = height_cap(j, height_bound)?;
    if j.n() == 1 && cap > opts.n1_sweep_limit {
        return enumerate_by_continued_fraction(theta, height_bound, opts.max_bits);
    }
    enumerate_by_sweep(theta, j, height_bound, opts.max_bits)
}

struct ShellGeometry {
    /// `coord_limit(i, h − 1)` and `coord_limit(i, h)`.
    prev: Vec<i64>,
    cur: Vec<i64>,
    /// `a` with `a^(e_i) = h`, if any.
    roots: Vec<Option<i64>>,
}

fn shell_geometry(j: &WeightVector, h: u128) -> ShellGeometry {
    let n = j.n();
    let mut prev = Vec::with_capacity(n);
    let mut cur = Vec::with_capacity(n);
    let mut roots = Vec::with_capacity(n);
    for i in 0..n {
        let c = j.coord_limit(i, h) as i64;
        let p = j.coord_limit(i, h - 1) as i64;
        cur.push(c);
        prev.push(p);
        roots.push((c > p).then_some(c));
    }
    ShellGeometry { prev, cur, roots }
}

/// Calls `f(m, dot_lo, dot_hi)` for every sign-normalized `m` with `H(m) = h`.
fn scan_shell(fixed: &FixedTheta, geo: &ShellGeometry, f: &mut dyn FnMut(&[i64], i128, i128)) {
    let n = geo.cur.len();
    let mut m = vec![0i64; n];
    for istar in 0..n {
        let Some(a) = geo.roots[istar] else { continue };
        rec(fixed, geo, istar, a, 0, true, &mut m, 0, 0, f);
    }

    #[allow(clippy::too_many_arguments)]
    fn rec(
        fixed: &FixedTheta,
        geo: &ShellGeometry,
        istar: usize,
        a: i64,
        t: usize,
        leading: bool,
        m: &mut [i64],
        plo: i128,
        phi: i128,
        f: &mut dyn FnMut(&[i64], i128, i128),
    ) {
        let n = m.len();
        if t == n {
            f(m, plo, phi);
            return;
        }
        let terms = |c: i64| -> (i128, i128) {
            let (x, y) = fixed.dot_term(t, c);
            (plo + x, phi + y)
        };
        if t == istar {
            let signs: &[i64] = if leading { &[1] } else { &[-1, 1] };
            for &s in signs {
                let c = s * a;
                m[t] = c;
                let (l, h) = terms(c);
                rec(fixed, geo, istar, a, t + 1, false, m, l, h, f);
            }
            return;
        }
        let lim = if t < istar { geo.prev[t] } else { geo.cur[t] };
        let start = if leading { 0 } else { -lim };
        for c in start..=lim {
            m[t] = c;
            let (l, h) = terms(c);
            rec(fixed, geo, istar, a, t + 1, leading && c == 0, m, l, h, f);
        }
        m[t] = 0;
    }
}

#[derive(Debug, Clone)]
struct Contender {
    m: Vec<i64>,
    lo: i128,
    hi: i128,
}

#[derive(Debug, Clone)]
struct ShellRecord {
    h: u128,
    contenders: Vec<Contender>,
}

/// Scans shells `[h0, h1)` and keeps those that might beat every earlier
/// shell of the same chunk.
fn scan_chunk(fixed: &FixedTheta, j: &WeightVector, h0: u128, h1: u128) -> Vec<ShellRecord> {
    let mut local_min = i128::MAX;
    let mut records = Vec::new();
    for h in h0..h1 {
        let geo = shell_geometry(j, h);
        if geo.roots.iter().all(|r| r.is_none()) {
            continue;
        }
        let mut shell_min = i128::MAX;
        let mut found: Vec<Contender> = Vec::new();
        scan_shell(fixed, &geo, &mut |m, lo, hi| {
            let (rlo, rhi) = fixed.tent(lo, hi);
            if rhi < shell_min {
                shell_min = rhi;
            }
            if rlo <= shell_min && rlo < local_min {
                found.push(Contender { m: m.to_vec(), lo: rlo, hi: rhi });
            }
        });
        found.retain(|c| c.lo <= shell_min && c.lo < local_min);
        local_min = local_min.min(shell_min);
        if !found.is_empty() {
            records.push(ShellRecord { h, contenders: found });
        }
    }
    records
}

/// Splits `1..=cap` into chunks of roughly `target` vectors each.
fn chunk_bounds(j: &WeightVector, cap: u128, target: f64) -> Vec<(u128, u128)> {
    let box_count = |h: u128| -> f64 { (0..j.n()).map(|i| 2.0 * j.coord_limit(i, h) as f64 + 1.0).product::<f64>() };
    let mut out = Vec::new();
    let mut start = 1u128;
    let mut base = box_count(0);
    let mut step = 1u128;
    while start <= cap {
        // grow the step until the chunk holds about `target` vectors
        let mut end = (start + step).min(cap + 1);
        while end <= cap && box_count(end - 1) - base < target {
            step *= 2;
            end = (start + step).min(cap + 1);
        }
        while step > 1 && box_count(end - 1) - base > 4.0 * target {
            step /= 2;
            end = (start + step).min(cap + 1);
        }
        out.push((start, end));
        base = box_count(end - 1);
        start = end;
    }
    out
}

/// Exhaustive sweep over all vectors with `M ≤ height_bound`.
pub fn enumerate_by_sweep(
    theta: &TargetVector,
    j: &WeightVector,
    height_bound: &BigRational,
    max_bits: u32,
) -> Result<BestApproxSequence> {
    validate(theta, j)?;
    let (cap_big, cap) = height_cap(j, height_bound)?;
    let mut seq = BestApproxSequence {
        target: theta.clone(),
        weights: j.clone(),
        entries: Vec::new(),
        height_bound: height_bound.clone(),
        max_height_power: cap_big,
        method: Method::Sweep,
    };
    if cap == 0 {
        return Ok(seq);
    }
    let max_coord = (0..j.n()).map(|i| j.coord_limit(i, cap)).max().unwrap_or(1) as u64;
    if max_coord > (1 << 40) {
        return Err(Error::HeightOverflow("sweep range too large".into()));
    }
    let fixed = FixedTheta::new(theta, max_coord)
        .ok_or_else(|| Error::HeightOverflow("θ too large for the fixed-point sweep".into()))?;
    let chunks = chunk_bounds(j, cap, (1 << 16) as f64);
    let records: Vec<Vec<ShellRecord>> = chunks.par_iter().map(|&(a, b)| scan_chunk(&fixed, j, a, b)).collect();

    let mut best: Option<Resolved> = None;
    for rec in records.into_iter().flatten() {
        if let Some(w) = resolve_shell(theta, &fixed, rec, best.as_ref(), max_bits)? {
            best = Some(w);
            let b = best.as_ref().unwrap();
            seq.entries.push(BestApproximation {
                index: seq.entries.len() + 1,
                m: b.m.clone(),
                height_power: b.h,
                height: j.height_from_power(&BigInt::from(b.h), 128),
                residual: b.value.clone(),
            });
        }
    }
    finalize_residuals(&mut seq, max_bits)?;
    Ok(seq)
}

#[derive(Debug, Clone)]
struct Resolved {
    m: Vec<i64>,
    h: u128,
    value: CertifiedReal,
}

fn relation_or_exhaustion(theta: &TargetVector, a: &[i64], b: Option<&[i64]>, bits: u32) -> Error {
    let combos: Vec<Vec<i64>> = match b {
        Some(b) => vec![a.iter().zip(b).map(|(x, y)| x - y).collect(), a.iter().zip(b).map(|(x, y)| x + y).collect()],
        None => vec![a.to_vec()],
    };
    for v in combos {
        if v.iter().all(|&x| x == 0) {
            continue;
        }
        if let Ok(Some(r)) = theta.exact_dot_i64(&v) {
            if r.is_integer() {
                return Error::IntegerRelation { v, p: (-r.to_integer()).to_string() };
            }
        }
    }
    let context = match b {
        Some(b) => format!("cannot order ‖v·θ‖ and ‖m·θ‖ for v = {a:?}, m = {b:?}"),
        None => format!("cannot certify ‖m·θ‖ > 0 for m = {a:?}"),
    };
    Error::PrecisionExhausted { bits, context }
}

/// Decides which contender, if any, is the shell's best approximation.
fn resolve_shell(
    theta: &TargetVector,
    fixed: &FixedTheta,
    rec: ShellRecord,
    best: Option<&Resolved>,
    max_bits: u32,
) -> Result<Option<Resolved>> {
    let mut bits = fixed.scale();
    let mut g = best.map(|b| b.value.clone());
    let mut cands: Vec<(Vec<i64>, CertifiedReal)> =
        rec.contenders.into_iter().map(|c| (c.m, fixed.to_certified((c.lo, c.hi)))).collect();
    let saturated = |bits: u32| bits >= max_bits || theta.declared_bits().is_some_and(|d| bits > d + 8);
    loop {
        if let Some(g) = &g {
            cands.retain(|(_, v)| !g.certainly_lt(v));
        }
        if cands.is_empty() {
            return Ok(None);
        }
        for (m, v) in &cands {
            if v.is_exact_zero() || (v.contains_zero() && saturated(bits)) {
                return Err(relation_or_exhaustion(theta, m, None, bits));
            }
        }
        let (bi, _) = cands.iter().enumerate().min_by(|a, b| a.1 .1.upper().cmp(&b.1 .1.upper())).unwrap();
        let winner = &cands[bi].1;
        let beats_others = cands.iter().enumerate().all(|(k, (_, v))| k == bi || winner.certainly_lt(v));
        let beats_g = g.as_ref().is_none_or(|g| winner.certainly_lt(g));
        if beats_others && beats_g {
            let (m, value) = cands.swap_remove(bi);
            return Ok(Some(Resolved { m, h: rec.h, value }));
        }
        if saturated(bits) {
            let other = if !beats_others {
                cands
                    .iter()
                    .enumerate()
                    .find(|(k, (_, v))| *k != bi && !winner.certainly_lt(v))
                    .map(|(_, c)| c.0.clone())
            } else {
                best.map(|b| b.m.clone())
            };
            return Err(relation_or_exhaustion(theta, &cands[bi].0, other.as_deref(), bits));
        }
        bits = (bits * 2).min(max_bits);
        for (m, v) in cands.iter_mut() {
            *v = residual_at(m, theta, bits);
        }
        if let (Some(b), Some(gv)) = (best, g.as_mut()) {
            *gv = residual_at(&b.m, theta, bits);
        }
    }
}

/// Replaces stored residuals by enclosures certified positive at ≥ 128 bits.
fn finalize_residuals(seq: &mut BestApproxSequence, max_bits: u32) -> Result<()> {
    for e in seq.entries.iter_mut() {
        let mut bits = 128.min(max_bits);
        loop {
            let r = residual_at(&e.m, &seq.target, bits);
            if r.is_positive() && r.overlaps(&e.residual) {
                e.residual = r;
                break;
            }
            if e.residual.is_positive() && bits >= max_bits {
                break;
            }
            if bits >= max_bits {
                return Err(relation_or_exhaustion(&seq.target, &e.m, None, bits));
            }
            bits = (bits * 2).min(max_bits);
        }
    }
    Ok(())
}

/// Partial quotients and distinct convergent denominators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuedFraction {
    pub partial_quotients: Vec<BigInt>,
    /// Strictly increasing convergent denominators, starting at 1.
    pub denominators: Vec<BigInt>,
    /// The expansion ended because the number is rational.
    pub terminated: bool,
}

/// Expands `x` until `stop(denominators)` holds or the expansion terminates.
fn cf_expand(
    x: &dyn Refinable,
    stop: &dyn Fn(&[BigInt]) -> bool,
    initial_bits: u32,
    max_bits: u32,
) -> Result<ContinuedFraction> {
    if let Some(r) = x.exact() {
        return Ok(cf_rational(&r, stop));
    }
    let mut bits = initial_bits.min(max_bits);
    loop {
        let e = x.enclose(bits);
        if let Some(cf) = cf_interval(e.lower(), e.upper(), stop) {
            return Ok(cf);
        }
        if bits >= max_bits {
            return Err(Error::PrecisionExhausted { bits, context: "partial quotient undecidable".into() });
        }
        bits = (bits * 2).min(max_bits);
    }
}

fn push_denominator(dens: &mut Vec<BigInt>, q: BigInt) {
    if dens.last().is_none_or(|l| &q > l) {
        dens.push(q);
    }
}

fn cf_rational(r: &BigRational, stop: &dyn Fn(&[BigInt]) -> bool) -> ContinuedFraction {
    let mut pq = Vec::new();
    let mut dens = vec![BigInt::one()];
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    let mut x = r.clone();
    let a0 = x.floor().to_integer();
    pq.push(a0.clone());
    x -= BigRational::from_integer(a0);
    while !stop(&dens) {
        if x.is_zero() {
            return ContinuedFraction { partial_quotients: pq, denominators: dens, terminated: true };
        }
        x = x.recip();
        let a = x.floor().to_integer();
        x -= BigRational::from_integer(a.clone());
        let next = &a * &q + &q_prev;
        q_prev = std::mem::replace(&mut q, next.clone());
        pq.push(a);
        push_denominator(&mut dens, next);
    }
    ContinuedFraction { partial_quotients: pq, denominators: dens, terminated: false }
}

/// Continued fraction of an unknown point of `[lo, hi]`; `None` when a
/// partial quotient is not determined by the interval.
fn cf_interval(
    mut lo: BigRational,
    mut hi: BigRational,
    stop: &dyn Fn(&[BigInt]) -> bool,
) -> Option<ContinuedFraction> {
    let mut pq = Vec::new();
    let mut dens = vec![BigInt::one()];
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    let a0 = lo.floor().to_integer();
    if hi.floor().to_integer() != a0 {
        return None;
    }
    pq.push(a0.clone());
    let a0r = BigRational::from_integer(a0);
    lo -= &a0r;
    hi -= &a0r;
    while !stop(&dens) {
        if !lo.is_positive() {
            return None;
        }
        let (nlo, nhi) = (hi.recip(), lo.recip());
        let a = nlo.floor().to_integer();
        if nhi.floor().to_integer() != a {
            return None;
        }
        let ar = BigRational::from_integer(a.clone());
        lo = nlo - &ar;
        hi = nhi - &ar;
        let next = &a * &q + &q_prev;
        q_prev = std::mem::replace(&mut q, next.clone());
        pq.push(a);
        push_denominator(&mut dens, next);
    }
    Some(ContinuedFraction { partial_quotients: pq, denominators: dens, terminated: false })
}

/// The first `depth` distinct convergent denominators of `x`.
pub fn continued_fraction_denominators(x: &dyn Refinable, depth: usize, max_bits: u32) -> Result<ContinuedFraction> {
    let stop = move |d: &[BigInt]| d.len() >= depth;
    let mut cf = cf_expand(x, &stop, 64 + 8 * depth as u32, max_bits)?;
    cf.denominators.truncate(depth);
    Ok(cf)
}

/// Convergent denominators up to `bound`.
pub fn continued_fraction_denominators_upto(
    x: &dyn Refinable,
    bound: &BigInt,
    max_bits: u32,
) -> Result<ContinuedFraction> {
    let b = bound.clone();
    let stop = move |d: &[BigInt]| d.last().is_some_and(|q| q > &b);
    let mut cf = cf_expand(x, &stop, 64 + 4 * bound.bits() as u32, max_bits)?;
    cf.denominators.retain(|q| q <= bound);
    Ok(cf)
}

/// Best approximations for `n = 1` from continued-fraction denominators.
pub fn enumerate_by_continued_fraction(
    theta: &TargetVector,
    height_bound: &BigRational,
    max_bits: u32,
) -> Result<BestApproxSequence> {
    let j = WeightVector::uniform(1);
    validate(theta, &j)?;
    let cap = height_bound.floor().to_integer().max(BigInt::zero());
    let cf = continued_fraction_denominators_upto(&theta.components()[0], &cap, max_bits)?;
    let mut entries = Vec::new();
    for q in cf.denominators {
        let qi = q.to_i64().ok_or_else(|| Error::HeightOverflow(format!("denominator {q} exceeds 64 bits")))?;
        let residual = crate::arith::dot_residual(&[qi], theta, max_bits)?;
        entries.push(BestApproximation {
            index: entries.len() + 1,
            m: vec![qi],
            height_power: qi as u128,
            height: CertifiedReal::exact_int(qi),
            residual,
        });
    }
    let mut seq = BestApproxSequence {
        target: theta.clone(),
        weights: j,
        entries,
        height_bound: height_bound.clone(),
        max_height_power: cap,
        method: Method::ContinuedFraction,
    };
    finalize_residuals(&mut seq, max_bits)?;
    Ok(seq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct CheckLine {
    pub index: usize,
    pub value: CertifiedReal,
    pub status: CheckStatus,
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub name: &'static str,
    pub lines: Vec<CheckLine>,
}

impl VerificationReport {
    pub fn count(&self, s: CheckStatus) -> usize {
        self.lines.iter().filter(|l| l.status == s).count()
    }

    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.status == CheckStatus::Pass)
    }

    pub fn any_fail(&self) -> bool {
        self.lines.iter().any(|l| l.status == CheckStatus::Fail)
    }
}

/// `ζ_ν · M_{ν+1} ≤ 1` for each consecutive pair.
pub fn verify_minkowski(seq: &BestApproxSequence, max_bits: u32) -> VerificationReport {
    let one = CertifiedReal::one();
    let mut lines = Vec::new();
    for w in seq.entries.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let mut zeta = a.residual.clone();
        let mut height = b.height.clone();
        let mut bits = 128u32;
        let (value, status) = loop {
            let p = zeta.mul(&height);
            if p.certainly_le(&one) {
                break (p, CheckStatus::Pass);
            }
            if one.certainly_lt(&p) {
                break (p, CheckStatus::Fail);
            }
            if bits >= max_bits || seq.method == Method::Fabricated {
                break (p, CheckStatus::Inconclusive);
            }
            bits = (bits * 2).min(max_bits);
            zeta = residual_at(&a.m, &seq.target, bits);
            height = seq.weights.height_from_power(&BigInt::from(b.height_power), bits);
        };
        lines.push(CheckLine { index: a.index, value, status });
    }
    VerificationReport { name: "minkowski", lines }
}

/// `M_{ν+2·3^n} ≥ 2·M_ν` for every `ν` with both entries present.
pub fn verify_lacunarity(seq: &BestApproxSequence, n: usize) -> VerificationReport {
    let stride = 2 * 3usize.pow(n as u32);
    let j = &seq.weights;
    let mut lines = Vec::new();
    if seq.entries.len() > stride {
        let two_l = BigInt::one() << j.lcm();
        for nu in 0..seq.entries.len() - stride {
            let a = &seq.entries[nu];
            let b = &seq.entries[nu + stride];
            // (H_b / H_a)^(D/L) ≥ 2  ⇔  H_b^D ≥ 2^L · H_a^D
            let ha = num_traits::pow(BigInt::from(a.height_power), j.denom() as usize);
            let hb = num_traits::pow(BigInt::from(b.height_power), j.denom() as usize);
            let status = if hb >= &two_l * ha { CheckStatus::Pass } else { CheckStatus::Fail };
            let value = b.height.div(&a.height).expect("heights are positive");
            lines.push(CheckLine { index: a.index, value, status });
        }
    }
    VerificationReport { name: "lacunarity", lines }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelationCheck {
    IndependentUpToBound,
    Relation { v: Vec<i64>, p: BigInt },
    SuspectedRelation { v: Vec<i64>, p: BigInt },
}

/// Sign-normalized vectors with max-norm exactly `k`, in lexicographic order.
fn vectors_with_norm(n: usize, k: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut v = vec![-k; n];
    loop {
        if v.iter().any(|x| x.abs() == k) && crate::arith::residual::is_sign_normalized(&v) {
            out.push(v.clone());
        }
        let mut t = n;
        loop {
            if t == 0 {
                return out;
            }
            t -= 1;
            if v[t] < k {
                v[t] += 1;
                break;
            }
            v[t] = -k;
        }
    }
}

/// Searches `|v_i| ≤ coeff_bound`, `|p| ≤ n·coeff_bound` for `v·θ + p = 0`,
/// in order of max-norm and then lexicographically.
pub fn check_integer_relation(theta: &TargetVector, coeff_bound: u32, max_bits: u32) -> Result<RelationCheck> {
    if coeff_bound == 0 {
        return Err(Error::InvalidInput("coefficient bound must be ≥ 1".into()));
    }
    let n = theta.n();
    let p_max = BigInt::from(n as u64 * coeff_bound as u64);
    for k in 1..=coeff_bound as i64 {
        for v in vectors_with_norm(n, k) {
            match theta.exact_dot_i64(&v) {
                Ok(Some(r)) => {
                    if r.is_integer() && r.to_integer().abs() <= p_max {
                        return Ok(RelationCheck::Relation { v, p: -r.to_integer() });
                    }
                }
                Ok(None) => {}
                Err(()) => {
                    let big: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
                    let e = theta.dot(&big, max_bits);
                    if e.dist_to_nearest_int().contains_zero() {
                        let p = -(e.midpoint().round().to_integer());
                        if p.abs() <= p_max {
                            return Ok(RelationCheck::SuspectedRelation { v, p });
                        }
                    }
                }
            }
        }
    }
    Ok(RelationCheck::IndependentUpToBound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn ms(seq: &BestApproxSequence) -> Vec<Vec<i64>> {
        seq.entries.iter().map(|e| e.m.clone()).collect()
    }

    #[test]
    fn golden_decimal_sequence() {
        let t: TargetVector = "decimal:0.6180339887@60".parse().unwrap();
        let seq = enumerate_by_sweep(&t, &WeightVector::uniform(1), &q(15, 1), 512).unwrap();
        assert_eq!(ms(&seq), vec![vec![1], vec![2], vec![3], vec![5], vec![8], vec![13]]);
    }

    #[test]
    fn sqrt2_sequence() {
        let t: TargetVector = "quad:(0+1*sqrt(2))/1-1".parse().unwrap();
        let seq = enumerate_by_sweep(&t, &WeightVector::uniform(1), &q(30, 1), 512).unwrap();
        assert_eq!(ms(&seq), vec![vec![1], vec![2], vec![5], vec![12], vec![29]]);
    }

    #[test]
    fn empty_below_one() {
        let t: TargetVector = "quad:(0+1*sqrt(2))/1,quad:(0+1*sqrt(3))/1".parse().unwrap();
        let seq = enumerate_by_sweep(&t, &WeightVector::uniform(2), &q(1, 2), 512).unwrap();
        assert!(seq.is_empty());
    }

    #[test]
    fn rational_theta_is_refused() {
        let t: TargetVector = "rational:2/7".parse().unwrap();
        let err = enumerate_by_sweep(&t, &WeightVector::uniform(1), &q(10, 1), 512).unwrap_err();
        assert_eq!(err, Error::IntegerRelation { v: vec![7], p: "-2".into() });
    }

    #[test]
    fn dependent_quadratic_pair_is_detected() {
        let t: TargetVector = "quad:(-1+1*sqrt(5))/2,quad:(3-1*sqrt(5))/2".parse().unwrap();
        let err = enumerate_by_sweep(&t, &WeightVector::uniform(2), &q(100, 1), 512).unwrap_err();
        assert!(matches!(err, Error::IntegerRelation { .. }), "{err:?}");
    }

    #[test]
    fn cf_examples() {
        let g: crate::arith::RealSource = "decimal:0.6180339887@60".parse().unwrap();
        let cf = continued_fraction_denominators(&g, 6, 512).unwrap();
        let d: Vec<i64> = cf.denominators.iter().map(|x| x.to_i64().unwrap()).collect();
        assert_eq!(d, vec![1, 2, 3, 5, 8, 13]);
        let s: crate::arith::RealSource = "quad:(0+1*sqrt(2))/1-1".parse().unwrap();
        let cf = continued_fraction_denominators(&s, 5, 512).unwrap();
        let d: Vec<i64> = cf.denominators.iter().map(|x| x.to_i64().unwrap()).collect();
        assert_eq!(d, vec![1, 2, 5, 12, 29]);
        let third = q(1, 3);
        let cf = continued_fraction_denominators(&third, 4, 512).unwrap();
        assert!(cf.terminated);
        assert_eq!(cf.denominators, vec![BigInt::from(1), BigInt::from(3)]);
    }

    #[test]
    fn decimal_cf_runs_out_of_precision() {
        let g: crate::arith::RealSource = "decimal:0.6180339887@30".parse().unwrap();
        assert!(matches!(continued_fraction_denominators(&g, 40, 512), Err(Error::PrecisionExhausted { .. })));
    }

    #[test]
    fn minkowski_fabricated_failure() {
        let t: TargetVector = "quad:(0+1*sqrt(2))/1-1".parse().unwrap();
        let j = WeightVector::uniform(1);
        let mk = |index, m: i64, zeta: BigRational| BestApproximation {
            index,
            m: vec![m],
            height_power: m as u128,
            height: CertifiedReal::exact_int(m),
            residual: CertifiedReal::from_rational(&zeta, 64),
        };
        let seq = BestApproxSequence::fabricated(t, j, vec![mk(1, 1, q(1, 2)), mk(2, 3, q(1, 10))], q(3, 1));
        let rep = verify_minkowski(&seq, 256);
        assert_eq!(rep.lines.len(), 1);
        assert_eq!(rep.lines[0].status, CheckStatus::Fail);
    }

    #[test]
    fn lacunarity_on_fibonacci_heights() {
        let t: TargetVector = "quad:(-1+1*sqrt(5))/2".parse().unwrap();
        let seq = enumerate_by_sweep(&t, &WeightVector::uniform(1), &q(100_000, 1), 512).unwrap();
        let rep = verify_lacunarity(&seq, 1);
        assert!(!rep.lines.is_empty());
        assert!(rep.all_pass());
        let short = seq.truncated(&q(8, 1));
        assert!(verify_lacunarity(&short, 1).lines.is_empty());
        assert!(verify_minkowski(&seq, 512).all_pass());
    }

    #[test]
    fn relation_examples() {
        let t: TargetVector = "rational:1/2,rational:1/3".parse().unwrap();
        assert_eq!(
            check_integer_relation(&t, 3, 256).unwrap(),
            RelationCheck::Relation { v: vec![2, 0], p: BigInt::from(-1) }
        );
        let t: TargetVector = "quad:(-1+1*sqrt(2))/1,quad:(-1+1*sqrt(3))/1".parse().unwrap();
        assert_eq!(check_integer_relation(&t, 10, 256).unwrap(), RelationCheck::IndependentUpToBound);
        let t: TargetVector = "quad:(-1+1*sqrt(5))/2,quad:(3-1*sqrt(5))/2".parse().unwrap();
        assert_eq!(
            check_integer_relation(&t, 3, 256).unwrap(),
            RelationCheck::Relation { v: vec![1, 1], p: BigInt::from(-1) }
        );
        let t: TargetVector = "decimal:0.5@20".parse().unwrap();
        assert!(matches!(check_integer_relation(&t, 3, 256).unwrap(), RelationCheck::SuspectedRelation { .. }));
    }

    #[test]
    fn shells_cover_the_box_once() {
        let j: WeightVector = "2/3,1/3".parse().unwrap();
        let t: TargetVector = "quad:(-1+1*sqrt(2))/1,quad:(-1+1*sqrt(3))/1".parse().unwrap();
        let fixed = FixedTheta::new(&t, 100).unwrap();
        let mut seen = std::collections::HashSet::new();
        for h in 1..=30u128 {
            let geo = shell_geometry(&j, h);
            scan_shell(&fixed, &geo, &mut |m, _, _| {
                assert_eq!(j.height_power(m), Some(h));
                assert!(seen.insert(m.to_vec()));
            });
        }
        // all normalized vectors with H ≤ 30: |m1| ≤ 30, |m2| ≤ 5
        assert_eq!(seen.len(), (61 * 11 - 1) / 2);
    }
}
