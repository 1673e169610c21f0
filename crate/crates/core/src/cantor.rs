//! Cantor-type construction: level partitions of the best approximations,
//! grid subdivision, thickening filters, exact-count selection and the
//! per-box fact checks.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::elementary::log2_int;
use crate::arith::weights::rational_power;
use crate::arith::{parse_rational, CertifiedReal, TargetVector, WeightVector};
use crate::bestapprox::{enumerate_best_approximations, BestApproxSequence, BestApproximation, EnumerationOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Strict,
    Exploratory,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(Mode::Strict),
            "exploratory" => Ok(Mode::Exploratory),
            _ => Err(Error::Parse(format!("unknown mode '{s}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strict => "strict",
            Mode::Exploratory => "exploratory",
        })
    }
}

// ---------------------------------------------------------------------------
// counting formulas

const MAX_FLOOR_BITS: u32 = 4096;

/// `⌊f⌋` for a quantity available as refinable enclosures.
fn certified_floor(f: impl Fn(u32) -> CertifiedReal, what: &str) -> Result<BigInt> {
    let mut bits = 64;
    loop {
        let v = f(bits);
        let lo = v.lower().floor().to_integer();
        let hi = v.upper().floor().to_integer();
        if lo == hi {
            return Ok(lo);
        }
        if bits >= MAX_FLOOR_BITS {
            return Err(Error::PrecisionExhausted { bits, context: format!("floor of {what}") });
        }
        bits *= 2;
    }
}

fn pow_int(r: &BigInt, k: u32) -> BigInt {
    num_traits::pow(r.clone(), k as usize)
}

/// `2^(n+2)·3^n·n`.
fn fact_constant(n: usize) -> BigInt {
    (BigInt::one() << (n + 2)) * pow_int(&BigInt::from(3), n as u32) * BigInt::from(n)
}

/// `2^(n+2)3^n n(1+log₂R)R^(1−j_min) + 4nR^(1−j_min)`, the removal allowance.
fn removal_allowance(r: &BigInt, j: &WeightVector, bits: u32) -> CertifiedReal {
    let n = j.n();
    let one_minus = BigRational::one() - j.j_min();
    let p = rational_power(r, &one_minus, bits);
    let l = log2_int(r, bits).add(&CertifiedReal::one());
    let a = l.mul(&p).mul_int(&fact_constant(n));
    a.add(&p.mul_int(&BigInt::from(4 * n as u64)))
}

/// `⌊R − Σ R^(j_i) − 2^(n+2)3^n n(1+log₂R)R^(1−j_min) − 4nR^(1−j_min)⌋`.
pub fn target_count(r: &BigInt, j: &WeightVector) -> Result<BigInt> {
    if *r < BigInt::from(2) {
        return Err(Error::InvalidParams("R must be at least 2".into()));
    }
    certified_floor(
        |bits| {
            let mut v = CertifiedReal::exact_int(r.clone());
            for w in j.weights() {
                v = v.sub(&rational_power(r, w, bits));
            }
            v.sub(&removal_allowance(r, j, bits))
        },
        "target count",
    )
}

/// `∏⌊R^(j_i)⌋`, the number of grid children of a box.
pub fn grid_children(r: &BigInt, j: &WeightVector) -> BigInt {
    j.weights()
        .iter()
        .map(|w| {
            let p = w.numer().to_u32().expect("small weight");
            let q = w.denom().to_u32().expect("small weight");
            pow_int(r, p).nth_root(q)
        })
        .product()
}

/// Children kept per box in STRICT mode: `target_count` with the grid count
/// `∏⌊R^(j_i)⌋` in place of `R − Σ R^(j_i)`.
pub fn strict_branching(r: &BigInt, j: &WeightVector) -> Result<BigInt> {
    let g = grid_children(r, j);
    certified_floor(|bits| CertifiedReal::exact_int(g.clone()).sub(&removal_allowance(r, j, bits)), "strict branching")
}

/// Left side of the dimension condition, `(R − ∏⌊R^(j_i)⌋)/R +
/// 2^(n+2)3^n n(1+log₂R)R^(−j_min) + 4nR^(−j_min) + 1/R`.
pub fn strict_condition_value(r: &BigInt, j: &WeightVector, bits: u32) -> CertifiedReal {
    let g = grid_children(r, j);
    let num = CertifiedReal::exact_int(r - &g + 1).add(&removal_allowance(r, j, bits));
    num.rescale(bits + r.bits() as u32).div_int(r).expect("R > 0")
}

/// Both STRICT conditions, certified: branching above 1 and the dimension
/// condition at most `1/2`.
pub fn strict_conditions_hold(r: &BigInt, j: &WeightVector) -> Result<bool> {
    if strict_branching(r, j)? <= BigInt::one() {
        return Ok(false);
    }
    let half = CertifiedReal::from_rational(&BigRational::new(BigInt::one(), BigInt::from(2)), 8);
    let mut bits = 64;
    loop {
        let v = strict_condition_value(r, j, bits);
        if v.certainly_le(&half) {
            return Ok(true);
        }
        if half.certainly_lt(&v) {
            return Ok(false);
        }
        if bits >= MAX_FLOOR_BITS {
            return Err(Error::PrecisionExhausted { bits, context: "dimension condition".into() });
        }
        bits *= 2;
    }
}

const MAX_SCAN_EXPONENT: u32 = 256;

/// Smallest power of two meeting both STRICT conditions.
pub fn minimal_strict_r(j: &WeightVector) -> Result<BigInt> {
    for a in 1..=MAX_SCAN_EXPONENT {
        let r = BigInt::one() << a;
        if strict_conditions_hold(&r, j)? {
            return Ok(r);
        }
    }
    Err(Error::InvalidParams("no power of two up to 2^256 meets the conditions".into()))
}

/// Smallest power of two with `target_count > 1`.
pub fn minimal_feasible_r(j: &WeightVector) -> Result<Option<BigInt>> {
    for a in 1..=MAX_SCAN_EXPONENT {
        let r = BigInt::one() << a;
        if target_count(&r, j)? > BigInt::one() {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// parameters

#[derive(Debug, Clone)]
pub struct CantorParams {
    pub n: usize,
    pub j: WeightVector,
    pub r: u64,
    pub epsilon: BigRational,
    pub theta: TargetVector,
    pub mode: Mode,
    pub seed: u64,
    cells: Arc<[u64]>,
}

impl CantorParams {
    pub fn new(
        j: WeightVector,
        r: u64,
        epsilon: BigRational,
        theta: TargetVector,
        mode: Mode,
        seed: u64,
    ) -> Result<Self> {
        let n = j.n();
        if theta.n() != n {
            return Err(Error::InvalidParams(format!("θ has {} components but j has {n}", theta.n())));
        }
        if !(2..=1 << 62).contains(&r) {
            return Err(Error::InvalidParams("R must lie in [2, 2^62]".into()));
        }
        let rb = BigInt::from(r);
        let mut cells = Vec::with_capacity(n);
        for i in 0..n {
            let s = j.exact_power(&rb, i).ok_or_else(|| {
                Error::InvalidParams(format!("R^(j_{}) = {r}^({}) is not an integer", i + 1, j.weights()[i]))
            })?;
            cells.push(s.to_u64().expect("s ≤ R"));
        }
        if !epsilon.is_positive() {
            return Err(Error::InvalidParams("ε must be positive".into()));
        }
        // ε < 1/(2R^(2 j_max)), with R^(j_max) an integer here
        let s_max = BigInt::from(*cells.iter().max().expect("n ≥ 1"));
        let limit = BigRational::new(BigInt::one(), BigInt::from(2) * &s_max * &s_max);
        if epsilon >= limit {
            return Err(Error::InvalidParams(format!("ε = {epsilon} must be below 1/(2R^(2j_max)) = {limit}")));
        }
        if mode == Mode::Strict {
            let s_min = *cells.iter().min().expect("n ≥ 1");
            if s_min <= 4 {
                return Err(Error::InvalidParams(format!("STRICT mode needs R > 4^(1/j_min); R^(j_min) = {s_min}")));
            }
            if !strict_conditions_hold(&rb, &j)? {
                return Err(Error::InvalidParams(format!(
                    "STRICT mode: R = {r} is below the threshold (minimal power of two {})",
                    minimal_strict_r(&j)?
                )));
            }
        }
        Ok(CantorParams { n, j, r, epsilon, theta, mode, seed, cells: cells.into() })
    }

    /// `R^(j_i)` per coordinate: grid cells per box side.
    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn r_big(&self) -> BigInt {
        BigInt::from(self.r)
    }

    pub fn to_param_file(&self, depth: u32) -> String {
        format!(
            "n={}\nj={}\nR={}\nepsilon={}\ntheta={}\nmode={}\nseed={}\ndepth={}\n",
            self.n, self.j, self.r, self.epsilon, self.theta, self.mode, self.seed, depth
        )
    }

    /// Parses the `key=value` parameter file; returns the params and depth.
    pub fn from_param_file(text: &str) -> Result<(Self, u32)> {
        let mut kv: HashMap<String, String> = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("bad line '{line}'")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Parse(format!("missing key '{k}'")));
        let j: WeightVector = get("j")?.parse()?;
        let r: u64 = get("R")?.parse().map_err(|_| Error::Parse("bad R".into()))?;
        let epsilon = parse_rational(get("epsilon")?)?;
        let theta: TargetVector = get("theta")?.parse()?;
        let mode: Mode = get("mode")?.parse()?;
        let seed: u64 = get("seed")?.parse().map_err(|_| Error::Parse("bad seed".into()))?;
        let depth: u32 = get("depth")?.parse().map_err(|_| Error::Parse("bad depth".into()))?;
        if let Some(n) = kv.get("n") {
            if n.parse::<usize>().ok() != Some(j.n()) {
                return Err(Error::Parse(format!("n = {n} disagrees with j")));
            }
        }
        Ok((CantorParams::new(j, r, epsilon, theta, mode, seed)?, depth))
    }
}

// ---------------------------------------------------------------------------
// level data

/// `𝓜_k`: entries with `R^(k−1) ≤ M < R^k`, for `k = 0..=k_max`.
/// Entries at or beyond `R^(k_max)` are dropped.
pub fn partition_best_approx(seq: &BestApproxSequence, r: &BigInt, k_max: u32) -> Vec<Vec<BestApproximation>> {
    let mut out = vec![Vec::new(); k_max as usize + 1];
    for e in &seq.entries {
        let h = BigInt::from(e.height_power);
        if let Some(k) = (1..=k_max).find(|&k| seq.weights.height_below_power(&h, r, k)) {
            out[k as usize].push(e.clone());
        }
    }
    out
}

fn ceil_rational_power(r: &BigInt, x: &BigRational) -> BigInt {
    let p = x.numer().to_u32().expect("small exponent");
    let q = x.denom().to_u32().expect("small exponent");
    let v = pow_int(r, p);
    let root = v.nth_root(q);
    if pow_int(&root, q) == v {
        root
    } else {
        root + 1
    }
}

/// `𝒬_k^(i) = {q : R^((k−1)j_i/2) ≤ q < R^(k j_i/2)}` as `(first, last)`.
pub fn coordinate_denominator_range(r: &BigInt, j: &WeightVector, k: u32, i: usize) -> Option<(BigInt, BigInt)> {
    if k == 0 {
        return None;
    }
    let w = &j.weights()[i];
    let two = BigInt::from(2);
    let lo = ceil_rational_power(r, &(w * BigInt::from(k - 1) / &two));
    let hi = ceil_rational_power(r, &(w * BigInt::from(k) / &two)) - 1;
    (lo <= hi).then_some((lo, hi))
}

/// Everything the filter needs for boxes of one level.
#[derive(Debug, Clone)]
pub struct LevelData {
    pub k: u32,
    pub dual: Vec<Vec<i64>>,
    pub q_ranges: Vec<Option<(BigInt, BigInt)>>,
}

impl LevelData {
    pub fn new(params: &CantorParams, k: u32, class: &[BestApproximation]) -> Self {
        let r = params.r_big();
        LevelData {
            k,
            dual: class.iter().map(|e| e.m.clone()).collect(),
            q_ranges: (0..params.n).map(|i| coordinate_denominator_range(&r, &params.j, k, i)).collect(),
        }
    }

    pub fn empty(n: usize, k: u32) -> Self {
        LevelData { k, dual: vec![], q_ranges: vec![None; n] }
    }
}

// ---------------------------------------------------------------------------
// boxes

/// A level-`k` grid box: `index_i/s_i^k ≤ x_i ≤ (index_i+1)/s_i^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hyperrectangle {
    pub level: u32,
    pub index: Vec<BigInt>,
    cells: Arc<[u64]>,
}

impl Hyperrectangle {
    pub fn root(cells: &[u64]) -> Self {
        Hyperrectangle { level: 0, index: vec![BigInt::zero(); cells.len()], cells: cells.into() }
    }

    pub fn at(level: u32, index: Vec<BigInt>, cells: &[u64]) -> Result<Self> {
        if index.len() != cells.len() {
            return Err(Error::InvalidInput("dimension mismatch".into()));
        }
        for (x, &s) in index.iter().zip(cells) {
            if x.is_negative() || *x >= pow_int(&BigInt::from(s), level) {
                return Err(Error::NotInTree(format!("index {x} outside the level-{level} grid")));
            }
        }
        Ok(Hyperrectangle { level, index, cells: cells.into() })
    }

    pub fn n(&self) -> usize {
        self.index.len()
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    /// Cells per side at this level, `s_i^k`.
    fn grid(&self, i: usize) -> BigInt {
        pow_int(&BigInt::from(self.cells[i]), self.level)
    }

    pub fn lower_corner(&self) -> Vec<BigRational> {
        (0..self.n()).map(|i| BigRational::new(self.index[i].clone(), self.grid(i))).collect()
    }

    pub fn sides(&self) -> Vec<BigRational> {
        (0..self.n()).map(|i| BigRational::new(BigInt::one(), self.grid(i))).collect()
    }

    pub fn ranges(&self) -> Vec<(BigRational, BigRational)> {
        (0..self.n())
            .map(|i| {
                let g = self.grid(i);
                (BigRational::new(self.index[i].clone(), g.clone()), BigRational::new(&self.index[i] + 1, g))
            })
            .collect()
    }

    pub fn center(&self) -> Vec<BigRational> {
        (0..self.n())
            .map(|i| BigRational::new(BigInt::from(2) * &self.index[i] + 1, BigInt::from(2) * self.grid(i)))
            .collect()
    }

    pub fn child_count(&self) -> u64 {
        self.cells.iter().product()
    }

    /// Child by local multi-index `c` with `0 ≤ c_i < s_i`.
    pub fn child(&self, c: &[u64]) -> Self {
        Hyperrectangle {
            level: self.level + 1,
            index: (0..self.n()).map(|i| &self.index[i] * BigInt::from(self.cells[i]) + BigInt::from(c[i])).collect(),
            cells: self.cells.clone(),
        }
    }

    /// Child by lexicographic linear index.
    pub fn child_linear(&self, mut idx: u64) -> Self {
        let mut c = vec![0u64; self.n()];
        for i in (0..self.n()).rev() {
            c[i] = idx % self.cells[i];
            idx /= self.cells[i];
        }
        self.child(&c)
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| Hyperrectangle {
            level: self.level - 1,
            index: (0..self.n()).map(|i| self.index[i].div_floor(&BigInt::from(self.cells[i]))).collect(),
            cells: self.cells.clone(),
        })
    }

    /// Position of this box among its parent's children.
    pub fn local_index(&self) -> u64 {
        let mut idx = 0u64;
        for i in 0..self.n() {
            let c = self.index[i].mod_floor(&BigInt::from(self.cells[i])).to_u64().expect("small");
            idx = idx * self.cells[i] + c;
        }
        idx
    }

    pub fn contains(&self, other: &Hyperrectangle) -> bool {
        if other.level < self.level {
            return false;
        }
        let d = other.level - self.level;
        (0..self.n()).all(|i| other.index[i].div_floor(&pow_int(&BigInt::from(self.cells[i]), d)) == self.index[i])
    }
}

/// The `∏ s_i` children in lexicographic order of their lower corners.
pub fn subdivide(h: &Hyperrectangle) -> Vec<Hyperrectangle> {
    (0..h.child_count()).map(|t| h.child_linear(t)).collect()
}

/// `{x : |m·x + p| < ε}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DualThickening {
    pub m: Vec<i64>,
    #[serde(serialize_with = "ser_display")]
    pub p: BigInt,
    #[serde(serialize_with = "ser_display")]
    pub epsilon: BigRational,
}

/// `{x : q|q x_i − p| < ε}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoordThickening {
    pub i: usize,
    #[serde(serialize_with = "ser_display")]
    pub q: BigInt,
    #[serde(serialize_with = "ser_display")]
    pub p: BigInt,
    #[serde(serialize_with = "ser_display")]
    pub epsilon: BigRational,
}

fn ser_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// True iff the open interval `(lo, hi)` contains an integer.
fn open_contains_integer(lo: &BigRational, hi: &BigRational) -> bool {
    let first = lo.floor().to_integer() + 1;
    BigRational::from_integer(first) < *hi
}

/// `H ∩ Δ(m,p) ≠ ∅` for some `p`, for the closed box with the given ranges.
pub fn dual_thickening_hits(ranges: &[(BigRational, BigRational)], m: &[i64], eps: &BigRational) -> bool {
    let mut a = BigRational::zero();
    let mut b = BigRational::zero();
    for ((lo, hi), &mi) in ranges.iter().zip(m) {
        let mi = BigRational::from_integer(BigInt::from(mi));
        let (x, y) = (&mi * lo, &mi * hi);
        if x <= y {
            a += x;
            b += y;
        } else {
            a += y;
            b += x;
        }
    }
    open_contains_integer(&(a - eps), &(b + eps))
}

/// `H ∩ Γ_i(q,p) ≠ ∅` for some `p`, for the closed coordinate range.
pub fn coord_thickening_hits(range: &(BigRational, BigRational), q: &BigInt, eps: &BigRational) -> bool {
    let qr = BigRational::from_integer(q.clone());
    let slack = eps / &qr;
    open_contains_integer(&(&qr * &range.0 - &slack), &(&qr * &range.1 + slack))
}

pub fn intersects_dual_thickening(h: &Hyperrectangle, m: &[i64], eps: &BigRational) -> bool {
    dual_thickening_hits(&h.ranges(), m, eps)
}

pub fn intersects_coord_thickening(h: &Hyperrectangle, i: usize, q: &BigInt, eps: &BigRational) -> bool {
    coord_thickening_hits(&h.ranges()[i], q, eps)
}

// ---------------------------------------------------------------------------
// rational search

/// The fraction with least denominator in the open interval `(lo, hi)`.
fn simplest_between(lo: &BigRational, hi: &BigRational) -> BigRational {
    debug_assert!(lo < hi);
    let fl = lo.floor();
    let next = &fl + BigRational::one();
    if next < *hi {
        return next;
    }
    let lo1 = lo - &fl;
    let hi1 = hi - &fl;
    let z = if lo1.is_zero() {
        (hi1.recip()).floor() + BigRational::one()
    } else {
        simplest_between(&hi1.recip(), &lo1.recip())
    };
    fl + z.recip()
}

/// All reduced fractions in `(lo, hi)` with denominator at most `qmax`.
pub fn fractions_between(lo: &BigRational, hi: &BigRational, qmax: &BigInt) -> Vec<BigRational> {
    let mut out = Vec::new();
    let mut stack = vec![(lo.clone(), hi.clone())];
    while let Some((a, b)) = stack.pop() {
        if a >= b {
            continue;
        }
        let f = simplest_between(&a, &b);
        if f.denom() > qmax {
            continue;
        }
        stack.push((f.clone(), b));
        stack.push((a, f.clone()));
        out.push(f);
    }
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// filtering

#[derive(Debug, Clone)]
struct Bitmask {
    words: Vec<u64>,
}

impl Bitmask {
    fn new(len: u64) -> Self {
        Bitmask { words: vec![0; len.div_ceil(64) as usize] }
    }

    fn get(&self, i: u64) -> bool {
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    /// Sets bits `start..=end`.
    fn set_range(&mut self, start: u64, end: u64) {
        let (mut i, end) = (start, end + 1);
        while i < end {
            let w = (i / 64) as usize;
            let off = i % 64;
            let take = (64 - off).min(end - i);
            let bits = if take == 64 { u64::MAX } else { ((1u64 << take) - 1) << off };
            self.words[w] |= bits;
            i += take;
        }
    }

    fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualHits {
    pub m: Vec<i64>,
    /// Thickenings meeting the parent box, with the number of children each meets.
    pub thickenings: Vec<(DualThickening, u64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordHit {
    pub thickening: CoordThickening,
    /// Reduced centre `p/q`.
    #[serde(serialize_with = "ser_display")]
    pub fraction: BigRational,
    pub children: u64,
}

/// Filter result for one parent box.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub parent: Hyperrectangle,
    pub child_count: u64,
    pub survivor_count: u64,
    killed: Bitmask,
    pub dual: Vec<DualHits>,
    pub coord: Vec<CoordHit>,
}

impl FilterOutcome {
    pub fn is_survivor(&self, local: u64) -> bool {
        !self.killed.get(local)
    }

    /// Local indices of the surviving children, in lexicographic order.
    pub fn survivors(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.child_count).filter(move |&t| self.is_survivor(t))
    }
}

/// Integer arithmetic for the row kernel; `i128` when it fits.
trait Kern: Clone + Integer + Signed + From<i64> + fmt::Debug {
    fn from_big(b: &BigInt) -> Option<Self>;
    fn to_big(&self) -> BigInt;
}

impl Kern for i128 {
    fn from_big(b: &BigInt) -> Option<Self> {
        i128::try_from(b).ok()
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Kern for BigInt {
    fn from_big(b: &BigInt) -> Option<Self> {
        Some(b.clone())
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

fn floor_div<T: Kern>(a: T, b: &T) -> T {
    a.div_floor(b)
}

fn ceil_div<T: Kern>(a: T, b: &T) -> T {
    -((-a).div_floor(b))
}

/// One dual vector in the kernel's units, sign-normalized so `g_n ≥ 0`.
struct DualJob<T> {
    g: Vec<T>,
    a0: T,
    width: T,
    p_first: T,
}

/// Marks children meeting `Δ(m,P)` row by row along the last coordinate and
/// accumulates the children met per `P`.
fn dual_rows<T: Kern>(job: &DualJob<T>, k: &T, e: &T, cells: &[u64], killed: &mut Bitmask, counts: &mut [u64]) {
    let n = cells.len();
    let sn = cells[n - 1];
    let rows: u64 = cells[..n - 1].iter().product();
    let gn = &job.g[n - 1];
    let mut c = vec![0u64; n.saturating_sub(1)];
    for row in 0..rows {
        let mut a = job.a0.clone();
        for (gi, &ci) in job.g.iter().zip(&c) {
            if ci != 0 {
                a = a + gi.clone() * T::from(ci as i64);
            }
        }
        let base = row * sn;
        let first = floor_div(a.clone() - e.clone(), k) + T::one();
        let reach = a.clone() + gn.clone() * T::from(sn as i64 - 1) + job.width.clone() + e.clone();
        let last = ceil_div(reach, k) - T::one();
        let mut p = first;
        while p <= last {
            let (lo, hi) = if gn.is_zero() {
                (0u64, sn - 1)
            } else {
                let pk = p.clone() * k.clone();
                let lo = floor_div(pk.clone() - e.clone() - a.clone() - job.width.clone(), gn) + T::one();
                let hi = ceil_div(pk + e.clone() - a.clone(), gn) - T::one();
                if hi.is_negative() || lo > T::from(sn as i64 - 1) {
                    p = p + T::one();
                    continue;
                }
                let clip = |v: T| -> u64 { v.to_big().to_u64().unwrap_or(0).min(sn - 1) };
                (if lo.is_negative() { 0 } else { clip(lo) }, clip(hi))
            };
            if lo <= hi {
                killed.set_range(base + lo, base + hi);
                let slot = (p.clone() - job.p_first.clone()).to_big().to_usize().expect("slot");
                if slot < counts.len() {
                    counts[slot] += hi - lo + 1;
                }
            }
            p = p + T::one();
        }
        // odometer over the leading coordinates
        for i in (0..n - 1).rev() {
            c[i] += 1;
            if c[i] < cells[i] {
                break;
            }
            c[i] = 0;
        }
    }
}

/// Filters the children of `parent` against the level data.
pub fn filter_children(parent: &Hyperrectangle, level: &LevelData, eps: &BigRational) -> Result<FilterOutcome> {
    filter_impl(parent, level, eps, false)
}

fn filter_impl(
    parent: &Hyperrectangle,
    level: &LevelData,
    eps: &BigRational,
    force_big: bool,
) -> Result<FilterOutcome> {
    if parent.level != level.k {
        return Err(Error::InvalidInput(format!("box at level {} but data for level {}", parent.level, level.k)));
    }
    let n = parent.n();
    let cells = parent.cells().to_vec();
    let child_count = parent.child_count();
    let mut killed = Bitmask::new(child_count);

    // child grid N_i = s_i^(k+1); units of 1/(L·ed) with L = lcm N_i
    let grids: Vec<BigInt> = (0..n).map(|i| pow_int(&BigInt::from(cells[i]), level.k + 1)).collect();
    let l = grids.iter().fold(BigInt::one(), |acc, g| acc.lcm(g));
    let ed = eps.denom().clone();
    let en = eps.numer().clone();
    let kk = &l * &ed;
    let ee = &l * &en;
    let w: Vec<BigInt> = grids.iter().map(|g| (&l / g) * &ed).collect();
    let u0: Vec<BigInt> = (0..n).map(|i| &parent.index[i] * BigInt::from(cells[i])).collect();

    let mut dual = Vec::with_capacity(level.dual.len());
    for m in &level.dual {
        if m.len() != n {
            return Err(Error::InvalidInput("dimension mismatch in 𝓜_k".into()));
        }
        let flipped = m[n - 1] < 0;
        let ms: Vec<BigInt> = m.iter().map(|&x| BigInt::from(if flipped { -x } else { x })).collect();
        let g: Vec<BigInt> = (0..n).map(|i| &ms[i] * &w[i]).collect();
        let a0: BigInt = (0..n).map(|i| &g[i] * &u0[i] + g[i].clone().min(BigInt::zero())).sum();
        let width: BigInt = g.iter().map(|x| x.abs()).sum();
        // thickenings meeting the parent
        let par_lo: BigInt =
            (0..n).map(|i| &g[i] * &u0[i] + (&g[i] * BigInt::from(cells[i])).min(BigInt::zero())).sum();
        let par_hi: BigInt = &par_lo + (0..n).map(|i| g[i].abs() * BigInt::from(cells[i])).sum::<BigInt>();
        let p_first: BigInt = (&par_lo - &ee).div_floor(&kk) + 1;
        let p_last: BigInt = -((-(&par_hi + &ee)).div_floor(&kk)) - 1;
        let p_count = if p_last >= p_first {
            (&p_last - &p_first + BigInt::one()).to_usize().expect("few thickenings")
        } else {
            0
        };
        let mut counts = vec![0u64; p_count];
        if p_count > 0 {
            let mag = [&par_lo, &par_hi, &kk, &ee].iter().map(|x| x.bits()).max().unwrap_or(0) + 4;
            let fits = !force_big && mag < 120;
            if fits {
                let conv = |x: &BigInt| i128::from_big(x).expect("fits");
                let job = DualJob {
                    g: g.iter().map(conv).collect(),
                    a0: conv(&a0),
                    width: conv(&width),
                    p_first: conv(&p_first),
                };
                dual_rows(&job, &conv(&kk), &conv(&ee), &cells, &mut killed, &mut counts);
            } else {
                let job = DualJob { g, a0, width, p_first: p_first.clone() };
                dual_rows(&job, &kk, &ee, &cells, &mut killed, &mut counts);
            }
        }
        let thickenings = (0..p_count)
            .map(|s| {
                let pp = &p_first + BigInt::from(s);
                let p = if flipped { pp } else { -pp };
                (DualThickening { m: m.clone(), p, epsilon: eps.clone() }, counts[s])
            })
            .collect();
        dual.push(DualHits { m: m.clone(), thickenings });
    }

    let mut coord = Vec::new();
    for i in 0..n {
        let Some((qlo, qhi)) = &level.q_ranges[i] else { continue };
        let ni = &grids[i];
        let alpha = BigRational::new(u0[i].clone(), ni.clone());
        let beta = BigRational::new(&u0[i] + BigInt::from(cells[i]), ni.clone());
        let qlo_r = BigRational::from_integer(qlo.clone());
        let reach = eps / (&qlo_r * &qlo_r);
        let stride: u64 = cells[i + 1..].iter().product();
        let prefixes: u64 = cells[..i].iter().product();
        let others: u64 = child_count / cells[i];
        for f in fractions_between(&(&alpha - &reach), &(&beta + &reach), qhi) {
            let b = f.denom().clone();
            let q = &b * qlo.div_ceil(&b);
            if q > *qhi {
                continue;
            }
            let qr = BigRational::from_integer(q.clone());
            let rad = eps / (&qr * &qr);
            if !(alpha < &f + &rad && beta > &f - &rad) {
                continue;
            }
            let nr = BigRational::from_integer(ni.clone());
            let t_lo: BigInt = (&nr * (&f - &rad)).floor().to_integer();
            let t_hi: BigInt = (&nr * (&f + &rad)).ceil().to_integer() - 1;
            let lo = (&t_lo - &u0[i]).max(BigInt::zero()).to_u64().expect("small");
            let hi = (&t_hi - &u0[i]).min(BigInt::from(cells[i] - 1));
            if hi.is_negative() || BigInt::from(lo) > hi {
                continue;
            }
            let hi = hi.to_u64().expect("small");
            for pre in 0..prefixes {
                let start = (pre * cells[i] + lo) * stride;
                let end = (pre * cells[i] + hi + 1) * stride - 1;
                killed.set_range(start, end);
            }
            let p = f.numer() * (&q / &b);
            coord.push(CoordHit {
                thickening: CoordThickening { i, q, p, epsilon: eps.clone() },
                fraction: f,
                children: (hi - lo + 1) * others,
            });
        }
    }

    let survivor_count = child_count - killed.count_ones();
    Ok(FilterOutcome { parent: parent.clone(), child_count, survivor_count, killed, dual, coord })
}

// ---------------------------------------------------------------------------
// tree

#[derive(Debug, Clone)]
pub struct ChildSet {
    pub child_count: u64,
    /// Surviving children in lexicographic order.
    pub survivors: Vec<Hyperrectangle>,
    /// The first `selected_len` survivors form `𝓕(H)`.
    pub selected_len: usize,
}

impl ChildSet {
    pub fn survivor_count(&self) -> usize {
        self.survivors.len()
    }

    pub fn selected(&self) -> &[Hyperrectangle] {
        &self.survivors[..self.selected_len]
    }
}

/// The lazily expanded tree of selected boxes down to `depth`.
pub struct CantorTree {
    params: CantorParams,
    depth: u32,
    seq: Arc<BestApproxSequence>,
    levels: Vec<LevelData>,
    branching: Option<u64>,
    cache: Mutex<HashMap<Hyperrectangle, Arc<ChildSet>>>,
}

impl fmt::Debug for CantorTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CantorTree")
            .field("params", &self.params)
            .field("depth", &self.depth)
            .field("branching", &self.branching)
            .finish()
    }
}

/// Height bound the tree needs: all `M < R^(depth−1)`.
pub fn required_height_bound(r: u64, depth: u32) -> BigRational {
    BigRational::from_integer(pow_int(&BigInt::from(r), depth.saturating_sub(1)))
}

/// Builds the tree, enumerating the best approximations it needs.
pub fn build_tree(params: CantorParams, depth: u32, opts: &EnumerationOptions) -> Result<CantorTree> {
    let seq = enumerate_best_approximations(&params.theta, &params.j, &required_height_bound(params.r, depth), opts)?;
    CantorTree::with_sequence(params, depth, Arc::new(seq))
}

impl CantorTree {
    pub fn with_sequence(params: CantorParams, depth: u32, seq: Arc<BestApproxSequence>) -> Result<Self> {
        if depth > 1 && seq.height_bound < required_height_bound(params.r, depth) {
            return Err(Error::InvalidInput(format!(
                "sequence covers M ≤ {} but depth {depth} needs R^{}",
                seq.height_bound,
                depth - 1
            )));
        }
        if seq.weights.weights() != params.j.weights() {
            return Err(Error::InvalidInput("sequence weights differ from the tree's".into()));
        }
        let classes = partition_best_approx(&seq, &params.r_big(), depth.max(1));
        let levels = (0..depth.max(1)).map(|k| LevelData::new(&params, k, &classes[k as usize])).collect();
        let branching = match params.mode {
            Mode::Strict => Some(
                strict_branching(&params.r_big(), &params.j)?
                    .to_u64()
                    .ok_or_else(|| Error::InvalidParams("branching overflow".into()))?,
            ),
            Mode::Exploratory => None,
        };
        Ok(CantorTree { params, depth, seq, levels, branching, cache: Mutex::new(HashMap::new()) })
    }

    pub fn params(&self) -> &CantorParams {
        &self.params
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn sequence(&self) -> &BestApproxSequence {
        &self.seq
    }

    /// `#𝓕(H_k)` in STRICT mode.
    pub fn branching(&self) -> Option<u64> {
        self.branching
    }

    pub fn level_data(&self, k: u32) -> Option<&LevelData> {
        self.levels.get(k as usize)
    }

    pub fn root(&self) -> Hyperrectangle {
        Hyperrectangle::root(self.params.cells())
    }

    pub fn filter(&self, h: &Hyperrectangle) -> Result<FilterOutcome> {
        let data = self
            .levels
            .get(h.level as usize)
            .ok_or_else(|| Error::InvalidInput(format!("level {} is beyond the tree depth {}", h.level, self.depth)))?;
        filter_children(h, data, &self.params.epsilon)
    }

    /// Survivors and selected children of `h`, cached.
    pub fn children(&self, h: &Hyperrectangle) -> Result<Arc<ChildSet>> {
        if h.level >= self.depth {
            return Err(Error::InvalidInput(format!("level {} has no children within depth {}", h.level, self.depth)));
        }
        if let Some(c) = self.cache.lock().expect("cache lock").get(h) {
            return Ok(c.clone());
        }
        let out = self.filter(h)?;
        let survivors: Vec<Hyperrectangle> = out.survivors().map(|t| h.child_linear(t)).collect();
        let selected_len = match self.branching {
            Some(b) => {
                if (survivors.len() as u64) < b {
                    return Err(Error::ConstructionViolation(format!(
                        "box at level {} with index {:?} has {} survivors, fewer than {b}",
                        h.level,
                        h.index.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                        survivors.len()
                    )));
                }
                b as usize
            }
            None => survivors.len(),
        };
        let set = Arc::new(ChildSet { child_count: out.child_count, survivors, selected_len });
        self.cache.lock().expect("cache lock").entry(h.clone()).or_insert(set.clone());
        Ok(set)
    }

    /// `#𝓕_k` for STRICT trees, `branching^k`.
    pub fn strict_level_count(&self, k: u32) -> Option<BigInt> {
        self.branching.map(|b| pow_int(&BigInt::from(b), k))
    }

    /// Materializes levels `0..=up_to` while each stays within `cap` boxes;
    /// a level whose boxes have more than `cap` grid children is not expanded.
    pub fn materialize(&self, up_to: u32, cap: usize) -> Result<Materialized> {
        let up_to = up_to.min(self.depth);
        let mut levels = vec![vec![self.root()]];
        let mut stats = Vec::new();
        for k in 0..up_to {
            let cur = &levels[k as usize];
            if cur.first().is_some_and(|h| h.child_count() > cap as u64) {
                return Ok(Materialized { levels, stats, complete: false });
            }
            let sets: Vec<Result<Arc<ChildSet>>> = cur.par_iter().map(|h| self.children(h)).collect();
            let mut next = Vec::new();
            let mut st = LevelStats::new(k);
            for s in sets {
                let s = s?;
                st.record(s.survivor_count() as u64);
                next.extend(s.selected().iter().cloned());
                if next.len() > cap {
                    stats.push(st);
                    return Ok(Materialized { levels, stats, complete: false });
                }
            }
            stats.push(st);
            levels.push(next);
        }
        Ok(Materialized { levels, stats, complete: true })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelStats {
    /// Level of the parents.
    pub level: u32,
    pub boxes: u64,
    pub min_survivors: u64,
    pub max_survivors: u64,
    pub total_survivors: u64,
}

impl LevelStats {
    fn new(level: u32) -> Self {
        LevelStats { level, boxes: 0, min_survivors: u64::MAX, max_survivors: 0, total_survivors: 0 }
    }

    fn record(&mut self, s: u64) {
        self.boxes += 1;
        self.min_survivors = self.min_survivors.min(s);
        self.max_survivors = self.max_survivors.max(s);
        self.total_survivors += s;
    }
}

#[derive(Debug, Clone)]
pub struct Materialized {
    /// `levels[k]` is `𝓕_k`.
    pub levels: Vec<Vec<Hyperrectangle>>,
    pub stats: Vec<LevelStats>,
    /// False when expansion stopped at the size cap.
    pub complete: bool,
}

// ---------------------------------------------------------------------------
// fact checks

#[derive(Debug, Clone, Default, Serialize)]
pub struct FactCheck {
    pub name: String,
    pub bound: String,
    pub checked: u64,
    pub max_observed: u64,
    pub violations: u64,
}

impl FactCheck {
    fn new(name: &str, bound: String) -> Self {
        FactCheck { name: name.into(), bound, ..Default::default() }
    }

    fn observe(&mut self, v: u64, ok: bool) {
        self.checked += 1;
        self.max_observed = self.max_observed.max(v);
        if !ok {
            self.violations += 1;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FactReport {
    pub level: u32,
    pub boxes: u64,
    pub class_size: u64,
    pub checks: Vec<FactCheck>,
}

impl FactReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }
}

/// Checks the three counting facts and their coordinate analogues on the
/// given level-`k` boxes.
pub fn verify_fact_counts(tree: &CantorTree, k: u32, boxes: &[Hyperrectangle]) -> Result<FactReport> {
    let p = tree.params();
    let n = p.n;
    let r = p.r_big();
    let data = tree.level_data(k).ok_or_else(|| Error::InvalidInput(format!("level {k} beyond depth")))?;
    let cells = p.cells();
    let imin = (0..n).min_by_key(|&i| cells[i]).expect("n ≥ 1");
    let r_one_minus = |i: usize| -> u64 { (0..n).filter(|&l| l != i).map(|l| cells[l]).product() };

    // #𝓜_k ≤ 2·3^n(1 + log₂R)
    let class = data.dual.len() as u64;
    let three_n = 3u64.pow(n as u32);
    let mut f1 = FactCheck::new("dual_class_size", format!("2·3^{n}·(1+log2 {})", p.r));
    let bound1 = log2_int(&r, 64).add(&CertifiedReal::one()).mul_int(&BigInt::from(2 * three_n));
    f1.observe(class, CertifiedReal::exact_int(class).certainly_le(&bound1));

    let mut f2 = FactCheck::new("dual_per_box_per_m", format!("{}", (1u64 << n) * n as u64));
    let b3 = 2 * r_one_minus(imin);
    let mut f3 = FactCheck::new("dual_children_per_thickening", format!("{b3}"));
    let mut c2 = FactCheck::new("coord_per_box_per_class", "2".into());
    let mut c3 = FactCheck::new("coord_children_per_thickening", "2·R^(1−j_i)".into());
    let grid = grid_children(&r, &p.j);
    let allowance = removal_allowance(&r, &p.j, 64);
    let mut sv = FactCheck::new("survivor_lower_bound", "∏⌊R^(j_i)⌋ − allowance".into());

    let mut g3 = FactCheck::new("dual_children_geometric", "min_l ∏_(i≠l) s_i·(⌊w_l⌋ + 2)".into());

    let outcomes: Vec<Result<FilterOutcome>> = boxes.par_iter().map(|h| tree.filter(h)).collect();
    for o in outcomes {
        let o = o?;
        for d in &o.dual {
            let t = d.thickenings.len() as u64;
            f2.observe(t, t <= (1u64 << n) * n as u64);
            let geo = geometric_dual_bound(&d.m, cells, k + 1, &p.epsilon);
            for (_, ch) in &d.thickenings {
                f3.observe(*ch, *ch <= b3);
                g3.observe(*ch, BigInt::from(*ch) <= geo);
            }
        }
        for i in 0..n {
            let hits: Vec<&CoordHit> = o.coord.iter().filter(|c| c.thickening.i == i).collect();
            if data.q_ranges[i].is_some() {
                c2.observe(hits.len() as u64, hits.len() <= 2);
            }
            let b = 2 * r_one_minus(i);
            for h in hits {
                c3.observe(h.children, h.children <= b);
            }
        }
        let lower = CertifiedReal::exact_int(grid.clone()).sub(&allowance);
        let ok = !CertifiedReal::exact_int(o.survivor_count).certainly_lt(&lower);
        sv.observe(o.survivor_count, ok);
    }
    Ok(FactReport { level: k, boxes: boxes.len() as u64, class_size: class, checks: vec![f1, f2, f3, g3, c2, c3, sv] })
}

/// Children of one box that a single `Δ(m,p)` can meet, from the slab
/// geometry: along each line of children parallel to `x_l` the strip covers
/// an `x_l`-interval of `w_l = (Σ_(i≠l)|m_i|σ_i + 2ε)/(|m_l|σ_l)` cell widths,
/// where `σ_i` is the child side.
pub fn geometric_dual_bound(m: &[i64], cells: &[u64], child_level: u32, eps: &BigRational) -> BigInt {
    let n = cells.len();
    let side: Vec<BigRational> =
        (0..n).map(|i| BigRational::new(BigInt::one(), pow_int(&BigInt::from(cells[i]), child_level))).collect();
    let abs = |i: usize| BigRational::from_integer(BigInt::from(m[i]).abs());
    (0..n)
        .filter(|&l| m[l] != 0)
        .map(|l| {
            let spread: BigRational = (0..n).filter(|&i| i != l).map(|i| abs(i) * &side[i]).sum();
            let w: BigRational = (spread + eps * BigInt::from(2)) / (abs(l) * &side[l]);
            let lines: BigInt = (0..n).filter(|&i| i != l).map(|i| BigInt::from(cells[i])).product();
            lines * (w.floor().to_integer() + BigInt::from(2)).min(BigInt::from(cells[l]))
        })
        .min()
        .unwrap_or_else(|| BigInt::from(cells.iter().product::<u64>()))
}

// ---------------------------------------------------------------------------
// sampling and export

#[derive(Debug, Clone)]
pub enum Selector {
    /// Uniform descent with backtracking, from `(seed, stream)`.
    Random { seed: u64, stream: u64 },
    /// Indices into each box's selected children.
    Path(Vec<usize>),
}

/// A selected box at `depth` reached by following the selector.
pub fn sample_box(tree: &CantorTree, selector: &Selector, depth: u32) -> Result<Hyperrectangle> {
    if depth > tree.depth() {
        return Err(Error::InvalidInput(format!("depth {depth} exceeds tree depth {}", tree.depth())));
    }
    match selector {
        Selector::Path(path) => {
            if path.len() < depth as usize {
                return Err(Error::InvalidInput(format!("path has {} steps, depth is {depth}", path.len())));
            }
            let mut h = tree.root();
            for (lvl, &c) in path.iter().take(depth as usize).enumerate() {
                let set = tree.children(&h)?;
                h = set
                    .selected()
                    .get(c)
                    .cloned()
                    .ok_or_else(|| Error::NotInTree(format!("child {c} out of range at level {lvl}")))?;
            }
            Ok(h)
        }
        Selector::Random { seed, stream } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(*stream);
            descend(tree, &tree.root(), depth, &mut rng)?
                .ok_or_else(|| Error::NotInTree(format!("no surviving box at depth {depth}")))
        }
    }
}

fn descend(tree: &CantorTree, h: &Hyperrectangle, depth: u32, rng: &mut ChaCha8Rng) -> Result<Option<Hyperrectangle>> {
    if h.level == depth {
        return Ok(Some(h.clone()));
    }
    let set = tree.children(h)?;
    let mut order: Vec<usize> = (0..set.selected_len).collect();
    order.shuffle(rng);
    for i in order {
        if let Some(b) = descend(tree, &set.selected()[i], depth, rng)? {
            return Ok(Some(b));
        }
    }
    Ok(None)
}

/// Centre of the box [`sample_box`] selects.
pub fn sample_point(tree: &CantorTree, selector: &Selector, depth: u32) -> Result<Vec<BigRational>> {
    Ok(sample_box(tree, selector, depth)?.center())
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxRecord {
    pub level: u32,
    pub lower_corner: Vec<String>,
    /// Surviving children, when the box was expanded.
    pub survivor_count: Option<u64>,
    pub selected: bool,
}

/// One record per survivor of every expanded box of `levels[0..last]`,
/// plus the root, in level then lexicographic order.
pub fn export_records(tree: &CantorTree, m: &Materialized) -> Result<Vec<BoxRecord>> {
    let rec = |h: &Hyperrectangle, selected: bool| -> Result<BoxRecord> {
        let survivor_count = if h.level < tree.depth() && (h.level as usize) + 1 < m.levels.len() && selected {
            Some(tree.children(h)?.survivor_count() as u64)
        } else {
            None
        };
        Ok(BoxRecord {
            level: h.level,
            lower_corner: h.lower_corner().iter().map(|x| x.to_string()).collect(),
            survivor_count,
            selected,
        })
    };
    let mut out = vec![rec(&tree.root(), true)?];
    for k in 0..m.levels.len().saturating_sub(1) {
        for h in &m.levels[k] {
            let set = tree.children(h)?;
            for (i, c) in set.survivors.iter().enumerate() {
                out.push(rec(c, i < set.selected_len)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bestapprox::BestApproxSequence;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn big(v: u64) -> BigInt {
        BigInt::from(v)
    }

    fn theta2() -> TargetVector {
        "quad:(-1+1*sqrt(2))/1,quad:(-1+1*sqrt(3))/1".parse().unwrap()
    }

    #[test]
    fn target_count_examples() {
        let j = WeightVector::uniform(2);
        assert_eq!(target_count(&(big(1) << 26), &j).unwrap(), big(3_325_952));
        assert!(target_count(&big(16), &j).unwrap().is_negative());
        assert!(target_count(&big(512), &WeightVector::uniform(1)).unwrap().is_negative());
        assert_eq!(strict_branching(&big(512), &WeightVector::uniform(1)).unwrap(), big(268));
        assert_eq!(strict_branching(&big(256), &WeightVector::uniform(1)).unwrap(), big(36));
    }

    #[test]
    fn minimal_r_values() {
        assert_eq!(minimal_strict_r(&WeightVector::uniform(1)).unwrap(), big(512));
        let j = WeightVector::uniform(2);
        assert_eq!(minimal_strict_r(&j).unwrap(), big(1) << 29);
        assert_eq!(minimal_feasible_r(&j).unwrap(), Some(big(1) << 26));
        let v = strict_condition_value(&(big(1) << 28), &j, 64).to_f64();
        assert!((v - 0.510).abs() < 1e-3, "{v}");
        let v = strict_condition_value(&big(512), &WeightVector::uniform(1), 64).to_f64();
        assert!((v - 245.0 / 512.0).abs() < 1e-12);
        for a in 29..34 {
            assert!(strict_conditions_hold(&(big(1) << a), &j).unwrap());
        }
    }

    #[test]
    fn denominator_ranges() {
        let j = WeightVector::uniform(2);
        let r = big(16);
        assert_eq!(coordinate_denominator_range(&r, &j, 2, 0), Some((big(2), big(3))));
        assert_eq!(coordinate_denominator_range(&r, &j, 1, 1), Some((big(1), big(1))));
        assert_eq!(coordinate_denominator_range(&r, &j, 0, 0), None);
        // 512^(1/2) is irrational: q < 22.6 means q ≤ 22
        assert_eq!(coordinate_denominator_range(&big(512), &WeightVector::uniform(1), 1, 0), Some((big(1), big(22))));
    }

    #[test]
    fn partition_examples() {
        let j = WeightVector::uniform(1);
        let entries = [1i64, 3, 20]
            .iter()
            .enumerate()
            .map(|(i, &m)| BestApproximation {
                index: i + 1,
                m: vec![m],
                height_power: m as u128,
                height: CertifiedReal::exact_int(m),
                residual: CertifiedReal::zero(),
            })
            .collect();
        let seq = BestApproxSequence::fabricated("rational:1/7".parse().unwrap(), j.clone(), entries, q(100, 1));
        let parts = partition_best_approx(&seq, &big(16), 3);
        assert!(parts[0].is_empty());
        assert_eq!(parts[1].iter().map(|e| e.m[0]).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(parts[2].iter().map(|e| e.m[0]).collect::<Vec<_>>(), vec![20]);
        assert!(parts[3].is_empty());
    }

    #[test]
    fn subdivision_counts() {
        let h = Hyperrectangle::root(&[4, 4]);
        let c = subdivide(&h);
        assert_eq!(c.len(), 16);
        assert_eq!(c[0].sides(), vec![q(1, 4), q(1, 4)]);
        assert_eq!(c[1].lower_corner(), vec![q(0, 1), q(1, 4)]);
        assert!(c.iter().all(|x| h.contains(x) && x.parent().as_ref() == Some(&h)));
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subdivide(&Hyperrectangle::root(&[9, 3])).len(), 27);
        assert_eq!(subdivide(&Hyperrectangle::root(&[2, 2, 2])).len(), 8);
        for (t, x) in c.iter().enumerate() {
            assert_eq!(x.local_index(), t as u64);
        }
    }

    #[test]
    fn thickening_examples() {
        let unit = vec![(q(0, 1), q(1, 1)), (q(0, 1), q(1, 1))];
        assert!(dual_thickening_hits(&unit, &[1, 0], &q(1, 10)));
        let b = vec![(q(3, 10), q(4, 10)), (q(0, 1), q(1, 10))];
        assert!(!dual_thickening_hits(&b, &[1, 0], &q(1, 10)));
        assert!(dual_thickening_hits(&b, &[3, -2], &q(1, 100)));
        assert!(coord_thickening_hits(&(q(0, 1), q(1, 4)), &big(2), &q(1, 100)));
        assert!(!coord_thickening_hits(&(q(30, 100), q(35, 100)), &big(1), &q(1, 100)));
        assert!(coord_thickening_hits(&(q(49, 100), q(51, 100)), &big(2), &q(1, 100)));
        // boundary contact with an open thickening does not count
        assert!(!dual_thickening_hits(&[(q(1, 10), q(1, 2))], &[1], &q(1, 10)));
    }

    #[test]
    fn fraction_search_finds_all() {
        let lo = q(1, 3);
        let hi = q(1, 2);
        let got = fractions_between(&lo, &hi, &big(7));
        let mut want = Vec::new();
        for d in 1..=7i64 {
            for n in 0..=d {
                let f = q(n, d);
                if f > lo && f < hi && !want.contains(&f) {
                    want.push(f);
                }
            }
        }
        want.sort();
        assert_eq!(got, want);
        assert_eq!(simplest_between(&q(-1, 10), &q(1, 10)), q(0, 1));
        assert_eq!(simplest_between(&q(0, 1), &q(1, 3)), q(1, 4));
    }

    fn params(r: u64, eps: BigRational, mode: Mode) -> CantorParams {
        CantorParams::new(WeightVector::uniform(2), r, eps, theta2(), mode, 7).unwrap()
    }

    /// Direct per-child check with exact rationals.
    fn brute_filter(h: &Hyperrectangle, data: &LevelData, eps: &BigRational) -> Vec<bool> {
        subdivide(h)
            .iter()
            .map(|c| {
                let ranges = c.ranges();
                let dual_ok = data.dual.iter().all(|m| !dual_thickening_hits(&ranges, m, eps));
                let coord_ok = (0..h.n()).all(|i| match &data.q_ranges[i] {
                    None => true,
                    Some((a, b)) => {
                        let mut qq = a.clone();
                        while qq <= *b {
                            if coord_thickening_hits(&ranges[i], &qq, eps) {
                                return false;
                            }
                            qq += 1;
                        }
                        true
                    }
                });
                dual_ok && coord_ok
            })
            .collect()
    }

    #[test]
    fn row_filter_matches_brute_force() {
        let p = params(64, q(1, 256), Mode::Exploratory);
        let tree = build_tree(p.clone(), 4, &EnumerationOptions::default()).unwrap();
        let mat = tree.materialize(3, 20_000).unwrap();
        let mut compared = 0;
        for (k, level) in mat.levels.iter().enumerate().take(3) {
            let k = k as u32;
            for h in level.iter().take(20) {
                let out = tree.filter(h).unwrap();
                let brute = brute_filter(h, tree.level_data(k).unwrap(), &p.epsilon);
                for (t, &ok) in brute.iter().enumerate() {
                    assert_eq!(out.is_survivor(t as u64), ok, "level {k} child {t}");
                }
                let kids = subdivide(h);
                for d in &out.dual {
                    for (th, count) in &d.thickenings {
                        let direct = kids
                            .iter()
                            .filter(|c| {
                                let shifted: Vec<(BigRational, BigRational)> = c.ranges();
                                let mut a = BigRational::from_integer(th.p.clone());
                                let mut b = a.clone();
                                for (i, (lo, hi)) in shifted.iter().enumerate() {
                                    let mi = BigRational::from_integer(BigInt::from(th.m[i]));
                                    let (x, y) = (&mi * lo, &mi * hi);
                                    a += x.clone().min(y.clone());
                                    b += x.max(y);
                                }
                                a < p.epsilon && b > -p.epsilon.clone()
                            })
                            .count() as u64;
                        assert_eq!(*count, direct);
                    }
                }
                compared += 1;
            }
        }
        assert!(compared > 20);
    }

    #[test]
    fn big_integer_kernel_agrees_with_i128() {
        let p = params(16, q(1, 64), Mode::Exploratory);
        let tree = build_tree(p.clone(), 5, &EnumerationOptions::default()).unwrap();
        let h = sample_box(&tree, &Selector::Random { seed: 1, stream: 0 }, 4).unwrap();
        let data = tree.level_data(4).unwrap();
        let fast = filter_children(&h, data, &p.epsilon).unwrap();
        let slow = filter_impl(&h, data, &p.epsilon, true).unwrap();
        let brute = brute_filter(&h, data, &p.epsilon);
        for (t, &ok) in brute.iter().enumerate() {
            assert_eq!(fast.is_survivor(t as u64), ok);
            assert_eq!(slow.is_survivor(t as u64), ok);
        }
        for (a, b) in fast.dual.iter().zip(&slow.dual) {
            assert_eq!(a.thickenings, b.thickenings);
        }
    }

    #[test]
    fn depth_zero_tree_and_center() {
        let p = params(16, q(1, 64), Mode::Exploratory);
        let tree = build_tree(p, 0, &EnumerationOptions::default()).unwrap();
        let pt = sample_point(&tree, &Selector::Random { seed: 3, stream: 0 }, 0).unwrap();
        assert_eq!(pt, vec![q(1, 2), q(1, 2)]);
        let m = tree.materialize(0, 10).unwrap();
        assert_eq!(m.levels.len(), 1);
    }

    #[test]
    fn first_level_keeps_everything() {
        let p = params(16, q(1, 64), Mode::Exploratory);
        let tree = build_tree(p, 3, &EnumerationOptions::default()).unwrap();
        let set = tree.children(&tree.root()).unwrap();
        assert_eq!(set.survivor_count(), 16);
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = params(16, q(1, 64), Mode::Exploratory);
        let tree = build_tree(p, 5, &EnumerationOptions::default()).unwrap();
        let a = sample_point(&tree, &Selector::Random { seed: 11, stream: 2 }, 5).unwrap();
        let b = sample_point(&tree, &Selector::Random { seed: 11, stream: 2 }, 5).unwrap();
        assert_eq!(a, b);
        assert!(sample_box(&tree, &Selector::Path(vec![99, 0, 0]), 3).is_err());
    }

    #[test]
    fn strict_n1_branching() {
        let p = CantorParams::new(
            WeightVector::uniform(1),
            512,
            q(1, 1 << 20),
            "quad:(-1+1*sqrt(5))/2".parse().unwrap(),
            Mode::Strict,
            1,
        )
        .unwrap();
        let tree = build_tree(p, 2, &EnumerationOptions::default()).unwrap();
        let m = tree.materialize(2, 1 << 20).unwrap();
        assert!(m.complete);
        assert_eq!(m.levels[1].len(), 268);
        assert_eq!(m.levels[2].len(), 268 * 268);
        assert!(m.levels[2].iter().all(|h| m.levels[1].iter().any(|p| p.contains(h))));
    }

    #[test]
    fn strict_rejected_below_threshold() {
        let e = CantorParams::new(
            WeightVector::uniform(1),
            256,
            q(1, 1 << 20),
            "quad:(-1+1*sqrt(5))/2".parse().unwrap(),
            Mode::Strict,
            1,
        );
        assert!(matches!(e, Err(Error::InvalidParams(_))));
        let e = CantorParams::new(WeightVector::uniform(2), 16, q(1, 32), theta2(), Mode::Exploratory, 1);
        assert!(matches!(e, Err(Error::InvalidParams(_))));
        let e = CantorParams::new(WeightVector::uniform(2), 8, q(1, 1000), theta2(), Mode::Exploratory, 1);
        assert!(matches!(e, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn fact_counts_small_tree() {
        let p = params(16, q(1, 64), Mode::Exploratory);
        let tree = build_tree(p, 5, &EnumerationOptions::default()).unwrap();
        let m = tree.materialize(4, 100_000).unwrap();
        for k in 0..m.levels.len() as u32 {
            let rep = verify_fact_counts(&tree, k, &m.levels[k as usize]).unwrap();
            for c in &rep.checks {
                // the literal per-thickening bound can fail where a hyperplane
                // runs through grid vertices; the geometric bound cannot
                if c.name != "dual_children_per_thickening" {
                    assert_eq!(c.violations, 0, "{c:?}");
                }
            }
        }
    }

    #[test]
    fn diagonal_thickening_meets_ten_children() {
        // x1 + x2 = 1 through the level-1 box [0,1/4]×[3/4,1] of the R = 16 grid
        let h = Hyperrectangle::at(1, vec![big(0), big(3)], &[4, 4]).unwrap();
        let data = LevelData { k: 1, dual: vec![vec![1, 1]], q_ranges: vec![None, None] };
        let out = filter_children(&h, &data, &q(1, 64)).unwrap();
        let hit = out.dual[0].thickenings.iter().find(|(t, _)| t.p == BigInt::from(-1)).unwrap();
        assert_eq!(hit.1, 10);
        assert!(big(10) <= geometric_dual_bound(&[1, 1], &[4, 4], 2, &q(1, 64)));
    }

    #[test]
    fn param_file_round_trip() {
        let p = params(16, q(1, 64), Mode::Exploratory);
        let text = p.to_param_file(6);
        let (p2, d) = CantorParams::from_param_file(&text).unwrap();
        assert_eq!(d, 6);
        assert_eq!(p2.to_param_file(6), text);
    }
}
