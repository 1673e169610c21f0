//! The probability measure on K(R), cube coverings, λ(R) and the mass
//! distribution check.

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::interval::{rational_to_f64, CertifiedReal};
use crate::arith::weights::{exact_rational_power, rational_power, WeightVector};
use crate::cantor::{sample_box, strict_conditions_hold, CantorTree, Hyperrectangle, Materialized, Mode, Selector};
use crate::error::{Error, Result};

const LAMBDA_BITS: u32 = 128;
/// Stream label separating cube sampling from other uses of the tree seed.
const CUBE_STREAM: u64 = 0x6d75_0000_0000_0000;
/// Cube sides and offsets are drawn on a grid of this many steps.
const DYADIC_BITS: u32 = 20;

/// Weights `μ(H)` of the selected boxes of a tree: the root has mass 1 and
/// each box splits its mass evenly among its live children, the selected
/// children with a selected descendant at the tree depth. Every selected box
/// of a STRICT tree is live.
#[derive(Debug)]
pub struct MeasureWeights<'a> {
    pub tree: &'a CantorTree,
    /// `#𝓕(H)` for STRICT trees.
    pub branching: Option<u64>,
    alive: Mutex<HashMap<Hyperrectangle, bool>>,
}

/// Covering sum of one cube at a single level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeMass {
    pub level: u32,
    /// `Σ μ(H_k)` over selected level-k boxes meeting the closed cube.
    pub mass: BigRational,
    pub intersections: u64,
}

/// An axis-parallel closed cube `corner + [0, side]^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cube {
    pub corner: Vec<BigRational>,
    pub side: BigRational,
}

impl Cube {
    fn meets(&self, h: &Hyperrectangle) -> bool {
        h.ranges().iter().zip(&self.corner).all(|((lo, hi), c)| *lo <= c + &self.side && *c <= *hi)
    }
}

impl<'a> MeasureWeights<'a> {
    pub fn new(tree: &'a CantorTree) -> Self {
        MeasureWeights { tree, branching: tree.branching(), alive: Mutex::new(HashMap::new()) }
    }

    /// Whether `h` has a selected descendant at the tree depth.
    pub fn is_alive(&self, h: &Hyperrectangle) -> Result<bool> {
        if h.level >= self.tree.depth() || self.branching.is_some() {
            return Ok(true);
        }
        if let Some(&a) = self.alive.lock().expect("alive lock").get(h) {
            return Ok(a);
        }
        let set = self.tree.children(h)?;
        let mut a = false;
        for c in set.selected() {
            if self.is_alive(c)? {
                a = true;
                break;
            }
        }
        self.alive.lock().expect("alive lock").insert(h.clone(), a);
        Ok(a)
    }

    /// Live children of `h`, in lexicographic order.
    pub fn live_children(&self, h: &Hyperrectangle) -> Result<Vec<Hyperrectangle>> {
        let set = self.tree.children(h)?;
        if self.branching.is_some() {
            return Ok(set.selected().to_vec());
        }
        let mut out = Vec::with_capacity(set.selected_len);
        for c in set.selected() {
            if self.is_alive(c)? {
                out.push(c.clone());
            }
        }
        Ok(out)
    }

    fn check_root(&self) -> Result<()> {
        if self.is_alive(&self.tree.root())? {
            Ok(())
        } else {
            Err(Error::ConstructionViolation(format!("no box survives to depth {}", self.tree.depth())))
        }
    }

    /// `μ(H)`; zero for a selected box without live descendants.
    pub fn mu_of_box(&self, h: &Hyperrectangle) -> Result<BigRational> {
        self.check_root()?;
        let mut chain = vec![h.clone()];
        while let Some(p) = chain.last().unwrap().parent() {
            chain.push(p);
        }
        chain.reverse();
        let mut mu = BigRational::one();
        for w in chain.windows(2) {
            let set = self.tree.children(&w[0])?;
            if !set.selected().contains(&w[1]) {
                return Err(Error::NotInTree(format!(
                    "level {} box with index {:?} is not selected",
                    w[1].level,
                    w[1].index.iter().map(|x| x.to_string()).collect::<Vec<_>>()
                )));
            }
            if !self.is_alive(&w[1])? {
                return Ok(BigRational::zero());
            }
            mu /= BigInt::from(self.live_children(&w[0])?.len());
        }
        Ok(mu)
    }

    /// `Σ_{H ∈ 𝓕_k} μ(H)` for every level of a materialization.
    pub fn level_masses(&self, m: &Materialized) -> Result<Vec<BigRational>> {
        self.check_root()?;
        let mut masses = vec![BigRational::one()];
        let mut cur: HashMap<Hyperrectangle, BigRational> = HashMap::from([(self.tree.root(), BigRational::one())]);
        for k in 0..m.levels.len().saturating_sub(1) {
            let mut next = HashMap::new();
            for h in &m.levels[k] {
                let Some(mu) = cur.get(h) else { continue };
                let live = self.live_children(h)?;
                if !live.is_empty() {
                    let share = mu / BigInt::from(live.len());
                    next.extend(live.into_iter().map(|c| (c, share.clone())));
                }
            }
            let total = m.levels[k + 1].iter().filter_map(|h| next.get(h)).fold(BigRational::zero(), |a, b| a + b);
            masses.push(total);
            cur = next;
        }
        Ok(masses)
    }

    /// Covering sum of `S` by the selected boxes of level `k`.
    pub fn mu_of_cube_at_level(&self, s: &Cube, k: u32) -> Result<CubeMass> {
        if k > self.tree.depth() {
            return Err(Error::InvalidInput(format!("level {k} exceeds tree depth {}", self.tree.depth())));
        }
        if s.corner.len() != self.tree.params().n {
            return Err(Error::InvalidInput("cube dimension differs from the tree's".into()));
        }
        let mut out = CubeMass { level: k, mass: BigRational::zero(), intersections: 0 };
        self.check_root()?;
        let root = self.tree.root();
        if s.meets(&root) {
            self.cover(&root, BigRational::one(), s, k, &mut out)?;
        }
        Ok(out)
    }

    fn cover(&self, h: &Hyperrectangle, mu: BigRational, s: &Cube, k: u32, out: &mut CubeMass) -> Result<()> {
        if h.level == k {
            out.mass += mu;
            out.intersections += 1;
            return Ok(());
        }
        let live = self.live_children(h)?;
        if live.is_empty() {
            return Ok(());
        }
        let share = mu / BigInt::from(live.len());
        for c in live.iter().filter(|c| s.meets(c)) {
            self.cover(c, share.clone(), s, k, out)?;
        }
        Ok(())
    }

    /// Covering sum at the level `k` with `R^(−(k+1)j_min) < l < R^(−k j_min)`.
    pub fn mu_of_cube(&self, s: &Cube) -> Result<CubeMass> {
        let base = min_cell(self.tree);
        let k = bracket_level(&s.side, base)
            .ok_or_else(|| Error::InvalidInput(format!("side {} lies on a bracket endpoint", s.side)))?;
        if k > self.tree.depth() {
            return Err(Error::InvalidInput(format!(
                "side {} needs level {k}, beyond tree depth {}",
                s.side,
                self.tree.depth()
            )));
        }
        self.mu_of_cube_at_level(s, k)
    }
}

fn min_cell(tree: &CantorTree) -> u64 {
    *tree.params().cells().iter().min().expect("n ≥ 1")
}

/// The `k ≥ 0` with `base^(−(k+1)) < l < base^(−k)`, if `l` is strictly inside one.
pub fn bracket_level(l: &BigRational, base: u64) -> Option<u32> {
    if !l.is_positive() || *l >= BigRational::one() || base < 2 {
        return None;
    }
    let b = BigInt::from(base);
    let mut upper = BigRational::one();
    for k in 0u32.. {
        let lower = &upper / &b;
        if *l > lower {
            return (*l < upper).then_some(k);
        }
        if *l == lower {
            return None;
        }
        upper = lower;
    }
    unreachable!()
}

/// `(1 + ln 2)/(j_min ln R)`.
pub fn lambda_of(r: &BigInt, j: &WeightVector) -> Result<CertifiedReal> {
    lambda_at(r, j, LAMBDA_BITS)
}

fn ln_int(v: &BigInt, bits: u32) -> Result<CertifiedReal> {
    CertifiedReal::exact_int(v.clone()).rescale(bits).ln()
}

fn lambda_at(r: &BigInt, j: &WeightVector, bits: u32) -> Result<CertifiedReal> {
    if *r < BigInt::from(2) {
        return Err(Error::InvalidParams("R must be at least 2".into()));
    }
    let num = ln_int(&BigInt::from(2), bits)?.add(&CertifiedReal::one());
    let den = ln_int(r, bits)?.mul(&CertifiedReal::from_rational(&j.j_min(), bits));
    num.div(&den)
}

/// `n − λ(R)`, refused where the STRICT conditions fail.
pub fn dimension_lower_bound(r: &BigInt, j: &WeightVector) -> Result<CertifiedReal> {
    if !strict_conditions_hold(r, j)? {
        return Err(Error::InvalidParams(format!(
            "R = {r} does not meet the conditions under which the bound is proved"
        )));
    }
    Ok(CertifiedReal::exact_int(j.n() as u64).sub(&lambda_of(r, j)?))
}

/// Constants fixing the levels and cube sizes of the dimension argument.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionCheckParams {
    #[serde(serialize_with = "ser_display")]
    pub r: BigInt,
    #[serde(skip)]
    pub j: WeightVector,
    pub n: usize,
    /// Beyond `k0` a level-k box is longer than `R^(−(k+1)j_min)` in no
    /// coordinate with `j_i > j_min`.
    pub k0: u32,
    /// First level the check covers, `max(k0 + 1, ⌈ln R⌉)`.
    pub k_min: u32,
    /// `R^(−k_min j_min)`; cubes have side below it.
    #[serde(serialize_with = "ser_real")]
    pub l0: CertifiedReal,
    #[serde(serialize_with = "ser_real")]
    pub lambda: CertifiedReal,
}

fn ser_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn ser_real<S: serde::Serializer>(v: &CertifiedReal, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_decimal(20))
}

impl DimensionCheckParams {
    pub fn new(r: &BigInt, j: &WeightVector) -> Result<Self> {
        let jmin = j.j_min();
        let gap = j.weights().iter().filter(|w| **w != jmin).map(|w| w - &jmin).min();
        let k0 = match gap {
            Some(g) => (&jmin / g).floor().to_integer().to_u32().expect("small k0") + 1,
            None => 1,
        };
        let ln_r = ln_int(r, LAMBDA_BITS)?;
        let ceil_ln = ln_r
            .floor()
            .map(|f: BigInt| f + BigInt::one())
            .ok_or_else(|| Error::PrecisionExhausted { bits: LAMBDA_BITS, context: "⌈ln R⌉".into() })?
            .to_u32()
            .expect("small ln R");
        let k_min = (k0 + 1).max(ceil_ln);
        let exponent = &jmin * BigInt::from(k_min);
        let l0 = match exact_rational_power(r, &exponent) {
            Some(p) => CertifiedReal::from_rational(&BigRational::new(BigInt::one(), p), LAMBDA_BITS),
            None => CertifiedReal::one().rescale(LAMBDA_BITS).div(&rational_power(r, &exponent, LAMBDA_BITS))?,
        };
        Ok(DimensionCheckParams { r: r.clone(), j: j.clone(), n: j.n(), k0, k_min, l0, lambda: lambda_of(r, j)? })
    }

    pub fn for_tree(tree: &CantorTree) -> Result<Self> {
        Self::new(&tree.params().r_big(), &tree.params().j)
    }
}

/// Result of the mass distribution check.
#[derive(Debug, Clone, Serialize)]
pub struct MassReport {
    pub mode: String,
    /// False for EXPLORATORY trees, where the inequality is only reported.
    pub claimed: bool,
    pub levels: Vec<u32>,
    pub samples: u64,
    /// Smallest and largest sampled side.
    pub l_range: [String; 2],
    pub lambda: String,
    pub bound_constant: u64,
    /// Largest `μ(S)/l^(n−λ)`, rounded up.
    pub max_ratio: f64,
    pub violations: u64,
    pub inconclusive: u64,
    /// Cubes breaking `μ(S) ≤ 2^n l^n R^(t j_min) R^k/#𝓕_k`.
    pub intermediate_violations: u64,
    pub max_intersections: u64,
    /// Cubes meeting more boxes than `2^n ∏_(j_i≠j_min) l R^(k j_i)`.
    pub intersection_violations: u64,
    pub params: DimensionCheckParams,
    pub pass: bool,
}

/// One sampled cube and what the check found for it.
#[derive(Debug, Clone)]
pub struct CubeSample {
    pub cube: Cube,
    pub mass: CubeMass,
    pub ratio_upper: f64,
    pub verdict: Verdict,
    pub intermediate_ok: bool,
    pub intersections_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Undecided,
}

/// Decides `μ ≤ 2^n l^(n−λ)` through `ln μ − (n−λ) ln l ≤ n ln 2`.
pub fn mass_inequality(
    mu: &BigRational,
    l: &BigRational,
    n: usize,
    r: &BigInt,
    j: &WeightVector,
) -> Result<(Verdict, f64)> {
    if mu.is_zero() {
        return Ok((Verdict::Holds, 0.0));
    }
    let mut bits = LAMBDA_BITS;
    loop {
        let lambda = lambda_at(r, j, bits)?;
        let expo = CertifiedReal::exact_int(n as u64).sub(&lambda);
        let ln_mu = CertifiedReal::from_rational(mu, bits).ln()?;
        let ln_l = CertifiedReal::from_rational(l, bits).ln()?;
        let lhs = ln_mu.sub(&expo.mul(&ln_l));
        let rhs = ln_int(&BigInt::from(2), bits)?.mul_int(&BigInt::from(n as u64));
        let ratio = lhs.upper_f64().exp();
        if lhs.certainly_le(&rhs) {
            return Ok((Verdict::Holds, ratio));
        }
        if rhs.certainly_lt(&lhs) {
            return Ok((Verdict::Fails, ratio));
        }
        if bits >= 2048 {
            return Ok((Verdict::Undecided, ratio));
        }
        bits *= 2;
    }
}

/// Random cube of level `k`: side drawn from the open bracket, placed so that
/// it contains the centre of a randomly reached selected box.
pub fn sample_cube(tree: &CantorTree, k: u32, seed: u64, index: u64) -> Result<Cube> {
    let n = tree.params().n;
    let base = BigInt::from(min_cell(tree));
    let lower = BigRational::new(BigInt::one(), num_traits::pow(base.clone(), k as usize + 1));
    let steps = 1u64 << DYADIC_BITS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CUBE_STREAM | ((k as u64) << 32) | index);
    let a: u64 = rng.gen_range(1..steps);
    // l = lower·(1 + (base − 1)·a/steps), strictly between lower and base·lower
    let side = &lower * (BigRational::one() + BigRational::new((&base - 1) * BigInt::from(a), BigInt::from(steps)));
    let depth = (k + 1).min(tree.depth());
    let centre =
        sample_box(tree, &Selector::Random { seed, stream: CUBE_STREAM | ((k as u64) << 32) | index }, depth)?.center();
    let corner = centre
        .into_iter()
        .map(|c| {
            let b: u64 = rng.gen_range(0..=steps);
            c - &side * BigRational::new(BigInt::from(b), BigInt::from(steps))
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(corner.len(), n);
    Ok(Cube { corner, side })
}

fn pow_int(b: &BigInt, k: u32) -> BigInt {
    num_traits::pow(b.clone(), k as usize)
}

/// Checks one cube against the chain of inequalities.
pub fn check_cube(w: &MeasureWeights, params: &DimensionCheckParams, cube: Cube) -> Result<CubeSample> {
    let mass = w.mu_of_cube(&cube)?;
    let (verdict, ratio_upper) = mass_inequality(&mass.mass, &cube.side, params.n, &params.r, &params.j)?;
    let cells = w.tree.params().cells();
    let jmin = params.j.j_min();
    let t = params.j.weights().iter().filter(|x| **x == jmin).count();
    let k = mass.level;
    let mut count_bound = BigRational::from_integer(BigInt::one() << params.n);
    for (i, x) in params.j.weights().iter().enumerate() {
        if *x != jmin {
            count_bound *= &cube.side * pow_int(&BigInt::from(cells[i]), k);
        }
    }
    let intersections_ok = BigRational::from_integer(BigInt::from(mass.intersections)) <= count_bound;
    // μ(S) ≤ 2^n l^n R^(t j_min) R^k / #𝓕_k, for STRICT trees where #𝓕_k is uniform
    let intermediate_ok = match w.tree.strict_level_count(k) {
        Some(f) => {
            let s_min = BigInt::from(min_cell(w.tree));
            let rhs = BigRational::from_integer(BigInt::one() << params.n)
                * num_traits::pow(cube.side.clone(), params.n)
                * BigRational::new(pow_int(&s_min, t as u32) * pow_int(&params.r, k), f);
            mass.mass <= rhs
        }
        None => true,
    };
    Ok(CubeSample { cube, mass, ratio_upper, verdict, intermediate_ok, intersections_ok })
}

/// Samples `num_samples` cubes at every level from `k_min` to the tree depth
/// and checks `μ(S) ≤ 2^n l^(n−λ(R))` for each.
pub fn mass_distribution_check(
    w: &MeasureWeights,
    params: &DimensionCheckParams,
    num_samples: u64,
    seed: u64,
) -> Result<MassReport> {
    let depth = w.tree.depth();
    if depth < params.k_min {
        return Err(Error::InvalidParams(format!(
            "the check needs level {} but the tree has depth {depth}",
            params.k_min
        )));
    }
    let levels: Vec<u32> = (params.k_min..=depth).collect();
    let jobs: Vec<(u32, u64)> = levels.iter().flat_map(|&k| (0..num_samples).map(move |i| (k, i))).collect();
    let results: Vec<Result<CubeSample>> =
        jobs.par_iter().map(|&(k, i)| check_cube(w, params, sample_cube(w.tree, k, seed, i)?)).collect();
    let mut rep = MassReport {
        mode: w.tree.params().mode.to_string(),
        claimed: w.tree.params().mode == Mode::Strict,
        levels,
        samples: 0,
        l_range: [String::new(), String::new()],
        lambda: params.lambda.to_decimal(12),
        bound_constant: 1 << params.n,
        max_ratio: 0.0,
        violations: 0,
        inconclusive: 0,
        intermediate_violations: 0,
        max_intersections: 0,
        intersection_violations: 0,
        params: params.clone(),
        pass: false,
    };
    let mut l_min: Option<BigRational> = None;
    let mut l_max: Option<BigRational> = None;
    for s in results {
        let s = s?;
        rep.samples += 1;
        rep.max_ratio = rep.max_ratio.max(s.ratio_upper);
        match s.verdict {
            Verdict::Holds => {}
            Verdict::Fails => rep.violations += 1,
            Verdict::Undecided => rep.inconclusive += 1,
        }
        rep.intermediate_violations += u64::from(!s.intermediate_ok);
        rep.intersection_violations += u64::from(!s.intersections_ok);
        rep.max_intersections = rep.max_intersections.max(s.mass.intersections);
        let l = s.cube.side;
        if l_min.as_ref().is_none_or(|m| l < *m) {
            l_min = Some(l.clone());
        }
        if l_max.as_ref().is_none_or(|m| l > *m) {
            l_max = Some(l);
        }
    }
    let fmt = |x: Option<BigRational>| x.map(|v| format!("{:.6e}", rational_to_f64(&v))).unwrap_or_default();
    rep.l_range = [fmt(l_min), fmt(l_max)];
    rep.pass = rep.violations == 0 && rep.inconclusive == 0 && rep.intermediate_violations == 0;
    Ok(rep)
}

/// Least-squares exponent of `μ(S)` against `l`.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    pub depths: Vec<u32>,
    /// `(ln l, mean ln μ(S))` per depth.
    pub points: Vec<(f64, f64)>,
    pub exponent: f64,
    /// Standard error of the slope; zero with two points.
    pub std_error: f64,
    /// Root mean square residual of the fit.
    pub residual: f64,
    /// `n − λ(R)`.
    pub reference: f64,
    pub samples_per_depth: u64,
}

/// Slope, standard error and RMS residual of the least-squares line.
pub fn fit_line(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("a fit needs at least two depths".into()));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all cube sides are equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    let se = if points.len() > 2 { (sse / (m - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok((slope, se, (sse / m).sqrt()))
}

/// Fits `ln μ(S) ≈ s ln l + c` over cubes with `l = R^(−k j_min)/2` at each
/// listed depth `k`, each containing the centre of a random selected box.
pub fn empirical_dimension(w: &MeasureWeights, depths: &[u32], samples: u64, seed: u64) -> Result<DimensionEstimate> {
    if depths.len() < 2 {
        return Err(Error::InvalidInput("a fit needs at least two depths".into()));
    }
    let base = BigInt::from(min_cell(w.tree));
    let mut points = Vec::with_capacity(depths.len());
    for &k in depths {
        if k > w.tree.depth() {
            return Err(Error::InvalidInput(format!("depth {k} exceeds tree depth {}", w.tree.depth())));
        }
        let side = BigRational::new(BigInt::one(), pow_int(&base, k) * 2);
        let logs: Vec<Result<f64>> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let at = (k + 1).min(w.tree.depth());
                let stream = CUBE_STREAM | (1 << 47) | ((k as u64) << 32) | i;
                let centre = sample_box(w.tree, &Selector::Random { seed, stream }, at)?.center();
                let half = &side / BigInt::from(2);
                let cube = Cube { corner: centre.into_iter().map(|c| c - &half).collect(), side: side.clone() };
                let mass = w.mu_of_cube_at_level(&cube, k)?.mass;
                Ok(ln_rational_f64(&mass))
            })
            .collect();
        let logs = logs.into_iter().collect::<Result<Vec<f64>>>()?;
        let mean = logs.iter().sum::<f64>() / logs.len().max(1) as f64;
        points.push((ln_rational_f64(&side), mean));
    }
    let (exponent, std_error, residual) = fit_line(&points)?;
    let params = w.tree.params();
    let reference = params.n as f64 - lambda_of(&params.r_big(), &params.j)?.to_f64();
    Ok(DimensionEstimate {
        depths: depths.to_vec(),
        points,
        exponent,
        std_error,
        residual,
        reference,
        samples_per_depth: samples,
    })
}

fn ln_rational_f64(x: &BigRational) -> f64 {
    let shift = x.numer().bits() as i64 - x.denom().bits() as i64;
    let scaled = if shift >= 0 {
        x / BigRational::from_integer(BigInt::one() << shift as u32)
    } else {
        x * BigRational::from_integer(BigInt::one() << (-shift) as u32)
    };
    rational_to_f64(&scaled).ln() + shift as f64 * std::f64::consts::LN_2
}
