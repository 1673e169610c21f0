//! Best approximations checked against a brute-force reading of the definition.

use num_bigint::BigInt;
use num_rational::BigRational;
use twistedbad_core::arith::{TargetVector, WeightVector};
use twistedbad_core::bestapprox::{
    enumerate_best_approximations, verify_lacunarity, verify_minkowski, EnumerationOptions,
};

/// `θ` as `f64` from `(a + b√d)/c` triples.
fn theta_f64(parts: &[(i64, i64, i64, i64)]) -> Vec<f64> {
    parts.iter().map(|&(a, b, d, c)| (a as f64 + b as f64 * (d as f64).sqrt()) / c as f64).collect()
}

fn theta_src(parts: &[(i64, i64, i64, i64)]) -> TargetVector {
    parts
        .iter()
        .map(|(a, b, d, c)| format!("quad:({a}+{b}*sqrt({d}))/{c}"))
        .collect::<Vec<_>>()
        .join(",")
        .parse()
        .unwrap()
}

fn dist(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Best approximations up to `M^b ≤ bound_pow`, where `M^b = max |v_i|^(a_i)`
/// encodes the weights `j_i = b/a_i`.
fn brute_force(theta: &[f64], a: &[u32], bound_pow: u128) -> Vec<Vec<i64>> {
    let n = theta.len();
    let lim: Vec<i64> =
        a.iter().map(|&e| (0i64..).take_while(|&x| (x as u128).pow(e) <= bound_pow).last().unwrap()).collect();
    let mut cands: Vec<(u128, f64, Vec<i64>)> = Vec::new();
    let mut v = vec![0i64; n];
    fn rec(i: usize, v: &mut Vec<i64>, lim: &[i64], out: &mut Vec<Vec<i64>>) {
        if i == v.len() {
            out.push(v.clone());
            return;
        }
        for x in -lim[i]..=lim[i] {
            v[i] = x;
            rec(i + 1, v, lim, out);
        }
    }
    let mut all = Vec::new();
    rec(0, &mut v, &lim, &mut all);
    for v in all {
        let Some(&first) = v.iter().find(|&&x| x != 0) else { continue };
        if first < 0 {
            continue;
        }
        let h = v.iter().zip(a).map(|(&x, &e)| (x.unsigned_abs() as u128).pow(e)).max().unwrap();
        let r = dist(v.iter().zip(theta).map(|(&x, t)| x as f64 * t).sum());
        cands.push((h, r, v));
    }
    cands.sort_by_key(|x| x.0);
    let mut out = Vec::new();
    let mut best_before = f64::INFINITY;
    let mut i = 0;
    while i < cands.len() {
        let mut e = i;
        while e < cands.len() && cands[e].0 == cands[i].0 {
            e += 1;
        }
        let shell = &cands[i..e];
        for (k, c) in shell.iter().enumerate() {
            let others =
                shell.iter().enumerate().filter(|(l, _)| *l != k).map(|(_, d)| d.1).fold(f64::INFINITY, f64::min);
            if c.1 < best_before && c.1 < others {
                out.push(c.2.clone());
            }
        }
        best_before = shell.iter().map(|c| c.1).fold(best_before, f64::min);
        i = e;
    }
    out
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn check(parts: &[(i64, i64, i64, i64)], weights: Vec<BigRational>, a: &[u32], bound: BigRational, bound_pow: u128) {
    let j = WeightVector::new(weights).unwrap();
    let seq = enumerate_best_approximations(&theta_src(parts), &j, &bound, &EnumerationOptions::default()).unwrap();
    let got: Vec<Vec<i64>> = seq.entries.iter().map(|e| e.m.clone()).collect();
    let want = brute_force(&theta_f64(parts), a, bound_pow);
    assert_eq!(got, want, "θ = {parts:?}");
    assert!(verify_minkowski(&seq, 512).all_pass());
    assert!(verify_lacunarity(&seq, j.n()).all_pass());
    for (x, y) in got.iter().zip(got.iter().skip(1)) {
        assert_ne!(x.iter().map(|v| -v).collect::<Vec<_>>(), *y);
    }
}

#[test]
fn one_dimensional_matches_definition() {
    for parts in [[(0, 1, 2, 1)], [(1, 1, 5, 2)], [(-2, 1, 7, 1)], [(3, 2, 11, 7)]] {
        check(&parts, vec![q(1, 1)], &[1], q(5000, 1), 5000);
    }
}

#[test]
fn equal_weights_match_definition() {
    // j = (1/2, 1/2): M^1 = max |v_i|^2
    for parts in [[(0, 1, 2, 1), (0, 1, 3, 1)], [(1, 1, 5, 3), (-1, 1, 7, 2)], [(2, 3, 13, 5), (0, 1, 6, 4)]] {
        check(&parts, vec![q(1, 2), q(1, 2)], &[2, 2], q(6400, 1), 6400);
    }
}

#[test]
fn unequal_weights_match_definition() {
    // j = (1/3, 2/3): M^2 = max(|v_1|^6, |v_2|^3)
    for parts in [[(0, 1, 2, 1), (0, 1, 3, 1)], [(1, 2, 10, 7), (3, 1, 5, 4)]] {
        check(&parts, vec![q(1, 3), q(2, 3)], &[6, 3], q(3000, 1), 3000 * 3000);
    }
}

#[test]
fn three_dimensional_matches_definition() {
    let parts = [(0, 1, 2, 1), (0, 1, 3, 1), (0, 1, 5, 1)];
    check(&parts, vec![q(1, 3), q(1, 3), q(1, 3)], &[3, 3, 3], q(1000, 1), 1000);
}
