//! Property tests for the invariants of the library.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use twistedbad_core::arith::{dot_residual, residual_at, weighted_height, CertifiedReal, TargetVector, WeightVector};
use twistedbad_core::badness::{classical_badness, proposition_bound, twisted_badness};
use twistedbad_core::bestapprox::EnumerationOptions;
use twistedbad_core::cantor::{build_tree, sample_box, CantorParams, CantorTree, Mode, Selector};
use twistedbad_core::measure::{Cube, MeasureWeights};

const SQUAREFREE: [i64; 8] = [2, 3, 5, 6, 7, 10, 11, 13];

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn quad() -> impl Strategy<Value = String> {
    (-5i64..5, 1i64..4, 0usize..SQUAREFREE.len(), 1i64..9)
        .prop_map(|(a, b, d, c)| format!("quad:({a}+{b}*sqrt({}))/{c}", SQUAREFREE[d]))
}

fn theta(n: usize) -> impl Strategy<Value = TargetVector> {
    prop::collection::vec(quad(), n).prop_map(|v| v.join(",").parse().unwrap())
}

fn tree() -> &'static CantorTree {
    static TREE: OnceLock<CantorTree> = OnceLock::new();
    TREE.get_or_init(|| {
        let j: WeightVector = "1/2,1/2".parse().unwrap();
        let p = CantorParams::new(
            j,
            16,
            q(1, 64),
            "quad:(-1+1*sqrt(2))/1,quad:(-1+1*sqrt(3))/1".parse().unwrap(),
            Mode::Exploratory,
            5,
        )
        .unwrap();
        build_tree(p, 4, &EnumerationOptions::default()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_lies_in_unit_half(lo in -1_000_000i64..1_000_000, w in 0i64..3_000_000, scale in 0u32..24) {
        let x = CertifiedReal::from_parts(BigInt::from(lo), BigInt::from(lo + w), scale);
        let d = x.dist_to_nearest_int();
        prop_assert!(d.lower() >= BigRational::zero());
        prop_assert!(d.lower() <= q(1, 2));
        prop_assert!(d.upper() >= BigRational::zero());
    }

    #[test]
    fn height_and_residual_are_sign_symmetric(t in theta(2), m in prop::collection::vec(-500i64..500, 2)) {
        prop_assume!(m.iter().any(|&x| x != 0));
        let neg: Vec<i64> = m.iter().map(|x| -x).collect();
        let j: WeightVector = "1/3,2/3".parse().unwrap();
        prop_assert_eq!(weighted_height(&m, &j).unwrap(), weighted_height(&neg, &j).unwrap());
        match (dot_residual(&m, &t, 1024), dot_residual(&neg, &t, 1024)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn refinement_never_widens(t in theta(3), m in prop::collection::vec(-10_000i64..10_000, 3), bits in 32u32..200) {
        let coarse = residual_at(&m, &t, bits);
        let fine = residual_at(&m, &t, bits * 2);
        prop_assert!(fine.width() <= coarse.width());
        prop_assert!(fine.overlaps(&coarse));
    }

    #[test]
    fn twisted_at_zero_is_classical(t in theta(2), big_q in 1u64..3000) {
        let j: WeightVector = "1/2,1/2".parse().unwrap();
        let a = twisted_badness(&t, &TargetVector::zero(2), &j, big_q, 1024);
        let b = classical_badness(&t, &j, big_q, 1024);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a.value, b.value);
            prop_assert_eq!(a.argmin_q, b.argmin_q);
        }
    }

    #[test]
    fn badness_is_monotone_in_q(t in theta(2), e in theta(2), q1 in 1u64..2000, extra in 0u64..2000) {
        let j: WeightVector = "1/3,2/3".parse().unwrap();
        let a = twisted_badness(&t, &e, &j, q1, 1024).unwrap();
        let b = twisted_badness(&t, &e, &j, q1 + extra, 1024).unwrap();
        prop_assert!(!a.value.certainly_lt(&b.value));
    }

    #[test]
    fn proposition_bound_below_half_gamma(num in 1u64..1_000_000, n in 1usize..4, w in 0usize..3) {
        let gamma = CertifiedReal::from_rational(&BigRational::new(BigInt::from(num), BigInt::from(1_000_001u64)), 64);
        let j: WeightVector = match (n, w) {
            (1, _) => "1".parse().unwrap(),
            (2, 0) => "1/2,1/2".parse().unwrap(),
            (2, _) => "1/4,3/4".parse().unwrap(),
            _ => "1/3,1/3,1/3".parse().unwrap(),
        };
        let c = proposition_bound(&gamma, &j, j.n()).unwrap();
        let half = gamma.div_int(&BigInt::from(2)).unwrap();
        prop_assert!(c.bound.certainly_lt(&half));
        prop_assert!(c.c.certainly_lt(&CertifiedReal::one()));
    }

    #[test]
    fn tree_boxes_nest(seed in any::<u64>(), depth in 1u32..=4) {
        let t = tree();
        let h = sample_box(t, &Selector::Random { seed, stream: 1 }, depth).unwrap();
        let mut cur = h.clone();
        while let Some(p) = cur.parent() {
            prop_assert!(p.contains(&cur));
            for ((a, b), (c, d)) in p.ranges().iter().zip(cur.ranges().iter()) {
                prop_assert!(a <= c && d <= b);
            }
            prop_assert!(t.children(&p).unwrap().selected().contains(&cur));
            cur = p;
        }
    }

    #[test]
    fn cube_cover_is_monotone(x in 0u32..1000, y in 0u32..1000, s in 1u32..200, grow in 0u32..200, k in 0u32..=3) {
        let w = MeasureWeights::new(tree());
        let corner = vec![q(x as i64, 1000), q(y as i64, 1000)];
        let small = Cube { corner: corner.clone(), side: q(s as i64, 4000) };
        let g = q(grow as i64, 8000);
        let large = Cube { corner: corner.iter().map(|c| c - &g).collect(), side: &small.side + &g * BigInt::from(2) };
        let a = w.mu_of_cube_at_level(&small, k).unwrap();
        let b = w.mu_of_cube_at_level(&large, k).unwrap();
        prop_assert!(a.mass <= b.mass);
        prop_assert!(b.mass <= BigRational::one());
    }
}

#[test]
fn level_masses_sum_to_one() {
    let t = tree();
    let m = t.materialize(4, 200_000).unwrap();
    for (k, mass) in MeasureWeights::new(t).level_masses(&m).unwrap().into_iter().enumerate() {
        assert_eq!(mass, BigRational::one(), "level {k}");
    }
}
