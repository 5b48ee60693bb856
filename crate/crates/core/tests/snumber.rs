use endoscope::snumber::*;
use endoscope::Error;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() < 1e-12
}

#[test]
fn valuation_examples() {
    assert_eq!(valuation(&q(12, 1), 2).unwrap(), 2);
    assert_eq!(valuation(&q(1, 1), 7).unwrap(), 0);
    assert_eq!(valuation(&q(5, 8), 2).unwrap(), -3);
    assert_eq!(valuation(&q(0, 1), 3), Err(Error::InfiniteValuation));
}

#[test]
fn frac_part_examples() {
    assert_eq!(frac_part(&q(5, 4), 2), q(1, 4));
    assert_eq!(frac_part(&q(7, 1), 3), q(0, 1));
    assert_eq!(frac_part(&q(1, 3), 3), q(1, 3));
    // denominators prime to p do not matter
    assert_eq!(frac_part(&q(1, 5), 2), q(0, 1));
}

#[test]
fn character_examples() {
    assert!(close(char_e_p(&q(1, 2), 2), Complex64::new(-1.0, 0.0)));
    assert!(close(char_e_p(&q(4, 1), 5), Complex64::new(1.0, 0.0)));
    assert!(close(char_e_p(&q(1, 3), 3), e(-1.0 / 3.0)));
    let cfg = SConfig::new(vec![2], 1).unwrap();
    let zero = SemilocalPoint::new(0.0, vec![q(0, 1)], &cfg).unwrap();
    assert!(close(char_e_s(&zero, &cfg), Complex64::new(1.0, 0.0)));
    let a = SemilocalPoint::diagonal(&q(3, 2), &cfg);
    assert!(close(char_e_s(&a, &cfg), Complex64::new(1.0, 0.0)));
    let h = SemilocalPoint::new(0.5, vec![q(0, 1)], &cfg).unwrap();
    assert!(close(char_e_s(&h, &cfg), Complex64::new(-1.0, 0.0)));
}

#[test]
fn modified_norm_examples() {
    assert_eq!(modified_norm(&q(18, 1), 3).unwrap(), q(1, 9));
    assert_eq!(modified_norm(&q(12, 1), 2).unwrap(), q(1, 1));
    assert_eq!(modified_norm(&q(8, 1), 2).unwrap(), q(1, 1));
    assert_eq!(modified_norm(&q(5, 1), 2).unwrap(), q(1, 1));
    assert_eq!(modified_norm(&q(20, 1), 2).unwrap(), q(1, 4));
    assert!(modified_norm(&q(0, 1), 2).is_err());
}

#[test]
fn reduction_examples() {
    let cfg = SConfig::new(vec![2], 1).unwrap();
    let x = SemilocalPoint::new(3.7, vec![q(5, 4)], &cfg).unwrap();
    let (y, m) = reduce_mod_zs(&x, &cfg);
    assert_eq!(*m.value(), q(13, 4));
    assert!((y.real_coord - 0.45).abs() < 1e-12);
    assert_eq!(y.padic_coords, vec![q(-2, 1)]);
    let (y, m) = reduce_mod_zs(&SemilocalPoint::new(0.0, vec![q(0, 1)], &cfg).unwrap(), &cfg);
    assert!(m.value().is_zero() && y.real_coord == 0.0);
    let (y, m) = reduce_mod_zs(&SemilocalPoint::new(1.0, vec![q(0, 1)], &cfg).unwrap(), &cfg);
    assert_eq!(*m.value(), BigRational::one());
    assert_eq!(y.real_coord, 0.0);
    assert_eq!(y.padic_coords, vec![q(-1, 1)]);
}

#[test]
fn config_rejects_missing_two() {
    assert_eq!(SConfig::new(vec![3, 5], 1).unwrap_err().to_string(), "finite_places must contain 2");
    assert!(SConfig::new(vec![2, 3], 3).is_err());
    assert!(SConfig::new(vec![3, 2], 1).is_err());
    assert!(SConfig::new(vec![2], 0).is_err());
    assert!(SConfig::new(vec![2, 3], 5).is_ok());
}

#[test]
fn s_rationals() {
    let cfg = SConfig::new(vec![2, 3], 1).unwrap();
    assert!(SRational::new(q(5, 12), &cfg).is_ok());
    assert!(matches!(SRational::new(q(1, 5), &cfg), Err(Error::NotSRational(_))));
}

fn primes() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3, 5, 7, 11])
}

proptest! {
    #[test]
    fn frac_part_leaves_integral_remainder(a in -10_000i64..10_000, e in 0u32..8, u in 1i64..50, p in primes()) {
        let x = q(a, (p as i64).pow(e) * u);
        let t = frac_part(&x, p);
        let d = &x - &t;
        prop_assert!(d.is_zero() || valuation(&d, p).unwrap() >= 0);
        prop_assert!(t >= BigRational::zero() && t < BigRational::one());
    }

    #[test]
    fn character_invariant_under_integral_shift(a in -1000i64..1000, e in 0u32..6, z in -1000i64..1000, w in 1i64..30, p in primes()) {
        let pp = p as i64;
        prop_assume!(w % pp != 0);
        let x = q(a, pp.pow(e));
        let y = &x + q(z, w);
        prop_assert!(close(char_e_p(&x, p), char_e_p(&y, p)));
    }

    #[test]
    fn modified_norm_invariant_under_square_units(a in 1i64..100_000, t in -200i64..200, p in primes()) {
        let pp = p as i64;
        let y = q(a, 1);
        let unit = q(1 + t * pp * pp, 1);
        prop_assume!(!(1 + t * pp * pp == 0));
        prop_assert_eq!(modified_norm(&(&y * &unit), p).unwrap(), modified_norm(&y, p).unwrap());
    }

    #[test]
    fn reduction_is_idempotent(x in -50.0f64..50.0, a in -500i64..500, j in 0u32..6, b in -500i64..500, i in 0u32..4) {
        let cfg = SConfig::new(vec![2, 3], 1).unwrap();
        let pt = SemilocalPoint::new(x, vec![q(a, 2i64.pow(j)), q(b, 3i64.pow(i))], &cfg).unwrap();
        let (y, m) = reduce_mod_zs(&pt, &cfg);
        prop_assert!(in_fundamental_domain(&y, &cfg));
        prop_assert!(SRational::new(m.value().clone(), &cfg).is_ok());
        let (y2, m2) = reduce_mod_zs(&y, &cfg);
        prop_assert_eq!(y2, y);
        prop_assert!(m2.value().is_zero());
    }

    #[test]
    fn global_character_trivial_on_s_integers(a in -100_000i64..100_000, j in 0u32..10, i in 0u32..6) {
        let cfg = SConfig::new(vec![2, 3], 1).unwrap();
        let alpha = q(a, 2i64.pow(j) * 3i64.pow(i));
        let v = char_e_s(&SemilocalPoint::diagonal(&alpha, &cfg), &cfg);
        prop_assert!((v - 1.0).norm() < 1e-9);
    }
}
