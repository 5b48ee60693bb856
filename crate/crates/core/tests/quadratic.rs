use endoscope::quadratic::*;
use endoscope::SConfig;
use num_rational::Ratio;
use proptest::prelude::*;

type Q = Ratio<i128>;

fn z(n: i128) -> Q {
    Q::from_integer(n)
}

#[test]
fn kronecker_examples() {
    assert_eq!(kronecker(5, 11), 1);
    assert_eq!(kronecker(5, 1), 1);
    assert_eq!(kronecker(5, 2), -1);
    assert_eq!(kronecker(-4, 2), 0);
    assert_eq!(kronecker(17, 2), 1);
}

#[test]
fn factor_examples() {
    let cfg = SConfig::new(vec![2], 1).unwrap();
    let d = factor_discriminant_ratio(&z(5), &cfg).unwrap();
    assert_eq!((d.sigma, d.fund_d, d.iota), (z(1), 5, 0));
    let d = factor_discriminant_ratio(&z(-4), &cfg).unwrap();
    assert_eq!((d.sigma, d.fund_d, d.iota), (z(1), -4, 1));
    let d = factor_discriminant_ratio(&z(45), &cfg).unwrap();
    assert_eq!((d.sigma, d.fund_d), (z(3), 5));
    assert_eq!(d.k_map[&3], 1);
    assert_eq!(d.tau, 45);
    assert!(factor_discriminant_ratio(&z(16), &cfg).is_err());
    assert!(factor_discriminant_ratio(&z(0), &cfg).is_err());
    // S-denominators
    let d = factor_discriminant_ratio(&Q::new(5, 4), &cfg).unwrap();
    assert_eq!(d.tau, 5);
}

#[test]
fn splitting_examples() {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    let b = |n: i64| BigRational::from_integer(BigInt::from(n));
    assert_eq!(splitting_type(&b(5), 11), SplittingType::Split);
    assert_eq!(splitting_type(&b(5), 3), SplittingType::Inert);
    assert_eq!(splitting_type(&b(45), 5), SplittingType::Ramified);
}

#[test]
fn oracle_examples() {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let want = 2.0 * golden.ln() / 5f64.sqrt();
    assert!((l1_quadratic_oracle(5, &[]).unwrap() - want).abs() < 1e-12);
    assert!((want - 0.430409).abs() < 1e-6);
    assert!((l1_quadratic_oracle(-4, &[]).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    assert!((l1_quadratic_oracle(5, &[2]).unwrap() - 1.5 * want).abs() < 1e-12);
    assert!(l1_quadratic_oracle(9, &[]).is_err());
}

/// `sum_{k <= n} chi(k)/k` with the tail estimated by Abel summation over the last period.
fn partial_l1(d: i128, n: i128) -> f64 {
    let mut s = 0.0;
    for k in 1..=n {
        let c = kronecker(d, k);
        if c != 0 {
            s += c as f64 / k as f64;
        }
    }
    // average the partial sums over one more period to kill the oscillating tail
    let per = d.abs();
    let mut acc = 0.0;
    let mut t = s;
    for k in n + 1..=n + per {
        let c = kronecker(d, k);
        if c != 0 {
            t += c as f64 / k as f64;
        }
        acc += t;
    }
    acc / per as f64
}

#[test]
fn oracle_matches_character_sums() {
    for d in -50i128..=50 {
        if !is_fundamental(d) || d == 1 {
            continue;
        }
        let l = l1_quadratic_oracle(d, &[]).unwrap();
        let p = partial_l1(d, 1_000_000);
        assert!((l - p).abs() / l < 1e-5, "D = {d}: {l} vs {p}");
    }
}

#[test]
fn class_number_values() {
    for (d, h) in [(-3, 1), (-4, 1), (-23, 3), (-47, 5), (-56, 4), (-84, 4)] {
        assert_eq!(class_data(d).h, h, "h({d})");
    }
}

#[test]
fn k_map_against_valuations() {
    let cfg = SConfig::new(vec![2, 3], 1).unwrap();
    for t in -30i128..30 {
        for n in [-7i128, -3, -1, 1, 2, 5, 12] {
            let d = t * t - 4 * n;
            if d == 0 || is_square_int(d) {
                continue;
            }
            let data = factor_discriminant_ratio(&z(d), &cfg).unwrap();
            assert_eq!(data.sigma * data.sigma * z(data.fund_d), z(d));
            let v2 = d.trailing_zeros() as i32;
            let u = d >> v2;
            let k2 = if v2 % 2 == 1 {
                (v2 - 3) / 2
            } else if u.rem_euclid(4) == 1 {
                v2 / 2
            } else {
                (v2 - 2) / 2
            };
            assert_eq!(data.k_map[&2], k2, "delta = {d}");
            let mut v3 = 0;
            let mut m = d;
            while m % 3 == 0 {
                m /= 3;
                v3 += 1;
            }
            assert_eq!(data.k_map[&3], v3 / 2, "delta = {d}");
        }
    }
}

proptest! {
    #[test]
    fn kronecker_multiplicative(d in -500i128..500, a in 1i128..1000, b in 1i128..1000) {
        prop_assert_eq!(kronecker(d, a * b), kronecker(d, a) * kronecker(d, b));
    }

    #[test]
    fn kronecker_periodic_in_k(d0 in -200i128..200, k in 1i128..2000) {
        let d = if d0.rem_euclid(4) <= 1 { d0 } else { 4 * d0 };
        prop_assume!(d != 0);
        prop_assert_eq!(kronecker(d, k), kronecker(d, k + d.abs()));
    }

    #[test]
    fn jacobi_periodic_in_top(a in -5000i128..5000, k in 1i128..1000) {
        let k = 2 * k + 1;
        prop_assert_eq!(jacobi(a, k), jacobi(a + k, k));
    }

    #[test]
    fn factor_round_trip(num in -1_000_000i128..1_000_000, e in 0u32..6) {
        prop_assume!(num != 0 && !is_square_rational(&Q::new(num, 1 << e)));
        let cfg = SConfig::new(vec![2], 1).unwrap();
        let delta = Q::new(num, 1i128 << e);
        let d = factor_discriminant_ratio(&delta, &cfg).unwrap();
        prop_assert_eq!(d.sigma * d.sigma * z(d.fund_d), delta);
        prop_assert!(is_fundamental(d.fund_d));
        prop_assert_eq!(d.iota == 0, num > 0);
        prop_assert_eq!(d.epsilons[0], kronecker(d.tau, 2));
    }
}
