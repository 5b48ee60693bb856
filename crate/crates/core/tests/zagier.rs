use endoscope::specfun::c;
use endoscope::zagier::*;
use endoscope::SConfig;
use num_rational::Ratio;

type Q = Ratio<i128>;

fn s2() -> SConfig {
    SConfig::new(vec![2], 1).unwrap()
}

#[test]
fn dirichlet_values() {
    let catalan = 0.915_965_594_177_219_0;
    assert!((dirichlet_l(-4, c(2.0, 0.0)).unwrap().re - catalan).abs() < 1e-12);
    // L(0, chi_-3) = h/w * 2 = 1/3
    assert!((dirichlet_l(-3, c(0.0, 0.0)).unwrap().re - 1.0 / 3.0).abs() < 1e-12);
    assert!(dirichlet_l(9, c(2.0, 0.0)).is_err());
    // imprimitive: L(s, (45/.)) = L(s, chi_5) (1 - chi_5(3) 3^{-s})
    let s = c(1.5, 0.7);
    let want = dirichlet_l(5, s).unwrap() * (1.0 + (-s * 3f64.ln()).exp());
    assert!((dirichlet_l(45, s).unwrap() - want).norm() < 1e-12);
}

#[test]
fn hurwitz_and_smoothed_routes_agree() {
    for d in [5i128, -4, -3, 8, -23, 12, -84, 101] {
        for s in [c(2.0, 0.0), c(0.5, 3.0), c(-0.7, 1.0)] {
            let a = l_primitive_hurwitz(d, s).unwrap();
            let b = l_primitive_smoothed(d, s).unwrap();
            assert!((a - b).norm() < 1e-9 * a.norm().max(1.0), "D = {d}, s = {s}: {a} vs {b}");
        }
    }
}

#[test]
fn value_at_one() {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let v = partial_zagier_direct(&Q::from_integer(5), &s2(), c(1.0, 0.0)).unwrap();
    assert!((v.value.re - 1.5 * 2.0 * golden.ln() / 5f64.sqrt()).abs() < 1e-12);
    assert!((v.value.re - 0.645614).abs() < 1e-6);
    // the class number route is continuous with the analytic one
    for delta in [Q::from_integer(5), Q::from_integer(-20), Q::from_integer(45), Q::new(-7, 4), Q::from_integer(-99)] {
        let a = partial_zagier_direct(&delta, &s2(), c(1.0, 0.0)).unwrap().value;
        let b = partial_zagier_direct(&delta, &s2(), c(1.0 + 1e-8, 0.0)).unwrap().value;
        assert!((a - b).norm() < 1e-6, "delta = {delta}: {a} vs {b}");
    }
}

#[test]
fn functional_equation() {
    for cfg in [s2(), SConfig::new(vec![2, 3], 1).unwrap()] {
        for delta in [Q::from_integer(5), Q::from_integer(-3), Q::from_integer(-20), Q::new(13, 4), Q::from_integer(60)] {
            for s in [c(2.5, 0.0), c(0.3, 1.0), c(-1.0, 4.0), c(3.0, 0.1)] {
                let l = partial_zagier_direct(&delta, &cfg, s).unwrap().value;
                let r = functional_equation_rhs(&delta, &cfg, s).unwrap().value;
                assert!((l - r).norm() < 1e-9 * l.norm().max(1.0), "delta = {delta} s = {s}: {l} vs {r}");
            }
        }
    }
}

#[test]
fn functional_equation_removable_point() {
    // odd delta at s = 2: Gamma(0) against L(-1) = 0
    assert!(functional_equation_rhs(&Q::from_integer(-3), &s2(), c(2.0, 0.0)).is_err());
    assert!(functional_equation_rhs(&Q::from_integer(5), &s2(), c(2.0, 0.0)).is_ok());
}

#[test]
fn approximate_functional_equation() {
    let cfg = s2();
    for delta in [Q::from_integer(5), Q::from_integer(-4), Q::from_integer(-23), Q::from_integer(205)] {
        let want = partial_zagier_direct(&delta, &cfg, c(1.0, 0.0)).unwrap().value.re;
        let t = (delta.numer().abs() as f64).sqrt();
        for a in [0.5 * t, t, 3.0 * t] {
            let v = afe_l1(&delta, &cfg, a).unwrap();
            assert!((v.value.re - want).abs() < 1e-7, "delta = {delta} A = {a}: {} vs {want}", v.value.re);
            assert!(v.params["terms"].as_u64().unwrap() > 0);
        }
    }
    assert!(afe_l1(&Q::from_integer(5), &cfg, 0.0).is_err());
}

#[test]
fn fundamental_parts() {
    assert_eq!(fundamental_part(45), (5, 3));
    assert_eq!(fundamental_part(-16), (-4, 2));
    assert_eq!(fundamental_part(-3), (-3, 1));
    assert_eq!(fundamental_part(28), (28, 1));
}
