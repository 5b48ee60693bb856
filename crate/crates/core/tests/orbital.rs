use endoscope::orbital::*;
use endoscope::snumber::e;
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Zero;

type Q = Ratio<i128>;
type C = Complex64;

#[test]
fn closed_form_examples() {
    // delta = 5 is ramified at 5 with k = 0
    let g = GammaClass::ints(3, 1).unwrap();
    assert_eq!(g.invariants(5), (0, 0));
    assert_eq!(orb_maximal_closed(&g, 5, 0), 1);
    assert_eq!(orb_maximal_closed(&g, 5, 1), 0);
    // delta = 9 * 5: k_3 = 1, 5 = 2 mod 3 so inert
    let g = GammaClass::ints(9, 9).unwrap();
    assert_eq!(g.invariants(3), (1, -1));
    assert_eq!(orb_maximal_closed(&g, 3, 2), 1 + 3 + 1);
    // split unit with k = 0: the Iwahori value is 2/(p+1)
    let g = GammaClass::ints(5, 1).unwrap();
    assert_eq!(g.invariants(5), (0, 1));
    assert_eq!(orb_iwahori_closed(&g, 5), Q::new(2, 6));
    assert!(GammaClass::ints(2, 1).is_err());
    assert!(GammaClass::ints(1, 0).is_err());
}

#[test]
fn lattice_oracle_agrees() {
    for p in [3u64, 5] {
        for (t, n) in [(1i128, 1i128), (3, 1), (1, -1), (3, 9), (9, 9), (0, 1), (6, 45), (12, 27), (2, -26)] {
            let g = GammaClass::ints(t, n).unwrap();
            let (k, _) = g.invariants(p);
            for m in 0..3u32 {
                let want = Q::from_integer(orb_maximal_closed(&g, p, m));
                let got = orb_bruteforce(&g, p, Subgroup::Maximal(m), oracle_depth(k, m)).unwrap();
                assert_eq!(got, want, "p = {p}, T = {t}, N = {n}, m = {m}");
            }
            let got = orb_bruteforce(&g, p, Subgroup::Iwahori, oracle_depth(k, 0)).unwrap();
            assert_eq!(got, orb_iwahori_closed(&g, p), "Iwahori p = {p}, T = {t}, N = {n}");
        }
    }
}

#[test]
fn hecke_volume_counts() {
    for p in [2u64, 3, 5, 7] {
        for m in 0..6 {
            assert_eq!(hecke_volume(p, m), hnf_count(p, m));
        }
    }
    assert_eq!(hecke_volume(3, 2), 13);
}

#[test]
fn germ_expansion_for_units() {
    for p in [3u64, 5, 7] {
        for t in -20i128..20 {
            for n in [1i128, -1, 2, -3, 7] {
                let Ok(g) = GammaClass::ints(t, n) else { continue };
                if n.rem_euclid(p as i128) == 0 || endoscope::quadratic::is_square_int(t * t - 4 * n) {
                    continue;
                }
                let (k, chi) = g.invariants(p);
                for f in [FChoice::Maximal(0), FChoice::Iwahori] {
                    let (l1, l2) = shalika_constants(&f, p, &Q::from_integer(1)).unwrap();
                    let want = match f {
                        FChoice::Iwahori => orb_iwahori_closed(&g, p),
                        _ => Q::from_integer(orb_maximal_closed(&g, p, 0)),
                    };
                    assert_eq!(germ_value(l1, l2, p, k, chi), want, "{f:?} p = {p} T = {t} N = {n}");
                }
            }
        }
    }
}

#[test]
fn parse_test_functions() {
    assert_eq!(FChoice::parse_standard("K").unwrap(), FChoice::Maximal(0));
    assert_eq!(FChoice::parse_standard(" I ").unwrap(), FChoice::Iwahori);
    assert_eq!(FChoice::parse_standard("X^3").unwrap(), FChoice::Maximal(3));
    assert!(FChoice::parse_standard("Y").is_err());
    assert_eq!(FChoice::Maximal(2).label(), "X^2");
    assert_eq!(parse_q("-7/4").unwrap(), Q::new(-7, 4));
    assert!(parse_q("1/0").is_err());
}

#[test]
fn step_function_basics() {
    let p = 3;
    let f = PadicStepFunction::new(
        p,
        vec![
            Piece { center: Q::from_integer(1), radius_exp: 1, value: C::new(2.0, 0.0) },
            Piece { center: Q::from_integer(3), radius_exp: 2, value: C::new(0.0, 1.0) },
        ],
    )
    .unwrap();
    assert_eq!(f.eval(&Q::from_integer(4)), C::new(2.0, 0.0));
    assert_eq!(f.eval(&Q::from_integer(12)), C::new(0.0, 1.0));
    assert_eq!(f.eval(&Q::from_integer(2)), C::zero());
    assert!((f.step_integral() - C::new(2.0 / 3.0, 1.0 / 9.0)).norm() < 1e-15);
    let bad = PadicStepFunction::new(
        p,
        vec![
            Piece { center: Q::from_integer(1), radius_exp: 1, value: C::new(1.0, 0.0) },
            Piece { center: Q::from_integer(4), radius_exp: 2, value: C::new(1.0, 0.0) },
        ],
    );
    assert!(bad.is_err());
    let js = serde_json::to_string(&f).unwrap();
    let back: PadicStepFunction = serde_json::from_str(&js).unwrap();
    assert_eq!(back, f);
}

/// `int f(y) e_p(-y t) dy` as a Riemann sum over residues mod `p^r`.
fn riemann(f: &PadicStepFunction, t: &Q, r: u32) -> C {
    let p = f.prime as i128;
    let n = p.pow(r);
    let mut s = C::zero();
    for y in 0..n {
        let yq = Q::from_integer(y);
        let v = f.eval(&yq);
        if v != C::zero() {
            let (a, m) = endoscope::snumber::frac_part_ratio(&(yq * *t), f.prime);
            s += v * e(a as f64 / m as f64);
        }
    }
    s / n as f64
}

#[test]
fn oscillatory_step_integrals() {
    let (f, _) = theta_step_function(&FChoice::Maximal(0), 3, &Q::from_integer(1), 8).unwrap();
    let (g, _) = theta_step_function(&FChoice::Iwahori, 5, &Q::from_integer(-2), 6).unwrap();
    for h in [f, g] {
        let r = h.pieces.iter().map(|p| p.radius_exp).max().unwrap() as u32;
        for t in [Q::zero(), Q::new(1, 3), Q::new(2, 9), Q::new(7, 25), Q::new(4, 5), Q::from_integer(3)] {
            let a = h.step_oscillatory_integral(&t, &Q::from_integer(1)).unwrap();
            let b = riemann(&h, &t, r + 2);
            assert!((a - b).norm() < 1e-12, "p = {} t = {t}: {a} vs {b}", h.prime);
        }
        assert!(h.step_oscillatory_integral(&Q::from_integer(1), &Q::zero()).is_err());
    }
}

#[test]
fn theta_step_continuity() {
    // refining the depth cap moves the integral by at most the reported bound
    for (f, p, n) in [(FChoice::Maximal(0), 3u64, 1i128), (FChoice::Iwahori, 3, -1), (FChoice::Maximal(1), 5, 5)] {
        let nq = Q::from_integer(n);
        let (a, ea) = theta_step_function(&f, p, &nq, 8).unwrap();
        let (b, eb) = theta_step_function(&f, p, &nq, 14).unwrap();
        let d = (a.step_integral() - b.step_integral()).norm();
        assert!(d <= ea + eb + 1e-14, "{f:?}: {d} > {}", ea + eb);
        assert!(eb < ea || ea == 0.0);
        // off the singular set the step function equals theta_p
        for y in 0..40i128 {
            let Ok(g) = GammaClass::ints(y, n) else { continue };
            let (k, _) = g.invariants(p);
            if k < 4 {
                assert!((b.eval(&Q::from_integer(y)) - theta_p(&g, p, &f)).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn archimedean_integrals() {
    let th = ThetaInf::bump(0.3, 0.8);
    let (v, _) = theta_inf_integrals(&th, 1, ArchWeight::Plain).unwrap();
    assert!((v.re - th.exact_integral()).abs() < 1e-10);
    let poly = ThetaInf { profile: BumpProfile::Poly(2), ..ThetaInf::bump(0.0, 2.0) };
    let (v, _) = theta_inf_integrals(&poly, -1, ArchWeight::Plain).unwrap();
    assert!((v.re - 2.0 * 16.0 / 15.0).abs() < 1e-10);
    // oscillatory weight against plain quadrature
    for omega in [0.0, 0.7, 3.0] {
        let (v, _) = theta_inf_integrals(&th, 1, ArchWeight::Oscillatory { omega }).unwrap();
        let re = integrate_over(&th, 400, |x| th.eval(x) * (2.0 * std::f64::consts::PI * omega * x).cos());
        let im = -integrate_over(&th, 400, |x| th.eval(x) * (2.0 * std::f64::consts::PI * omega * x).sin());
        assert!((v - C::new(re, im)).norm() < 1e-10, "omega = {omega}");
    }
    // x^2 + 1 has no zeros, so the weight is smooth on the minus side
    let (v, _) = theta_inf_integrals(&th, -1, ArchWeight::InvSqrt { positive_only: false }).unwrap();
    let w = integrate_over(&th, 400, |x| th.eval(x) / (x * x + 1.0).sqrt());
    assert!((v.re - w).abs() < 1e-10);
    // across x = 1 the singularity is integrable; substitute x = 1 + u^2 side by side
    let wide = ThetaInf::bump(1.0, 0.5);
    let (v, _) = theta_inf_integrals(&wide, 1, ArchWeight::InvSqrt { positive_only: true }).unwrap();
    let w = endoscope::specfun::integrate_gl(0.0, 0.5f64.sqrt(), 200, |u| {
        let x = 1.0 + u * u;
        2.0 * u * wide.eval(x) / (x * x - 1.0).sqrt()
    });
    assert!((v.re - w).abs() < 1e-9, "{} vs {w}", v.re);
    assert_eq!(theta_inf_integrals(&ThetaInf::zero(), 1, ArchWeight::Plain).unwrap().0, C::zero());
}

#[test]
fn representatives_match_realizability() {
    let p = 3;
    for typ in Split::all() {
        for k in 0..3 {
            for m in 0..4 {
                let rep = find_representative(p, typ, k, m);
                assert_eq!(rep.is_some(), realizable(typ, k, m), "{typ:?} k = {k} m = {m}");
                if let Some(g) = rep {
                    assert_eq!(g.invariants(p), (k, typ.chi()));
                }
            }
        }
    }
}
