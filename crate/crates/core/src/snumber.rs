//! Exact S-arithmetic: valuations, p-adic fractional parts, additive characters,
//! modified norms and the fundamental domain of Q_S / Z^S.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::quadratic::is_prime;

/// The ramification set `S = {inf, q_1 < ... < q_r}` and the Hecke index `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SConfig {
    pub finite_places: Vec<u64>,
    pub hecke_n: u64,
}

impl SConfig {
    pub fn new(finite_places: Vec<u64>, hecke_n: u64) -> Result<Self> {
        let cfg = SConfig { finite_places, hecke_n };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.finite_places.contains(&2) {
            return Err(Error::MissingTwo);
        }
        for w in self.finite_places.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Config(
                    "finite_places must be strictly increasing".into(),
                ));
            }
        }
        for &q in &self.finite_places {
            if !is_prime(q as u128) {
                return Err(Error::Config(format!("finite_places: {q} is not prime")));
            }
        }
        if self.hecke_n == 0 {
            return Err(Error::Config("hecke_n must be positive".into()));
        }
        for &q in &self.finite_places {
            if self.hecke_n % q == 0 {
                return Err(Error::Config(format!(
                    "hecke_n = {} is not coprime to {q}",
                    self.hecke_n
                )));
            }
        }
        Ok(())
    }

    pub fn r(&self) -> usize {
        self.finite_places.len()
    }

    pub fn in_s(&self, p: u64) -> bool {
        self.finite_places.contains(&p)
    }

    /// True if `k` is coprime to every finite place.
    pub fn coprime(&self, k: u64) -> bool {
        self.finite_places.iter().all(|&q| k % q != 0)
    }

    /// `n = prod p^{n_p}` as a list of `(p, n_p)`.
    pub fn hecke_factors(&self) -> Vec<(u64, u32)> {
        crate::quadratic::factorize(self.hecke_n as u128)
            .into_iter()
            .map(|(p, e)| (p as u64, e))
            .collect()
    }

    /// `q^nu = prod q_i^{nu_i}` as an exact rational.
    pub fn q_pow(&self, nu: &[i32]) -> Ratio<i128> {
        let mut num = 1i128;
        let mut den = 1i128;
        for (&q, &e) in self.finite_places.iter().zip(nu) {
            if e >= 0 {
                num *= (q as i128).pow(e as u32);
            } else {
                den *= (q as i128).pow((-e) as u32);
            }
        }
        Ratio::new(num, den)
    }
}

/// A rational number whose denominator is supported on the finite places.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SRational(BigRational);

impl SRational {
    pub fn new(value: BigRational, cfg: &SConfig) -> Result<Self> {
        let mut d = value.denom().clone();
        for &q in &cfg.finite_places {
            let qb = BigInt::from(q);
            while (&d % &qb).is_zero() {
                d /= &qb;
            }
        }
        if !d.is_one() {
            return Err(Error::NotSRational(value.to_string()));
        }
        Ok(SRational(value))
    }

    pub fn from_ratio(num: i128, den: i128, cfg: &SConfig) -> Result<Self> {
        Self::new(BigRational::new(num.into(), den.into()), cfg)
    }

    pub fn from_int(n: i128) -> Self {
        SRational(BigRational::from_integer(n.into()))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn to_ratio(&self) -> Option<Ratio<i128>> {
        Some(Ratio::new(self.0.numer().to_i128()?, self.0.denom().to_i128()?))
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.0)
    }
}

impl fmt::Display for SRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of `Q_S = R x Q_{q_1} x ... x Q_{q_r}`; the p-adic coordinates are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SemilocalPoint {
    pub real_coord: f64,
    pub padic_coords: Vec<BigRational>,
}

impl SemilocalPoint {
    pub fn new(real_coord: f64, padic_coords: Vec<BigRational>, cfg: &SConfig) -> Result<Self> {
        if padic_coords.len() != cfg.r() {
            return Err(Error::Invalid(format!(
                "expected {} p-adic coordinates, got {}",
                cfg.r(),
                padic_coords.len()
            )));
        }
        Ok(SemilocalPoint { real_coord, padic_coords })
    }

    /// The diagonal image of a rational.
    pub fn diagonal(x: &BigRational, cfg: &SConfig) -> Self {
        SemilocalPoint {
            real_coord: ratio_to_f64(x),
            padic_coords: vec![x.clone(); cfg.r()],
        }
    }
}

pub fn ratio_to_f64(x: &BigRational) -> f64 {
    // numer/denom may individually overflow f64 for huge heights; fine at desk scale
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            let shift = x.denom().bits().max(x.numer().bits()) as i64 - 1000;
            let s = shift.max(0) as u64;
            let a = (x.numer() >> s).to_f64().unwrap_or(0.0);
            let b = (x.denom() >> s).to_f64().unwrap_or(1.0);
            a / b
        }
    }
}

/// `e(t) = exp(2 pi i t)`, with `t` reduced mod 1 first.
pub fn e(t: f64) -> Complex64 {
    let t = t - t.floor();
    let (s, c) = (2.0 * PI * t).sin_cos();
    Complex64::new(c, s)
}

/// `e(a/b)` for exact integers, `b > 0`.
pub fn e_frac(a: i128, b: i128) -> Complex64 {
    let r = a.rem_euclid(b);
    let (s, c) = (2.0 * PI * (r as f64 / b as f64)).sin_cos();
    Complex64::new(c, s)
}

/// Returns `(v_p(n), n / p^{v})` for `n != 0`.
pub fn split_p(mut n: i128, p: u64) -> (u32, i128) {
    debug_assert!(n != 0);
    let p = p as i128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    (v, n)
}

fn split_p_big(n: &BigInt, p: u64) -> (i64, BigInt) {
    let pb = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&pb);
        if !r.is_zero() {
            break;
        }
        n = q;
        v += 1;
    }
    (v, n)
}

/// p-adic valuation of a nonzero rational.
pub fn valuation(x: &BigRational, p: u64) -> Result<i64> {
    if x.is_zero() {
        return Err(Error::InfiniteValuation);
    }
    let (a, _) = split_p_big(x.numer(), p);
    let (b, _) = split_p_big(x.denom(), p);
    Ok(a - b)
}

/// Valuation of an `i128` rational `num/den`.
pub fn valuation_ratio(x: &Ratio<i128>, p: u64) -> Option<i32> {
    if x.numer() == &0 {
        return None;
    }
    let (a, _) = split_p(*x.numer(), p);
    let (b, _) = split_p(*x.denom(), p);
    Some(a as i32 - b as i32)
}

/// `<x>_p` in `[0,1) cap Z[1/p]` with `x - <x>_p in Z_p`.
pub fn frac_part(x: &BigRational, p: u64) -> BigRational {
    if x.is_zero() {
        return BigRational::zero();
    }
    let (e, bprime) = split_p_big(x.denom(), p);
    if e == 0 {
        return BigRational::zero();
    }
    let pe = BigInt::from(p).pow(e as u32);
    let inv = mod_inverse_big(&bprime.mod_floor(&pe), &pe);
    let r = (x.numer() * inv).mod_floor(&pe);
    BigRational::new(r, pe)
}

/// `<num/den>_p` as `(r, p^e)` meaning `r / p^e`; `i128` fast path.
pub fn frac_part_ratio(x: &Ratio<i128>, p: u64) -> (i128, i128) {
    if *x.numer() == 0 {
        return (0, 1);
    }
    let (e, bprime) = split_p(*x.denom(), p);
    if e == 0 {
        return (0, 1);
    }
    let pe = (p as i128).pow(e);
    let inv = mod_inverse(bprime.rem_euclid(pe), pe);
    let r = mul_mod(x.numer().rem_euclid(pe), inv, pe);
    (r, pe)
}

pub fn mod_inverse_exists(a: i128, m: i128) -> bool {
    num_integer::gcd(a, m) == 1
}

pub fn mul_mod(a: i128, b: i128, m: i128) -> i128 {
    if let Some(c) = a.checked_mul(b) {
        return c.rem_euclid(m);
    }
    let r = (BigInt::from(a) * BigInt::from(b)).mod_floor(&BigInt::from(m));
    r.to_i128().unwrap()
}

/// Inverse of `a` modulo `m` (`gcd(a,m) = 1`).
pub fn mod_inverse(a: i128, m: i128) -> i128 {
    if m == 1 {
        return 0;
    }
    let g = a.rem_euclid(m).extended_gcd(&m);
    debug_assert_eq!(g.gcd, 1, "{a} not invertible mod {m}");
    g.x.rem_euclid(m)
}

fn mod_inverse_big(a: &BigInt, m: &BigInt) -> BigInt {
    if m.is_one() {
        return BigInt::zero();
    }
    let g = a.extended_gcd(m);
    g.x.mod_floor(m)
}

/// `e_p(x) = e(-<x>_p)`.
pub fn char_e_p(x: &BigRational, p: u64) -> Complex64 {
    let f = frac_part(x, p);
    if f.is_zero() {
        return Complex64::new(1.0, 0.0);
    }
    let m = f.denom().clone();
    let a = f.numer().mod_floor(&m);
    match (a.to_i128(), m.to_i128()) {
        (Some(a), Some(m)) => e_frac(-a, m),
        _ => e(-ratio_to_f64(&f)),
    }
}

pub fn char_e_p_ratio(x: &Ratio<i128>, p: u64) -> Complex64 {
    let (a, m) = frac_part_ratio(x, p);
    if a == 0 {
        return Complex64::new(1.0, 0.0);
    }
    e_frac(-a, m)
}

/// `e_S(x) = e(x_inf) prod_i e_{q_i}(x_i)`.
pub fn char_e_s(x: &SemilocalPoint, cfg: &SConfig) -> Complex64 {
    let mut z = e(x.real_coord);
    for (y, &q) in x.padic_coords.iter().zip(&cfg.finite_places) {
        z *= char_e_p(y, q);
    }
    z
}

/// The modified norm `|y|'_p`.
pub fn modified_norm(y: &BigRational, p: u64) -> Result<BigRational> {
    if y.is_zero() {
        return Err(Error::InfiniteValuation);
    }
    let (va, ua) = split_p_big(y.numer(), p);
    let (vb, ub) = split_p_big(y.denom(), p);
    let v = va - vb;
    let e = if p != 2 {
        -2 * Integer::div_floor(&v, &2)
    } else if v.is_odd() {
        -v + 3
    } else {
        // unit part u = ua/ub with ub odd: u = 1 (mod 4) iff ua = ub (mod 4)
        let four = BigInt::from(4);
        if ua.mod_floor(&four) == ub.mod_floor(&four) {
            -v
        } else {
            -v + 2
        }
    };
    Ok(pow_rational(p, e))
}

/// Exponent `e` with `|y|'_p = p^e`, for `i128` rationals.
pub fn modified_norm_exp(y: &Ratio<i128>, p: u64) -> Option<i32> {
    if *y.numer() == 0 {
        return None;
    }
    let (va, ua) = split_p(*y.numer(), p);
    let (vb, ub) = split_p(*y.denom(), p);
    let v = va as i32 - vb as i32;
    Some(if p != 2 {
        -2 * v.div_euclid(2)
    } else if v.rem_euclid(2) == 1 {
        -v + 3
    } else if ua.rem_euclid(4) == ub.rem_euclid(4) {
        -v
    } else {
        -v + 2
    })
}

pub fn pow_rational(p: u64, e: i64) -> BigRational {
    let pb = BigInt::from(p);
    if e >= 0 {
        BigRational::from_integer(pb.pow(e as u32))
    } else {
        BigRational::new(BigInt::one(), pb.pow((-e) as u32))
    }
}

/// Reduces `x` into `[0,1) x Z_{q_1} x ... x Z_{q_r}` modulo the diagonal `Z^S`.
/// Returns `(x - m, m)`.
pub fn reduce_mod_zs(x: &SemilocalPoint, cfg: &SConfig) -> (SemilocalPoint, SRational) {
    let mut t = BigRational::zero();
    for (y, &q) in x.padic_coords.iter().zip(&cfg.finite_places) {
        t += frac_part(y, q);
    }
    let fl = (x.real_coord - ratio_to_f64(&t)).floor();
    let m = &t + BigRational::from_integer(BigInt::from(fl as i128));
    let real = x.real_coord - ratio_to_f64(&m);
    // guard against round-off pushing the real part to 1 or slightly below 0
    let (real, m) = if real >= 1.0 {
        (real - 1.0, m + BigRational::one())
    } else if real < 0.0 {
        (real + 1.0, m - BigRational::one())
    } else {
        (real, m)
    };
    let padic = x.padic_coords.iter().map(|y| y - &m).collect();
    (
        SemilocalPoint { real_coord: real, padic_coords: padic },
        SRational(m),
    )
}

/// True if `x` lies in the fundamental domain `[0,1) x prod Z_{q_i}`.
pub fn in_fundamental_domain(x: &SemilocalPoint, cfg: &SConfig) -> bool {
    (0.0..1.0).contains(&x.real_coord)
        && x
            .padic_coords
            .iter()
            .zip(&cfg.finite_places)
            .all(|(y, &q)| y.is_zero() || valuation(y, q).unwrap() >= 0)
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Invalid(format!("cannot parse rational {s:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().map_err(|_| bad())?;
        let b: BigInt = b.trim().parse().map_err(|_| bad())?;
        if b.is_zero() {
            return Err(bad());
        }
        Ok(BigRational::new(a, b))
    } else {
        let a: BigInt = s.parse().map_err(|_| bad())?;
        Ok(BigRational::from_integer(a))
    }
}

pub fn abs_ratio(x: &BigRational) -> BigRational {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn valuations() {
        assert_eq!(valuation(&q(12, 1), 2).unwrap(), 2);
        assert_eq!(valuation(&q(1, 1), 7).unwrap(), 0);
        assert_eq!(valuation(&q(5, 8), 2).unwrap(), -3);
        assert_eq!(valuation(&q(0, 1), 2), Err(Error::InfiniteValuation));
    }

    #[test]
    fn fractional_parts() {
        assert_eq!(frac_part(&q(5, 4), 2), q(1, 4));
        assert_eq!(frac_part(&q(7, 1), 3), q(0, 1));
        assert_eq!(frac_part(&q(1, 3), 3), q(1, 3));
        assert_eq!(frac_part(&q(-1, 2), 2), q(1, 2));
        // 1/6 at 3: 1/6 = 1/(2*3), 2^{-1} = 2 mod 3, so <1/6>_3 = 2/3
        assert_eq!(frac_part(&q(1, 6), 3), q(2, 3));
        assert_eq!(frac_part_ratio(&Ratio::new(1, 6), 3), (2, 3));
    }

    #[test]
    fn characters() {
        assert!((char_e_p(&q(1, 2), 2) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!((char_e_p(&q(4, 1), 5) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let w = Complex64::from_polar(1.0, -2.0 * PI / 3.0);
        assert!((char_e_p(&q(1, 3), 3) - w).norm() < 1e-15);
        let cfg = SConfig::new(vec![2], 1).unwrap();
        let a = SemilocalPoint::diagonal(&q(3, 2), &cfg);
        assert!((char_e_s(&a, &cfg) - 1.0).norm() < 1e-14);
        let b = SemilocalPoint::new(0.5, vec![q(0, 1)], &cfg).unwrap();
        assert!((char_e_s(&b, &cfg) + 1.0).norm() < 1e-14);
    }

    #[test]
    fn modified_norms() {
        assert_eq!(modified_norm(&q(18, 1), 3).unwrap(), q(1, 9));
        assert_eq!(modified_norm(&q(12, 1), 2).unwrap(), q(1, 1));
        assert_eq!(modified_norm(&q(8, 1), 2).unwrap(), q(1, 1));
        assert_eq!(modified_norm(&q(5, 1), 2).unwrap(), q(1, 1));
        assert_eq!(modified_norm(&q(3, 1), 2).unwrap(), q(4, 1));
        assert_eq!(modified_norm_exp(&Ratio::new(12, 1), 2), Some(0));
        assert!(modified_norm(&q(0, 1), 2).is_err());
    }

    #[test]
    fn reduction_examples() {
        let cfg = SConfig::new(vec![2], 1).unwrap();
        let x = SemilocalPoint::new(3.7, vec![q(5, 4)], &cfg).unwrap();
        let (y, m) = reduce_mod_zs(&x, &cfg);
        assert_eq!(m.value(), &q(13, 4));
        assert!((y.real_coord - 0.45).abs() < 1e-12);
        assert_eq!(y.padic_coords[0], q(-2, 1));
        let x = SemilocalPoint::new(1.0, vec![q(0, 1)], &cfg).unwrap();
        let (y, m) = reduce_mod_zs(&x, &cfg);
        assert_eq!(m.value(), &q(1, 1));
        assert_eq!(y.real_coord, 0.0);
        assert_eq!(y.padic_coords[0], q(-1, 1));
    }

    #[test]
    fn config_validation() {
        assert_eq!(SConfig::new(vec![3], 1), Err(Error::MissingTwo));
        assert!(SConfig::new(vec![2, 3], 3).is_err());
        assert!(SConfig::new(vec![2, 3], 5).is_ok());
        assert!(SRational::from_ratio(1, 6, &SConfig::new(vec![2], 1).unwrap()).is_err());
    }
}
