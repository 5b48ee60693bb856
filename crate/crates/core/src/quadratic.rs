//! Discriminant arithmetic: Kronecker symbols, the decomposition `delta = sigma^2 D`,
//! local invariants and an elementary oracle for `L(1, chi)`.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::snumber::{split_p, SConfig, SRational};

// ---------------------------------------------------------------------------
// primality and factorization

fn mul_mod_u128(a: u128, b: u128, m: u128) -> u128 {
    if let Some(c) = a.checked_mul(b) {
        return c % m;
    }
    let (mut a, mut b, mut r) = (a % m, b % m, 0u128);
    while b > 0 {
        if b & 1 == 1 {
            r = (r + a) % m;
        }
        a = (a << 1) % m;
        b >>= 1;
    }
    r
}

fn pow_mod_u128(mut b: u128, mut e: u128, m: u128) -> u128 {
    let mut r = 1u128 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod_u128(r, b, m);
        }
        b = mul_mod_u128(b, b, m);
        e >>= 1;
    }
    r
}

/// Miller-Rabin; deterministic below 3.3e24 with these bases.
pub fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u128; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];
    for &p in &SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'outer: for &a in &SMALL {
        let mut x = pow_mod_u128(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u128(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn pollard_rho(n: u128) -> u128 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u128;
    loop {
        let f = |x: u128| (mul_mod_u128(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u128, 2u128, 1u128);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd_u128(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

/// Prime factorization: trial division up to 10^6, Pollard rho beyond.
pub fn factorize(mut n: u128) -> Vec<(u128, u32)> {
    let mut out: BTreeMap<u128, u32> = BTreeMap::new();
    if n <= 1 {
        return vec![];
    }
    let mut p = 2u128;
    while p * p <= n && p <= 1_000_000 {
        while n % p == 0 {
            *out.entry(p).or_default() += 1;
            n /= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    let mut stack = vec![];
    if n > 1 {
        stack.push(n);
    }
    while let Some(m) = stack.pop() {
        if m == 1 {
            continue;
        }
        if is_prime(m) {
            *out.entry(m).or_default() += 1;
            continue;
        }
        let d = pollard_rho(m);
        stack.push(d);
        stack.push(m / d);
    }
    out.into_iter().collect()
}

pub fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn is_square_int(n: i128) -> bool {
    n >= 0 && {
        let r = isqrt(n as u128);
        r * r == n as u128
    }
}

/// True if the rational is a square in Q (zero counts as a square).
pub fn is_square_rational(x: &Ratio<i128>) -> bool {
    is_square_int(*x.numer()) && is_square_int(*x.denom())
}

/// `n = s^2 d` with `d` squarefree (sign carried by `d`).
pub fn squarefree_decomposition(n: i128) -> (i128, i128) {
    assert!(n != 0);
    let mut s = 1i128;
    let mut d = n.signum();
    for (p, e) in factorize(n.unsigned_abs()) {
        let p = p as i128;
        s *= p.pow(e / 2);
        if e % 2 == 1 {
            d *= p;
        }
    }
    (s, d)
}

// ---------------------------------------------------------------------------
// Kronecker symbol

/// Jacobi symbol `(a/n)` for odd `n > 0`.
pub fn jacobi(a: i128, n: i128) -> i32 {
    debug_assert!(n > 0 && n % 2 == 1);
    let mut a = a.rem_euclid(n);
    let mut n = n;
    let mut t = 1;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let r = n % 8;
            if r == 3 || r == 5 {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// The Kronecker symbol `(a/n)`, completely multiplicative in `n`.
pub fn kronecker(a: i128, n: i128) -> i32 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut t = 1;
    let mut n = n;
    if n < 0 {
        n = -n;
        if a < 0 {
            t = -t;
        }
    }
    let mut v = 0;
    while n % 2 == 0 {
        n /= 2;
        v += 1;
    }
    if v > 0 {
        if a % 2 == 0 {
            return 0;
        }
        let r = a.rem_euclid(8);
        if v % 2 == 1 && (r == 3 || r == 5) {
            t = -t;
        }
    }
    t * jacobi(a, n)
}

/// Kronecker symbol with an S-rational top argument: the S-supported denominator is
/// cleared by its square, which does not change the symbol for `k` coprime to it.
pub fn kronecker_srational(x: &Ratio<i128>, k: i128) -> i32 {
    let num = *x.numer();
    let den = *x.denom();
    debug_assert!(crate::snumber::mod_inverse_exists(den, k));
    kronecker(num * den, k)
}

// ---------------------------------------------------------------------------
// local invariants

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplittingType {
    Split,
    Inert,
    Ramified,
}

impl SplittingType {
    pub fn chi(self) -> i32 {
        match self {
            SplittingType::Split => 1,
            SplittingType::Inert => -1,
            SplittingType::Ramified => 0,
        }
    }
}

/// `chi(p)` of `Q_p(sqrt(delta))`: 1 split (including squares), -1 inert, 0 ramified.
pub fn local_chi(delta: &Ratio<i128>, p: u64) -> i32 {
    assert!(*delta.numer() != 0);
    let (va, ua) = split_p(*delta.numer(), p);
    let (vb, ub) = split_p(*delta.denom(), p);
    let v = va as i32 - vb as i32;
    if v.rem_euclid(2) == 1 {
        return 0;
    }
    if p == 2 {
        // u = ua/ub with ub odd, so u = ua*ub mod 8
        let u = (ua.rem_euclid(8) * ub.rem_euclid(8)) % 8;
        match u {
            1 => 1,
            5 => -1,
            _ => 0,
        }
    } else {
        let pi = p as i128;
        let u = (ua.rem_euclid(pi) * ub.rem_euclid(pi)) % pi;
        jacobi(u, pi)
    }
}

/// `k_p` for `T^2 - 4N = delta`, read off from the valuation and unit part.
pub fn local_k(delta: &Ratio<i128>, p: u64) -> i32 {
    let e = crate::snumber::modified_norm_exp(delta, p).expect("delta != 0");
    debug_assert!(e % 2 == 0);
    -e / 2
}

pub fn splitting_type(delta: &BigRational, p: u64) -> SplittingType {
    let d = Ratio::new(
        delta.numer().to_i128().expect("delta fits i128"),
        delta.denom().to_i128().expect("delta fits i128"),
    );
    match local_chi(&d, p) {
        1 => SplittingType::Split,
        -1 => SplittingType::Inert,
        _ => SplittingType::Ramified,
    }
}

// ---------------------------------------------------------------------------
// discriminant data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantData {
    pub delta: Ratio<i128>,
    pub sigma: Ratio<i128>,
    pub fund_d: i128,
    pub iota: u8,
    /// `tau = delta / sigma_(q)^2`, an integer; `|tau| = |delta|'_{inf,q}`.
    pub tau: i128,
    pub epsilons: Vec<i32>,
    pub k_map: BTreeMap<u64, i32>,
}

fn ratio_valuation(x: &Ratio<i128>, p: u64) -> i32 {
    crate::snumber::valuation_ratio(x, p).expect("nonzero")
}

/// Decomposes a non-square `delta` in `Z^S` (or any S-rational) as `sigma^2 D`.
pub fn factor_discriminant_ratio(delta: &Ratio<i128>, cfg: &SConfig) -> Result<DiscriminantData> {
    if *delta.numer() == 0 || is_square_rational(delta) {
        return Err(Error::Square(delta.to_string()));
    }
    let (sn, dn) = squarefree_decomposition(*delta.numer());
    let (sd, dd) = squarefree_decomposition(*delta.denom());
    // delta = (sn/sd)^2 * dn/dd = (sn/(sd*dd))^2 * dn*dd
    let d0 = dn * dd;
    let (s0, d0) = {
        let (s2, d2) = squarefree_decomposition(d0);
        (s2, d2)
    };
    let mut sigma = Ratio::new(sn * s0, sd * dd);
    let fund_d = if d0.rem_euclid(4) == 1 {
        d0
    } else {
        sigma /= 2;
        4 * d0
    };
    debug_assert_eq!(sigma * sigma * Ratio::from_integer(fund_d), *delta);
    if sigma < Ratio::from_integer(0) {
        sigma = -sigma;
    }
    let iota = if *delta.numer() > 0 { 0 } else { 1 };
    let mut sigma_q = Ratio::from_integer(1i128);
    let mut k_map = BTreeMap::new();
    for &q in &cfg.finite_places {
        let k = ratio_valuation(&sigma, q);
        debug_assert_eq!(k, local_k(delta, q), "k_{q} of {delta}");
        k_map.insert(q, k);
        sigma_q *= Ratio::from_integer(q as i128).pow(k);
    }
    for (p, _) in factorize(sigma.numer().unsigned_abs()) {
        k_map.insert(p as u64, ratio_valuation(&sigma, p as u64));
    }
    for (p, _) in factorize(sigma.denom().unsigned_abs()) {
        k_map.insert(p as u64, ratio_valuation(&sigma, p as u64));
    }
    let tau_r = *delta / (sigma_q * sigma_q);
    if !tau_r.is_integer() {
        return Err(Error::NotSRational(delta.to_string()));
    }
    let tau = tau_r.to_integer();
    let epsilons: Vec<i32> = cfg
        .finite_places
        .iter()
        .map(|&q| {
            let eps = kronecker(tau, q as i128);
            debug_assert_eq!(eps, {
                let e = crate::snumber::modified_norm_exp(delta, q).unwrap();
                let qn = Ratio::from_integer(q as i128).pow(e);
                kronecker_srational(&(*delta * qn), q as i128)
            });
            debug_assert_eq!(eps, local_chi(delta, q));
            eps
        })
        .collect();
    Ok(DiscriminantData { delta: *delta, sigma, fund_d, iota, tau, epsilons, k_map })
}

pub fn factor_discriminant(delta: &SRational, cfg: &SConfig) -> Result<DiscriminantData> {
    let d = delta
        .to_ratio()
        .ok_or_else(|| Error::Invalid(format!("{delta} exceeds i128")))?;
    factor_discriminant_ratio(&d, cfg)
}

// ---------------------------------------------------------------------------
// class numbers and L(1, chi_D)

/// Class-group data of a fundamental discriminant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassData {
    /// `h` for `D < 0`; narrow class number `h+` for `D > 0`.
    pub h: u64,
    /// Roots of unity for `D < 0`.
    pub w: u64,
    /// `log eps+` of the totally positive fundamental unit for `D > 0`.
    pub log_unit: f64,
}

fn class_number_negative(d: i128) -> u64 {
    let n = -d;
    let mut h = 0u64;
    let amax = isqrt((n / 3) as u128) as i128;
    for a in 1..=amax {
        for b in -a + 1..=a {
            if (b * b + n) % (4 * a) != 0 {
                continue;
            }
            let c = (b * b + n) / (4 * a);
            if c < a {
                continue;
            }
            if c == a && b < 0 {
                continue;
            }
            if num_integer::gcd(num_integer::gcd(a, b.abs()), c) != 1 {
                continue;
            }
            h += 1;
        }
    }
    h
}

fn narrow_class_number_positive(d: i128) -> u64 {
    let s = isqrt(d as u128) as i128;
    let mut forms = Vec::new();
    let mut b = if d % 2 == 0 { 2 } else { 1 };
    while b <= s {
        let m = (d - b * b) / 4;
        let big = |a: i128| {
            let x = 2 * a + b;
            x * x > d && (2 * a - b <= 0 || (2 * a - b) * (2 * a - b) < d)
        };
        for a in 1..=((s + b) / 2 + 1) {
            if m % a != 0 || !big(a) {
                continue;
            }
            let c = -m / a;
            forms.push((a, b, c));
            forms.push((-a, b, -c));
        }
        b += 2;
    }
    let index: HashMap<(i128, i128, i128), usize> =
        forms.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let mut seen = vec![false; forms.len()];
    let mut cycles = 0;
    for i in 0..forms.len() {
        if seen[i] {
            continue;
        }
        cycles += 1;
        let mut j = i;
        while !seen[j] {
            seen[j] = true;
            let (_, b, c) = forms[j];
            let m2 = 2 * c.abs();
            let r = s - (s + b).rem_euclid(m2);
            let next = (c, r, (r * r - d) / (4 * c));
            j = *index
                .get(&next)
                .unwrap_or_else(|| panic!("rho left the reduced set at {next:?} (D={d})"));
        }
    }
    cycles
}

/// `log eps+` via continued-fraction convergents of `omega = (b0 + sqrt D)/2`.
fn log_fundamental_unit_plus(d: i128) -> f64 {
    let b0 = d.rem_euclid(2);
    let nm = (b0 * b0 - d) / 4;
    let s = isqrt(d as u128) as i128;
    let (mut pp, mut p) = (BigInt::zero(), BigInt::one());
    let (mut qq, mut q) = (BigInt::one(), BigInt::zero());
    let (mut pv, mut qv) = (b0, 2i128);
    for _ in 0..1_000_000 {
        let a = (pv + s).div_euclid(qv);
        let np = &p * a + &pp;
        let nq = &q * a + &qq;
        pp = std::mem::replace(&mut p, np);
        qq = std::mem::replace(&mut q, nq);
        pv = a * qv - pv;
        qv = (d - pv * pv) / qv;
        let norm = &p * &p - &p * &q * b0 + &q * &q * nm;
        if norm.abs().is_one() {
            // eps = (2p - q b0 + q sqrt D)/2
            let t = BigInt::from(2) * &p - &q * b0;
            let r = BigRational::new(t, q.clone()).to_f64().unwrap();
            let le = crate::snumber::ratio_to_f64(&BigRational::from_integer(q.clone())).ln()
                + ((r + (d as f64).sqrt()) / 2.0).ln();
            return if norm.is_one() { le } else { 2.0 * le };
        }
    }
    panic!("no unit found for D={d}");
}

fn class_cache() -> &'static Mutex<HashMap<i128, ClassData>> {
    static CACHE: OnceLock<Mutex<HashMap<i128, ClassData>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub fn is_fundamental(d: i128) -> bool {
    if d == 0 || d == 1 || is_square_int(d) {
        return false;
    }
    let r = d.rem_euclid(4);
    if r == 1 {
        squarefree_decomposition(d).0 == 1
    } else if r == 0 {
        let m = d / 4;
        let mr = m.rem_euclid(4);
        (mr == 2 || mr == 3) && squarefree_decomposition(m).0 == 1
    } else {
        false
    }
}

pub fn class_data(d: i128) -> ClassData {
    assert!(is_fundamental(d), "{d} is not a fundamental discriminant");
    if let Some(c) = class_cache().lock().unwrap().get(&d) {
        return *c;
    }
    let c = if d < 0 {
        let w = match d {
            -3 => 6,
            -4 => 4,
            _ => 2,
        };
        ClassData { h: class_number_negative(d), w, log_unit: 0.0 }
    } else {
        ClassData { h: narrow_class_number_positive(d), w: 2, log_unit: log_fundamental_unit_plus(d) }
    };
    class_cache().lock().unwrap().insert(d, c);
    c
}

/// `L(1, chi_D)` for a fundamental discriminant by the class number formula.
pub fn l1_primitive(d: i128) -> f64 {
    let c = class_data(d);
    if d < 0 {
        2.0 * PI * c.h as f64 / (c.w as f64 * ((-d) as f64).sqrt())
    } else {
        c.h as f64 * c.log_unit / (d as f64).sqrt()
    }
}

/// `L(1, (D'/.))` for `D' = sigma'^2 D`, with the Euler factors at `euler_strip` removed.
pub fn l1_quadratic_oracle(d_prime: i128, euler_strip: &[u64]) -> Result<f64> {
    if d_prime == 0 || is_square_int(d_prime) {
        return Err(Error::Square(d_prime.to_string()));
    }
    let r = d_prime.rem_euclid(4);
    if r != 0 && r != 1 {
        return Err(Error::Invalid(format!("{d_prime} is not a discriminant")));
    }
    let (s, d0) = squarefree_decomposition(d_prime);
    let (sigma, d) = if d0.rem_euclid(4) == 1 { (s, d0) } else { (s / 2, 4 * d0) };
    let mut l = l1_primitive(d);
    for (p, _) in factorize(sigma.unsigned_abs()) {
        let p = p as i128;
        l *= 1.0 - kronecker(d, p) as f64 / p as f64;
    }
    let mut seen = vec![];
    for &p in euler_strip {
        if seen.contains(&p) {
            continue;
        }
        seen.push(p);
        l *= 1.0 - kronecker(d_prime, p as i128) as f64 / p as f64;
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(5, 11), 1);
        assert_eq!(kronecker(5, 1), 1);
        assert_eq!(kronecker(5, 2), -1);
        assert_eq!(kronecker(-4, 3), -1);
        assert_eq!(kronecker(-3, 3), 0);
        assert_eq!(kronecker(12, 2), 0);
    }

    #[test]
    fn factorization() {
        assert_eq!(factorize(360), vec![(2, 3), (3, 2), (5, 1)]);
        let big = 1_000_003u128 * 1_000_033u128;
        assert_eq!(factorize(big), vec![(1_000_003, 1), (1_000_033, 1)]);
        assert!(is_prime(2_147_483_647));
    }

    #[test]
    fn discriminants() {
        let cfg = SConfig::new(vec![2], 1).unwrap();
        let d = factor_discriminant_ratio(&Ratio::from_integer(5), &cfg).unwrap();
        assert_eq!((d.sigma, d.fund_d, d.iota), (Ratio::from_integer(1), 5, 0));
        let d = factor_discriminant_ratio(&Ratio::from_integer(-4), &cfg).unwrap();
        assert_eq!((d.fund_d, d.iota), (-4, 1));
        let d = factor_discriminant_ratio(&Ratio::from_integer(45), &cfg).unwrap();
        assert_eq!((d.sigma, d.fund_d, d.k_map[&3]), (Ratio::from_integer(3), 5, 1));
        assert_eq!(d.tau, 45);
        let d = factor_discriminant_ratio(&Ratio::from_integer(3), &cfg).unwrap();
        assert_eq!((d.sigma, d.fund_d, d.k_map[&2]), (Ratio::new(1, 2), 12, -1));
        assert_eq!(d.tau, 12);
        let d = factor_discriminant_ratio(&Ratio::new(5, 4), &cfg).unwrap();
        assert_eq!((d.tau, d.k_map[&2]), (5, -1));
        assert!(factor_discriminant_ratio(&Ratio::from_integer(9), &cfg).is_err());
        assert!(factor_discriminant_ratio(&Ratio::from_integer(0), &cfg).is_err());
    }

    #[test]
    fn splitting() {
        let q = |n: i64| BigRational::from_integer(n.into());
        assert_eq!(splitting_type(&q(5), 11), SplittingType::Split);
        assert_eq!(splitting_type(&q(5), 3), SplittingType::Inert);
        assert_eq!(splitting_type(&q(45), 5), SplittingType::Ramified);
        assert_eq!(splitting_type(&q(17), 2), SplittingType::Split);
        assert_eq!(splitting_type(&q(5), 2), SplittingType::Inert);
        assert_eq!(splitting_type(&q(12), 2), SplittingType::Ramified);
    }

    #[test]
    fn class_numbers() {
        assert_eq!(class_data(-23).h, 3);
        assert_eq!(class_data(-4).h, 1);
        assert_eq!(class_data(-84).h, 4);
        assert_eq!(class_data(5).h, 1);
        // Q(sqrt 3): h = 1 but N(eps) = +1, so h+ = 2
        assert_eq!(class_data(12).h, 2);
        assert!((class_data(12).log_unit - (2.0 + 3f64.sqrt()).ln()).abs() < 1e-13);
        // Q(sqrt 10): h = 2, eps = 3 + sqrt 10 of norm -1
        assert_eq!(class_data(40).h, 2);
    }

    #[test]
    fn oracle_examples() {
        let a = l1_quadratic_oracle(5, &[]).unwrap();
        assert!((a - 0.430409).abs() < 1e-6);
        assert!((a - 2.0 * ((1.0 + 5f64.sqrt()) / 2.0).ln() / 5f64.sqrt()).abs() < 1e-14);
        let b = l1_quadratic_oracle(-4, &[]).unwrap();
        assert!((b - PI / 4.0).abs() < 1e-14);
        let c = l1_quadratic_oracle(5, &[2]).unwrap();
        assert!((c - 1.5 * a).abs() < 1e-14);
    }
}
