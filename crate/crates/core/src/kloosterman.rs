//! Generalized Kloosterman sums `Kl^S_{k,f}(xi, m)`, their local factors, and the
//! Dirichlet series `D^S(s, m)`.

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::quadratic::{factorize, jacobi};
use crate::snumber::{frac_part_ratio, mod_inverse, mul_mod, split_p, SConfig};
use crate::specfun::zeta;

type C = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KloostermanParams {
    pub k: u64,
    pub f: u64,
    pub xi: Ratio<i128>,
    pub m: Ratio<i128>,
}

impl KloostermanParams {
    pub fn new(k: u64, f: u64, xi: Ratio<i128>, m: Ratio<i128>) -> Self {
        KloostermanParams { k, f, xi, m }
    }
}

/// `x mod n` for an S-rational `x` whose denominator is invertible mod `n`.
pub fn residue_mod(x: &Ratio<i128>, n: i128) -> i128 {
    if n == 1 {
        return 0;
    }
    let inv = mod_inverse(x.denom().rem_euclid(n), n);
    mul_mod(x.numer().rem_euclid(n), inv, n)
}

/// `e(x) prod_i e_{q_i}(x)` for rational `x`, computed exactly modulo 1.
pub fn global_phase(x: &Ratio<i128>, cfg: &SConfig) -> C {
    // e_q(x) = e(-<x>_q), so the product is e(x - sum <x>_q)
    let mut y = *x;
    for &q in &cfg.finite_places {
        let (a, pe) = frac_part_ratio(x, q);
        if a != 0 {
            y -= Ratio::new(a, pe);
        }
    }
    let r = y - Ratio::from_integer(y.floor().to_integer());
    let (s, c) = (2.0 * std::f64::consts::PI * (*r.numer() as f64 / *r.denom() as f64)).sin_cos();
    C::new(c, s)
}

fn check_params(p: &KloostermanParams, cfg: &SConfig) -> Result<()> {
    if p.k == 0 || p.f == 0 || !cfg.coprime(p.k) || !cfg.coprime(p.f) {
        return Err(Error::Invalid(format!("k={} f={} must be positive and prime to S", p.k, p.f)));
    }
    for (x, name) in [(&p.xi, "xi"), (&p.m, "m")] {
        let mut d = *x.denom();
        for &q in &cfg.finite_places {
            d = split_p(d, q).1;
        }
        if d != 1 {
            return Err(Error::NotSRational(format!("{name} = {x}")));
        }
    }
    if p.k as u128 * (p.f as u128).pow(2) > 1_000_000_000_000 {
        return Err(Error::Invalid("k f^2 too large for enumeration".into()));
    }
    Ok(())
}

/// `Kl` with the enumeration of `a` started at `offset` (the result is independent of it).
pub fn kl_sum_from(p: &KloostermanParams, cfg: &SConfig, offset: i128) -> Result<C> {
    check_params(p, cfg)?;
    let k = p.k as i128;
    let f2 = (p.f as i128).pow(2);
    let n = k * f2;
    let m4 = residue_mod(&(p.m * 4), n);
    let mut sum = C::zero();
    for a0 in 0..n {
        let a = a0 + offset;
        let t = (mul_mod(a, a, n) - m4).rem_euclid(n);
        if t % f2 != 0 {
            continue;
        }
        let sym = jacobi((t / f2).rem_euclid(k), k);
        if sym == 0 {
            continue;
        }
        let x = p.xi * Ratio::new(a, n);
        sum += sym as f64 * global_phase(&x, cfg);
    }
    Ok(sum)
}

/// The partial generalized Kloosterman sum by direct enumeration of `a mod k f^2`.
pub fn kl_sum(p: &KloostermanParams, cfg: &SConfig) -> Result<C> {
    kl_sum_from(p, cfg, 0)
}

/// Local sum over `a mod p^{u+2v}` with `a^2 - 4m = 0 (p^{2v})` of `((a^2-4m)/p^{2v} | p^u)`.
pub fn kl_local(p: u64, u: u32, v: u32, m: &Ratio<i128>) -> Result<i64> {
    if p == 2 {
        return Err(Error::Invalid("local sums at 2 are not needed".into()));
    }
    let pi = p as i128;
    if split_p(*m.denom(), p).0 > 0 {
        return Err(Error::Invalid(format!("{m} is not {p}-integral")));
    }
    let n = pi.pow(u + 2 * v);
    let p2v = pi.pow(2 * v);
    let m4 = residue_mod(&(*m * 4), n);
    let mut sum = 0i64;
    for a in 0..n {
        let t = (mul_mod(a, a, n) - m4).rem_euclid(n);
        if t % p2v != 0 {
            continue;
        }
        if u == 0 {
            sum += 1;
            continue;
        }
        let j = jacobi((t / p2v).rem_euclid(pi), pi);
        sum += if u % 2 == 0 { (j * j) as i64 } else { j as i64 };
    }
    Ok(sum)
}

type LocalKey = (u64, u32, u32, i128);

fn local_cache() -> &'static Mutex<HashMap<LocalKey, i64>> {
    static M: OnceLock<Mutex<HashMap<LocalKey, i64>>> = OnceLock::new();
    M.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Memoized `kl_local`; `m` enters only through its residue mod `p^{u+2v}`.
pub fn kl_local_cached(p: u64, u: u32, v: u32, m: &Ratio<i128>) -> Result<i64> {
    let n = (p as i128).pow(u + 2 * v);
    let key = (p, u, v, residue_mod(m, n));
    if let Some(&x) = local_cache().lock().unwrap().get(&key) {
        return Ok(x);
    }
    let x = kl_local(p, u, v, m)?;
    local_cache().lock().unwrap().insert(key, x);
    Ok(x)
}

/// `Kl_{k,f}(0, m)` as the product of local sums over `p | k f`.
pub fn kl_crt(k: u64, f: u64, m: &Ratio<i128>) -> Result<i64> {
    let mut primes: Vec<u64> = factorize(k as u128).into_iter().map(|(p, _)| p as u64).collect();
    for (p, _) in factorize(f as u128) {
        if !primes.contains(&(p as u64)) {
            primes.push(p as u64);
        }
    }
    let mut prod = 1i64;
    for p in primes {
        let u = split_p(k as i128, p).0;
        let v = split_p(f as i128, p).0;
        prod *= kl_local_cached(p, u, v, m)?;
        if prod == 0 {
            break;
        }
    }
    Ok(prod)
}

fn pow_c(p: u64, s: C) -> C {
    (s * (p as f64).ln()).exp()
}

fn check_pole(den: C, what: &str) -> Result<()> {
    if den.norm() < 1e-12 {
        return Err(Error::Pole(what.into()));
    }
    Ok(())
}

fn p_part_valuation(m: &Ratio<i128>, p: u64) -> u32 {
    if *m.numer() == 0 {
        return 0;
    }
    split_p(*m.numer(), p).0
}

/// `D_p(s, m)` in closed form.
pub fn d_local_closed(p: u64, s: C, m: &Ratio<i128>) -> Result<C> {
    let den = 1.0 - pow_c(p, -2.0 * s);
    check_pole(den, "p^{2s} = 1")?;
    let mut v = (1.0 - pow_c(p, -s - 1.0)) / den;
    let e = p_part_valuation(m, p);
    if e > 0 {
        let den2 = 1.0 - pow_c(p, -s);
        check_pole(den2, "p^s = 1")?;
        v *= (1.0 - pow_c(p, -s * (e as f64 + 1.0))) / den2;
    }
    Ok(v)
}

/// `D_p(s, m)` as the truncated local series `sum_{u,v} Kl_p / p^{u(s+1) + v(2s+1)}`.
pub fn d_local_series(p: u64, s: C, m: &Ratio<i128>, umax: u32, vmax: u32) -> Result<C> {
    let mut sum = C::zero();
    for u in 0..=umax {
        for v in 0..=vmax {
            let kl = kl_local_cached(p, u, v, m)?;
            if kl != 0 {
                sum += kl as f64 * pow_c(p, -(u as f64) * (s + 1.0) - v as f64 * (2.0 * s + 1.0));
            }
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DRoute {
    Closed,
    Truncated { u: u64, v: u64 },
}

/// `D^S(s, m)` by the closed Euler product or the truncated double series.
pub fn d_global(s: C, m: &Ratio<i128>, cfg: &SConfig, route: DRoute) -> Result<C> {
    if m.is_zero() {
        return Err(Error::Invalid("D(s, 0) is not defined here".into()));
    }
    match route {
        DRoute::Closed => {
            let den = zeta(s + 1.0)?;
            check_pole(den, "zeta(s+1) = 0")?;
            let mut v = zeta(2.0 * s)? / den;
            for &q in &cfg.finite_places {
                let d = 1.0 - pow_c(q, -s - 1.0);
                check_pole(d, "q^{s+1} = 1")?;
                v *= (1.0 - pow_c(q, -2.0 * s)) / d;
            }
            for (p, _) in factorize(m.numer().unsigned_abs()) {
                let p = p as u64;
                if cfg.in_s(p) {
                    continue;
                }
                let e = p_part_valuation(m, p);
                let d = 1.0 - pow_c(p, -s);
                check_pole(d, "p^s = 1")?;
                v *= (1.0 - pow_c(p, -s * (e as f64 + 1.0))) / d;
            }
            Ok(v)
        }
        DRoute::Truncated { u, v } => {
            if s.re <= 1.0 {
                return Err(Error::Invalid("truncated D needs Re s > 1".into()));
            }
            let mut sum = C::zero();
            for f in (1..=v).filter(|&f| cfg.coprime(f)) {
                let ff = pow_c(f, -(2.0 * s + 1.0));
                let mut inner = C::zero();
                for k in (1..=u).filter(|&k| cfg.coprime(k)) {
                    let kl = if k * f * f <= 2_000 {
                        let p = KloostermanParams::new(k, f, Ratio::zero(), *m);
                        kl_sum(&p, cfg)?.re.round() as i64
                    } else {
                        kl_crt(k, f, m)?
                    };
                    if kl != 0 {
                        inner += kl as f64 * pow_c(k, -(s + 1.0));
                    }
                }
                sum += ff * inner;
            }
            Ok(sum)
        }
    }
}
