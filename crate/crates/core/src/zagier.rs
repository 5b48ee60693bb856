//! Partial Zagier L-functions `L^S(s, delta)`: direct evaluation, the functional
//! equation, and the approximate functional equation at `s = 1`.

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Zero;
use serde::Serialize;
use serde_json::json;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::quadratic::{
    factor_discriminant_ratio, factorize, is_square_int, isqrt, kronecker, kronecker_srational,
    l1_quadratic_oracle, squarefree_decomposition, DiscriminantData,
};
use crate::snumber::SConfig;
use crate::specfun::{
    f_table, gamma_ratio, hurwitz_zeta, rgamma, upper_gamma, KernelFlavor, VTable,
};

type C = Complex64;

#[derive(Debug, Clone, Serialize)]
pub struct ZagierValue {
    pub value: C,
    pub route: String,
    pub params: serde_json::Value,
}

/// Fundamental discriminant and conductor square root of a discriminant `d = s^2 D`.
pub fn fundamental_part(d: i128) -> (i128, i128) {
    let (s, d0) = squarefree_decomposition(d);
    if d0.rem_euclid(4) == 1 {
        (d0, s)
    } else {
        (4 * d0, s / 2)
    }
}

/// `L(s, chi_D)` for a fundamental `D` via Hurwitz zeta.
pub fn l_primitive_hurwitz(d: i128, s: C) -> Result<C> {
    let n = d.abs();
    let mut sum = C::zero();
    for a in 1..n {
        let chi = kronecker(d, a);
        if chi != 0 {
            sum += chi as f64 * hurwitz_zeta(s, a as f64 / n as f64)?;
        }
    }
    Ok(sum * (-s * (n as f64).ln()).exp())
}

/// `L(s, chi_D)` for a fundamental `D` via the incomplete-Gamma smoothed sums.
pub fn l_primitive_smoothed(d: i128, s: C) -> Result<C> {
    let n = d.abs() as f64;
    let a = if d > 0 { 0.0 } else { 1.0 };
    let alpha = (s + a) / 2.0;
    let beta = (1.0 - s + a) / 2.0;
    let r = rgamma(alpha);
    let pref = ((0.5 - s) * (n / PI).ln()).exp();
    let kmax = (50.0 * n / PI).sqrt().ceil() as i128 + 1;
    let mut sum = C::zero();
    for k in 1..=kmax {
        let chi = kronecker(d, k);
        if chi == 0 {
            continue;
        }
        let x = PI * (k * k) as f64 / n;
        let lk = (k as f64).ln();
        let t = (-s * lk).exp() * upper_gamma(alpha, x)
            + ((s - 1.0) * lk).exp() * pref * upper_gamma(beta, x);
        sum += chi as f64 * t;
    }
    Ok(sum * r)
}

/// `L(s, (d/.))` for a (not necessarily fundamental) non-square discriminant `d`.
pub fn dirichlet_l(d: i128, s: C) -> Result<C> {
    if is_square_int(d) || d == 0 {
        return Err(Error::Square(d.to_string()));
    }
    let (fd, cond) = fundamental_part(d);
    let mut l = if fd.abs() <= 4000 {
        l_primitive_hurwitz(fd, s)?
    } else {
        l_primitive_smoothed(fd, s)?
    };
    for (p, _) in factorize(cond.unsigned_abs()) {
        let p = p as i128;
        l *= 1.0 - kronecker(fd, p) as f64 * (-s * (p as f64).ln()).exp();
    }
    Ok(l)
}

fn divisors(n: i128) -> Vec<i128> {
    let mut out = vec![1i128];
    for (p, e) in factorize(n.unsigned_abs()) {
        let len = out.len();
        let mut pk = 1i128;
        for _ in 0..e {
            pk *= p as i128;
            for i in 0..len {
                out.push(out[i] * pk);
            }
        }
    }
    out.sort();
    out
}

/// `sigma^(q)`, the part of the conductor square root prime to `S`.
fn sigma_q(data: &DiscriminantData) -> i128 {
    let r = data.tau / data.fund_d;
    let s = isqrt(r as u128) as i128;
    debug_assert_eq!(s * s, r);
    s
}

fn q_pow_c(q: u64, s: C) -> C {
    (s * (q as f64).ln()).exp()
}

fn euler_s(data: &DiscriminantData, cfg: &SConfig, s: C) -> C {
    let mut e = C::new(1.0, 0.0);
    for (&q, &eps) in cfg.finite_places.iter().zip(&data.epsilons) {
        e *= 1.0 - eps as f64 * q_pow_c(q, -s);
    }
    e
}

fn l_partial_raw(data: &DiscriminantData, cfg: &SConfig, s: C) -> Result<C> {
    let sq = sigma_q(data);
    let mut sum = C::zero();
    for f in divisors(sq) {
        let disc = data.tau / (f * f);
        sum += ((1.0 - 2.0 * s) * (f as f64).ln()).exp() * dirichlet_l(disc, s)?;
    }
    Ok(euler_s(data, cfg, s) * sum)
}

fn params_of(data: &DiscriminantData, s: C) -> serde_json::Value {
    json!({
        "delta": data.delta.to_string(),
        "tau": data.tau.to_string(),
        "fund_d": data.fund_d.to_string(),
        "iota": data.iota,
        "epsilons": data.epsilons,
        "s": [s.re, s.im],
    })
}

/// `L^S(s, delta)` from its definition as a finite combination of Dirichlet `L`-values.
/// At `s = 1` the values come from the class number formula.
pub fn partial_zagier_direct(delta: &Ratio<i128>, cfg: &SConfig, s: C) -> Result<ZagierValue> {
    let data = factor_discriminant_ratio(delta, cfg)?;
    if s == C::new(1.0, 0.0) {
        let sq = sigma_q(&data);
        let mut sum = 0.0;
        for f in divisors(sq) {
            sum += l1_quadratic_oracle(data.tau / (f * f), &cfg.finite_places)? / f as f64;
        }
        return Ok(ZagierValue {
            value: C::new(sum, 0.0),
            route: "class_number".into(),
            params: params_of(&data, s),
        });
    }
    Ok(ZagierValue {
        value: l_partial_raw(&data, cfg, s)?,
        route: "direct".into(),
        params: params_of(&data, s),
    })
}

/// The right side of the functional equation, built from `L^S(1 - s, delta)`.
pub fn functional_equation_rhs(delta: &Ratio<i128>, cfg: &SConfig, s: C) -> Result<ZagierValue> {
    let data = factor_discriminant_ratio(delta, cfg)?;
    let t = data.tau.abs() as f64;
    let iota = data.iota as f64;
    let g = (iota + 1.0 - s) / 2.0;
    if g.im == 0.0 && g.re <= 0.0 && g.re == g.re.round() {
        // Gamma pole against a trivial zero of L(1 - s); only the limit exists
        return Err(Error::Pole(format!("functional equation at s = {s}")));
    }
    let mut v = ((0.5 - s) * (t / PI).ln()).exp();
    for (&q, &eps) in cfg.finite_places.iter().zip(&data.epsilons) {
        let e = eps as f64;
        v *= (1.0 - e * q_pow_c(q, -s)) / (1.0 - e * q_pow_c(q, s - 1.0));
    }
    v *= gamma_ratio((iota + 1.0 - s) / 2.0, (iota + s) / 2.0);
    v *= l_partial_raw(&data, cfg, 1.0 - s)?;
    Ok(ZagierValue { value: v, route: "functional_equation".into(), params: params_of(&data, s) })
}

type VKey = (u8, Vec<i32>, Vec<u64>);

fn v_cache() -> &'static Mutex<HashMap<VKey, Arc<VTable>>> {
    static M: OnceLock<Mutex<HashMap<VKey, Arc<VTable>>>> = OnceLock::new();
    M.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached tabulated `V_{iota,eps}` at `s0 = 1`.
pub fn v_table(iota: u8, epsilons: &[i32], cfg: &SConfig) -> Result<Arc<VTable>> {
    let key = (iota, epsilons.to_vec(), cfg.finite_places.clone());
    if let Some(t) = v_cache().lock().unwrap().get(&key) {
        return Ok(t.clone());
    }
    let t = Arc::new(VTable::new(&KernelFlavor::at_one(iota, epsilons.to_vec()), cfg)?);
    v_cache().lock().unwrap().insert(key, t.clone());
    Ok(t)
}

/// `F`-cutoff: `F(x) < 1e-17` beyond.
pub const F_CUTOFF: f64 = 40.0;

/// Approximate functional equation for `L^S(1, delta)` with balance parameter `a`.
pub fn afe_l1(delta: &Ratio<i128>, cfg: &SConfig, a: f64) -> Result<ZagierValue> {
    if !(a > 0.0) {
        return Err(Error::Invalid("AFE parameter must be positive".into()));
    }
    let data = factor_discriminant_ratio(delta, cfg)?;
    let vt = v_table(data.iota, &data.epsilons, cfg)?;
    let ft = f_table();
    let dn = data.tau.abs() as f64;
    let sqrt_dn = dn.sqrt();
    let mut total = 0.0;
    let mut terms = 0u64;
    for f in divisors(sigma_q(&data)) {
        let f2 = (f * f) as f64;
        let base = *delta / Ratio::from_integer(f * f);
        let kmax_f = F_CUTOFF * a / f2;
        let kmax_v = vt.x_zero() * dn / (a * f2);
        let kmax = kmax_f.max(kmax_v).ceil() as i128;
        let mut k = 1i128;
        while k <= kmax {
            if cfg.coprime(k as u64) {
                let chi = kronecker_srational(&base, k);
                if chi != 0 {
                    let x = k as f64 * f2;
                    let fv = if x / a <= F_CUTOFF { ft.eval(x / a) } else { 0.0 };
                    let vv = vt.eval(x * a / dn);
                    total += chi as f64 / (k as f64 * f as f64) * (fv + x / sqrt_dn * vv);
                    terms += 1;
                }
            }
            k += 1;
        }
    }
    let mut params = params_of(&data, C::new(1.0, 0.0));
    params["A"] = json!(a);
    params["terms"] = json!(terms);
    Ok(ZagierValue { value: C::new(total, 0.0), route: "afe".into(), params })
}
