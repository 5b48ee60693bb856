//! Elliptic terms: the direct sum over `T`, its Poisson-summed form split into
//! `xi = 0` and `xi != 0`, the square-discriminant sum, and the spectral-side traces.
//!
//! Everything is organized by `(sign, nu)`: a sign `+-` and an exponent vector `nu`
//! with `N = +- n q^nu`. For each of those the archimedean variable is sampled on a grid
//! over the support of `theta_inf`, and the p-adic variables are grouped into balls on
//! which `|y^2 - 4N|'_q` and the local character are constant.

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kloosterman::{global_phase, kl_crt, residue_mod};
use crate::orbital::{
    delta_balls, hecke_volume, standard_theta_data, theta_inf_integrals, theta_step_function,
    ArchWeight, FChoice, PadicStepFunction, Piece, ThetaData, ThetaInf,
};
use crate::quadratic::{is_prime, is_square_rational, isqrt, kronecker_srational, local_chi};
use crate::snumber::{e, e_frac, frac_part_ratio, mod_inverse, modified_norm_exp, split_p, SConfig};
use crate::specfun::{contour_nodes, f_table, gamma_ratio, gl16, mellin_f, zeta, ContourSpec, VTable};
use crate::zagier::{partial_zagier_direct, v_table, F_CUTOFF};

type Q = Ratio<i128>;
type C = Complex64;

/// `ln w` above which the `xi = 0` kernels are evaluated on the line `Re s = 3/2`
/// minus the residues in between.
const LN_SWITCH: f64 = 3.0;
const SHELLS: usize = 6;

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Truncation {
    /// bound on the archimedean frequency `|omega| = 2 |xi| sqrt(n q^nu) / (k f^2)`
    pub omega_max: f64,
    /// hard cap on `k f^2`
    pub k_max: u64,
    pub f_max: u64,
    /// trapezoid step on the support of `theta_inf`
    pub x_step: f64,
    /// Gauss panels per segment when the support meets `x^2 = 1`
    pub arch_panels: usize,
    /// depth cap of the p-adic refinement
    pub padic_depth: i32,
    /// p-adic classes and whole `(k, f)` blocks are dropped when their bound is below this
    pub kernel_cut: f64,
    pub contour_density: usize,
    pub t_max: f64,
    pub jobs: usize,
    /// signal `NoDecay` when the outermost frequency shell is not the smallest
    pub decay_check: bool,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            omega_max: 32.0,
            k_max: 5000,
            f_max: 71,
            x_step: 1.0 / 64.0,
            arch_panels: 24,
            padic_depth: 60,
            kernel_cut: 1e-7,
            contour_density: 32,
            t_max: 30.0,
            jobs: 1,
            decay_check: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticConfig {
    pub cfg: SConfig,
    pub theta: ThetaData,
    pub vartheta: f64,
    pub truncation: Truncation,
    /// relative tolerance of the final residual
    pub tolerance: f64,
}

impl EllipticConfig {
    pub fn new(
        cfg: SConfig,
        theta: ThetaData,
        vartheta: f64,
        truncation: Truncation,
        tolerance: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        theta.validate()?;
        if !(vartheta > 0.0 && vartheta < 1.0) {
            return Err(Error::Config(format!("vartheta = {vartheta} must lie in (0, 1)")));
        }
        let t = &truncation;
        if !(t.omega_max > 0.0 && t.x_step > 0.0 && t.kernel_cut > 0.0 && t.t_max > 0.0)
            || t.k_max == 0
            || t.f_max == 0
            || t.arch_panels == 0
            || t.contour_density < 16
        {
            return Err(Error::Config("truncation parameters must be positive".into()));
        }
        for ((_, _, i), s) in &theta.theta_q {
            match cfg.finite_places.get(*i) {
                Some(&q) if q == s.prime => {}
                _ => return Err(Error::Config(format!("theta_q at place index {i} has prime {}", s.prime))),
            }
        }
        for th in [&theta.theta_inf_plus, &theta.theta_inf_minus] {
            if th.amplitude != 0.0 && !(th.half_width > 0.0 && th.half_width.is_finite()) {
                return Err(Error::Config("theta_inf needs a finite positive half width".into()));
            }
        }
        Ok(EllipticConfig { cfg, theta, vartheta, truncation, tolerance })
    }

    /// Config with `theta_q` generated from standard test functions.
    pub fn standard(
        cfg: SConfig,
        f: &[FChoice],
        plus: ThetaInf,
        minus: ThetaInf,
        vartheta: f64,
        truncation: Truncation,
    ) -> Result<Self> {
        if f.len() != cfg.r() {
            return Err(Error::Config(format!("{} test functions for {} places", f.len(), cfg.r())));
        }
        let theta = standard_theta_data(f, &cfg.finite_places, cfg.hecke_n, plus, minus, truncation.padic_depth)?;
        Self::new(cfg, theta, vartheta, truncation, 1e-2)
    }

    pub fn echo(&self) -> serde_json::Value {
        json!({
            "S": self.cfg.finite_places,
            "n": self.cfg.hecke_n,
            "vartheta": self.vartheta,
            "theta_inf_plus": self.theta.theta_inf_plus,
            "theta_inf_minus": self.theta.theta_inf_minus,
            "f": self.theta.f_choices.iter().map(|f| f.label()).collect::<Vec<_>>(),
            "truncation": self.truncation,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TermReport {
    pub name: String,
    pub value: C,
    pub truncation_error_estimate: f64,
    pub params_echo: serde_json::Value,
}

impl Serialize for TermReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        json!({
            "name": self.name,
            "re": self.value.re,
            "im": self.value.im,
            "trunc_est": self.truncation_error_estimate,
            "params_echo": self.params_echo,
        })
        .serialize(s)
    }
}

fn report(name: &str, value: C, est: f64, ec: &EllipticConfig, extra: serde_json::Value) -> TermReport {
    let mut params = ec.echo();
    params["details"] = extra;
    TermReport { name: name.into(), value, truncation_error_estimate: est, params_echo: params }
}

// ---------------------------------------------------------------------------
// small helpers

fn vq(x: &Q, q: u64) -> i32 {
    if x.is_zero() {
        return i32::MAX;
    }
    split_p(*x.numer(), q).0 as i32 - split_p(*x.denom(), q).0 as i32
}

fn in_ball(y: &Q, c: &Q, r: i32, q: u64) -> bool {
    let d = *y - *c;
    d.is_zero() || vq(&d, q) >= r
}

fn qf(q: u64, e: i32) -> f64 {
    (q as f64).powi(e)
}

fn to_f64(x: &Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Maps `f` over `items` on `jobs` threads; the output order is the input order.
fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() < 2 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|sc| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| sc.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// `(d/f^2 | k)`, zero when `f^2` does not divide `d` in `Z_(S)`.
fn chi_kf(delta: &Q, k: u64, f: u64) -> i32 {
    let f2 = (f * f) as i128;
    if delta.numer() % f2 != 0 {
        return 0;
    }
    kronecker_srational(&(*delta / Q::from_integer(f2)), k as i128)
}

/// The AFE kernel `F(K/d^vt) + K/sqrt(d) V(K/d^{1-vt})` at `|delta|' = d`.
fn kernel(kk: f64, d: f64, vt: f64, v: &VTable) -> f64 {
    let fa = kk / d.powf(vt);
    let fv = if fa <= F_CUTOFF { f_table().eval(fa) } else { 0.0 };
    fv + kk / d.sqrt() * v.eval(kk / d.powf(1.0 - vt))
}

fn hecke_parts(cfg: &SConfig) -> Vec<(u64, u32)> {
    cfg.hecke_factors()
}

// ---------------------------------------------------------------------------
// archimedean grid

#[derive(Debug, Clone, Copy)]
struct XNode {
    x: f64,
    /// quadrature weight times `theta_inf(x)`
    w: f64,
    /// `|x^2 - sign|`
    a: f64,
    iota: u8,
}

struct XGrid {
    nodes: Vec<XNode>,
    /// step when the nodes are equispaced (trapezoid rule)
    step: Option<f64>,
}

fn x_grid(theta: &ThetaInf, sign: i32, tr: &Truncation) -> XGrid {
    if theta.amplitude == 0.0 {
        return XGrid { nodes: vec![], step: None };
    }
    let (lo, hi) = theta.support();
    let s = sign as f64;
    let node = |x: f64, w: f64| {
        let q = x * x - s;
        XNode { x, w: w * theta.eval(x), a: q.abs(), iota: (q < 0.0) as u8 }
    };
    let mut cuts = vec![lo];
    if sign > 0 {
        for r in [-1.0, 1.0] {
            if r > lo && r < hi {
                cuts.push(r);
            }
        }
    }
    cuts.push(hi);
    if cuts.len() == 2 {
        // smooth compactly supported integrand: trapezoid on the open support
        let n = ((hi - lo) / tr.x_step).ceil().max(8.0) as usize;
        let h = (hi - lo) / n as f64;
        let nodes = (1..n).map(|m| node(lo + m as f64 * h, h)).collect();
        return XGrid { nodes, step: Some(h) };
    }
    // |x^2 - 1|^{-1/2} endpoint singularities: smoothstep substitution per segment
    let (gx, gw) = gl16();
    let mut nodes = vec![];
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let hseg = b - a;
        let panels = tr.arch_panels;
        let h = 1.0 / panels as f64;
        for p in 0..panels {
            let m = (p as f64 + 0.5) * h;
            for (xi, wi) in gx.iter().zip(gw) {
                let t = m + 0.5 * h * xi;
                let x = a + hseg * t * t * (3.0 - 2.0 * t);
                let jac = 6.0 * hseg * t * (1.0 - t);
                let nd = node(x, 0.5 * h * wi * jac);
                if nd.a > 0.0 {
                    nodes.push(nd);
                }
            }
        }
    }
    XGrid { nodes, step: None }
}

// ---------------------------------------------------------------------------
// p-adic grouping

#[derive(Debug, Clone)]
struct YPiece {
    cn: i128,
    cd: i128,
    r: i32,
    /// `theta value * vol`
    mass: C,
}

#[derive(Debug, Clone)]
struct YClass {
    e: i32,
    eps: i32,
    mass: C,
    mass_abs: f64,
    pieces: Vec<YPiece>,
    r_max: i32,
}

#[derive(Debug, Clone)]
struct Place {
    q: u64,
    classes: Vec<YClass>,
    /// `(center, radius, class index)` of every regular ball
    balls: Vec<(Q, i32, usize)>,
    /// residues mod `q^g` determine all centers' fractional parts and radius conditions
    g: u32,
    /// singular mass weighted by a bound for `|delta|'^{-1/2}`
    singular_weighted: f64,
    integral: C,
}

fn build_place(step: &PadicStepFunction, big_n: &Q, cap: i32) -> Result<Place> {
    let q = step.prime;
    let mut classes: Vec<YClass> = vec![];
    let mut index: HashMap<(i32, i32), usize> = HashMap::new();
    let mut balls = vec![];
    let mut g = 0u32;
    let mut sw = 0.0;
    for pc in &step.pieces {
        let mut out = vec![];
        delta_balls(big_n, q, pc.center, pc.radius_exp, cap.max(pc.radius_exp), &mut out);
        for b in out {
            let vol = qf(q, -b.radius_exp);
            if b.singular {
                sw += 4.0 * pc.value.norm() * qf(q, -b.radius_exp).sqrt();
                continue;
            }
            let d = b.center * b.center - *big_n * 4;
            let e = modified_norm_exp(&d, q).expect("regular ball");
            let eps = local_chi(&d, q);
            let idx = *index.entry((e, eps)).or_insert_with(|| {
                classes.push(YClass { e, eps, mass: C::zero(), mass_abs: 0.0, pieces: vec![], r_max: i32::MIN });
                classes.len() - 1
            });
            let cl = &mut classes[idx];
            let mass = pc.value * vol;
            cl.mass += mass;
            cl.mass_abs += mass.norm();
            cl.r_max = cl.r_max.max(b.radius_exp);
            cl.pieces.push(YPiece { cn: *b.center.numer(), cd: *b.center.denom(), r: b.radius_exp, mass });
            g = g.max(split_p(*b.center.denom(), q).0).max((-b.radius_exp).max(0) as u32);
            balls.push((b.center, b.radius_exp, idx));
        }
    }
    Ok(Place { q, classes, balls, g, singular_weighted: sw, integral: step.step_integral() })
}

#[derive(Clone)]
struct Combo {
    cls: Vec<usize>,
    /// `prod_q |y^2 - 4N|'_q`
    norm: f64,
    eps: Vec<i32>,
    mass: C,
    mass_abs: f64,
    split: bool,
    vt: [Option<Arc<VTable>>; 2],
}

#[derive(Clone)]
struct TPoint {
    t: Q,
    theta: C,
    delta: Q,
    /// `|delta|'_{inf,S}`
    d: f64,
    vt: Option<Arc<VTable>>,
    combo: Option<usize>,
    square: bool,
}

struct Shape {
    sign: i32,
    nu: Vec<i32>,
    big_n: Q,
    /// `4 |N|`
    m4: f64,
    /// `sqrt(|N|)`
    rt: f64,
    grid: XGrid,
    w_abs: f64,
    places: Vec<Place>,
    combos: Vec<Combo>,
    tpts: Vec<TPoint>,
    real: bool,
}

impl Shape {
    fn singular_weighted(&self) -> f64 {
        self.places.iter().map(|p| p.singular_weighted).sum()
    }
}

const COMBO_CAP: usize = 200_000;

fn build_shape(ec: &EllipticConfig, sign: i32, nu: &[i32]) -> Result<Shape> {
    let cfg = &ec.cfg;
    let qn = cfg.q_pow(nu);
    let big_n = qn * Q::from_integer(sign as i128 * cfg.hecke_n as i128);
    let absn = to_f64(&big_n.abs());
    let theta = ec.theta.theta_inf(sign);
    let grid = x_grid(theta, sign, &ec.truncation);
    let w_abs = grid.nodes.iter().map(|n| n.w.abs()).sum();
    let mut places = vec![];
    let mut real = true;
    for i in 0..cfg.r() {
        let step = ec.theta.get(sign, nu, i).ok_or_else(|| Error::Config("missing theta_q".into()))?;
        real &= step.pieces.iter().all(|p| p.value.im == 0.0);
        places.push(build_place(step, &big_n, ec.truncation.padic_depth)?);
    }
    let mut iotas = [false; 2];
    for n in &grid.nodes {
        iotas[n.iota as usize] = true;
    }
    // combos in mixed radix order
    let counts: Vec<usize> = places.iter().map(|p| p.classes.len()).collect();
    let total: usize = counts.iter().product();
    if total > COMBO_CAP {
        return Err(Error::Invalid(format!("{total} p-adic class combinations exceed the cap")));
    }
    let mut strides = vec![1usize; counts.len()];
    for i in (0..counts.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * counts[i + 1];
    }
    let mut vcache: HashMap<(u8, Vec<i32>), Arc<VTable>> = HashMap::new();
    let mut get_vt = |iota: u8, eps: &[i32]| -> Result<Arc<VTable>> {
        if let Some(v) = vcache.get(&(iota, eps.to_vec())) {
            return Ok(v.clone());
        }
        let v = v_table(iota, eps, cfg)?;
        vcache.insert((iota, eps.to_vec()), v.clone());
        Ok(v)
    };
    let mut combos = Vec::with_capacity(total);
    for idx in 0..total {
        let cls: Vec<usize> = (0..counts.len()).map(|i| (idx / strides[i]) % counts[i]).collect();
        let mut norm = 1.0;
        let mut eps = vec![];
        let mut mass = C::new(1.0, 0.0);
        let mut mass_abs = 1.0;
        for (p, &c) in places.iter().zip(&cls) {
            let cl = &p.classes[c];
            norm *= qf(p.q, cl.e);
            eps.push(cl.eps);
            mass *= cl.mass;
            mass_abs *= cl.mass_abs;
        }
        let split = eps.iter().all(|&x| x == 1);
        let mut vt = [None, None];
        for io in 0..2u8 {
            if iotas[io as usize] {
                vt[io as usize] = Some(get_vt(io, &eps)?);
            }
        }
        combos.push(Combo { cls, norm, eps, mass, mass_abs, split, vt });
    }
    // lattice points T in the support
    let mut tpts = vec![];
    if theta.amplitude != 0.0 {
        let mut den = 1i128;
        for p in &places {
            den *= (p.q as i128).pow(p.g);
        }
        for p in 0..cfg.r() {
            let step = ec.theta.get(sign, nu, p).unwrap();
            let mut dmax = 0u32;
            for pc in &step.pieces {
                dmax = dmax.max(split_p(*pc.center.denom(), step.prime).0).max((-pc.radius_exp).max(0) as u32);
            }
            den = den.max(1) * (step.prime as i128).pow(dmax.saturating_sub(places[p].g));
        }
        let (lo, hi) = theta.support();
        let scale = 2.0 * absn.sqrt() * den as f64;
        let t0 = (lo * scale).floor() as i128;
        let t1 = (hi * scale).ceil() as i128;
        for tn in t0..=t1 {
            let t = Q::new(tn, den);
            let x = to_f64(&t) / (2.0 * absn.sqrt());
            let th_inf = theta.eval(x);
            if th_inf == 0.0 {
                continue;
            }
            let mut th = C::new(th_inf, 0.0);
            for i in 0..cfg.r() {
                th *= ec.theta.get(sign, nu, i).unwrap().eval(&t);
            }
            if th == C::zero() {
                continue;
            }
            let delta = t * t - big_n * 4;
            let mut combo = Some(0usize);
            for (i, p) in places.iter().enumerate() {
                match p.balls.iter().find(|(c, r, _)| in_ball(&t, c, *r, p.q)) {
                    Some((_, _, ci)) => {
                        if let Some(cb) = combo.as_mut() {
                            *cb += ci * strides[i];
                        }
                    }
                    None => combo = None,
                }
            }
            let (d, vt, square) = if delta.is_zero() {
                (0.0, None, true)
            } else {
                let mut d = to_f64(&delta.abs());
                let mut eps = vec![];
                for &q in &cfg.finite_places {
                    d *= qf(q, modified_norm_exp(&delta, q).unwrap());
                    eps.push(local_chi(&delta, q));
                }
                let iota = delta.is_negative() as u8;
                (d, Some(get_vt(iota, &eps)?), is_square_rational(&delta))
            };
            tpts.push(TPoint { t, theta: th, delta, d, vt, combo, square });
        }
    }
    Ok(Shape {
        sign,
        nu: nu.to_vec(),
        big_n,
        m4: 4.0 * absn,
        rt: absn.sqrt(),
        grid,
        w_abs,
        places,
        combos,
        tpts,
        real,
    })
}

fn shapes(ec: &EllipticConfig) -> Result<Vec<Shape>> {
    ec.theta.active(ec.cfg.r()).iter().map(|(s, nu)| build_shape(ec, *s, nu)).collect()
}

// ---------------------------------------------------------------------------
// direct side

/// `I_el = 2 sum_{+-, nu} sum_{T, delta non-square} theta(T) L^S(1, delta)`.
pub fn elliptic_direct(ec: &EllipticConfig) -> Result<TermReport> {
    let mut total = C::zero();
    let mut terms = vec![];
    for sh in shapes(ec)? {
        for tp in &sh.tpts {
            if tp.square {
                continue;
            }
            let l = partial_zagier_direct(&tp.delta, &ec.cfg, C::new(1.0, 0.0))?.value;
            total += 2.0 * tp.theta * l;
            terms.push(json!({"sign": sh.sign, "nu": sh.nu, "T": tp.t.to_string(), "delta": tp.delta.to_string(), "L": l.re}));
        }
    }
    Ok(report("elliptic_direct", total, 0.0, ec, json!({"terms": terms})))
}

/// Lattice points of the direct side as `(sign, nu, T, theta(T))`, for checks.
pub fn direct_points(ec: &EllipticConfig) -> Result<Vec<(i32, Vec<i32>, Q, C)>> {
    let mut out = vec![];
    for sh in shapes(ec)? {
        for tp in &sh.tpts {
            out.push((sh.sign, sh.nu.clone(), tp.t, tp.theta));
        }
    }
    Ok(out)
}

/// `Sigma(square)`: the AFE shape summed over `T` with square `delta`. `delta = 0`
/// contributes nothing (`F(inf) = 0`, and the `V` part carries `|delta|^{1/2}`).
pub fn sigma_square(ec: &EllipticConfig) -> Result<TermReport> {
    let vt = ec.vartheta;
    let mut total = C::zero();
    let mut terms = vec![];
    for sh in shapes(ec)? {
        for tp in sh.tpts.iter().filter(|t| t.square && !t.delta.is_zero()) {
            let v = tp.vt.as_ref().unwrap();
            // f runs over S-coprime f with f^2 | delta
            let mut num = tp.delta.numer().abs();
            for &q in &ec.cfg.finite_places {
                num = split_p(num, q).1;
            }
            let root = isqrt(num as u128) as i128;
            let mut inner = 0.0;
            for f in 1..=root {
                if root % f != 0 || !ec.cfg.coprime(f as u64) {
                    continue;
                }
                let f2 = (f * f) as f64;
                let kmax = (F_CUTOFF * tp.d.powf(vt)).max(v.x_zero() * tp.d.powf(1.0 - vt)) / f2;
                let mut k = 1u64;
                while (k as f64) <= kmax.ceil() {
                    if ec.cfg.coprime(k) {
                        let chi = chi_kf(&tp.delta, k, f as u64);
                        if chi != 0 {
                            inner += chi as f64 / (k as f64 * f as f64) * kernel(k as f64 * f2, tp.d, vt, v);
                        }
                    }
                    k += 1;
                }
            }
            total += 2.0 * tp.theta * inner;
            terms.push(json!({"sign": sh.sign, "T": tp.t.to_string(), "delta": tp.delta.to_string(), "sum": inner}));
        }
    }
    Ok(report("sigma_square", total, 0.0, ec, json!({"terms": terms})))
}

// ---------------------------------------------------------------------------
// Kloosterman tables

/// `Kl_{k,f}(xi, m)` for `xi = t / (k f^2)`, `t = 0..k f^2 - 1`. A general S-rational
/// `xi = a / Q` with `Q` an S-unit reduces to `t = a Q^{-1} mod k f^2`.
pub fn kl_table(k: u64, f: u64, m: &Q) -> Vec<C> {
    let n = (k * f * f) as i128;
    let f2 = (f * f) as i128;
    let m4 = residue_mod(&(*m * 4), n);
    let mut chis = vec![];
    for b in 0..n {
        let t = (b * b - m4).rem_euclid(n);
        if t % f2 != 0 {
            continue;
        }
        let s = crate::quadratic::jacobi((t / f2).rem_euclid(k as i128), k as i128);
        if s != 0 {
            chis.push((b, s as f64));
        }
    }
    let roots: Vec<C> = (0..n).map(|j| e_frac(j, n)).collect();
    (0..n)
        .map(|t| chis.iter().map(|&(b, s)| s * roots[((b * t) % n) as usize]).sum())
        .collect()
}

/// Index into [`kl_table`] of `xi = a / qj`.
fn kl_index(a: i128, qj: i128, n: i128) -> usize {
    if n == 1 {
        return 0;
    }
    let inv = mod_inverse(qj.rem_euclid(n), n);
    ((a.rem_euclid(n) * inv) % n) as usize
}

// ---------------------------------------------------------------------------
// (k, f) blocks of the Poisson-summed side

struct Block {
    k: u64,
    f: u64,
    kk: f64,
    pref: f64,
    /// per combo: samples `w(x) * kernel`, or `None` when dropped
    arch: Vec<Option<Vec<f64>>>,
    dropped: f64,
    kl0: f64,
}

fn block_pref(sh: &Shape, k: u64, f: u64) -> f64 {
    4.0 * sh.rt / ((k * k) as f64 * (f * f * f) as f64)
}

fn make_block(ec: &EllipticConfig, sh: &Shape, k: u64, f: u64, kl0: f64) -> Block {
    let kk = (k * f * f) as f64;
    let vt = ec.vartheta;
    let pref = block_pref(sh, k, f);
    let cut = ec.truncation.kernel_cut;
    // T-points per combo, for the Poisson bound of a dropped class
    let mut t_weight = vec![0.0; sh.combos.len()];
    let mut t_loose = 0.0;
    for tp in &sh.tpts {
        if tp.delta.is_zero() {
            continue;
        }
        let b = tp.theta.norm() * kernel(kk, tp.d, vt, tp.vt.as_ref().unwrap()).abs() * 2.0 / (k * f) as f64;
        match tp.combo {
            Some(c) => t_weight[c] += b,
            None => t_loose += b,
        }
    }
    let mut arch = Vec::with_capacity(sh.combos.len());
    let mut dropped = t_loose;
    for (ci, c) in sh.combos.iter().enumerate() {
        if c.mass_abs == 0.0 {
            arch.push(None);
            continue;
        }
        let mut sup: f64 = 0.0;
        let samples: Vec<f64> = sh
            .grid
            .nodes
            .iter()
            .map(|n| {
                let kv = kernel(kk, sh.m4 * n.a * c.norm, vt, c.vt[n.iota as usize].as_ref().unwrap());
                sup = sup.max(kv.abs());
                n.w * kv
            })
            .collect();
        // sum_{xi != 0} of the class equals its lattice sum minus its xi = 0 term
        let bound = t_weight[ci] + pref * kl0.abs() * sup * c.mass_abs * sh.w_abs;
        if bound < cut {
            dropped += bound;
            arch.push(None);
        } else {
            arch.push(Some(samples));
        }
    }
    dropped += pref * kl0.abs() * sh.singular_weighted() * sh.w_abs;
    Block { k, f, kk, pref, arch, dropped, kl0 }
}

/// Per-residue work item of the `xi != 0` sum: `xi = a / q^j`, `a = rho mod qres`.
#[derive(Debug, Clone)]
struct Item {
    j: Vec<u32>,
    qj: i128,
    qres: i128,
    rho: i128,
}

/// `<cn rho / (cd qj K)>_q` as `e(.)`.
fn frac_phase(cn: i128, cd: i128, rho: i128, den: i128, q: u64) -> Result<C> {
    let num = cn.checked_mul(rho).ok_or_else(|| Error::Invalid("center overflow".into()))?;
    let d = cd.checked_mul(den).ok_or_else(|| Error::Invalid("denominator overflow".into()))?;
    let (a, m) = frac_part_ratio(&Q::new(num, d), q);
    Ok(e_frac(a, m))
}

/// p-adic factors `P_{i,class}(xi)` for `xi = a / qj`, `a = rho mod qres`.
fn padic_factors(sh: &Shape, it: &Item, kk: i128) -> Result<Vec<Vec<C>>> {
    let den = it.qj * kk;
    let mut out = vec![];
    for (i, p) in sh.places.iter().enumerate() {
        let j = it.j[i] as i32;
        // valuation of a at q (exact when j >= 1; only min(v, g) matters otherwise)
        let va = if j >= 1 {
            -j
        } else {
            let qg = (p.q as i128).pow(p.g);
            let r = it.rho.rem_euclid(qg.max(1));
            if r == 0 {
                i32::MAX
            } else {
                split_p(r, p.q).0 as i32
            }
        };
        let mut row = vec![C::zero(); p.classes.len()];
        for (ci, cl) in p.classes.iter().enumerate() {
            if j >= 1 && cl.r_max < j {
                continue;
            }
            let mut s = C::zero();
            for pc in &cl.pieces {
                let ok = if va == i32::MAX { true } else { va + pc.r >= 0 };
                if ok {
                    s += pc.mass * frac_phase(pc.cn, pc.cd, it.rho, den, p.q)?;
                }
            }
            row[ci] = s;
        }
        out.push(row);
    }
    Ok(out)
}

fn combined_samples(sh: &Shape, blk: &Block, pf: &[Vec<C>]) -> Option<Vec<C>> {
    let mut g: Option<Vec<C>> = None;
    for (c, arch) in sh.combos.iter().zip(&blk.arch) {
        let Some(arch) = arch else { continue };
        let mut w = C::new(1.0, 0.0);
        for (i, &ci) in c.cls.iter().enumerate() {
            w *= pf[i][ci];
        }
        if w == C::zero() {
            continue;
        }
        let g = g.get_or_insert_with(|| vec![C::zero(); arch.len()]);
        for (gm, am) in g.iter_mut().zip(arch) {
            *gm += w * am;
        }
    }
    g
}

fn arch_ft(sh: &Shape, g: &[C], omega: f64) -> C {
    let nodes = &sh.grid.nodes;
    if nodes.is_empty() {
        return C::zero();
    }
    match sh.grid.step {
        Some(h) => {
            let z = e(-omega * h);
            let mut acc = C::zero();
            for gm in g.iter().rev() {
                acc = acc * z + gm;
            }
            acc * e(-omega * nodes[0].x)
        }
        None => nodes.iter().zip(g).map(|(n, gm)| gm * e(-omega * n.x)).sum(),
    }
}

fn shell_of(omega: f64, omega_max: f64) -> usize {
    let r = omega.abs() / omega_max;
    if r <= 0.0 {
        return 0;
    }
    // last shell is (omega_max/2, omega_max]
    let s = SHELLS as f64 - 1.0 + r.log2().ceil();
    s.clamp(0.0, SHELLS as f64 - 1.0) as usize
}

#[derive(Debug, Clone, Default)]
struct ShellSums {
    net: [C; SHELLS],
    abs: [f64; SHELLS],
    count: u64,
}

impl ShellSums {
    fn add(&mut self, o: &ShellSums) {
        for s in 0..SHELLS {
            self.net[s] += o.net[s];
            self.abs[s] += o.abs[s];
        }
        self.count += o.count;
    }
    fn total(&self) -> C {
        self.net.iter().sum()
    }
}

fn items_for(ec: &EllipticConfig, sh: &Shape, blk: &Block) -> Vec<Item> {
    let r = sh.places.len();
    let mut jmax = vec![0u32; r];
    for (c, a) in sh.combos.iter().zip(&blk.arch) {
        if a.is_none() {
            continue;
        }
        for (i, &ci) in c.cls.iter().enumerate() {
            jmax[i] = jmax[i].max(sh.places[i].classes[ci].r_max.max(0) as u32);
        }
    }
    let mut items = vec![];
    let mut jv = vec![0u32; r];
    loop {
        let mut qj = 1i128;
        let mut qres = 1i128;
        for (i, p) in sh.places.iter().enumerate() {
            qj *= (p.q as i128).pow(jv[i]);
            qres *= (p.q as i128).pow(jv[i] + p.g);
        }
        let a_max = ec.truncation.omega_max * blk.kk * qj as f64 / (2.0 * sh.rt);
        if a_max >= 1.0 {
            for rho in 0..qres {
                let unit_ok = sh.places.iter().zip(&jv).all(|(p, &j)| j == 0 || rho % p.q as i128 != 0);
                if unit_ok {
                    items.push(Item { j: jv.clone(), qj, qres, rho });
                }
            }
        }
        // next j vector
        let mut i = 0;
        while i < r {
            if jv[i] < jmax[i] {
                jv[i] += 1;
                break;
            }
            jv[i] = 0;
            i += 1;
        }
        if i == r {
            break;
        }
    }
    items
}

fn run_item(ec: &EllipticConfig, sh: &Shape, blk: &Block, kl: &[C], it: &Item) -> Result<ShellSums> {
    let mut out = ShellSums::default();
    let kk = (blk.k * blk.f * blk.f) as i128;
    let pf = padic_factors(sh, it, kk)?;
    let Some(g) = combined_samples(sh, blk, &pf) else { return Ok(out) };
    let omax = ec.truncation.omega_max;
    let a_max = (omax * blk.kk * it.qj as f64 / (2.0 * sh.rt)).floor() as i128;
    // a = rho + t qres, 0 < |a| <= a_max; with real data only a > 0 and twice the real part
    let t_lo = if sh.real { (1 - it.rho).div_euclid(it.qres) + ((1 - it.rho).rem_euclid(it.qres) != 0) as i128 } else { (-a_max - it.rho).div_euclid(it.qres) };
    let t_hi = (a_max - it.rho).div_euclid(it.qres);
    for t in t_lo..=t_hi {
        let a = it.rho + t * it.qres;
        if a == 0 || a.abs() > a_max {
            continue;
        }
        let omega = 2.0 * sh.rt * a as f64 / (it.qj as f64 * blk.kk);
        let ft = arch_ft(sh, &g, omega);
        let term = kl[kl_index(a, it.qj, kk)] * ft;
        let term = if sh.real { C::new(2.0 * term.re, 0.0) } else { term };
        let s = shell_of(omega, omax);
        out.net[s] += term;
        out.abs[s] += term.norm();
        out.count += 1;
    }
    Ok(out)
}

struct BlockXi {
    sums: ShellSums,
}

fn block_xi_nonzero(ec: &EllipticConfig, sh: &Shape, blk: &Block) -> Result<BlockXi> {
    let kl = kl_table(blk.k, blk.f, &sh.big_n);
    let items = items_for(ec, sh, blk);
    let parts = par_map(&items, ec.truncation.jobs, |it| run_item(ec, sh, blk, &kl, it));
    let mut sums = ShellSums::default();
    for p in parts {
        sums.add(&p?);
    }
    for s in 0..SHELLS {
        sums.net[s] *= blk.pref;
        sums.abs[s] *= blk.pref;
    }
    Ok(BlockXi { sums })
}

fn block_xi_zero(sh: &Shape, blk: &Block) -> C {
    let mut s = C::zero();
    for (c, a) in sh.combos.iter().zip(&blk.arch) {
        if let Some(a) = a {
            s += c.mass * a.iter().sum::<f64>();
        }
    }
    blk.pref * blk.kl0 * s
}

fn block_arith(ec: &EllipticConfig, sh: &Shape, k: u64, f: u64) -> C {
    let kk = (k * f * f) as f64;
    let mut s = C::zero();
    for tp in &sh.tpts {
        if tp.delta.is_zero() {
            continue;
        }
        let chi = chi_kf(&tp.delta, k, f);
        if chi != 0 {
            s += tp.theta * (chi as f64 * 2.0 / (k * f) as f64) * kernel(kk, tp.d, ec.vartheta, tp.vt.as_ref().unwrap());
        }
    }
    s
}

/// `(k, f)` with `k, f` prime to `S`, `f <= f_max`, `k f^2 <= k_max`, ordered by `f` then `k`.
fn block_keys(ec: &EllipticConfig) -> Vec<(u64, u64)> {
    let tr = &ec.truncation;
    let mut out = vec![];
    for f in (1..=tr.f_max).filter(|&f| ec.cfg.coprime(f)) {
        if f * f > tr.k_max {
            break;
        }
        for k in (1..=tr.k_max / (f * f)).filter(|&k| ec.cfg.coprime(k)) {
            out.push((k, f));
        }
    }
    out
}

/// Shell decay check: the last shell must not exceed its predecessor.
fn check_shells(s: &ShellSums) -> Result<()> {
    let last = s.abs[SHELLS - 1];
    let prev = s.abs[SHELLS - 2];
    if last > 1e-12 && last >= prev {
        return Err(Error::NoDecay { partial: s.total(), tail: last });
    }
    Ok(())
}

/// `Sigma(xi != 0)`: all `(k, f)` blocks with Kloosterman-weighted Fourier transforms.
pub fn sigma_xi_nonzero(ec: &EllipticConfig) -> Result<TermReport> {
    let tr = &ec.truncation;
    let mut total = C::zero();
    let mut est = 0.0;
    let mut details = vec![];
    for sh in shapes(ec)? {
        let mut all = ShellSums::default();
        let mut blocks_done = 0u32;
        let mut skipped = 0u32;
        let mut last_f_empty = false;
        let mut cur_f = 0;
        let mut quiet_run = 0u32;
        for (k, f) in block_keys(ec) {
            if f != cur_f {
                if last_f_empty && cur_f != 0 {
                    break;
                }
                cur_f = f;
                last_f_empty = true;
                quiet_run = 0;
            } else if quiet_run >= 12 {
                continue;
            }
            let kl0 = kl_crt(k, f, &sh.big_n)? as f64;
            let blk = make_block(ec, &sh, k, f, kl0);
            est += blk.dropped;
            if blk.arch.iter().all(|a| a.is_none()) {
                skipped += 1;
                quiet_run += 1;
                continue;
            }
            quiet_run = 0;
            last_f_empty = false;
            let r = block_xi_nonzero(ec, &sh, &blk)?;
            if tr.decay_check {
                check_shells(&r.sums)?;
            }
            all.add(&r.sums);
            blocks_done += 1;
        }
        if quiet_run < 12 && cur_f != 0 && !block_keys(ec).is_empty() {
            // the block loop hit k_max or f_max while blocks were still contributing
            est += tr.kernel_cut * 10.0;
        }
        let tail = all.abs[SHELLS - 1];
        est += tail;
        total += all.total();
        details.push(json!({
            "sign": sh.sign, "nu": sh.nu, "blocks": blocks_done, "skipped": skipped,
            "xi_count": all.count,
            "shell_net": all.net.iter().map(|z| z.re).collect::<Vec<_>>(),
            "shell_abs": all.abs.to_vec(),
        }));
    }
    Ok(report("sigma_xi_nonzero", total, est, ec, json!(details)))
}

// ---------------------------------------------------------------------------
// blockwise Poisson check

#[derive(Debug, Clone, Serialize)]
pub struct BlockCheck {
    pub sign: i32,
    pub nu: Vec<i32>,
    pub k: u64,
    pub f: u64,
    /// `(2/(k f)) sum_T chi(T) Psi(T)`
    pub arith: C,
    pub dual_zero: C,
    pub dual_nonzero: C,
    pub estimate: f64,
}

impl BlockCheck {
    pub fn diff(&self) -> f64 {
        (self.arith - self.dual_zero - self.dual_nonzero).norm()
    }
}

/// Both sides of Poisson summation for every block with `k <= k_max`, `f <= f_max`.
pub fn poisson_step_check(ec: &EllipticConfig, k_max: u64, f_max: u64) -> Result<Vec<BlockCheck>> {
    let mut out = vec![];
    for sh in shapes(ec)? {
        for f in (1..=f_max).filter(|&f| ec.cfg.coprime(f)) {
            for k in (1..=k_max).filter(|&k| ec.cfg.coprime(k)) {
                let kl0 = kl_crt(k, f, &sh.big_n)? as f64;
                let blk = make_block(ec, &sh, k, f, kl0);
                let r = block_xi_nonzero(ec, &sh, &blk)?;
                out.push(BlockCheck {
                    sign: sh.sign,
                    nu: sh.nu.clone(),
                    k,
                    f,
                    arith: block_arith(ec, &sh, k, f),
                    dual_zero: block_xi_zero(&sh, &blk),
                    dual_nonzero: r.sums.total(),
                    estimate: blk.dropped + r.sums.abs[SHELLS - 1],
                });
            }
        }
    }
    Ok(out)
}

/// Sum over all blocks of the lattice side: equals `I_el + Sigma(square)` by the AFE.
pub fn arith_blocks_total(ec: &EllipticConfig) -> Result<C> {
    let mut total = C::zero();
    for sh in shapes(ec)? {
        for (k, f) in block_keys(ec) {
            total += block_arith(ec, &sh, k, f);
        }
    }
    Ok(total)
}

/// Sum over all blocks of the `xi = 0` terms with `Kl(0)`; equals
/// `one_dim - eisenstein + Sigma(0)`.
pub fn xi_zero_blocks_total(ec: &EllipticConfig) -> Result<(C, f64)> {
    let mut total = C::zero();
    let mut est = 0.0;
    for sh in shapes(ec)? {
        let mut quiet = 0;
        let mut cur_f = 0;
        for (k, f) in block_keys(ec) {
            if f != cur_f {
                cur_f = f;
                quiet = 0;
            }
            if quiet >= 12 {
                continue;
            }
            let kl0 = kl_crt(k, f, &sh.big_n)? as f64;
            let kk = (k * f * f) as f64;
            let pref = block_pref(&sh, k, f);
            let mut s = C::zero();
            let mut sup: f64 = 0.0;
            for c in &sh.combos {
                for n in &sh.grid.nodes {
                    let kv = kernel(kk, sh.m4 * n.a * c.norm, ec.vartheta, c.vt[n.iota as usize].as_ref().unwrap());
                    sup = sup.max(kv.abs() * c.mass_abs);
                    s += c.mass * n.w * kv;
                }
            }
            total += pref * kl0 * s;
            let b = pref * kl0.abs() * sup * sh.w_abs * sh.combos.len() as f64;
            if b < ec.truncation.kernel_cut * 1e-3 {
                quiet += 1;
                est += b;
            } else {
                quiet = 0;
            }
        }
    }
    Ok((total, est))
}

/// `Psi^(xi)` for one block by direct summation over pieces and grid nodes (no residue
/// grouping, no dropped classes).
pub fn semilocal_fourier(ec: &EllipticConfig, sign: i32, nu: &[i32], k: u64, f: u64, xi: &Q) -> Result<C> {
    Ok(semilocal_fourier_many(ec, sign, nu, k, f, std::slice::from_ref(xi))?[0])
}

/// [`semilocal_fourier`] at several `xi`, sharing the setup.
pub fn semilocal_fourier_many(ec: &EllipticConfig, sign: i32, nu: &[i32], k: u64, f: u64, xis: &[Q]) -> Result<Vec<C>> {
    let sh = build_shape(ec, sign, nu)?;
    let kk = (k * f * f) as f64;
    let steps: Vec<Vec<PadicStepFunction>> = sh
        .places
        .iter()
        .map(|p| {
            p.classes
                .iter()
                .map(|cl| PadicStepFunction {
                    prime: p.q,
                    pieces: cl
                        .pieces
                        .iter()
                        .map(|pc| Piece { center: Q::new(pc.cn, pc.cd), radius_exp: pc.r, value: pc.mass / p_vol(p.q, pc.r) })
                        .collect(),
                })
                .collect()
        })
        .collect();
    let arch: Vec<Vec<f64>> = sh
        .combos
        .iter()
        .map(|c| {
            sh.grid
                .nodes
                .iter()
                .map(|n| n.w * kernel(kk, sh.m4 * n.a * c.norm, ec.vartheta, c.vt[n.iota as usize].as_ref().unwrap()))
                .collect()
        })
        .collect();
    let mut out = vec![];
    for xi in xis {
        let t = *xi / Q::from_integer((k * f * f) as i128);
        let omega = 2.0 * sh.rt * to_f64(xi) / kk;
        // p-adic factor per place and class, straight from the Fourier transform of a ball
        let mut pf = vec![];
        for row in &steps {
            let mut r = vec![];
            for st in row {
                r.push(st.step_oscillatory_integral(&t, &Q::from_integer(1))?);
            }
            pf.push(r);
        }
        let mut total = C::zero();
        for (c, a) in sh.combos.iter().zip(&arch) {
            let mut w = C::new(1.0, 0.0);
            for (i, &ci) in c.cls.iter().enumerate() {
                w *= pf[i][ci];
            }
            if w == C::zero() {
                continue;
            }
            let s: C = sh.grid.nodes.iter().zip(a).map(|(n, am)| am * e(-omega * n.x)).sum();
            total += w * s;
        }
        out.push(total);
    }
    Ok(out)
}

fn p_vol(q: u64, r: i32) -> f64 {
    qf(q, -r)
}

/// `Psi^(xi)` for the given `xi` through the residue-grouped path used by
/// [`sigma_xi_nonzero`] (no classes dropped).
pub fn grouped_fourier(ec: &EllipticConfig, sign: i32, nu: &[i32], k: u64, f: u64, xi: &Q) -> Result<C> {
    let sh = build_shape(ec, sign, nu)?;
    let mut ec2 = ec.clone();
    ec2.truncation.kernel_cut = 0.0;
    let blk = make_block(&ec2, &sh, k, f, 1.0);
    let mut jv = vec![];
    let mut qj = 1i128;
    let mut qres = 1i128;
    for p in &sh.places {
        let j = (-vq(xi, p.q)).max(0) as u32;
        jv.push(j);
        qj *= (p.q as i128).pow(j);
        qres *= (p.q as i128).pow(j + p.g);
    }
    let a = *xi * Q::from_integer(qj);
    if !a.is_integer() {
        return Err(Error::NotSRational(xi.to_string()));
    }
    let a = a.to_integer();
    let it = Item { j: jv, qj, qres, rho: a.rem_euclid(qres) };
    let pf = padic_factors(&sh, &it, (k * f * f) as i128)?;
    let Some(g) = combined_samples(&sh, &blk, &pf) else { return Ok(C::zero()) };
    Ok(arch_ft(&sh, &g, 2.0 * sh.rt * a as f64 / (qj as f64 * blk.kk)))
}

// ---------------------------------------------------------------------------
// xi = 0: kernels G1, G2

fn pow_c(p: u64, s: C) -> C {
    (s * (p as f64).ln()).exp()
}

/// `prod_{p | n} sum_{j <= n_p} p^{-j z}`
fn n_factor(hecke: &[(u64, u32)], z: C) -> C {
    let mut v = C::new(1.0, 0.0);
    for &(p, np) in hecke {
        let mut s = C::zero();
        for j in 0..=np {
            s += pow_c(p, -z * j as f64);
        }
        v *= s;
    }
    v
}

/// `(1 - eps q^{s-1})/(1 - eps q^{-s}) * (1 - q^{-2s})/(1 - q^{-s-1})` with the
/// removable factors cancelled.
fn eps_factor(q: u64, eps: i32, s: C) -> C {
    let d = 1.0 - pow_c(q, -s - 1.0);
    match eps {
        1 => (1.0 - pow_c(q, s - 1.0)) * (1.0 + pow_c(q, -s)) / d,
        -1 => (1.0 + pow_c(q, s - 1.0)) * (1.0 - pow_c(q, -s)) / d,
        _ => (1.0 - pow_c(q, -2.0 * s)) / d,
    }
}

/// Integrand of the first `xi = 0` kernel (without `w^{-s}`).
pub fn g1_integrand(cfg: &SConfig, s: C) -> Result<C> {
    let mut v = mellin_f(s)? * zeta(2.0 * s + 2.0)? / zeta(s + 2.0)?;
    for &q in &cfg.finite_places {
        v *= (1.0 - pow_c(q, -2.0 * s - 2.0)) / (1.0 - pow_c(q, -s - 2.0));
    }
    Ok(v * n_factor(&hecke_parts(cfg), s + 1.0))
}

/// Integrand of the second `xi = 0` kernel without `sqrt(pi)` and `w^{-s}`.
pub fn g2_integrand(cfg: &SConfig, iota: u8, eps: &[i32], s: C) -> Result<C> {
    let io = iota as f64;
    let mut v = mellin_f(s)? * gamma_ratio((io + s) / 2.0, (io + 1.0 - s) / 2.0) * zeta(2.0 * s)? / zeta(s + 1.0)?;
    for (&q, &ep) in cfg.finite_places.iter().zip(eps) {
        v *= eps_factor(q, ep, s);
    }
    Ok(v * n_factor(&hecke_parts(cfg), s))
}

/// `w -> (1/2 pi i) int phi(s) w^{-s} ds` on a conjugation-symmetric contour.
pub struct MellinKernel {
    coeffs: Vec<(C, C)>,
}

impl MellinKernel {
    pub fn new(spec: &ContourSpec, phi: impl Fn(C) -> Result<C>) -> Result<Self> {
        spec.validate()?;
        let cn = contour_nodes(spec, true);
        let mut coeffs = Vec::with_capacity(cn.nodes.len());
        for (s, w) in cn.nodes {
            coeffs.push((s, w * phi(s)?));
        }
        Ok(MellinKernel { coeffs })
    }

    pub fn eval(&self, w: f64) -> f64 {
        let lw = w.ln();
        let mut acc = 0.0;
        for (s, c) in &self.coeffs {
            acc += (c * (-s * lw).exp()).im;
        }
        acc / PI
    }
}

/// A `xi = 0` kernel: the defining contour for `ln w <= 3`, otherwise the line
/// `Re s = 3/2` minus the residues crossed.
pub struct SigmaKernel {
    near: [MellinKernel; 2],
    far: [MellinKernel; 2],
    pub res0: f64,
    pub res_coef: f64,
    pub res_pow: f64,
}

fn pick(k: &[MellinKernel; 2], lw: f64) -> &MellinKernel {
    if lw.abs() <= 8.0 {
        &k[0]
    } else {
        &k[1]
    }
}

fn zeta32() -> f64 {
    zeta(C::new(1.5, 0.0)).unwrap().re
}

/// `prod_q (1 - q^{-1})/(1 - q^{-3/2}) prod_{p|n} sum_j p^{-j/2} / (2 zeta(3/2))`
fn half_residue_constant(cfg: &SConfig) -> f64 {
    let mut c = 1.0 / (2.0 * zeta32());
    for &q in &cfg.finite_places {
        let qf = q as f64;
        c *= (1.0 - 1.0 / qf) / (1.0 - qf.powf(-1.5));
    }
    c * n_factor(&hecke_parts(cfg), C::new(0.5, 0.0)).re
}

impl SigmaKernel {
    fn build(
        line: f64,
        cv: Option<f64>,
        density: usize,
        t_max: f64,
        phi: &dyn Fn(C) -> Result<C>,
    ) -> Result<([MellinKernel; 2], [MellinKernel; 2])> {
        let spec = |d: usize| match cv {
            Some(v) => ContourSpec::cv(v).with_density(d).with_t_max(t_max),
            None => ContourSpec::vertical(line).with_density(d).with_t_max(t_max),
        };
        let far = |d: usize| ContourSpec::vertical(1.5).with_density(d).with_t_max(t_max);
        Ok((
            [MellinKernel::new(&spec(density), phi)?, MellinKernel::new(&spec(density * 4), phi)?],
            [MellinKernel::new(&far(density), phi)?, MellinKernel::new(&far(density * 4), phi)?],
        ))
    }

    /// `G1(w) = (1/2 pi i) int_{(-1)} phi1(s) w^{-s} ds`.
    pub fn g1(cfg: &SConfig, density: usize, t_max: f64) -> Result<Self> {
        Self::g1_on_line(cfg, -1.0, density, t_max)
    }

    /// `G1` with the defining line moved to `Re s = line`, `-3/2 < line < -1/2`.
    pub fn g1_on_line(cfg: &SConfig, line: f64, density: usize, t_max: f64) -> Result<Self> {
        if !(line > -1.5 && line < -0.5) {
            return Err(Error::Config(format!("line {line} crosses a pole")));
        }
        let phi = |s: C| g1_integrand(cfg, s);
        let (near, far) = Self::build(line, None, density, t_max, &phi)?;
        let res0 = n_factor(&hecke_parts(cfg), C::new(1.0, 0.0)).re;
        let fm = mellin_f(C::new(-0.5, 0.0))?.re;
        Ok(SigmaKernel { near, far, res0, res_coef: fm * half_residue_constant(cfg), res_pow: 0.5 })
    }

    /// `G2(w) = (sqrt(pi)/2 pi i) int_{C_v} phi2(s) w^{-s} ds`.
    pub fn g2(cfg: &SConfig, iota: u8, eps: &[i32], density: usize, t_max: f64) -> Result<Self> {
        let sp = PI.sqrt();
        let phi = |s: C| Ok(sp * g2_integrand(cfg, iota, eps, s)?);
        let (near, far) = Self::build(0.0, Some(0.25), density, t_max, &phi)?;
        let exceptional = iota == 0 && eps.iter().all(|&x| x == 1);
        let res0 = if exceptional {
            let prod: f64 = hecke_parts(cfg).iter().map(|&(_, np)| (np + 1) as f64).product();
            -(2f64.powi(cfg.r() as i32)) * prod
        } else {
            0.0
        };
        let fp = mellin_f(C::new(0.5, 0.0))?.re;
        Ok(SigmaKernel { near, far, res0, res_coef: sp * fp * half_residue_constant(cfg), res_pow: -0.5 })
    }

    pub fn eval_near(&self, w: f64) -> f64 {
        pick(&self.near, w.ln()).eval(w)
    }

    pub fn eval_far(&self, w: f64) -> f64 {
        pick(&self.far, w.ln()).eval(w) - self.res0 - self.res_coef * w.powf(self.res_pow)
    }

    pub fn eval(&self, w: f64) -> f64 {
        if w.ln() <= LN_SWITCH {
            self.eval_near(w)
        } else {
            self.eval_far(w)
        }
    }
}

/// `(1/2 pi i) oint phi(s) ds` on a small circle.
pub fn residue_probe(center: C, radius: f64, phi: impl Fn(C) -> Result<C>) -> Result<C> {
    let cn = contour_nodes(&ContourSpec::circle(center, radius), false);
    let mut s = C::zero();
    for (z, w) in cn.nodes {
        s += w * phi(z)?;
    }
    Ok(s / C::new(0.0, 2.0 * PI))
}

/// `Sigma(0)` from the two kernels.
pub fn sigma_zero(ec: &EllipticConfig) -> Result<TermReport> {
    let tr = &ec.truncation;
    let cfg = &ec.cfg;
    let vt = ec.vartheta;
    let g1 = SigmaKernel::g1(cfg, tr.contour_density, tr.t_max)?;
    let mut g2s: HashMap<(u8, Vec<i32>), SigmaKernel> = HashMap::new();
    let mut total = C::zero();
    let mut est = 0.0;
    let prod_np: f64 = hecke_parts(cfg).iter().map(|&(_, np)| (np + 1) as f64).product();
    let mut parts = vec![];
    for sh in shapes(ec)? {
        let (mut s1, mut s2) = (C::zero(), C::zero());
        for c in &sh.combos {
            if c.mass_abs == 0.0 {
                continue;
            }
            for io in 0..2u8 {
                if c.vt[io as usize].is_some() && !g2s.contains_key(&(io, c.eps.clone())) {
                    g2s.insert((io, c.eps.clone()), SigmaKernel::g2(cfg, io, &c.eps, tr.contour_density, tr.t_max)?);
                }
            }
            let mut a1 = 0.0;
            let mut a2 = 0.0;
            for n in &sh.grid.nodes {
                let dd = sh.m4 * n.a * c.norm;
                a1 += n.w * g1.eval(dd.powf(-vt));
                let g2 = &g2s[&(n.iota, c.eps.clone())];
                a2 += n.w / (n.a * c.norm).sqrt() * g2.eval(PI * dd.powf(vt - 1.0));
            }
            s1 += c.mass * a1;
            s2 += c.mass * a2;
        }
        let part = 4.0 * sh.rt * s1 + 2.0 * s2;
        total += part;
        est += sh.singular_weighted() * sh.w_abs * (4.0 * sh.rt * g1.res0 + 2.0 * 2f64.powi(cfg.r() as i32) * prod_np);
        parts.push(json!({"sign": sh.sign, "nu": sh.nu, "first": (4.0 * sh.rt * s1).re, "second": (2.0 * s2).re}));
    }
    Ok(report("sigma_zero", total, est, ec, json!(parts)))
}

// ---------------------------------------------------------------------------
// one-dimensional and Eisenstein terms (geometric side)

fn unram_one_dim_factor(cfg: &SConfig) -> f64 {
    hecke_parts(cfg)
        .iter()
        .map(|&(p, np)| {
            let pf = p as f64;
            (1.0 - pf.powi(-(np as i32) - 1)) / (1.0 - 1.0 / pf)
        })
        .product()
}

/// `4 sqrt(n) prod (1-p^{-n_p-1})/(1-p^{-1}) sum q^{nu/2} int theta_inf int theta_q`.
pub fn one_dim_term(ec: &EllipticConfig) -> Result<TermReport> {
    let cfg = &ec.cfg;
    let mut total = C::zero();
    for sh in shapes(ec)? {
        let arch: f64 = sh.grid.nodes.iter().map(|n| n.w).sum();
        let padic: C = sh.places.iter().map(|p| p.integral).product();
        let qhalf = sh.rt / (cfg.hecke_n as f64).sqrt();
        total += qhalf * arch * padic;
    }
    total *= 4.0 * (cfg.hecke_n as f64).sqrt() * unram_one_dim_factor(cfg);
    Ok(report("one_dim_term", total, 0.0, ec, json!({})))
}

/// `2^{r+1} prod (n_p+1) sum int_{X_0} theta/sqrt|x^2-+1| int_{Y_1} theta/sqrt|y^2-+4N|'`.
pub fn eisenstein_term(ec: &EllipticConfig) -> Result<TermReport> {
    let cfg = &ec.cfg;
    let prod_np: f64 = hecke_parts(cfg).iter().map(|&(_, np)| (np + 1) as f64).product();
    let mut total = C::zero();
    let mut est = 0.0;
    for sh in shapes(ec)? {
        let arch: f64 = sh.grid.nodes.iter().filter(|n| n.iota == 0).map(|n| n.w / n.a.sqrt()).sum();
        let padic: C = sh.combos.iter().filter(|c| c.split).map(|c| c.mass / c.norm.sqrt()).sum();
        total += arch * padic;
        est += sh.singular_weighted() * sh.w_abs;
    }
    let f = 2f64.powi(cfg.r() as i32 + 1) * prod_np;
    Ok(report("eisenstein_term", total * f, est * f, ec, json!({})))
}

// ---------------------------------------------------------------------------
// spectral side: sums over characters of products of local traces

/// Characters of `(Z/q^M)^x`: representatives and the value table `chars[j][idx]`.
pub struct UnitCharacters {
    pub q: u64,
    pub m: u32,
    pub reps: Vec<i128>,
    pub chars: Vec<Vec<C>>,
    index: HashMap<i128, usize>,
}

impl UnitCharacters {
    pub fn new(q: u64, m: u32) -> Self {
        let qm = (q as i128).pow(m);
        let qi = q as i128;
        // (value, exponent vector) for a generating set
        let mut gens: Vec<(i128, i128)> = vec![];
        if qm == 1 {
        } else if q == 2 {
            if m >= 2 {
                gens.push((qm - 1, 2));
            }
            if m >= 3 {
                gens.push((5, qm / 4));
            }
        } else {
            let phi = qm / qi * (qi - 1);
            let g = (2..qm).find(|&g| order_mod(g, qm) == phi).expect("primitive root");
            gens.push((g, phi));
        }
        let mut reps = vec![1i128.rem_euclid(qm.max(2)) % qm.max(1)];
        let mut exps: Vec<Vec<i128>> = vec![vec![0; gens.len()]];
        for (gi, &(g, ord)) in gens.iter().enumerate() {
            let base = reps.len();
            for t in 1..ord {
                let gt = pow_mod(g, t, qm);
                for b in 0..base {
                    reps.push((reps[b] * gt).rem_euclid(qm));
                    let mut ev = exps[b].clone();
                    ev[gi] = t;
                    exps.push(ev);
                }
            }
        }
        if qm == 1 {
            reps = vec![0];
        }
        let mut chars = vec![];
        let orders: Vec<i128> = gens.iter().map(|g| g.1).collect();
        let nchar: usize = orders.iter().product::<i128>().max(1) as usize;
        for ci in 0..nchar {
            // character exponents in mixed radix
            let mut rem = ci as i128;
            let mut cexp = vec![];
            for &o in &orders {
                cexp.push(rem % o);
                rem /= o;
            }
            let row = exps
                .iter()
                .map(|ev| {
                    let mut ph = Q::zero();
                    for ((&x, &c), &o) in ev.iter().zip(&cexp).zip(&orders) {
                        ph += Q::new(x * c, o);
                    }
                    e_frac(*ph.numer(), *ph.denom())
                })
                .collect();
            chars.push(row);
        }
        let index = reps.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        UnitCharacters { q, m, reps, chars, index }
    }

    /// `chi_j(u)` for a rational `q`-unit `u`.
    pub fn value(&self, j: usize, u: &Q) -> C {
        let qm = (self.q as i128).pow(self.m);
        let r = residue_mod(u, qm);
        let r = if qm == 1 { 0 } else { r };
        self.chars[j][self.index[&r]]
    }
}

fn pow_mod(g: i128, mut t: i128, m: i128) -> i128 {
    let mut r = 1i128 % m;
    let mut b = g.rem_euclid(m);
    while t > 0 {
        if t & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        t >>= 1;
    }
    r
}

fn order_mod(g: i128, m: i128) -> i128 {
    if num_integer::gcd(g, m) != 1 {
        return 0;
    }
    let mut x = g % m;
    let mut o = 1;
    while x != 1 {
        x = x * g % m;
        o += 1;
    }
    o
}

/// Local data of one ramified place: `Theta(N) = int theta(T, N) dT` and
/// `Psi_1(N) = int_{Y_1(N)} theta(T, N) |T^2-4N|'^{-1/2} dT` at `N = q^nu u`.
struct LocalTraceData {
    q: u64,
    nu: i32,
    chars: UnitCharacters,
    theta_int: Vec<C>,
    eis: Vec<C>,
    err: f64,
}

fn local_integrals(f: &FChoice, q: u64, big_n: &Q, cap: i32) -> Result<(C, C, f64)> {
    let (step, err) = theta_step_function(f, q, big_n, cap)?;
    let place = build_place(&step, big_n, cap)?;
    let mut eis = C::zero();
    for cl in place.classes.iter().filter(|c| c.eps == 1) {
        eis += cl.mass / qf(q, cl.e).sqrt();
    }
    Ok((step.step_integral(), eis, err + place.singular_weighted))
}

fn local_trace_data(f: &FChoice, q: u64, cap: i32, tol: f64) -> Result<LocalTraceData> {
    let nu = match f {
        FChoice::Maximal(m) => *m as i32,
        FChoice::Iwahori => 0,
        FChoice::Step(_) => return Err(Error::Config("spectral traces need standard test functions".into())),
    };
    let qn = Q::from_integer(q as i128).pow(nu);
    // residue classes mod q^m have measure q^{-m} among the units only for m >= 1
    for m in 1..=6u32 {
        let chars = UnitCharacters::new(q, m);
        let qm = (q as i128).pow(m);
        let mut theta_int = vec![];
        let mut eis = vec![];
        let mut err: f64 = 0.0;
        let mut invariant = true;
        for &u in &chars.reps {
            let (a, b, e) = local_integrals(f, q, &(qn * Q::from_integer(u)), cap)?;
            // same class, different representative
            let (a2, b2, e2) = local_integrals(f, q, &(qn * Q::from_integer(u + qm * (q as i128 + 1))), cap)?;
            err = err.max(e).max(e2);
            if (a - a2).norm() > tol + 2.0 * (e + e2) || (b - b2).norm() > tol + 2.0 * (e + e2) {
                invariant = false;
                break;
            }
            theta_int.push(a);
            eis.push(b);
        }
        if invariant {
            return Ok(LocalTraceData { q, nu, chars, theta_int, eis, err });
        }
    }
    Err(Error::Invalid(format!("no conductor bound up to q^6 found at q = {q}")))
}

struct SpectralSetup {
    local: Vec<LocalTraceData>,
}

fn spectral_setup(ec: &EllipticConfig) -> Result<SpectralSetup> {
    let f = &ec.theta.f_choices;
    if f.len() != ec.cfg.r() {
        return Err(Error::Config("spectral traces need standard test functions".into()));
    }
    let mut local = vec![];
    for (fc, &q) in f.iter().zip(&ec.cfg.finite_places) {
        local.push(local_trace_data(fc, q, ec.truncation.padic_depth, 1e-9)?);
    }
    Ok(SpectralSetup { local })
}

/// Sum over characters `mu` of `arch(mu) * unram(mu) * prod_i local(mu_i)`.
fn character_sum(
    ec: &EllipticConfig,
    sp: &SpectralSetup,
    arch_plus: f64,
    arch_minus: f64,
    local_of: &dyn Fn(&LocalTraceData, usize) -> C,
    local_weight: &dyn Fn(&LocalTraceData) -> f64,
) -> C {
    let r = sp.local.len();
    let counts: Vec<usize> = sp.local.iter().map(|l| l.chars.chars.len()).collect();
    let total: usize = counts.iter().product();
    let n = Q::from_integer(ec.cfg.hecke_n as i128);
    let minus_one = Q::from_integer(-1);
    let mut sum = C::zero();
    for idx in 0..total {
        let mut rem = idx;
        let mut js = vec![];
        for &c in &counts {
            js.push(rem % c);
            rem /= c;
        }
        // mu_inf(-1) = prod mu_q(-1);  prod_{p|n} mu_p(n) = prod_q mu_q(n)^{-1}
        let mut sgn = C::new(1.0, 0.0);
        let mut unram = C::new(1.0, 0.0);
        for (l, &j) in sp.local.iter().zip(&js) {
            sgn *= l.chars.value(j, &minus_one);
            unram *= l.chars.value(j, &n).inv();
        }
        let arch = 4.0 * (arch_plus + sgn * arch_minus);
        let mut prod = C::new(1.0, 0.0);
        for i in 0..r {
            let l = &sp.local[i];
            // mu_{q_i}(q_i) = prod_{j != i} mu_{q_j}(q_i)^{-1}
            let mut mq = C::new(1.0, 0.0);
            for (jj, lj) in sp.local.iter().enumerate() {
                if jj != i {
                    mq *= lj.chars.value(js[jj], &Q::from_integer(l.q as i128)).inv();
                }
            }
            prod *= local_weight(l) * mq.powi(l.nu) * local_of(l, js[i]);
        }
        sum += arch * unram * prod;
    }
    sum
}

/// `sum_mu Tr(mu(f))` over the one-dimensional representations.
pub fn trace_one_dim(ec: &EllipticConfig) -> Result<TermReport> {
    let sp = spectral_setup(ec)?;
    let (ap, _) = theta_inf_integrals(&ec.theta.theta_inf_plus, 1, ArchWeight::Plain)?;
    let (am, _) = theta_inf_integrals(&ec.theta.theta_inf_minus, -1, ArchWeight::Plain)?;
    let unr: f64 = hecke_parts(&ec.cfg).iter().map(|&(p, np)| hecke_volume(p, np) as f64).product::<f64>()
        / (ec.cfg.hecke_n as f64).sqrt();
    let v = character_sum(
        ec,
        &sp,
        ap.re,
        am.re,
        &|l, j| l.chars.reps.iter().enumerate().map(|(ui, _)| l.chars.chars[j][ui] * l.theta_int[ui]).sum(),
        &|l| {
            let q = l.q as f64;
            q.powf(l.nu as f64 / 2.0) / (1.0 - 1.0 / q) * q.powi(-(l.chars.m as i32))
        },
    ) * unr;
    let est: f64 = sp.local.iter().map(|l| l.err).sum();
    Ok(report("trace_one_dim", v, est, ec, json!({"M": sp.local.iter().map(|l| l.chars.m).collect::<Vec<_>>()})))
}

/// `sum_mu Tr(xi_0 (x) mu)(f)` over the one-dimensional Eisenstein family.
pub fn trace_eisenstein(ec: &EllipticConfig) -> Result<TermReport> {
    let sp = spectral_setup(ec)?;
    let (ap, _) = theta_inf_integrals(&ec.theta.theta_inf_plus, 1, ArchWeight::InvSqrt { positive_only: true })?;
    let (am, _) = theta_inf_integrals(&ec.theta.theta_inf_minus, -1, ArchWeight::InvSqrt { positive_only: true })?;
    let unr: f64 = hecke_parts(&ec.cfg)
        .iter()
        .map(|&(p, np)| (p as f64).powf(np as f64 / 2.0) * (np + 1) as f64)
        .product::<f64>()
        / (ec.cfg.hecke_n as f64).sqrt();
    let v = character_sum(
        ec,
        &sp,
        ap.re,
        am.re,
        &|l, j| l.chars.reps.iter().enumerate().map(|(ui, _)| l.chars.chars[j][ui] * l.eis[ui]).sum(),
        &|l| {
            let q = l.q as f64;
            2.0 / (1.0 - 1.0 / q) * q.powi(-(l.chars.m as i32))
        },
    ) * unr;
    let est: f64 = sp.local.iter().map(|l| l.err).sum();
    Ok(report("trace_eisenstein", v, est, ec, json!({"M": sp.local.iter().map(|l| l.chars.m).collect::<Vec<_>>()})))
}

// ---------------------------------------------------------------------------
// final identity

#[derive(Debug, Clone, Serialize)]
pub struct FinalReport {
    pub terms: Vec<TermReport>,
    pub residual: C,
    /// largest absolute value among the terms
    pub scale: f64,
    pub relative: f64,
    /// sum of the terms' truncation estimates
    pub estimate: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `R = I_el - [trace_one_dim - trace_eis/2 - Sigma(square) + Sigma(0) + Sigma(xi != 0)]`.
pub fn verify_final(ec: &EllipticConfig) -> Result<FinalReport> {
    let direct = elliptic_direct(ec)?;
    let one = trace_one_dim(ec)?;
    let eis = trace_eisenstein(ec)?;
    let sq = sigma_square(ec)?;
    let s0 = sigma_zero(ec)?;
    let sx = sigma_xi_nonzero(ec)?;
    let residual = direct.value - (one.value - 0.5 * eis.value - sq.value + s0.value + sx.value);
    let terms = vec![direct, one, eis, sq, s0, sx];
    let scale = terms.iter().map(|t| t.value.norm()).fold(0.0, f64::max);
    let relative = if scale > 0.0 { residual.norm() / scale } else { residual.norm() };
    let estimate = terms.iter().map(|t| t.truncation_error_estimate).sum();
    let pass = residual.norm() <= ec.tolerance * scale + estimate;
    Ok(FinalReport { terms, residual, scale, relative, estimate, tolerance: ec.tolerance, pass })
}

// ---------------------------------------------------------------------------
// Poisson smoke test with a Gaussian

/// Both sides of `sum_{alpha = a (k)} phi(alpha) = (1/k) sum_xi psi(a xi/k) phi^(xi/k)` for
/// `phi(x, y) = exp(-pi x^2/t) 1_{q^{-j} Z_q}(y)` on `Z[1/q]`, the right side computed
/// with numerical archimedean and p-adic Fourier transforms.
pub fn poisson_gaussian(t: f64, q: u64, j: i32, k: u64, a: i128) -> Result<(f64, f64)> {
    if !is_prime(q as u128) || k % q == 0 {
        return Err(Error::Invalid("need q prime and k prime to q".into()));
    }
    let cfg = SConfig { finite_places: vec![q], hecke_n: 1 };
    let qj = (q as i128).pow(j.max(0) as u32);
    let ki = k as i128;
    // alpha = m / q^j with m = a q^j (mod k)
    let target = (a * qj).rem_euclid(ki);
    let lim = (10.0 * t.sqrt() * qj as f64).ceil() as i128 + ki;
    let mut lhs = 0.0;
    let mut m = -lim + (target - (-lim)).rem_euclid(ki);
    while m <= lim {
        let x = m as f64 / qj as f64;
        lhs += (-PI * x * x / t).exp();
        m += ki;
    }
    let step = PadicStepFunction {
        prime: q,
        pieces: vec![Piece { center: Q::zero(), radius_exp: -j, value: C::new(1.0, 0.0) }],
    };
    let span = 8.0 * t.sqrt();
    let mut rhs = C::zero();
    // xi runs over Z[1/q]; the p-adic transform kills v_q(xi) < j, so xi in q^j Z
    let xlim = (10.0 / t.sqrt() * k as f64 / qj as f64).ceil() as i128 + 1;
    for b in -xlim..=xlim {
        let xi = Q::from_integer(b * qj);
        let eta = to_f64(&xi) / k as f64;
        let arch = crate::specfun::integrate_gl_c(-span, span, 64, |x| (-PI * x * x / t).exp() * e(-x * eta));
        let padic = step.step_oscillatory_integral(&xi, &Q::from_integer(ki))?;
        rhs += global_phase(&(Q::from_integer(a) * xi / Q::from_integer(ki)), &cfg) * arch * padic;
    }
    Ok((lhs, rhs.re / k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn characters_orthogonal() {
        for (q, m) in [(2u64, 3u32), (3, 2), (5, 1), (2, 1), (2, 2)] {
            let uc = UnitCharacters::new(q, m);
            let n = uc.reps.len();
            assert_eq!(uc.chars.len(), n);
            for a in 0..n {
                for b in 0..n {
                    let ip: C = (0..n).map(|u| uc.chars[a][u] * uc.chars[b][u].conj()).sum();
                    let want = if a == b { n as f64 } else { 0.0 };
                    assert!((ip - want).norm() < 1e-9, "{q}^{m}: {a} {b} {ip}");
                }
            }
        }
    }

    #[test]
    fn shells() {
        assert_eq!(shell_of(32.0, 32.0), SHELLS - 1);
        assert_eq!(shell_of(16.5, 32.0), SHELLS - 1);
        assert_eq!(shell_of(15.0, 32.0), SHELLS - 2);
        assert_eq!(shell_of(0.1, 32.0), 0);
    }
}
