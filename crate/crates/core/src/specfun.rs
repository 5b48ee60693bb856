//! Complex special functions and contour integration: Gamma, zeta, `K_s(2)`, the
//! smoothing function `F`, its Mellin transform, the `V` kernels, and the
//! vertical-line / `C_v` integrators.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::snumber::SConfig;

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const LN_2PI_HALF: f64 = 0.918_938_533_204_672_8;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

// ---------------------------------------------------------------------------
// Gamma

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `log sin(pi z)`, stable for large `|Im z|`.
fn ln_sin_pi(z: C) -> C {
    let w = I * PI * z;
    if z.im > 0.0 {
        // sin = e^{-w}(e^{2w} - 1)/(2i)
        -w + ((2.0 * w).exp() - 1.0).ln() - (2.0 * I).ln()
    } else {
        w + (1.0 - (-2.0 * w).exp()).ln() - (2.0 * I).ln()
    }
}

fn ln_gamma_right(z: C) -> C {
    // Lanczos for Re z >= 1/2, written for Gamma(z) = Gamma((z-1)+1)
    let z = z - 1.0;
    let mut a = C::new(LANCZOS[0], 0.0);
    let t = z + LANCZOS_G + 0.5;
    for (k, &ck) in LANCZOS.iter().enumerate().skip(1) {
        a += ck / (z + k as f64);
    }
    LN_2PI_HALF + (z + 0.5) * t.ln() - t + a.ln()
}

/// A logarithm of `Gamma(z)` (branch not necessarily principal; `exp` is exact).
pub fn ln_gamma(z: C) -> C {
    if z.re >= 0.5 {
        // shift up for better Lanczos accuracy at large |Im z|
        ln_gamma_right(z)
    } else {
        C::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma_right(1.0 - z)
    }
}

fn is_nonpositive_integer(z: C) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

pub fn gamma(z: C) -> Result<C> {
    if is_nonpositive_integer(z) {
        return Err(Error::Pole(format!("Gamma at {z}")));
    }
    if z.im == 0.0 && z.re > 0.0 && z.re == z.re.round() && z.re <= 30.0 {
        let mut f = 1.0;
        for k in 2..(z.re as u64) {
            f *= k as f64;
        }
        return Ok(C::new(f, 0.0));
    }
    Ok(ln_gamma(z).exp())
}

/// `1/Gamma(z)`, entire.
pub fn rgamma(z: C) -> C {
    if is_nonpositive_integer(z) {
        return C::zero();
    }
    (-ln_gamma(z)).exp()
}

/// `Gamma(a)/Gamma(b)` in log space.
pub fn gamma_ratio(a: C, b: C) -> C {
    if is_nonpositive_integer(b) {
        return C::zero();
    }
    (ln_gamma(a) - ln_gamma(b)).exp()
}

// ---------------------------------------------------------------------------
// zeta

fn bernoulli_even() -> &'static [f64] {
    static B: OnceLock<Vec<f64>> = OnceLock::new();
    B.get_or_init(|| {
        // B_m from sum_{k<=m} C(m+1,k) B_k = 0; returns B_{2j}/(2j)! for j = 0..=30
        let m_max = 62usize;
        let mut b: Vec<BigRational> = vec![BigRational::one()];
        for m in 1..=m_max {
            let mut s = BigRational::zero();
            let mut binom = BigInt::one();
            for (k, bk) in b.iter().enumerate() {
                s += BigRational::from_integer(binom.clone()) * bk;
                binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
            }
            b.push(-s / BigRational::from_integer(BigInt::from(m + 1)));
        }
        let mut out = vec![];
        let mut fact = BigInt::one();
        for (m, bm) in b.iter().enumerate() {
            if m > 0 {
                fact *= BigInt::from(m);
            }
            if m % 2 == 0 {
                out.push((bm / BigRational::from_integer(fact.clone())).to_f64().unwrap());
            }
        }
        out
    })
}

fn zeta_em(s: C) -> C {
    // smaller N left of 1/2: the partial sums grow like N^{1-s} and cancel
    let base = if s.re < 0.5 { 16.0 } else { 50.0 };
    let n = (base + s.im.abs()).ceil() as usize;
    let mut sum = C::zero();
    for k in 1..n {
        sum += (-s * (k as f64).ln()).exp();
    }
    let nf = n as f64;
    let ln_n = nf.ln();
    let n_s = (-s * ln_n).exp();
    sum += n_s * nf / (s - 1.0) + 0.5 * n_s;
    let b = bernoulli_even();
    // term_j = B_{2j}/(2j)! * s(s+1)...(s+2j-2) * N^{-s-2j+1}
    let mut poch = s;
    let mut npow = n_s / nf;
    for j in 1..=20 {
        let term = b[j] * poch * npow;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
        poch *= (s + (2 * j - 1) as f64) * (s + (2 * j) as f64);
        npow /= nf * nf;
    }
    sum
}

/// Riemann zeta: Euler-Maclaurin for `Re s >= -1`, functional equation beyond. (Going
/// through `1 - s` next to 0 would lose digits to the pole at 1.)
pub fn zeta(s: C) -> Result<C> {
    if s == C::new(1.0, 0.0) {
        return Err(Error::Pole("zeta at 1".into()));
    }
    if s == C::zero() {
        return Ok(C::new(-0.5, 0.0));
    }
    if s.re >= -1.0 {
        return Ok(zeta_em(s));
    }
    // zeta(s) = 2^s pi^{s-1} sin(pi s/2) Gamma(1-s) zeta(1-s)
    if s.im == 0.0 && s.re == s.re.round() && (s.re as i64) % 2 == 0 {
        return Ok(C::zero());
    }
    let ln_pref = s * 2f64.ln() + (s - 1.0) * PI.ln() + ln_sin_pi(s / 2.0) + ln_gamma(1.0 - s);
    let z = ln_pref.exp() * zeta_em(1.0 - s);
    Ok(if s.im == 0.0 { C::new(z.re, 0.0) } else { z })
}

/// Hurwitz zeta `zeta(s, a)` for `a > 0`, by Euler-Maclaurin.
pub fn hurwitz_zeta(s: C, a: f64) -> Result<C> {
    if s == C::new(1.0, 0.0) {
        return Err(Error::Pole("Hurwitz zeta at 1".into()));
    }
    if !(a > 0.0) {
        return Err(Error::Invalid("Hurwitz zeta needs a > 0".into()));
    }
    let base = if s.re < 0.5 { 16.0 } else { 50.0 };
    let m = (base + s.norm()).ceil() as usize;
    let mut sum = C::zero();
    for n in 0..m {
        sum += (-s * (n as f64 + a).ln()).exp();
    }
    let big = m as f64 + a;
    let lb = big.ln();
    let n_s = (-s * lb).exp();
    sum += n_s * big / (s - 1.0) + 0.5 * n_s;
    let b = bernoulli_even();
    let mut poch = s;
    let mut npow = n_s / big;
    for j in 1..=20 {
        let term = b[j] * poch * npow;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
        poch *= (s + (2 * j - 1) as f64) * (s + (2 * j) as f64);
        npow /= big * big;
    }
    Ok(sum)
}

// ---------------------------------------------------------------------------
// K_s(2)

/// `K_s(2)` by trapezoid quadrature of `(1/2) int exp(-2 cosh u + s u) du` along a
/// path `u = v + i phi(v)` that follows the zero-phase curve, so that large
/// `|Im s|` does not cause cancellation.
pub fn besselk2(s: C) -> C {
    let tau = s.im;
    let eta = 1.0 / tau.abs().max(1.0);
    let a = (PI / 2.0 - eta).sin();
    // sin(phi) = h(g(v)), g = tau v /(2 sinh v), h a smooth clamp to (-a, a)
    let path = |v: f64| -> (f64, f64) {
        let (g, gp) = if v.abs() < 1e-4 {
            (tau / 2.0 * (1.0 - v * v / 6.0), -tau * v / 6.0)
        } else {
            let sh = v.sinh();
            (
                tau * v / (2.0 * sh),
                tau * (sh - v * v.cosh()) / (2.0 * sh * sh),
            )
        };
        let x = (g / a).powi(8);
        let h = g / (1.0 + x).powf(0.125);
        let hp = (1.0 + x).powf(-1.125);
        let phi = h.asin();
        let dphi = hp * gp / (1.0 - h * h).sqrt();
        (phi, dphi)
    };
    let step = 0.02;
    let nmax = 400;
    let mut sum = C::zero();
    for k in -nmax..=nmax {
        let v = k as f64 * step;
        let (phi, dphi) = path(v);
        let u = C::new(v, phi);
        let val = (-2.0 * u.cosh() + s * u).exp() * C::new(1.0, dphi);
        sum += val;
    }
    0.5 * step * sum
}

fn digamma_int(m: u64) -> f64 {
    // psi(m) = -gamma + H_{m-1}
    let mut h = 0.0;
    for k in 1..m {
        h += 1.0 / k as f64;
    }
    h - EULER_GAMMA
}

/// `K_s(2)` from the power series `(pi/2)/sin(pi s) sum (1/k!)(1/G(k+1-s) - 1/G(k+1+s))`;
/// at integer order the limiting (digamma) form of the same series.
pub fn besselk2_series(s: C) -> C {
    let nearest = s.re.round();
    if s.im == 0.0 && (s.re - nearest).abs() < 1e-12 {
        let n = nearest.abs() as u64;
        // K_n(2) = (1/2) sum_{k<n} (n-k-1)!/k! (-1)^k
        //        + (-1)^n (1/2) sum_k (psi(k+1)+psi(n+k+1)) / (k!(n+k)!)
        let mut first = 0.0;
        for k in 0..n {
            let mut r = 1.0;
            for j in 1..n - k {
                r *= j as f64;
            }
            for j in 1..=k {
                r /= j as f64;
            }
            first += if k % 2 == 0 { r } else { -r };
        }
        let mut second = 0.0;
        let mut kf = 1.0;
        let mut nkf: f64 = (1..=n).map(|j| j as f64).product();
        for k in 0..60u64 {
            if k > 0 {
                kf *= k as f64;
                nkf *= (n + k) as f64;
            }
            second += (digamma_int(k + 1) + digamma_int(n + k + 1)) / (kf * nkf);
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        return C::new(0.5 * first + sign * 0.5 * second, 0.0);
    }
    let mut sum = C::zero();
    let mut kf = 1.0;
    for k in 0..60u64 {
        if k > 0 {
            kf *= k as f64;
        }
        let kk = (k + 1) as f64;
        sum += (rgamma(kk - s) - rgamma(kk + s)) / kf;
    }
    PI / 2.0 * sum / (PI * s).sin()
}

/// `K_0(2)`.
pub fn k0_2() -> f64 {
    static K0: OnceLock<f64> = OnceLock::new();
    *K0.get_or_init(|| besselk2_series(C::zero()).re)
}

/// `F~(s) = K_s(2)/(s K_0(2))`.
pub fn mellin_f(s: C) -> Result<C> {
    if s == C::zero() {
        return Err(Error::Pole("mellinF at 0".into()));
    }
    Ok(besselk2(s) / (s * k0_2()))
}

// ---------------------------------------------------------------------------
// Gauss-Legendre

pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static G: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    G.get_or_init(|| gauss_legendre(16))
}

/// Composite 16-point Gauss-Legendre of a real function on `[a,b]` with `panels` panels.
pub fn integrate_gl<Fn: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut f: Fn) -> f64 {
    let (x, w) = gl16();
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let m = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            s += wi * f(m + 0.5 * h * xi);
        }
    }
    0.5 * h * s
}

pub fn integrate_gl_c<Fn: FnMut(f64) -> C>(a: f64, b: f64, panels: usize, mut f: Fn) -> C {
    let (x, w) = gl16();
    let h = (b - a) / panels as f64;
    let mut s = C::zero();
    for p in 0..panels {
        let m = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            s += *wi * f(m + 0.5 * h * xi);
        }
    }
    0.5 * h * s
}

// ---------------------------------------------------------------------------
// F

fn tail_j(y: f64) -> f64 {
    // int_{ln y}^inf exp(-2 cosh u) du for y >= 1
    let a = y.ln();
    let b = (y + 40.0).ln();
    let panels = (((b - a) / 0.125).ceil() as usize).max(2);
    integrate_gl(a, b, panels, |u| (-(u.exp() + (-u).exp())).exp())
}

/// `F(x) = (1/(2 K_0(2))) int_x^inf e^{-t-1/t} dt/t`, by direct quadrature.
pub fn f_smooth(x: f64) -> f64 {
    assert!(x >= 0.0, "F is defined for x >= 0");
    if x == 0.0 || x < 1e-3 {
        return 1.0;
    }
    let k = 2.0 * k0_2();
    if x >= 1.0 {
        if x > 700.0 {
            return 0.0;
        }
        tail_j(x) / k
    } else {
        1.0 - tail_j(1.0 / x) / k
    }
}

/// `x F'(x)`, the derivative of `F` in `log x`.
pub fn f_smooth_dlog(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    -(-x - 1.0 / x).exp() / (2.0 * k0_2())
}

// ---------------------------------------------------------------------------
// cubic Hermite tables on a log grid

/// Values and log-derivatives of a function on a uniform grid in `u = ln x`.
#[derive(Debug, Clone)]
pub struct LogTable<T> {
    pub u0: f64,
    pub du: f64,
    pub vals: Vec<T>,
    pub ders: Vec<T>,
}

impl<T> LogTable<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    pub fn build(u0: f64, u1: f64, du: f64, mut f: impl FnMut(f64) -> (T, T)) -> Self {
        let n = ((u1 - u0) / du).ceil() as usize + 1;
        let mut vals = Vec::with_capacity(n);
        let mut ders = Vec::with_capacity(n);
        for i in 0..n {
            let (v, d) = f(u0 + i as f64 * du);
            vals.push(v);
            ders.push(d);
        }
        LogTable { u0, du, vals, ders }
    }

    pub fn u_max(&self) -> f64 {
        self.u0 + (self.vals.len() - 1) as f64 * self.du
    }

    /// Interpolated value at `u`, or `None` outside the table.
    pub fn at(&self, u: f64) -> Option<T> {
        let t = (u - self.u0) / self.du;
        if !(t >= 0.0) || t > (self.vals.len() - 1) as f64 {
            return None;
        }
        let i = (t.floor() as usize).min(self.vals.len() - 2);
        let s = t - i as f64;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(
            self.vals[i] * h00
                + self.ders[i] * (h10 * self.du)
                + self.vals[i + 1] * h01
                + self.ders[i + 1] * (h11 * self.du),
        )
    }
}

/// Interpolated `F`; exact outside `[1e-3, e^4]` where `F` is 1 or direct.
pub struct FTable {
    table: LogTable<f64>,
}

impl FTable {
    pub fn new() -> Self {
        let table = LogTable::build((1e-3f64).ln(), 4.0, 1.0 / 128.0, |u| {
            let x = u.exp();
            (f_smooth(x), f_smooth_dlog(x))
        });
        FTable { table }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 1e-3 {
            return 1.0;
        }
        match self.table.at(x.ln()) {
            Some(v) => v,
            None if x > 700.0 => 0.0,
            None => f_smooth(x),
        }
    }
}

impl Default for FTable {
    fn default() -> Self {
        Self::new()
    }
}

pub fn f_table() -> &'static FTable {
    static T: OnceLock<FTable> = OnceLock::new();
    T.get_or_init(FTable::new)
}

// ---------------------------------------------------------------------------
// contours

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContourKind {
    /// `sigma - i inf` to `sigma + i inf`.
    VerticalLine { sigma: f64 },
    /// `-i inf` to `-i v`, the left semicircle `|s| = v`, then `i v` to `i inf`.
    Cv { v: f64 },
    /// Positively oriented circle (residue probes).
    Circle { center_re: f64, center_im: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub kind: ContourKind,
    pub t_max: f64,
    pub nodes_per_unit: usize,
}

impl ContourSpec {
    pub fn vertical(sigma: f64) -> Self {
        ContourSpec { kind: ContourKind::VerticalLine { sigma }, t_max: 40.0, nodes_per_unit: 16 }
    }
    pub fn cv(v: f64) -> Self {
        ContourSpec { kind: ContourKind::Cv { v }, t_max: 40.0, nodes_per_unit: 16 }
    }
    pub fn circle(center: C, radius: f64) -> Self {
        ContourSpec {
            kind: ContourKind::Circle { center_re: center.re, center_im: center.im, radius },
            t_max: 0.0,
            nodes_per_unit: 16,
        }
    }
    pub fn with_density(mut self, nodes_per_unit: usize) -> Self {
        self.nodes_per_unit = nodes_per_unit;
        self
    }
    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let ContourKind::Cv { v } = self.kind {
            if !(v > 0.0 && v < 0.5) {
                return Err(Error::Invalid(format!("C_v radius {v} outside (0, 1/2)")));
            }
        }
        Ok(())
    }
}

/// Quadrature nodes `(s_j, w_j)` with `sum w_j f(s_j) ~ int f(s) ds`. With
/// `upper_half`, only the part with `Im s >= 0` (for conjugation-symmetric use).
/// The last entry of the returned vector of tail markers holds the indices of the
/// nodes nearest each truncation end.
pub struct ContourNodes {
    pub nodes: Vec<(C, C)>,
    pub ends: Vec<usize>,
}

fn push_segment(
    out: &mut Vec<(C, C)>,
    a: f64,
    b: f64,
    panels: usize,
    param: &dyn Fn(f64) -> (C, C),
) {
    let (x, w) = gl16();
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let m = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            let t = m + 0.5 * h * xi;
            let (s, ds) = param(t);
            out.push((s, ds * (0.5 * h * wi)));
        }
    }
}

pub fn contour_nodes(spec: &ContourSpec, upper_half: bool) -> ContourNodes {
    // densities above 16/unit are realized by shorter panels
    let per_unit = spec.nodes_per_unit as f64 / 16.0;
    let mut nodes = vec![];
    let mut ends = vec![];
    match spec.kind {
        ContourKind::VerticalLine { sigma } => {
            let panels = ((spec.t_max * per_unit).ceil() as usize).max(1);
            if !upper_half {
                push_segment(&mut nodes, -spec.t_max, 0.0, panels, &|t| (C::new(sigma, t), I));
                ends.push(0);
            }
            push_segment(&mut nodes, 0.0, spec.t_max, panels, &|t| (C::new(sigma, t), I));
            ends.push(nodes.len() - 1);
        }
        ContourKind::Cv { v } => {
            let len = spec.t_max - v;
            let panels = ((len * per_unit).ceil() as usize).max(1);
            let arc_panels = ((PI * v * per_unit * 4.0).ceil() as usize).max(2);
            if !upper_half {
                // s = -i t, t from t_max down to v: parameter t' = -t increasing
                push_segment(&mut nodes, -spec.t_max, -v, panels, &|t| (C::new(0.0, t), I));
                ends.push(0);
                // lower quarter of the arc: phi from 3pi/2 down to pi, i.e. increasing -phi
                push_segment(&mut nodes, -1.5 * PI, -PI, arc_panels, &|mphi| {
                    let e = C::from_polar(1.0, -mphi);
                    (v * e, -I * v * e)
                });
            }
            push_segment(&mut nodes, -PI, -0.5 * PI, arc_panels, &|mphi| {
                let e = C::from_polar(1.0, -mphi);
                (v * e, -I * v * e)
            });
            push_segment(&mut nodes, v, spec.t_max, panels, &|t| (C::new(0.0, t), I));
            ends.push(nodes.len() - 1);
        }
        ContourKind::Circle { center_re, center_im, radius } => {
            let c0 = C::new(center_re, center_im);
            let panels = 8;
            push_segment(&mut nodes, 0.0, 2.0 * PI, panels, &|phi| {
                let e = C::from_polar(1.0, phi);
                (c0 + radius * e, I * radius * e)
            });
        }
    }
    ContourNodes { nodes, ends }
}

/// `int f(s) ds` along the contour, with a truncation estimate from the integrand
/// at the truncation ends (exponential decay of rate `pi/2` assumed).
pub fn contour_integral(spec: &ContourSpec, mut f: impl FnMut(C) -> C) -> Result<(C, f64)> {
    spec.validate()?;
    let cn = contour_nodes(spec, false);
    let mut sum = C::zero();
    let mut peak: f64 = 0.0;
    let mut vals = Vec::with_capacity(cn.nodes.len());
    for (s, w) in &cn.nodes {
        let v = f(*s);
        peak = peak.max(v.norm());
        vals.push(v);
        sum += w * v;
    }
    let tail: f64 = cn.ends.iter().map(|&j| vals[j].norm() * 2.0 / PI).sum();
    if !tail.is_finite() || (peak > 0.0 && tail > 1e-6 * peak.max(1e-300) && tail > 1e-12) {
        return Err(Error::NoDecay { partial: sum, tail });
    }
    Ok((sum, tail))
}

// ---------------------------------------------------------------------------
// V kernels

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFlavor {
    pub iota: u8,
    pub epsilons: Vec<i32>,
    pub s0_re: f64,
    pub s0_im: f64,
}

impl KernelFlavor {
    pub fn at_one(iota: u8, epsilons: Vec<i32>) -> Self {
        KernelFlavor { iota, epsilons, s0_re: 1.0, s0_im: 0.0 }
    }
    pub fn s0(&self) -> C {
        C::new(self.s0_re, self.s0_im)
    }
}

/// The `V_{iota,eps,s0}` integrand without `(pi x)^{-u}`:
/// `pi^{s0-1/2} F~(u) prod (1-eps q^{-s0+u})/(1-eps q^{s0-u-1}) G((iota+1-s0+u)/2)/G((iota+s0-u)/2)`.
pub fn v_integrand(flavor: &KernelFlavor, cfg: &SConfig, u: C) -> Result<C> {
    let s0 = flavor.s0();
    let mut val = mellin_f(u)? * ((s0 - 0.5) * PI.ln()).exp();
    for (&q, &eps) in cfg.finite_places.iter().zip(&flavor.epsilons) {
        if eps != 0 {
            let lq = (q as f64).ln();
            let e = eps as f64;
            val *= (1.0 - e * ((u - s0) * lq).exp()) / (1.0 - e * ((s0 - u - 1.0) * lq).exp());
        }
    }
    let iota = flavor.iota as f64;
    val *= gamma_ratio((iota + 1.0 - s0 + u) / 2.0, (iota + s0 - u) / 2.0);
    Ok(val)
}

/// Precomputed quadrature for `V(x) = (1/2 pi i) int phi(u) (pi x)^{-u} du` on `(sigma)`.
#[derive(Debug, Clone)]
pub struct VKernel {
    coeffs: Vec<(C, C)>,
    symmetric: bool,
    pub tail: f64,
}

impl VKernel {
    pub fn new(flavor: &KernelFlavor, cfg: &SConfig, spec: &ContourSpec) -> Result<Self> {
        let symmetric = flavor.s0_im == 0.0;
        let cn = contour_nodes(spec, symmetric);
        let mut coeffs = Vec::with_capacity(cn.nodes.len());
        for (s, w) in &cn.nodes {
            coeffs.push((*s, w * v_integrand(flavor, cfg, *s)?));
        }
        // tail bound relative to x: the kernel multiplies by (pi x)^{-sigma} on the line
        let tail: f64 = cn.ends.iter().map(|&j| (coeffs[j].1 / cn.nodes[j].1).norm() * 2.0 / PI).sum();
        Ok(VKernel { coeffs, symmetric, tail })
    }

    /// Returns `(V(x), x dV/dx)`.
    pub fn eval_with_der(&self, x: f64) -> (C, C) {
        let lx = (PI * x).ln();
        let mut v = C::zero();
        let mut d = C::zero();
        for (s, w) in &self.coeffs {
            let t = w * (-s * lx).exp();
            v += t;
            d -= t * s;
        }
        if self.symmetric {
            (C::new(v.im / PI, 0.0), C::new(d.im / PI, 0.0))
        } else {
            (v / (2.0 * PI * I), d / (2.0 * PI * I))
        }
    }

    pub fn eval(&self, x: f64) -> C {
        self.eval_with_der(x).0
    }

    /// Truncation estimate at `x`.
    pub fn tail_at(&self, x: f64, sigma: f64) -> f64 {
        self.tail * (PI * x).powf(-sigma) / (2.0 * PI)
    }
}

/// `V_{iota,eps}(x)` on the line `Re u = sigma`; returns value and tail estimate.
pub fn v_kernel_on(flavor: &KernelFlavor, cfg: &SConfig, x: f64, sigma: f64) -> Result<(C, f64)> {
    if !(x > 0.0) {
        return Err(Error::Invalid("V kernel needs x > 0".into()));
    }
    let spec = ContourSpec::vertical(sigma);
    let k = VKernel::new(flavor, cfg, &spec)?;
    let tail = k.tail_at(x, sigma);
    let v = k.eval(x);
    if tail > 1e-10 * v.norm().max(1e-30) && tail > 1e-14 {
        return Err(Error::Truncation { partial: v, estimate: tail, tolerance: 1e-10 });
    }
    Ok((v, tail))
}

/// `V_{iota,eps}(x)`: line `Re u = 3/2` for `x >= 1`, `Re u = 1/2` below (any line in
/// `Re u > 0` is admissible; the lower one limits growth of `(pi x)^{-u}`).
pub fn v_kernel(flavor: &KernelFlavor, cfg: &SConfig, x: f64) -> Result<(C, f64)> {
    let sigma = if x >= 1.0 { 1.5 } else { 0.5 };
    v_kernel_on(flavor, cfg, x, sigma)
}

/// A `V` kernel tabulated on a log grid (cubic Hermite), with direct evaluation
/// outside the table and zero beyond the decay point.
pub struct VTable {
    pub flavor: KernelFlavor,
    table: LogTable<f64>,
    lo: VKernel,
    hi: VKernel,
    x_zero: f64,
}

impl VTable {
    pub fn new(flavor: &KernelFlavor, cfg: &SConfig) -> Result<Self> {
        let lo = VKernel::new(flavor, cfg, &ContourSpec::vertical(0.5).with_density(32))?;
        let hi = VKernel::new(flavor, cfg, &ContourSpec::vertical(1.5).with_density(32))?;
        let eval = |x: f64| if x >= 1.0 { hi.eval_with_der(x) } else { lo.eval_with_der(x) };
        // find where |V| drops below 1e-18
        let mut x_zero = 1.0;
        while x_zero < 1e4 {
            if eval(x_zero).0.norm() < 1e-18 && eval(x_zero * 1.5).0.norm() < 1e-18 {
                break;
            }
            x_zero *= 1.25;
        }
        let table = LogTable::build(-12.0, x_zero.ln(), 1.0 / 48.0, |u| {
            let (v, d) = eval(u.exp());
            (v.re, d.re)
        });
        Ok(VTable { flavor: flavor.clone(), table, lo, hi, x_zero })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.x_zero {
            return 0.0;
        }
        match self.table.at(x.ln()) {
            Some(v) => v,
            None => {
                if x >= 1.0 {
                    self.hi.eval(x).re
                } else {
                    self.lo.eval(x).re
                }
            }
        }
    }

    pub fn direct(&self, x: f64) -> f64 {
        if x >= 1.0 {
            self.hi.eval(x).re
        } else {
            self.lo.eval(x).re
        }
    }

    pub fn x_zero(&self) -> f64 {
        self.x_zero
    }
}

// ---------------------------------------------------------------------------
// incomplete gamma

/// Upper incomplete gamma `Gamma(a, x)` for complex `a` and `x > 0`.
pub fn upper_gamma(a: C, x: f64) -> C {
    assert!(x > 0.0);
    if x < 1.5 + a.norm() {
        if a.norm() < 1e-14 {
            return C::new(e1(x), 0.0);
        }
        // lower series gamma(a,x) = x^a e^{-x} sum x^k / (a(a+1)...(a+k))
        let mut term = 1.0 / a;
        let mut sum = term;
        for k in 1..500 {
            term *= x / (a + k as f64);
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        let lower = (a * x.ln() - x).exp() * sum;
        gamma(a).unwrap_or(C::zero()) - lower
    } else {
        // modified Lentz for the continued fraction
        let tiny = 1e-300;
        let mut b = C::new(x + 1.0, 0.0) - a;
        let mut cc = C::new(1.0 / tiny, 0.0);
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (C::new(i as f64, 0.0) - a);
            b += 2.0;
            d = an * d + b;
            if d.norm() < tiny {
                d = C::new(tiny, 0.0);
            }
            cc = b + an / cc;
            if cc.norm() < tiny {
                cc = C::new(tiny, 0.0);
            }
            d = 1.0 / d;
            let del = d * cc;
            h *= del;
            if (del - 1.0).norm() < 1e-16 {
                break;
            }
        }
        (a * x.ln() - x).exp() * h
    }
}

/// Exponential integral `E_1(x) = Gamma(0, x)`.
pub fn e1(x: f64) -> f64 {
    if x < 2.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..100 {
            term *= -x / k as f64;
            sum -= term / k as f64;
            if term.abs() < 1e-18 {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        upper_gamma(C::zero(), x).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((gamma(c(0.5, 0.0)).unwrap().re - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(c(5.0, 0.0)).unwrap().re - 24.0).abs() < 1e-12);
        let g = gamma(c(1.0, 1.0)).unwrap();
        assert!((g.norm_sqr() - PI / PI.sinh()).abs() < 1e-13);
        assert!(gamma(c(-2.0, 0.0)).is_err());
        let g = gamma(c(-2.5, 0.0)).unwrap();
        assert!((g.re - (-0.945_308_720_482_941_9)).abs() < 1e-13);
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(c(2.0, 0.0)).unwrap().re - PI * PI / 6.0).abs() < 1e-13);
        assert!((zeta(c(1.5, 0.0)).unwrap().re - 2.612_375_348_685_488).abs() < 1e-12);
        assert!((zeta(c(0.0, 0.0)).unwrap().re + 0.5).abs() < 1e-15);
        assert!((zeta(c(-1.0, 0.0)).unwrap().re + 1.0 / 12.0).abs() < 1e-13);
        assert!((zeta(c(-3.0, 0.0)).unwrap().re - 1.0 / 120.0).abs() < 1e-14);
        // first zero
        assert!(zeta(c(0.5, 14.134_725_141_734_693)).unwrap().norm() < 1e-10);
        assert!(zeta(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn bessel_k() {
        assert!((k0_2() - 0.113_893_872_749_533_4).abs() < 1e-15);
        assert!((besselk2(c(0.0, 0.0)).re - k0_2()).abs() < 1e-15);
        let s = c(0.7, 23.0);
        let a = besselk2(s);
        let b = besselk2_series(s);
        assert!((a - b).norm() < 1e-10 * b.norm(), "{a} {b}");
    }

    #[test]
    fn f_values() {
        assert_eq!(f_smooth(0.0), 1.0);
        assert!(f_smooth(1.0) > f_smooth(2.0));
        assert!(f_smooth(10.0) < (-10f64).exp() / (2.0 * k0_2()));
        let t = f_table();
        for &x in &[0.002, 0.1, 0.7, 1.3, 5.0, 20.0] {
            assert!((t.eval(x) - f_smooth(x)).abs() < 1e-10);
        }
    }
}
