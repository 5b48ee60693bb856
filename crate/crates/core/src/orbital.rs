//! Local orbital integrals at finite places, the lattice-counting oracle, Shalika
//! germ constants, the normalized `theta_p`, p-adic step functions, and the
//! archimedean `theta_inf` data.

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::quadratic::{local_chi, local_k};
use crate::snumber::{frac_part_ratio, split_p, valuation_ratio};
use crate::specfun::{gl16, integrate_gl};

type C = Complex64;
type Q = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaClass {
    pub t: Q,
    pub n: Q,
}

impl GammaClass {
    pub fn new(t: Q, n: Q) -> Result<Self> {
        if (t * t - n * 4).is_zero() {
            return Err(Error::Invalid("T^2 - 4N = 0 is not regular semisimple".into()));
        }
        if n.is_zero() {
            return Err(Error::Invalid("N = 0".into()));
        }
        Ok(GammaClass { t, n })
    }

    pub fn ints(t: i128, n: i128) -> Result<Self> {
        Self::new(Q::from_integer(t), Q::from_integer(n))
    }

    pub fn delta(&self) -> Q {
        self.t * self.t - self.n * 4
    }

    pub fn integral_at(&self, p: u64) -> bool {
        is_p_integral(&self.t, p) && is_p_integral(&self.n, p)
    }

    /// `(k_p, chi(p))`.
    pub fn invariants(&self, p: u64) -> (i32, i32) {
        let d = self.delta();
        (local_k(&d, p), local_chi(&d, p))
    }
}

fn is_p_integral(x: &Q, p: u64) -> bool {
    split_p(*x.denom(), p).0 == 0
}

fn vp(x: &Q, p: u64) -> i32 {
    valuation_ratio(x, p).unwrap_or(i32::MAX)
}

fn ipow(p: u64, e: u32) -> i128 {
    (p as i128).pow(e)
}

// ---------------------------------------------------------------------------
// closed forms

/// `1 + sum_{j=1}^k p^j (1 - chi/p)`.
fn maximal_sum(p: u64, k: i32, chi: i32) -> i128 {
    let mut s = 1i128;
    for j in 1..=k.max(0) as u32 {
        s += ipow(p, j) - chi as i128 * ipow(p, j - 1);
    }
    s
}

pub fn orb_maximal_closed(g: &GammaClass, p: u64, m: u32) -> i128 {
    if !g.integral_at(p) || vp(&g.n, p) != m as i32 {
        return 0;
    }
    let (k, chi) = g.invariants(p);
    maximal_sum(p, k, chi)
}

pub fn orb_iwahori_closed(g: &GammaClass, p: u64) -> Q {
    if !g.integral_at(p) || vp(&g.n, p) != 0 {
        return Q::zero();
    }
    let (k, chi) = g.invariants(p);
    let p1 = (p + 1) as i128;
    Q::new(2 * maximal_sum(p, k, chi), p1) + Q::new(chi as i128 - 1, p1)
}

// ---------------------------------------------------------------------------
// lattice oracle

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subgroup {
    Maximal(u32),
    Iwahori,
}

/// A lattice in `Q_p^2` given by a basis (columns) of integer vectors.
#[derive(Debug, Clone, Copy)]
struct Lattice {
    b1: [i128; 2],
    b2: [i128; 2],
}

impl Lattice {
    fn root() -> Self {
        Lattice { b1: [1, 0], b2: [0, 1] }
    }

    fn contains(&self, v: [Q; 2], p: u64) -> bool {
        // solve v = x b1 + y b2
        let det = self.b1[0] * self.b2[1] - self.b1[1] * self.b2[0];
        let d = Q::from_integer(det);
        let x = (v[0] * self.b2[1] - v[1] * self.b2[0]) / d;
        let y = (v[1] * self.b1[0] - v[0] * self.b1[1]) / d;
        is_p_integral(&x, p) && is_p_integral(&y, p)
    }

    fn stable(&self, g: &GammaClass, p: u64) -> bool {
        // companion matrix [[0, -N], [1, T]]
        let act = |b: [i128; 2]| -> [Q; 2] {
            let (x, y) = (Q::from_integer(b[0]), Q::from_integer(b[1]));
            [-g.n * y, x + g.t * y]
        };
        self.contains(act(self.b1), p) && self.contains(act(self.b2), p)
    }

    fn primitive(&self, p: u64) -> bool {
        let pi = p as i128;
        [self.b1[0], self.b1[1], self.b2[0], self.b2[1]].iter().any(|x| x % pi != 0)
    }

    /// The `p + 1` sublattices of index `p`.
    fn index_p_sublattices(&self, p: u64) -> Vec<Lattice> {
        let pi = p as i128;
        let mut out = Vec::with_capacity(p as usize + 1);
        out.push(Lattice { b1: [pi * self.b1[0], pi * self.b1[1]], b2: self.b2 });
        for l in 0..pi {
            out.push(Lattice {
                b1: [self.b1[0] + l * self.b2[0], self.b1[1] + l * self.b2[1]],
                b2: [pi * self.b2[0], pi * self.b2[1]],
            });
        }
        out
    }

    /// Reduce entries modulo `p^e` once the lattice contains `p^e Z_p^2`.
    fn reduced(self, p: u64, depth: u32) -> Lattice {
        let m = ipow(p, depth + 2);
        let r = |x: i128| x.rem_euclid(m);
        let l = Lattice { b1: [r(self.b1[0]), r(self.b1[1])], b2: [r(self.b2[0]), r(self.b2[1])] };
        // the reduction must not change the lattice: keep it only if the determinant valuation is intact
        let det = |l: &Lattice| l.b1[0] * l.b2[1] - l.b1[1] * l.b2[0];
        if det(&l) != 0 && split_p(det(&l), p).0 == split_p(det(&self), p).0 {
            l
        } else {
            self
        }
    }
}

/// Shell statistics of the `gamma`-fixed vertices of the Bruhat-Tits tree, grouped by
/// distance from the root `Z_p^2`.
#[derive(Debug, Clone)]
pub struct FixedCounts {
    /// fixed vertices at distance `d`
    pub vertices: Vec<u64>,
    /// fixed oriented edges whose source is at distance `d`
    pub edges: Vec<u64>,
}

/// Walks the fixed subtree from the root (it is connected and contains the root when
/// `gamma` is integral), visiting HNF-style child lattices up to `depth`.
pub fn fixed_counts(g: &GammaClass, p: u64, depth: u32) -> FixedCounts {
    let mut vertices = vec![0u64; depth as usize + 1];
    let mut edges = vec![0u64; depth as usize + 1];
    let root = Lattice::root();
    if !root.stable(g, p) {
        return FixedCounts { vertices, edges };
    }
    let mut stack: Vec<(Lattice, u32)> = vec![(root, 0)];
    while let Some((l, d)) = stack.pop() {
        vertices[d as usize] += 1;
        for sub in l.index_p_sublattices(p) {
            if !sub.stable(g, p) {
                continue;
            }
            edges[d as usize] += 1;
            // children are the primitive index-p sublattices (the parent class is p * parent)
            if sub.primitive(p) && d < depth {
                stack.push((sub.reduced(p, depth), d + 1));
            }
        }
    }
    FixedCounts { vertices, edges }
}

/// Number of fixed vertices (or fixed oriented edges) per fundamental domain of the
/// torus action, as an exact rational, with a saturation check.
fn torus_average(counts: &[u64], chi: i32, depth: u32) -> Result<Q> {
    let n = counts.len();
    if chi == 1 {
        // split: the fixed set is a tube; each new shell adds two fibers
        if n < 3 || counts[n - 1] != counts[n - 2] || counts[n - 2] != counts[n - 3] {
            return Err(Error::NotSaturated(depth));
        }
        Ok(Q::new(counts[n - 1] as i128, 2))
    } else {
        if counts[n - 1] != 0 || counts[n - 2] != 0 {
            return Err(Error::NotSaturated(depth));
        }
        let total: u64 = counts.iter().sum();
        // ramified: the uniformizer swaps the two halves of the fixed set
        let w = if chi == 0 { 2 } else { 1 };
        Ok(Q::new(total as i128, w))
    }
}

/// Orbital integral by lattice counting. `depth` bounds the tree distance explored.
pub fn orb_bruteforce(g: &GammaClass, p: u64, subgroup: Subgroup, depth: u32) -> Result<Q> {
    let m_req = match subgroup {
        Subgroup::Maximal(m) => m,
        Subgroup::Iwahori => 0,
    };
    if !g.integral_at(p) || vp(&g.n, p) != m_req as i32 {
        return Ok(Q::zero());
    }
    let chi = local_chi(&g.delta(), p);
    let counts = fixed_counts(g, p, depth);
    match subgroup {
        Subgroup::Maximal(_) => torus_average(&counts.vertices, chi, depth),
        Subgroup::Iwahori => {
            let e = torus_average(&counts.edges, chi, depth)?;
            Ok(e / Q::from_integer(p as i128 + 1))
        }
    }
}

/// Default oracle depth.
pub fn oracle_depth(k: i32, m: u32) -> u32 {
    ((k.max(0) as u32) + m + 3).max(2 * k.max(0) as u32 + 4)
}

/// `sum_{j<=m} p^j`, checked against the count of Hermite normal forms of determinant `p^m`.
pub fn hecke_volume(p: u64, m: u32) -> u128 {
    (0..=m).map(|j| (p as u128).pow(j)).sum()
}

/// Number of matrices `[[p^a, b], [0, p^c]]` with `a + c = m`, `0 <= b < p^c`.
pub fn hnf_count(p: u64, m: u32) -> u128 {
    let mut n = 0u128;
    for c in 0..=m {
        let pc = (p as u128).pow(c);
        for _b in 0..pc {
            n += 1;
        }
    }
    n
}

// ---------------------------------------------------------------------------
// Shalika germs, theta_p

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FChoice {
    /// `1_{X_p^m}`; `m = 0` is `1_{K_p}`.
    Maximal(u32),
    Iwahori,
    Step(PadicStepFunction),
}

impl FChoice {
    /// Parses `K`, `I`, or `X^m`.
    pub fn parse_standard(s: &str) -> Result<Self> {
        match s.trim() {
            "K" => Ok(FChoice::Maximal(0)),
            "I" => Ok(FChoice::Iwahori),
            t if t.starts_with("X^") => t[2..]
                .parse::<u32>()
                .map(FChoice::Maximal)
                .map_err(|_| Error::Config(format!("bad test function {s}"))),
            _ => Err(Error::Config(format!("bad test function {s}"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FChoice::Maximal(0) => "K".into(),
            FChoice::Maximal(m) => format!("X^{m}"),
            FChoice::Iwahori => "I".into(),
            FChoice::Step(_) => "step".into(),
        }
    }
}

/// `(lambda_1, lambda_2)` for a standard function at `a I`.
pub fn shalika_constants(f: &FChoice, p: u64, a: &Q) -> Result<(Q, Q)> {
    let inv = Q::new(p as i128, p as i128 - 1);
    let va = vp(a, p);
    match f {
        FChoice::Maximal(m) => {
            if va >= 0 && 2 * va == *m as i32 {
                Ok((Q::one(), inv))
            } else {
                Ok((Q::zero(), Q::zero()))
            }
        }
        FChoice::Iwahori => {
            if va == 0 {
                Ok((Q::one(), inv * Q::new(2, p as i128 + 1)))
            } else {
                Ok((Q::zero(), Q::zero()))
            }
        }
        FChoice::Step(_) => Err(Error::Invalid("germ constants need a standard function".into())),
    }
}

/// Germ expansion `lambda_1 (1-chi)/(1-p) + lambda_2 (1 - chi/p) p^k`.
pub fn germ_value(l1: Q, l2: Q, p: u64, k: i32, chi: i32) -> Q {
    let pi = p as i128;
    l1 * Q::new(1 - chi as i128, 1 - pi) + l2 * Q::new(pi - chi as i128, pi) * Q::from_integer(pi.pow(k as u32))
}

fn orb_standard(g: &GammaClass, p: u64, f: &FChoice) -> Q {
    match f {
        FChoice::Maximal(m) => Q::from_integer(orb_maximal_closed(g, p, *m)),
        FChoice::Iwahori => orb_iwahori_closed(g, p),
        FChoice::Step(_) => unreachable!(),
    }
}

/// `|N|_p^{-1/2} (1 - chi/p)^{-1} p^{-k} orb(f; gamma)`; for step data the stored value at `T`.
pub fn theta_p(g: &GammaClass, p: u64, f: &FChoice) -> C {
    if let FChoice::Step(s) = f {
        return s.eval(&g.t);
    }
    let orb = orb_standard(g, p, f);
    if orb.is_zero() {
        return C::zero();
    }
    let (k, chi) = g.invariants(p);
    let pi = p as i128;
    let base = orb * Q::new(pi, pi - chi as i128) / Q::from_integer(pi).pow(k);
    let vn = vp(&g.n, p);
    // |N|_p^{-1/2} = p^{vn/2}
    let scale = (p as f64).powf(vn as f64 / 2.0);
    C::new(*base.numer() as f64 / *base.denom() as f64 * scale, 0.0)
}

/// Value of `theta_p` at a singular point (limit along shrinking balls).
pub fn theta_singular_limit(f: &FChoice, p: u64, n: &Q) -> C {
    let pf = p as f64;
    let base = pf / (pf - 1.0);
    match f {
        FChoice::Maximal(m) => {
            if vp(n, p) == *m as i32 {
                C::new(pf.powf(*m as f64 / 2.0) * base, 0.0)
            } else {
                C::zero()
            }
        }
        FChoice::Iwahori => {
            if vp(n, p) == 0 {
                C::new(2.0 / (pf + 1.0) * base, 0.0)
            } else {
                C::zero()
            }
        }
        FChoice::Step(_) => C::zero(),
    }
}

// ---------------------------------------------------------------------------
// p-adic step functions

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub center: Q,
    pub radius_exp: i32,
    pub value: C,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PadicStepFunction {
    pub prime: u64,
    pub pieces: Vec<Piece>,
}

#[derive(Serialize, Deserialize)]
struct PieceJson {
    center: String,
    radius_exp: i32,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct StepJson {
    prime: u64,
    pieces: Vec<PieceJson>,
}

impl Serialize for PadicStepFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StepJson {
            prime: self.prime,
            pieces: self
                .pieces
                .iter()
                .map(|p| PieceJson {
                    center: format!("{}/{}", p.center.numer(), p.center.denom()),
                    radius_exp: p.radius_exp,
                    re: p.value.re,
                    im: p.value.im,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PadicStepFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = StepJson::deserialize(d)?;
        let mut pieces = vec![];
        for p in j.pieces {
            let center = parse_q(&p.center).map_err(serde::de::Error::custom)?;
            pieces.push(Piece { center, radius_exp: p.radius_exp, value: C::new(p.re, p.im) });
        }
        PadicStepFunction::new(j.prime, pieces).map_err(serde::de::Error::custom)
    }
}

pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let parse = |t: &str| t.trim().parse::<i128>().map_err(|_| Error::Config(format!("bad rational {s}")));
    match s.split_once('/') {
        Some((a, b)) => {
            let b = parse(b)?;
            if b == 0 {
                return Err(Error::Config(format!("zero denominator in {s}")));
            }
            Ok(Q::new(parse(a)?, b))
        }
        None => Ok(Q::from_integer(parse(s)?)),
    }
}

fn in_ball(y: &Q, center: &Q, r: i32, p: u64) -> bool {
    let d = *y - *center;
    d.is_zero() || vp(&d, p) >= r
}

impl PadicStepFunction {
    pub fn new(prime: u64, pieces: Vec<Piece>) -> Result<Self> {
        for (i, a) in pieces.iter().enumerate() {
            for b in &pieces[i + 1..] {
                let r = a.radius_exp.min(b.radius_exp);
                if in_ball(&a.center, &b.center, r, prime) {
                    return Err(Error::Invalid(format!(
                        "overlapping balls {}+p^{} and {}+p^{}",
                        a.center, a.radius_exp, b.center, b.radius_exp
                    )));
                }
            }
        }
        Ok(PadicStepFunction { prime, pieces })
    }

    pub fn indicator_zp(prime: u64) -> Self {
        PadicStepFunction { prime, pieces: vec![Piece { center: Q::zero(), radius_exp: 0, value: C::new(1.0, 0.0) }] }
    }

    pub fn eval(&self, y: &Q) -> C {
        for pc in &self.pieces {
            if in_ball(y, &pc.center, pc.radius_exp, self.prime) {
                return pc.value;
            }
        }
        C::zero()
    }

    pub fn volume(&self, r: i32) -> f64 {
        (self.prime as f64).powi(-r)
    }

    /// `int f(y) dy`.
    pub fn step_integral(&self) -> C {
        self.pieces.iter().map(|pc| pc.value * self.volume(pc.radius_exp)).sum()
    }

    /// `int f(y) e_p(-y xi / scale) dy`; the character integrates to zero over any ball on
    /// which it is not constant, so each piece contributes only when `v(xi/scale) + r >= 0`.
    pub fn step_oscillatory_integral(&self, xi: &Q, scale: &Q) -> Result<C> {
        if scale.is_zero() {
            return Err(Error::Invalid("zero scale".into()));
        }
        let t = *xi / *scale;
        if t.is_zero() {
            return Ok(self.step_integral());
        }
        let vt = vp(&t, self.prime);
        let mut sum = C::zero();
        for pc in &self.pieces {
            if vt + pc.radius_exp >= 0 {
                // e_p(-c t) = e(<c t>_p)
                let (a, m) = frac_part_ratio(&(pc.center * t), self.prime);
                sum += pc.value * self.volume(pc.radius_exp) * crate::snumber::e_frac(a, m);
            }
        }
        Ok(sum)
    }

    /// Maximal `|nu|`-type support summary: smallest radius exponent.
    pub fn min_radius(&self) -> i32 {
        self.pieces.iter().map(|p| p.radius_exp).min().unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// regular-ball decomposition of y -> y^2 - 4N

/// A ball `center + p^radius Z_p` on which `y^2 - 4N` has constant valuation and unit
/// class (`singular = false`), or a ball at the depth cap containing a root.
#[derive(Debug, Clone)]
pub struct DeltaBall {
    pub center: Q,
    pub radius_exp: i32,
    pub singular: bool,
}

/// Extra precision needed for the unit class: `mod 8` at 2, `mod p` otherwise.
pub fn unit_precision(p: u64) -> i32 {
    if p == 2 {
        3
    } else {
        1
    }
}

/// Largest refinement level at which `c^2 - 4n` with `|c| < p^r` still fits in `i128`.
pub fn safe_depth(n: &Q, p: u64) -> i32 {
    // c^2 - 4n is formed as (c^2 den - 4 num) / den
    let lp = (p as f64).log2();
    let ld = (n.denom().unsigned_abs() as f64).log2();
    ((124.0 - ld) / (2.0 * lp)).floor() as i32 - 1
}

/// Refines the ball `center + p^r Z_p` (inside `Z_p`-integral `y` or not) until
/// `v(delta(c)) + X <= level`, or the level reaches `cap`.
pub fn delta_balls(n: &Q, p: u64, center: Q, radius_exp: i32, cap: i32, out: &mut Vec<DeltaBall>) {
    let x = unit_precision(p);
    let cap = cap.min(safe_depth(n, p));
    let mut stack = vec![(center, radius_exp)];
    while let Some((c, r)) = stack.pop() {
        let d = c * c - *n * 4;
        let v = if d.is_zero() { i32::MAX } else { vp(&d, p) };
        // delta(y) - delta(c) = (y - c)(y + c); v(y + c) >= min(r, v(2c))
        let vc2 = if c.is_zero() { i32::MAX } else { vp(&(c * 2), p) };
        let guaranteed = r + r.min(vc2);
        if v != i32::MAX && v + x <= guaranteed {
            out.push(DeltaBall { center: c, radius_exp: r, singular: false });
        } else if r >= cap {
            out.push(DeltaBall { center: c, radius_exp: r, singular: true });
        } else {
            let step = Q::from_integer(p as i128).pow(r);
            for j in 0..p as i128 {
                stack.push((c + step * Q::from_integer(j), r + 1));
            }
        }
    }
}

/// Materializes `theta_p^{sign, nu}(y) = theta_p(T = y, N)` for a standard function as
/// a step function on `Z_p`. Singular balls get the limit value; the second return
/// value bounds the resulting `L^1` error.
pub fn theta_step_function(f: &FChoice, p: u64, n: &Q, cap: i32) -> Result<(PadicStepFunction, f64)> {
    if let FChoice::Step(s) = f {
        return Ok((s.clone(), 0.0));
    }
    let mut balls = vec![];
    delta_balls(n, p, Q::zero(), 0, cap, &mut balls);
    let mut pieces = vec![];
    let mut err = 0.0;
    let pf = p as f64;
    let lim = theta_singular_limit(f, p, n);
    for b in balls {
        let value = if b.singular {
            // |theta - limit| <= 2 p/(p-1) p^{-k} |N|^{-1/2} with k >= (r - X - 1)/2
            let kmin = ((b.radius_exp - unit_precision(p) - 1) / 2).max(0);
            err += 2.0 * lim.norm().max(1.0) * pf.powi(-kmin) * pf.powi(-b.radius_exp);
            lim
        } else {
            let g = GammaClass::new(b.center, *n)?;
            theta_p(&g, p, f)
        };
        if value != C::zero() {
            pieces.push(Piece { center: b.center, radius_exp: b.radius_exp, value });
        }
    }
    Ok((PadicStepFunction { prime: p, pieces }, err))
}

// ---------------------------------------------------------------------------
// archimedean data

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BumpProfile {
    /// `exp(-1/(1-u^2))`
    Smooth,
    /// `(1-u^2)^n`
    Poly(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaInf {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
    pub profile: BumpProfile,
}

impl ThetaInf {
    pub fn bump(center: f64, half_width: f64) -> Self {
        ThetaInf { center, half_width, amplitude: 1.0, profile: BumpProfile::Smooth }
    }

    pub fn zero() -> Self {
        ThetaInf { center: 0.0, half_width: 1.0, amplitude: 0.0, profile: BumpProfile::Smooth }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.half_width;
        if u.abs() >= 1.0 || self.amplitude == 0.0 {
            return 0.0;
        }
        let w = 1.0 - u * u;
        self.amplitude
            * match self.profile {
                BumpProfile::Smooth => (-1.0 / w).exp(),
                BumpProfile::Poly(n) => w.powi(n as i32),
            }
    }

    /// Closed-form `int theta`: `2 w (2n)!!/(2n+1)!!` for the polynomial profile, and the
    /// tabulated constant `0.44399381616807943...` times `w` for the smooth one.
    pub fn exact_integral(&self) -> f64 {
        let base = match self.profile {
            BumpProfile::Smooth => 0.443_993_816_168_079_4,
            BumpProfile::Poly(n) => {
                let mut r = 2.0;
                for j in 1..=n {
                    r *= (2 * j) as f64 / (2 * j + 1) as f64;
                }
                r
            }
        };
        self.amplitude * self.half_width * base
    }

    /// Whether the support stays away from `x^2 = 1` (for the `+` sign).
    pub fn avoids(&self, pts: &[f64]) -> bool {
        let (a, b) = self.support();
        pts.iter().all(|&t| t <= a || t >= b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArchWeight {
    Plain,
    /// `|x^2 - sign|^{-1/2}`, optionally restricted to `x^2 - sign > 0`.
    InvSqrt { positive_only: bool },
    /// `e(-omega x)`
    Oscillatory { omega: f64 },
}

/// Integrates `g` on `[a, b]`, with endpoint square-root singularities allowed, by the
/// substitution `x = a + (b-a)(3t^2 - 2t^3)`; panels double until the change is below `tol`.
pub fn integrate_smoothstep(a: f64, b: f64, tol: f64, mut g: impl FnMut(f64) -> C) -> Result<(C, f64)> {
    let mut panels = 4usize;
    let mut prev: Option<C> = None;
    loop {
        let h = b - a;
        let v = crate::specfun::integrate_gl_c(0.0, 1.0, panels, |t| {
            let x = a + h * t * t * (3.0 - 2.0 * t);
            g(x) * (6.0 * h * t * (1.0 - t))
        });
        if let Some(p) = prev {
            let err = (v - p).norm();
            if err < tol {
                return Ok((v, err));
            }
        }
        if panels > 1 << 14 {
            return Err(Error::NoDecay { partial: v, tail: (v - prev.unwrap()).norm() });
        }
        prev = Some(v);
        panels *= 2;
    }
}

/// `int theta^sign(x) w(x) dx` with the sign giving `x^2 - sign`.
pub fn theta_inf_integrals(theta: &ThetaInf, sign: i32, weight: ArchWeight) -> Result<(C, f64)> {
    if theta.amplitude == 0.0 {
        return Ok((C::zero(), 0.0));
    }
    let (a, b) = theta.support();
    let s = sign as f64;
    // split at the zeros of x^2 - sign
    let mut cuts = vec![a];
    if sign > 0 {
        for r in [-1.0, 1.0] {
            if r > a && r < b {
                cuts.push(r);
            }
        }
    }
    cuts.push(b);
    let mut total = C::zero();
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let (v, e) = integrate_smoothstep(w[0], w[1], 1e-11, |x| {
            let th = theta.eval(x);
            if th == 0.0 {
                return C::zero();
            }
            match weight {
                ArchWeight::Plain => C::new(th, 0.0),
                ArchWeight::InvSqrt { positive_only } => {
                    let q = x * x - s;
                    if q == 0.0 || (positive_only && q < 0.0) {
                        C::zero()
                    } else {
                        C::new(th / q.abs().sqrt(), 0.0)
                    }
                }
                ArchWeight::Oscillatory { omega } => th * crate::snumber::e(-omega * x),
            }
        })?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

/// Plain composite quadrature of a real function over the bump support.
pub fn integrate_over(theta: &ThetaInf, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (a, b) = theta.support();
    integrate_gl(a, b, panels, |x| f(x))
}

/// Theta data for the pipeline: archimedean bumps and `theta_q^{sign, nu}` step functions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaData {
    pub theta_inf_plus: ThetaInf,
    pub theta_inf_minus: ThetaInf,
    /// key: `(sign, nu vector, place index)`
    pub theta_q: BTreeMap<(i32, Vec<i32>, usize), PadicStepFunction>,
    pub nu_bound: i32,
    /// `L^1` error of the singular-ball approximation of each `theta_q`
    pub singular_error: f64,
    /// the standard choices that produced `theta_q`, when applicable
    pub f_choices: Vec<FChoice>,
}

impl ThetaData {
    pub fn theta_inf(&self, sign: i32) -> &ThetaInf {
        if sign > 0 {
            &self.theta_inf_plus
        } else {
            &self.theta_inf_minus
        }
    }

    pub fn get(&self, sign: i32, nu: &[i32], i: usize) -> Option<&PadicStepFunction> {
        self.theta_q.get(&(sign, nu.to_vec(), i))
    }

    /// All `(sign, nu)` with every `theta_q` present.
    pub fn active(&self, r: usize) -> Vec<(i32, Vec<i32>)> {
        let mut keys: Vec<(i32, Vec<i32>)> = self.theta_q.keys().map(|(s, nu, _)| (*s, nu.clone())).collect();
        keys.sort();
        keys.dedup();
        keys.retain(|(s, nu)| (0..r).all(|i| self.get(*s, nu, i).is_some()));
        keys
    }

    pub fn validate(&self) -> Result<()> {
        for (_, nu, _) in self.theta_q.keys() {
            if nu.iter().any(|v| v.abs() >= self.nu_bound) {
                return Err(Error::Config("theta_q stored at |nu| >= nu_bound".into()));
            }
        }
        Ok(())
    }
}

/// Builds `theta_q` for standard functions `f_q`: `1_{X^m}` lives at `nu_q = m`, `1_I` at
/// `nu_q = 0`. `n` is the Hecke index.
pub fn standard_theta_data(
    f: &[FChoice],
    places: &[u64],
    n: u64,
    plus: ThetaInf,
    minus: ThetaInf,
    cap: i32,
) -> Result<ThetaData> {
    let mut nu = vec![];
    for fc in f {
        nu.push(match fc {
            FChoice::Maximal(m) => *m as i32,
            FChoice::Iwahori => 0,
            FChoice::Step(_) => {
                return Err(Error::Config("step data need explicit (sign, nu) keys".into()));
            }
        });
    }
    let mut theta_q = BTreeMap::new();
    let mut err = 0.0;
    for sign in [1, -1] {
        let mut big_n = Q::from_integer(sign as i128 * n as i128);
        for (q, v) in places.iter().zip(&nu) {
            big_n *= Q::from_integer(*q as i128).pow(*v);
        }
        for (i, (&q, fc)) in places.iter().zip(f).enumerate() {
            let (s, e) = theta_step_function(fc, q, &big_n, cap)?;
            err += e;
            theta_q.insert((sign, nu.clone(), i), s);
        }
    }
    let nu_bound = nu.iter().map(|v| v.abs()).max().unwrap_or(0) + 1;
    Ok(ThetaData {
        theta_inf_plus: plus,
        theta_inf_minus: minus,
        theta_q,
        nu_bound,
        singular_error: err,
        f_choices: f.to_vec(),
    })
}

// ---------------------------------------------------------------------------
// representatives

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Split,
    Inert,
    Ramified,
}

impl Split {
    pub fn chi(self) -> i32 {
        match self {
            Split::Split => 1,
            Split::Inert => -1,
            Split::Ramified => 0,
        }
    }
    pub fn all() -> [Split; 3] {
        [Split::Split, Split::Inert, Split::Ramified]
    }
}

/// An integral `(T, N)` with `v_p(N) = m`, prescribed splitting type and `k_p`, and
/// `T^2 - 4N` not a rational square; `None` if the combination is not realizable.
pub fn find_representative(p: u64, typ: Split, k: i32, m: u32) -> Option<GammaClass> {
    let pi = p as i128;
    let tmax = 3 * pi.pow(3).max(30);
    for t in 0..tmax {
        for nn in 1..200i128 {
            for sgn in [1i128, -1] {
                let n = sgn * nn * pi.pow(m);
                if split_p(n, p).0 != m {
                    continue;
                }
                let d = t * t - 4 * n;
                if d == 0 || crate::quadratic::is_square_int(d) {
                    continue;
                }
                let dq = Q::from_integer(d);
                if local_chi(&dq, p) == typ.chi() && local_k(&dq, p) == k {
                    return GammaClass::ints(t, n).ok();
                }
            }
        }
    }
    None
}

/// Whether `(type, k, m)` can occur for integral `gamma` with `v_p(N) = m`, odd `p`.
pub fn realizable(typ: Split, k: i32, m: u32) -> bool {
    // p | N forces p | T for delta to be non-unit; v(delta) in {0} u [min(2 v(T), m) ...]
    match m {
        0 => true,
        1 => k == 0 && typ != Split::Inert,
        _ => {
            if k == 0 {
                typ == Split::Split
            } else {
                // T = p T', N = p^2 N' reduces to (k - 1, m - 2)
                realizable(typ, k - 1, m - 2)
            }
        }
    }
}

pub fn abs_q(x: &Q) -> Q {
    x.abs()
}

pub fn gl_nodes() -> &'static (Vec<f64>, Vec<f64>) {
    gl16()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_examples() {
        let p = 3;
        let g = find_representative(p, Split::Split, 2, 0).unwrap();
        assert_eq!(orb_maximal_closed(&g, p, 0), 9);
        let g = find_representative(p, Split::Inert, 1, 0).unwrap();
        assert_eq!(orb_maximal_closed(&g, p, 0), 5);
        let g = find_representative(p, Split::Split, 1, 0).unwrap();
        assert_eq!(orb_iwahori_closed(&g, p), Q::new(3, 2));
        let g = find_representative(p, Split::Inert, 0, 0).unwrap();
        assert_eq!(orb_iwahori_closed(&g, p), Q::zero());
        let g = find_representative(5, Split::Ramified, 0, 0).unwrap();
        assert_eq!(orb_iwahori_closed(&g, 5), Q::new(1, 6));
    }

    #[test]
    fn oracle_small() {
        for p in [3u64, 5] {
            for typ in Split::all() {
                for k in 0..=2 {
                    let g = find_representative(p, typ, k, 0).unwrap();
                    let d = oracle_depth(k, 0);
                    let b = orb_bruteforce(&g, p, Subgroup::Maximal(0), d).unwrap();
                    assert_eq!(b, Q::from_integer(orb_maximal_closed(&g, p, 0)), "{p} {typ:?} {k}");
                    let b = orb_bruteforce(&g, p, Subgroup::Iwahori, d).unwrap();
                    assert_eq!(b, orb_iwahori_closed(&g, p), "iwahori {p} {typ:?} {k}");
                }
            }
        }
    }

    #[test]
    fn theta_examples() {
        let g = find_representative(3, Split::Split, 0, 0).unwrap();
        assert!((theta_p(&g, 3, &FChoice::Maximal(0)).re - 1.5).abs() < 1e-15);
        let g = find_representative(3, Split::Inert, 0, 0).unwrap();
        assert!((theta_p(&g, 3, &FChoice::Maximal(0)).re - 0.75).abs() < 1e-15);
        let g = GammaClass::new(Q::new(1, 3), Q::from_integer(1)).unwrap();
        assert_eq!(theta_p(&g, 3, &FChoice::Maximal(0)), C::zero());
    }

    #[test]
    fn step_integrals() {
        let f = PadicStepFunction::indicator_zp(3);
        assert_eq!(f.step_integral(), C::new(1.0, 0.0));
        let z = f.step_oscillatory_integral(&Q::new(1, 3), &Q::one()).unwrap();
        assert!(z.norm() < 1e-15);
        let g = PadicStepFunction::new(
            3,
            vec![Piece { center: Q::zero(), radius_exp: 1, value: C::new(1.0, 0.0) }],
        )
        .unwrap();
        let z = g.step_oscillatory_integral(&Q::new(1, 3), &Q::one()).unwrap();
        assert!((z - C::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }
}
