//! Hadamard-regularized radial integrals: closed forms, quadrature oracles,
//! expansion coefficients, finite parts and scaling degrees.

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use nalgebra::{DMatrix, DVector};
use num::{BigRational, One, ToPrimitive, Zero};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::cell::RefCell;
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HadamardError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge (estimate {estimate}, error {error})")]
    NoConvergence { estimate: f64, error: f64 },
    #[error("fit precondition: {0}")]
    FitPrecondition(String),
}

pub type Result<T> = std::result::Result<T, HadamardError>;

/// Working precision of [`Hp`] in bits.
pub const PREC: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

/// Extended-precision real.
#[derive(Clone, Debug)]
pub struct Hp(BigFloat);

impl Hp {
    pub fn from_f64(x: f64) -> Self {
        Hp(BigFloat::from_f64(x, PREC))
    }

    pub fn from_i64(x: i64) -> Self {
        Hp(BigFloat::from_i64(x, PREC))
    }

    pub fn parse(s: &str) -> Self {
        Hp(CONSTS.with(|c| BigFloat::parse(s, Radix::Dec, PREC, RM, &mut c.borrow_mut())))
    }

    pub fn from_rational(q: &BigRational) -> Self {
        &Hp::parse(&q.numer().to_string()) / &Hp::parse(&q.denom().to_string())
    }

    pub fn zero() -> Self {
        Hp::from_i64(0)
    }

    pub fn one() -> Self {
        Hp::from_i64(1)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_string().parse().unwrap_or(f64::NAN)
    }

    pub fn ln(&self) -> Self {
        Hp(CONSTS.with(|c| self.0.ln(PREC, RM, &mut c.borrow_mut())))
    }

    pub fn exp(&self) -> Self {
        Hp(CONSTS.with(|c| self.0.exp(PREC, RM, &mut c.borrow_mut())))
    }

    pub fn powi(&self, n: i64) -> Self {
        let p = Hp(self.0.powi(n.unsigned_abs() as usize, PREC, RM));
        if n < 0 {
            &Hp::one() / &p
        } else {
            p
        }
    }

    pub fn abs(&self) -> Self {
        Hp(self.0.abs())
    }

    pub fn is_finite(&self) -> bool {
        !self.0.is_nan() && !self.0.is_inf()
    }
}

impl PartialEq for Hp {
    fn eq(&self, o: &Self) -> bool {
        self.0.cmp(&o.0) == Some(0)
    }
}

impl PartialOrd for Hp {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        self.0.cmp(&o.0).map(|c| c.cmp(&0))
    }
}

macro_rules! hp_op {
    ($tr:ident, $f:ident) => {
        impl $tr<&Hp> for &Hp {
            type Output = Hp;
            fn $f(self, o: &Hp) -> Hp {
                Hp(self.0.$f(&o.0, PREC, RM))
            }
        }
        impl $tr<Hp> for Hp {
            type Output = Hp;
            fn $f(self, o: Hp) -> Hp {
                Hp(self.0.$f(&o.0, PREC, RM))
            }
        }
    };
}

hp_op!(Add, add);
hp_op!(Sub, sub);
hp_op!(Mul, mul);
hp_op!(Div, div);

impl Neg for &Hp {
    type Output = Hp;
    fn neg(self) -> Hp {
        Hp(self.0.clone().neg())
    }
}

fn factorial(n: u32) -> BigRational {
    (1..=n).fold(BigRational::one(), |a, k| a * BigRational::from_integer(k.into()))
}

/// θ_{a,m,j}: coefficient of ε^a log^j ε in I_{a,m}(ε).
pub fn theta(a: i64, m: u32, j: u32) -> Result<BigRational> {
    if j > m + 1 {
        return Err(HadamardError::Domain(format!("j = {j} exceeds m + 1 = {}", m + 1)));
    }
    Ok(match (a, j == m + 1) {
        (0, true) => -BigRational::new(1.into(), (m as i64 + 1).into()),
        (0, false) | (_, true) => BigRational::zero(),
        (_, false) => {
            let sign = if (m + 1 + j) % 2 == 0 { 1 } else { -1 };
            let a = BigRational::from_integer(a.into());
            BigRational::from_integer(sign.into()) * factorial(m) / (factorial(j) * num::pow(a, (m + 1 - j) as usize))
        }
    })
}

/// Finite part of I_{a,m}: (−1)^m m!/a^{m+1}, or 0 for a = 0.
pub fn pf_integral(a: i64, m: u32) -> BigRational {
    if a == 0 {
        return BigRational::zero();
    }
    let sign = if m % 2 == 0 { 1 } else { -1 };
    BigRational::from_integer(sign.into()) * factorial(m) / num::pow(BigRational::from_integer(a.into()), m as usize + 1)
}

/// I_{a,m}(ε) = ∫_ε^1 t^{a−1} log^m t dt from the closed form.
pub fn i_closed(a: i64, m: u32, eps: &Hp) -> Result<Hp> {
    if !(eps > &Hp::zero() && eps <= &Hp::one()) {
        return Err(HadamardError::Domain("ε must lie in (0, 1]".into()));
    }
    let l = eps.ln();
    let mut sum = Hp::zero();
    let mut lj = Hp::one();
    for j in 0..=m + 1 {
        sum = &sum + &(&Hp::from_rational(&theta(a, m, j)?) * &lj);
        lj = &lj * &l;
    }
    Ok(&Hp::from_rational(&pf_integral(a, m)) + &(&eps.powi(a) * &sum))
}

/// Gauss–Legendre nodes and weights on [−1, 1] in extended precision.
fn gauss_legendre() -> &'static [(Hp, Hp)] {
    static NODES: OnceLock<Vec<(Hp, Hp)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = 20usize;
        let one = Hp::one();
        (0..n)
            .map(|i| {
                let mut x = Hp::from_f64((std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos());
                let mut dp = Hp::one();
                for _ in 0..100 {
                    let (mut p0, mut p1) = (Hp::one(), x.clone());
                    for k in 2..=n {
                        let kk = Hp::from_i64(k as i64);
                        let p2 = &(&(&Hp::from_i64(2 * k as i64 - 1) * &(&x * &p1)) - &(&Hp::from_i64(k as i64 - 1) * &p0)) / &kk;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = &(&Hp::from_i64(n as i64) * &(&(&x * &p1) - &p0)) / &(&(&x * &x) - &one);
                    let dx = &p1 / &dp;
                    x = &x - &dx;
                    if dx.abs() < Hp::parse("1e-55") {
                        break;
                    }
                }
                let w = &Hp::from_i64(2) / &(&(&one - &(&x * &x)) * &(&dp * &dp));
                (x, w)
            })
            .collect()
    })
}

fn gauss_panel(f: &dyn Fn(&Hp) -> Hp, lo: &Hp, hi: &Hp) -> Hp {
    let half = &(hi - lo) / &Hp::from_i64(2);
    let mid = &(hi + lo) / &Hp::from_i64(2);
    let mut s = Hp::zero();
    for (x, w) in gauss_legendre() {
        s = &s + &(w * &f(&(&mid + &(&half * x))));
    }
    &s * &half
}

fn adaptive_hp(f: &dyn Fn(&Hp) -> Hp, lo: &Hp, hi: &Hp, whole: Hp, tol: &Hp, depth: u32) -> Result<Hp> {
    let mid = &(lo + hi) / &Hp::from_i64(2);
    let (l, r) = (gauss_panel(f, lo, &mid), gauss_panel(f, &mid, hi));
    let both = &l + &r;
    let err = (&both - &whole).abs();
    if err <= *tol {
        return Ok(both);
    }
    if depth == 0 {
        return Err(HadamardError::NoConvergence { estimate: both.to_f64(), error: err.to_f64() });
    }
    let half_tol = tol / &Hp::from_i64(2);
    Ok(&adaptive_hp(f, lo, &mid, l, &half_tol, depth - 1)? + &adaptive_hp(f, &mid, hi, r, &half_tol, depth - 1)?)
}

/// I_{a,m}(ε) by adaptive Gauss–Legendre quadrature in s = log t, on panels
/// of width at most log 2.
pub fn i_quadrature(a: i64, m: u32, eps: &Hp, tol: &Hp) -> Result<Hp> {
    if !(eps > &Hp::zero() && eps <= &Hp::one()) {
        return Err(HadamardError::Domain("ε must lie in (0, 1]".into()));
    }
    let lo = eps.ln();
    let panels = (-(lo.to_f64()) / std::f64::consts::LN_2).ceil().max(1.0) as i64;
    let width = &(-&lo) / &Hp::from_i64(panels);
    let ah = Hp::from_i64(a);
    let f = |s: &Hp| &(&ah * s).exp() * &s.powi(m as i64);
    let panel_tol = tol / &Hp::from_i64(panels);
    let mut sum = Hp::zero();
    for k in 0..panels {
        let p0 = &lo + &(&width * &Hp::from_i64(k));
        let p1 = if k + 1 == panels { Hp::zero() } else { &lo + &(&width * &Hp::from_i64(k + 1)) };
        let whole = gauss_panel(&f, &p0, &p1);
        sum = &sum + &adaptive_hp(&f, &p0, &p1, whole, &panel_tol, 30)?;
    }
    Ok(sum)
}

/// Result of an f64 quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Quad {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    Quad { value: k * h, error: ((k - g) * h).abs() }
}

const MAX_INTERVALS: usize = 4000;

/// Globally adaptive 15-point Gauss–Kronrod on [a, b]: the interval with the
/// largest error estimate is bisected until the total error meets the tolerance.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Quad> {
    if b <= a {
        return Ok(Quad { value: 0.0, error: 0.0 });
    }
    let mut parts = vec![(a, b, gk15(f, a, b))];
    loop {
        let value = pairwise_sum(&parts.iter().map(|p| p.2.value).collect::<Vec<_>>());
        let error: f64 = parts.iter().map(|p| p.2.error).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Quad { value, error });
        }
        let (k, worst) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .map(|(k, p)| (k, *p))
            .expect("nonempty");
        let (lo, hi, _) = worst;
        let mid = 0.5 * (lo + hi);
        if parts.len() >= MAX_INTERVALS || mid <= lo || mid >= hi {
            return Err(HadamardError::NoConvergence { estimate: value, error });
        }
        parts[k] = (lo, mid, gk15(f, lo, mid));
        parts.insert(k + 1, (mid, hi, gk15(f, mid, hi)));
    }
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// ∫ over [a, b] split into panels with endpoint ratio 2 from `a`, so that
/// integrands singular near a small `a` are resolved.
pub fn integrate_graded(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Quad> {
    if b <= a {
        return Ok(Quad { value: 0.0, error: 0.0 });
    }
    let mut cuts = vec![a];
    if a > 0.0 {
        let mut x = 2.0 * a;
        while x < b {
            cuts.push(x);
            x *= 2.0;
        }
    } else {
        let mut x = b / 2.0;
        let mut lows = Vec::new();
        while x > 1e-12 * b {
            lows.push(x);
            x /= 2.0;
        }
        cuts.extend(lows.into_iter().rev());
    }
    cuts.push(b);
    let n = (cuts.len() - 1) as f64;
    let mut total = Quad { value: 0.0, error: 0.0 };
    for w in cuts.windows(2) {
        let q = integrate(f, w[0], w[1], abs_tol / n, rel_tol)?;
        total.value += q.value;
        total.error += q.error;
    }
    Ok(total)
}

/// Truncated Taylor series c_0 + c_1 h + … used for exact derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn constant(c: f64, order: usize) -> Self {
        let mut v = vec![0.0; order + 1];
        v[0] = c;
        Jet(v)
    }

    pub fn variable(t: f64, order: usize) -> Self {
        let mut j = Jet::constant(t, order);
        if order > 0 {
            j.0[1] = 1.0;
        }
        j
    }

    fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet(self.0.iter().map(|a| a * c).collect())
    }

    pub fn add_const(&self, c: f64) -> Jet {
        let mut j = self.clone();
        j.0[0] += c;
        j
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let n = self.order();
        Jet((0..=n).map(|k| (0..=k).map(|i| self.0[i] * o.0[k - i]).sum()).collect())
    }

    pub fn recip(&self) -> Jet {
        let n = self.order();
        let mut r = vec![0.0; n + 1];
        r[0] = 1.0 / self.0[0];
        for k in 1..=n {
            let s: f64 = (1..=k).map(|i| self.0[i] * r[k - i]).sum();
            r[k] = -s / self.0[0];
        }
        Jet(r)
    }

    pub fn exp(&self) -> Jet {
        let n = self.order();
        let mut r = vec![0.0; n + 1];
        r[0] = self.0[0].exp();
        for k in 1..=n {
            let s: f64 = (1..=k).map(|i| i as f64 * self.0[i] * r[k - i]).sum();
            r[k] = s / k as f64;
        }
        Jet(r)
    }
}

/// Smooth compactly supported radial test functions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RadialTestFunction {
    /// exp(−1/(1 − (t/ρ)²)) on [0, ρ).
    Bump { rho: f64 },
    /// exp(−1/q) with q = 4(t − r1)(r2 − t)/(r2 − r1)² on (r1, r2).
    Annulus { inner: f64, outer: f64 },
    /// p(t)·exp(−1/(1 − (t/ρ)²)) with p given by its coefficients.
    PolyBump { coeffs: Vec<f64>, rho: f64 },
}

impl RadialTestFunction {
    pub fn support_max(&self) -> f64 {
        match self {
            RadialTestFunction::Bump { rho } | RadialTestFunction::PolyBump { rho, .. } => *rho,
            RadialTestFunction::Annulus { outer, .. } => *outer,
        }
    }

    fn inside(&self, t: f64) -> bool {
        match self {
            RadialTestFunction::Bump { rho } | RadialTestFunction::PolyBump { rho, .. } => t.abs() < *rho,
            RadialTestFunction::Annulus { inner, outer } => t > *inner && t < *outer,
        }
    }

    /// Taylor coefficients φ^{(k)}(t)/k! for k ≤ order.
    pub fn jet(&self, t: f64, order: usize) -> Jet {
        if !self.inside(t) {
            return Jet::constant(0.0, order);
        }
        let x = Jet::variable(t, order);
        match self {
            RadialTestFunction::Bump { rho } => bump_jet(&x, *rho),
            RadialTestFunction::PolyBump { coeffs, rho } => {
                let mut p = Jet::constant(0.0, order);
                for &c in coeffs.iter().rev() {
                    p = p.mul(&x).add_const(c);
                }
                p.mul(&bump_jet(&x, *rho))
            }
            RadialTestFunction::Annulus { inner, outer } => {
                let w = outer - inner;
                let q = x.add_const(-inner).mul(&x.scale(-1.0).add_const(*outer)).scale(4.0 / (w * w));
                q.recip().scale(-1.0).exp()
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.jet(t, 0).0[0]
    }

    pub fn derivative(&self, t: f64, n: usize) -> f64 {
        self.jet(t, n).0[n] * (1..=n).map(|k| k as f64).product::<f64>()
    }

    pub fn taylor_at_zero(&self, order: usize) -> Vec<f64> {
        self.jet(0.0, order).0
    }

    /// φ(t) − Σ_{n<k} φ_n t^n, using the Taylor tail near 0 to avoid cancellation.
    pub fn taylor_remainder(&self, t: f64, k: usize, taylor: &[f64]) -> f64 {
        let near = match self {
            RadialTestFunction::Bump { rho } | RadialTestFunction::PolyBump { rho, .. } => t < 0.25 * rho,
            RadialTestFunction::Annulus { .. } => false,
        };
        if near && taylor.len() > k {
            let mut s = 0.0;
            for c in taylor[k..].iter().rev() {
                s = s * t + c;
            }
            s * t.powi(k as i32)
        } else {
            let head: f64 = taylor.iter().take(k).enumerate().map(|(n, c)| c * t.powi(n as i32)).sum();
            self.value(t) - head
        }
    }
}

fn bump_jet(x: &Jet, rho: f64) -> Jet {
    let u = x.mul(x).scale(-1.0 / (rho * rho)).add_const(1.0);
    u.recip().scale(-1.0).exp()
}

const TAYLOR_ORDER: usize = 60;
const QUAD_TOL: f64 = 1e-12;

fn ln_pow(t: f64, m: u32) -> f64 {
    t.ln().powi(m as i32)
}

/// H_{a,m,ε}(φ) = ∫_ε^∞ t^{a−1} log^m t φ(t) dt.
pub fn h_quadrature(a: i64, m: u32, eps: f64, phi: &RadialTestFunction) -> Result<f64> {
    if eps <= 0.0 {
        return Err(HadamardError::Domain("ε must be positive".into()));
    }
    let f = |t: f64| t.powi(a as i32 - 1) * ln_pow(t, m) * phi.value(t);
    let top = phi.support_max();
    let mut total = 0.0;
    let (lo1, hi1) = (eps, top.min(1.0));
    if hi1 > lo1 {
        total += integrate_graded(&f, lo1, hi1, QUAD_TOL, QUAD_TOL)?.value;
    }
    if top > 1.0 {
        total += integrate(&f, eps.max(1.0), top, QUAD_TOL, QUAD_TOL)?.value;
    }
    Ok(total)
}

/// Coefficients c_{n,j} of ε^{a+n} log^j ε and the constant term of H_{a,m,ε}(φ).
#[derive(Clone, Debug, Serialize)]
pub struct HExpansion {
    pub a: i64,
    pub m: u32,
    /// (n, j, c_{n,j}).
    pub coefficients: Vec<(u32, u32, f64)>,
    pub finite_part: f64,
}

impl HExpansion {
    pub fn coefficient(&self, n: u32, j: u32) -> f64 {
        self.coefficients.iter().find(|c| c.0 == n && c.1 == j).map(|c| c.2).unwrap_or(0.0)
    }

    /// C + Σ c_{n,j} ε^{a+n} log^j ε.
    pub fn reconstruct(&self, eps: f64) -> f64 {
        self.finite_part
            + self.coefficients.iter().map(|&(n, j, c)| c * eps.powi((self.a + n as i64) as i32) * ln_pow(eps, j)).sum::<f64>()
    }

    /// Terms of nonpositive total degree, i.e. those not vanishing as ε → 0.
    pub fn singular(&self, eps: f64) -> f64 {
        self.coefficients
            .iter()
            .filter(|&&(n, j, _)| self.a + (n as i64) < 0 || (self.a + n as i64 == 0 && j > 0))
            .map(|&(n, j, c)| c * eps.powi((self.a + n as i64) as i32) * ln_pow(eps, j))
            .sum()
    }
}

fn subtraction_order(a: i64) -> usize {
    (2 - a).max(0) as usize
}

/// Expansion of H_{a,m,ε}(φ) to order ε^{a+N}; the constant from
/// ∫_1^∞ + ∫_0^1 (φ − Taylor) + Σ φ_n pf(I_{a+n,m}).
pub fn h_expansion(a: i64, m: u32, phi: &RadialTestFunction, n_max: u32) -> Result<HExpansion> {
    let taylor = phi.taylor_at_zero(TAYLOR_ORDER);
    let mut coefficients = Vec::new();
    for n in 0..=n_max {
        for j in 0..=m + 1 {
            let th = theta(a + n as i64, m, j)?.to_f64().unwrap_or(f64::NAN);
            coefficients.push((n, j, taylor[n as usize] * th));
        }
    }
    let k = subtraction_order(a);
    let top = phi.support_max();
    let outer = |t: f64| t.powi(a as i32 - 1) * ln_pow(t, m) * phi.value(t);
    let inner = |t: f64| t.powi(a as i32 - 1) * ln_pow(t, m) * phi.taylor_remainder(t, k, &taylor);
    let mut c = if top > 1.0 { integrate(&outer, 1.0, top, QUAD_TOL, QUAD_TOL)?.value } else { 0.0 };
    c += integrate_graded(&inner, 0.0, 1.0, QUAD_TOL, QUAD_TOL)?.value;
    for (n, &phin) in taylor.iter().enumerate().take(k) {
        c += phin * pf_integral(a + n as i64, m).to_f64().unwrap_or(f64::NAN);
    }
    Ok(HExpansion { a, m, coefficients, finite_part: c })
}

/// C_{a,m}[φ] as the z⁰ coefficient of ∫_0^∞ t^{a+z−1} log^m t φ(t) dt,
/// split at `split`, with two extra Taylor terms subtracted and the Laurent
/// coefficient taken by a contour average of radius 1/2.
pub fn finite_part_continuation(a: i64, m: u32, phi: &RadialTestFunction, split: f64) -> Result<f64> {
    let taylor = phi.taylor_at_zero(TAYLOR_ORDER);
    let k = subtraction_order(a) + 2;
    let top = phi.support_max();
    let outer = |t: f64| t.powi(a as i32 - 1) * ln_pow(t, m) * phi.value(t);
    let inner = |t: f64| t.powi(a as i32 - 1) * ln_pow(t, m) * phi.taylor_remainder(t, k, &taylor);
    let mut c = if top > split { integrate(&outer, split, top, QUAD_TOL, QUAD_TOL)?.value } else { 0.0 };
    c += integrate_graded(&inner, 0.0, split, QUAD_TOL, QUAD_TOL)?.value;
    let lc = split.ln();
    let mfact: f64 = (1..=m).map(|x| x as f64).product();
    // ∫_0^c t^{b−1} log^m t dt = Σ_k (−1)^k m!/(m−k)! c^b log^{m−k} c / b^{k+1}
    let j = |b: Complex64| -> Complex64 {
        let cb = (b * lc).exp();
        (0..=m)
            .map(|kk| {
                let f: f64 = (1..=(m - kk)).map(|x| x as f64).product();
                let sign = if kk % 2 == 0 { 1.0 } else { -1.0 };
                cb * (sign * mfact / f * lc.powi((m - kk) as i32)) / b.powi(kk as i32 + 1)
            })
            .sum()
    };
    let points = 256;
    let mut laurent = Complex64::new(0.0, 0.0);
    for p in 0..points {
        let z = Complex64::from_polar(0.5, 2.0 * std::f64::consts::PI * p as f64 / points as f64);
        for (n, &phin) in taylor.iter().enumerate().take(k) {
            laurent += j(Complex64::new((a + n as i64) as f64, 0.0) + z) * phin;
        }
    }
    Ok(c + laurent.re / points as f64)
}

/// Least-squares fit of Σ c_i ε^{e_i} log^{j_i} ε.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticFit {
    pub basis: Vec<(i64, u32)>,
    pub coefficients: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
    pub warning: Option<String>,
}

impl AsymptoticFit {
    pub fn coefficient(&self, e: i64, j: u32) -> Option<f64> {
        self.basis.iter().position(|&b| b == (e, j)).map(|i| self.coefficients[i])
    }
}

/// Condition number above which a fit carries a warning.
pub const CONDITION_WARNING: f64 = 1e12;

pub fn fit_expansion(samples: &[(f64, f64)], basis: &[(i64, u32)]) -> Result<AsymptoticFit> {
    if samples.len() < 2 * basis.len() {
        return Err(HadamardError::FitPrecondition(format!("{} samples for {} basis functions", samples.len(), basis.len())));
    }
    let (lo, hi) = samples.iter().fold((f64::INFINITY, 0.0f64), |(l, h), s| (l.min(s.0), h.max(s.0)));
    if !(lo > 0.0 && hi / lo >= 100.0) {
        return Err(HadamardError::FitPrecondition("samples must span two decades of ε".into()));
    }
    let col = |e: f64, b: &(i64, u32)| e.powi(b.0 as i32) * ln_pow(e, b.1);
    let mut a = DMatrix::from_fn(samples.len(), basis.len(), |i, j| col(samples[i].0, &basis[j]));
    let scales: Vec<f64> = (0..basis.len()).map(|j| a.column(j).amax().max(f64::MIN_POSITIVE)).collect();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    // row weights make each sample's relative error count equally
    let w: Vec<f64> = samples.iter().map(|s| 1.0 / s.1.abs().max(1.0)).collect();
    for (i, wi) in w.iter().enumerate() {
        a.row_mut(i).scale_mut(*wi);
    }
    let y = DVector::from_iterator(samples.len(), samples.iter().zip(&w).map(|(s, wi)| s.1 * wi));
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min().max(f64::MIN_POSITIVE);
    let x = svd.solve(&y, 1e-15 * sv.max()).map_err(|e| HadamardError::FitPrecondition(e.to_string()))?;
    let coefficients: Vec<f64> = x.iter().zip(&scales).map(|(c, s)| c / s).collect();
    let residual = samples
        .iter()
        .map(|&(e, v)| (v - basis.iter().zip(&coefficients).map(|(b, c)| c * col(e, b)).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    let warning = (condition > CONDITION_WARNING).then(|| format!("basis nearly collinear (condition {condition:.3e})"));
    Ok(AsymptoticFit { basis: basis.to_vec(), coefficients, residual, condition, warning })
}

/// Geometric grid 2^{−from} … 2^{−to}.
pub fn geometric_grid(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

/// Evaluate `f` on a grid in parallel; output order follows the grid.
pub fn sample(grid: &[f64], f: impl Fn(f64) -> Result<f64> + Sync) -> Result<Vec<(f64, f64)>> {
    grid.par_iter().map(|&e| f(e).map(|v| (e, v))).collect()
}

pub fn samples_csv(samples: &[(f64, f64)]) -> String {
    let mut s = String::from("eps,value\n");
    for (e, v) in samples {
        s.push_str(&format!("{e:e},{v:e}\n"));
    }
    s
}

/// u(t) = t^α log^j t.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLog {
    pub alpha: f64,
    pub log_power: u32,
}

impl PowerLog {
    pub fn eval(&self, t: f64) -> f64 {
        t.powf(self.alpha) * ln_pow(t, self.log_power)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingDegree {
    pub sd: f64,
    /// Regression coefficients on (log λ, 1/log λ, 1).
    pub fit: [f64; 3],
}

/// Scaling degree of a radial distribution in d dimensions from the decay of
/// ⟨u(λ·), φ⟩ for λ = 2⁻¹ … 2⁻²⁰, with φ supported on an annulus.
pub fn scaling_degree_estimate(u: PowerLog, d: u32) -> Result<ScalingDegree> {
    let phi = RadialTestFunction::Annulus { inner: 1.0, outer: 2.0 };
    let grid = geometric_grid(1, 20);
    let pairs = sample(&grid, |lam| {
        let f = |r: f64| u.eval(lam * r) * phi.value(r) * r.powi(d as i32 - 1);
        Ok(integrate(&f, 1.0, 2.0, 1e-14, 1e-13)?.value)
    })?;
    let j = u.log_power as f64;
    let rows: Vec<[f64; 3]> = pairs.iter().map(|&(l, _)| [l.ln(), 1.0 / l.ln(), 1.0]).collect();
    let a = DMatrix::from_fn(rows.len(), 3, |i, k| rows[i][k]);
    let y = DVector::from_iterator(pairs.len(), pairs.iter().map(|&(l, p)| p.abs().ln() - j * l.ln().abs().ln()));
    let x = a.svd(true, true).solve(&y, 1e-14).map_err(|e| HadamardError::FitPrecondition(e.to_string()))?;
    Ok(ScalingDegree { sd: -x[0], fit: [x[0], x[1], x[2]] })
}

/// Superficial degree from the scaling degree of a graph distribution in relative coordinates.
pub fn sdd_from_scaling_degree(sd: f64, d: u32, vertices: usize) -> f64 {
    sd - (d as f64) * (vertices as f64 - 1.0)
}

/// Smooth cutoff profile: 1 on [0, 1], 0 on [2, ∞).
pub fn smooth_cutoff(s: f64) -> f64 {
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let u = 2.0 - s;
    psi(u) / (psi(u) + psi(s - 1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct BubbleDemo {
    pub angular_factor: f64,
    pub pole2: f64,
    pub pole1: f64,
    pub log: f64,
    pub constant: f64,
    pub fitted: AsymptoticFit,
    pub smooth_fit: AsymptoticFit,
    /// (ε, pairing minus its singular terms).
    pub subtracted: Vec<(f64, f64)>,
    pub difference_ratios: Vec<f64>,
}

/// ⟨(1 − χ_ε) r^{−2(d−2)}, φ⟩ in d relative dimensions for radial φ.
pub fn bubble_counterterm_demo(d: u32, phi: &RadialTestFunction) -> Result<BubbleDemo> {
    // r^{4−2d} r^{d−1} dr = t^{a−1} dt
    let a = 4 - d as i64;
    let omega = 2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d);
    let ex = h_expansion(a, 0, phi, 4)?;
    let grid = geometric_grid(3, 16);
    let sharp = sample(&grid, |e| Ok(omega * h_quadrature(a, 0, e, phi)?))?;
    let basis: Vec<(i64, u32)> = vec![(a, 0), (a + 1, 0), (0, 1), (0, 0), (1, 0), (2, 0), (3, 0)];
    let fitted = fit_expansion(&sharp, &basis)?;
    let smooth = sample(&grid, |e| {
        let f = |t: f64| (1.0 - smooth_cutoff(t / e)) * t.powi(a as i32 - 1) * phi.value(t);
        Ok(omega * integrate_graded(&f, e, phi.support_max(), QUAD_TOL, QUAD_TOL)?.value)
    })?;
    let smooth_fit = fit_expansion(&smooth, &basis)?;
    // below 2⁻¹² the ε⁻² term is so large that cancellation hides the tail
    let subtracted: Vec<(f64, f64)> = sharp.iter().filter(|s| s.0 >= 2f64.powi(-12)).map(|&(e, v)| (e, v - omega * ex.singular(e))).collect();
    let diffs: Vec<f64> = subtracted.windows(2).map(|w| (w[0].1 - w[1].1).abs()).collect();
    let difference_ratios = diffs.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(BubbleDemo {
        angular_factor: omega,
        pole2: omega * ex.coefficient(0, 0),
        pole1: omega * ex.coefficient(1, 0),
        log: omega * ex.coefficient((-a) as u32, 1),
        constant: omega * ex.finite_part,
        fitted,
        smooth_fit,
        subtracted,
        difference_ratios,
    })
}

/// Γ(d/2) for integer d.
fn gamma_half(d: u32) -> f64 {
    if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Exact check of a·I_{a,m} = −ε^a log^m ε − m·I_{a,m−1} on the closed-form
/// coefficients, as polynomials in log ε.
pub fn recursion_holds_symbolically(a: i64, m: u32) -> bool {
    if a == 0 || m == 0 {
        return true;
    }
    let ar = BigRational::from_integer(a.into());
    let mr = BigRational::from_integer(m.into());
    let lhs_pf = &ar * pf_integral(a, m);
    let rhs_pf = -(&mr * pf_integral(a, m - 1));
    if lhs_pf != rhs_pf {
        return false;
    }
    (0..=m + 1).all(|j| {
        let lhs = &ar * theta(a, m, j).unwrap();
        let mut rhs = if j <= m { -(&mr * theta(a, m - 1, j).unwrap()) } else { BigRational::zero() };
        if j == m {
            rhs -= BigRational::one();
        }
        lhs == rhs
    })
}
