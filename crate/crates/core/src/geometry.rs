//! Window functionals ω₀, ω₁ of a lacunary stream function, the calibration
//! function φ(x) = 36x·tan x, and the resulting lower bounds on Ψ₀ and Ψ₁.
//!
//! On a window `y = x + δt`, `t ∈ [-1, 1]`, the stream function is
//!
//! ```text
//! ψ(x + δt) = affine(t) + Σₙ Pₙ cos(aₙt) + Qₙ sin(aₙt),
//! aₙ = 3ⁿδ,  Pₙ = -bₙ cos(3ⁿx),  Qₙ = bₙ sin(3ⁿx),  bₙ = aₙ/3ⁿ,
//! ```
//!
//! so the least-squares residual is a quadratic form in `(Pₙ)` and `(Qₙ)`
//! whose Gram matrices depend on δ only. They are computed once per δ, in
//! forms free of cancellation when some `aₙ` is small, and every x then
//! costs O(N²).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::profile::ShearProfile;
use crate::quadrature::GaussLegendre;
use crate::search::{best_local_minima, golden_section};

/// Constant in the third-difference lower bound `ω₁(3^{-m}π) ≥ C·3^{-3m}aₘ²`.
pub const LEMMA52_CONSTANT: f64 = 9.0 * PI / 8000.0;

/// The coarse x-grid resolves levels up to `terms_required(δ) − 1`.
const COARSE_LEVEL_DEFICIT: usize = 1;
const GRID_MIN_LEVEL: usize = 3;
/// Grid minima carried through the level-by-level zoom.
const BEAM: usize = 8;
const ZOOM_HALF_WIDTH: i32 = 6;
const X_TOL: f64 = 1e-10;
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Order {
    /// Constant fit, ω₀.
    Constant,
    /// Affine fit, ω₁.
    Affine,
}

impl Order {
    pub fn index(self) -> u8 {
        match self {
            Order::Constant => 0,
            Order::Affine => 1,
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        o.index()
    }
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Order> {
        match v {
            0 => Ok(Order::Constant),
            1 => Ok(Order::Affine),
            _ => Err(Error::Argument(format!("order must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub delta: f64,
    pub order: Order,
    /// A minimizing window centre, reduced to `[0, π/6]` (ω is even and
    /// π/3-periodic in x for lacunary base-3 profiles).
    pub x_star: f64,
    pub c1: f64,
    /// Zero for order 0.
    pub c2: f64,
    pub value: f64,
    /// Set when `3^{-N}π > δ/3`: scales below the truncation still matter.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiBound {
    pub delta: f64,
    pub omega: f64,
    pub phi_arg: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma52Check {
    pub m: usize,
    pub delta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn phi_raw(x: f64) -> f64 {
    36.0 * x * x.tan()
}

/// φ(x) = 36x·tan x on [0, π/2).
pub fn phi(x: f64) -> Result<f64> {
    if !(0.0..FRAC_PI_2).contains(&x) && x != FRAC_PI_2 {
        return Err(Error::domain("x", x, "[0, π/2)"));
    }
    Ok(phi_raw(x))
}

/// Inverse of φ. Returns the float whose image is closest to `v`; near π/2
/// the attainable accuracy is limited by the spacing of floats around π/2.
pub fn phi_inv(v: f64) -> Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::domain("v", v, "[0, ∞)"));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    let top = FRAC_PI_2;
    if v >= phi_raw(top) {
        return Ok(top);
    }
    let (mut lo, mut hi) = (0.0f64, top);
    let mut x = (v / 36.0).atan().min(FRAC_PI_2 * v / (v + 36.0));
    for _ in 0..200 {
        let f = phi_raw(x) - v;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let t = x.tan();
        let d = 36.0 * (t + x * (1.0 + t * t));
        let mut nx = x - f / d;
        if !(nx > lo && nx < hi) {
            nx = 0.5 * (lo + hi);
        }
        if nx == x || hi - lo <= f64::EPSILON * hi {
            break;
        }
        x = nx;
    }
    let best = [x.next_down(), x, x.next_up()]
        .into_iter()
        .filter(|c| (0.0..=top).contains(c))
        .min_by(|a, b| (phi_raw(*a) - v).abs().total_cmp(&(phi_raw(*b) - v).abs()))
        .unwrap_or(x);
    Ok(best)
}

/// `(φ⁻¹(δω)/δ)²`.
pub fn bound_from_omega(delta: f64, omega: f64) -> Result<PhiBound> {
    if !(delta > 0.0) {
        return Err(Error::domain("delta", delta, "(0, ∞)"));
    }
    let phi_arg = delta * omega.max(0.0);
    let x = phi_inv(phi_arg)?;
    Ok(PhiBound {
        delta,
        omega,
        phi_arg,
        bound: (x / delta).powi(2),
    })
}

/// ω₀ or ω₁ of `p` at half-width `delta`.
pub fn omega(p: &ShearProfile, delta: f64, order: Order) -> Result<WindowFit> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain("delta", delta, "(0, ∞)"));
    }
    if order == Order::Constant && p.mean() != 0.0 {
        return Err(Error::Argument(
            "order-0 window fit requires a mean-zero profile".into(),
        ));
    }
    let truncated = !p.resolves(delta);
    if p.terms() == 0 {
        let c2 = if order == Order::Affine { p.mean() } else { 0.0 };
        return Ok(WindowFit {
            delta,
            order,
            x_star: 0.0,
            c1: 0.0,
            c2,
            value: 0.0,
            truncated,
        });
    }

    let gram = WindowGram::new(p, delta, order);
    let (x, _) = search_x(&gram, p.terms(), ShearProfile::terms_required(delta));
    let x_star = reduce_x(x);
    let (c1, c2) = gram.fit(p.mean(), x_star);
    Ok(WindowFit {
        delta,
        order,
        x_star,
        c1,
        c2,
        value: gram.value(x_star),
        truncated,
    })
}

/// Grid spacing resolving lacunary level `l` with 12 points per period.
fn level_step(l: usize) -> f64 {
    PI / (2.0 * 3f64.powi(l as i32 + 1))
}

/// Global minimization of the window residual over x ∈ [0, π/6].
///
/// A uniform grid resolves the levels that dominate at this δ; each of the
/// best grid minima is then zoomed through the finer levels one at a time
/// and finished by golden-section search.
fn search_x(gram: &WindowGram, terms: usize, required: usize) -> (f64, f64) {
    let coarse = terms
        .min(required.saturating_sub(COARSE_LEVEL_DEFICIT))
        .max(GRID_MIN_LEVEL);
    let h0 = level_step(coarse);
    let intervals = 3usize.pow(coarse as u32);
    let values = gram.grid(intervals + 1, h0);
    let mut best = (0.0, f64::INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v < best.1 {
            best = (i as f64 * h0, v);
        }
    }
    for i in best_local_minima(&values, BEAM) {
        let mut cand = (i as f64 * h0, values[i]);
        let mut h = h0;
        for level in coarse + 1..=terms {
            h = level_step(level);
            let centre = cand.0;
            for j in -ZOOM_HALF_WIDTH..=ZOOM_HALF_WIDTH {
                let x = centre + j as f64 * h;
                let v = gram.value(x);
                if v < cand.1 {
                    cand = (x, v);
                }
            }
        }
        let (x, v) = golden_section(cand.0 - h, cand.0 + h, X_TOL, |x| gram.value(x));
        if v < cand.1 {
            cand = (x, v);
        }
        if cand.1 < best.1 {
            best = cand;
        }
    }
    best
}

/// Maps x into [0, π/6] using evenness and π/3-periodicity.
fn reduce_x(x: f64) -> f64 {
    let period = PI / 3.0;
    let r = x.rem_euclid(period);
    if r > period / 2.0 {
        period - r
    } else {
        r
    }
}

/// `(φ⁻¹(δ·ω(δ))/δ)²`, a lower bound on Ψ₀ (order 0) or Ψ₁ (order 1).
pub fn psi_lower_bound(p: &ShearProfile, delta: f64, order: Order) -> Result<PhiBound> {
    let fit = omega(p, delta, order)?;
    bound_from_omega(delta, fit.value)
}

/// The best of [`psi_lower_bound`] over `deltas` (first one on ties).
pub fn best_lower_bound(p: &ShearProfile, deltas: &[f64], order: Order) -> Result<PhiBound> {
    if deltas.is_empty() {
        return Err(Error::Argument("delta list is empty".into()));
    }
    let bounds = par::map_indices(deltas.len(), |i| psi_lower_bound(p, deltas[i], order));
    let mut best: Option<PhiBound> = None;
    for b in bounds {
        let b = b?;
        if best.is_none_or(|cur| b.bound > cur.bound) {
            best = Some(b);
        }
    }
    Ok(best.expect("non-empty"))
}

/// Checks `ω₁(3^{-m}π, u) ≥ (9π/8000)·3^{-3m}·aₘ²`.
pub fn lemma52_certificate(p: &ShearProfile, m: usize) -> Result<Lemma52Check> {
    if m == 0 || m > p.terms() {
        return Err(Error::Argument(format!(
            "m = {m} outside 1..={}",
            p.terms()
        )));
    }
    if !p.validate_ratio() {
        return Err(Error::Argument(
            "coefficients violate the ratio condition 1 ≤ |aₙ/aₙ₊₁| ≤ 3".into(),
        ));
    }
    let delta = PI / ShearProfile::frequency(m);
    let lhs = omega(p, delta, Order::Affine)?.value;
    let am = p.coeffs()[m - 1];
    let rhs = LEMMA52_CONSTANT * 3f64.powi(-3 * m as i32) * am * am;
    Ok(Lemma52Check {
        m,
        delta,
        lhs,
        rhs,
        pass: lhs >= rhs,
    })
}

/// Gram matrices of the centred window bases, pre-scaled by `δ·bₙ·bₘ`.
struct WindowGram {
    n: usize,
    freqs: Vec<f64>,
    even: Vec<f64>,
    odd: Vec<f64>,
    mean_w: Vec<f64>,
    slope_w: Vec<f64>,
}

impl WindowGram {
    fn new(p: &ShearProfile, delta: f64, order: Order) -> Self {
        let n = p.terms();
        let freqs: Vec<f64> = (1..=n).map(ShearProfile::frequency).collect();
        let b: Vec<f64> = p.modes().map(|(w, a)| a / w).collect();
        let a: Vec<f64> = freqs.iter().map(|w| w * delta).collect();
        let mut even = vec![0.0; n * n];
        let mut odd = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s = delta * b[i] * b[j];
                let e = s * gram_even(a[i], a[j]);
                let o = s * match order {
                    Order::Affine => gram_odd_affine(a[i], a[j]),
                    Order::Constant => gram_odd_const(a[i], a[j]),
                };
                even[i * n + j] = e;
                even[j * n + i] = e;
                odd[i * n + j] = o;
                odd[j * n + i] = o;
            }
        }
        let mean_w = (0..n).map(|i| b[i] * sinc(a[i])).collect();
        let slope_w = match order {
            Order::Affine => (0..n).map(|i| b[i] * kappa(a[i]) / delta).collect(),
            Order::Constant => vec![0.0; n],
        };
        WindowGram {
            n,
            freqs,
            even,
            odd,
            mean_w,
            slope_w,
        }
    }

    fn quad_form(&self, c: &[f64], s: &[f64]) -> f64 {
        let n = self.n;
        let mut v = 0.0;
        for i in 0..n {
            let row_e = &self.even[i * n..(i + 1) * n];
            let row_o = &self.odd[i * n..(i + 1) * n];
            let mut acc = 0.5 * (row_e[i] * c[i] * c[i] + row_o[i] * s[i] * s[i]);
            for j in i + 1..n {
                acc += row_e[j] * c[j] * c[i] + row_o[j] * s[j] * s[i];
            }
            v += 2.0 * acc;
        }
        v.max(0.0)
    }

    fn value(&self, x: f64) -> f64 {
        let (s, c): (Vec<f64>, Vec<f64>) = self.freqs.iter().map(|w| (w * x).sin_cos()).unzip();
        self.quad_form(&c, &s)
    }

    /// Values at `x_j = j·h`, `j < count`.
    fn grid(&self, count: usize, h: f64) -> Vec<f64> {
        let chunks = count.div_ceil(CHUNK);
        let rot: Vec<(f64, f64)> = self.freqs.iter().map(|w| (w * h).sin_cos()).collect();
        par::map_indices(chunks, |k| {
            let start = k * CHUNK;
            let end = (start + CHUNK).min(count);
            let x0 = start as f64 * h;
            let (mut s, mut c): (Vec<f64>, Vec<f64>) =
                self.freqs.iter().map(|w| (w * x0).sin_cos()).unzip();
            let mut out = Vec::with_capacity(end - start);
            for _ in start..end {
                out.push(self.quad_form(&c, &s));
                for i in 0..self.n {
                    let (sr, cr) = rot[i];
                    let (ci, si) = (c[i], s[i]);
                    c[i] = ci * cr - si * sr;
                    s[i] = si * cr + ci * sr;
                }
            }
            out
        })
        .concat()
    }

    /// Inner least-squares coefficients `(c₁, c₂)` of the window at `x`.
    fn fit(&self, mean: f64, x: f64) -> (f64, f64) {
        let mut avg = mean * x;
        let mut slope = if self.slope_w.iter().all(|&w| w == 0.0) {
            0.0
        } else {
            mean
        };
        for i in 0..self.n {
            let (s, c) = (self.freqs[i] * x).sin_cos();
            avg -= self.mean_w[i] * c;
            slope += self.slope_w[i] * s;
        }
        (avg - slope * x, slope)
    }
}

// Stable special functions. Series are used for |x| ≤ 1.

fn series(x2: f64, mut term: impl FnMut(usize) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = 1.0;
    for j in 0..16 {
        let t = term(j) * pow;
        sum += t;
        if t.abs() <= 1e-18 * sum.abs() {
            break;
        }
        pow *= x2;
    }
    sum
}

fn inv_fact(k: usize) -> f64 {
    let mut f = 1.0;
    for i in 2..=k {
        f *= i as f64;
    }
    1.0 / f
}

fn alt(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// sin x / x.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        series(x * x, |j| alt(j) * inv_fact(2 * j + 1))
    } else {
        x.sin() / x
    }
}

/// (1 − sinc x)/x² = (x − sin x)/x³.
fn s2(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        series(x * x, |j| alt(j) * inv_fact(2 * j + 3))
    } else {
        (1.0 - x.sin() / x) / (x * x)
    }
}

/// (1 − cos x)/x².
fn c2(x: f64) -> f64 {
    let h = sinc(0.5 * x);
    0.5 * h * h
}

/// (sin a − a cos a)/a³.
fn k_ratio(a: f64) -> f64 {
    if a.abs() <= 1.0 {
        series(a * a, |j| alt(j) * 2.0 * (j + 1) as f64 * inv_fact(2 * j + 3))
    } else {
        (a.sin() - a * a.cos()) / (a * a * a)
    }
}

/// (1 − 3·k_ratio(a))/a².
fn k2(a: f64) -> f64 {
    if a.abs() <= 1.0 {
        series(a * a, |j| alt(j) * 6.0 * (j + 2) as f64 * inv_fact(2 * j + 5))
    } else {
        (1.0 - 3.0 * k_ratio(a)) / (a * a)
    }
}

/// Least-squares slope of sin(at) against t on [-1, 1].
pub(crate) fn kappa(a: f64) -> f64 {
    3.0 * a * k_ratio(a)
}

const MIXED_SMALL: f64 = 2.0;
const MIXED_LARGE: f64 = 4.0;

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn small_quad(f: impl Fn(f64) -> f64) -> f64 {
    // Integrands are even in t.
    2.0 * GaussLegendre::twenty().composite(0.0, 1.0, 2, f)
}

/// ∫₋₁¹ (cos at − sinc a)(cos bt − sinc b) dt.
fn gram_even(a: f64, b: f64) -> f64 {
    let (a, b) = ordered(a, b);
    if a >= MIXED_SMALL {
        sinc(b - a) + sinc(a + b) - 2.0 * sinc(a) * sinc(b)
    } else if b >= MIXED_LARGE {
        let d = (b - a) * (b + a);
        let (sb, cb) = b.sin_cos();
        2.0 * a * a / d * (sinc(a) * (sinc(b) - cb) - b * k_ratio(a) * sb)
    } else {
        let (sa, sb) = (s2(a), s2(b));
        a * a * b * b * small_quad(|t| (sa - t * t * c2(a * t)) * (sb - t * t * c2(b * t)))
    }
}

/// ∫₋₁¹ (sin at − κ(a)t)(sin bt − κ(b)t) dt.
fn gram_odd_affine(a: f64, b: f64) -> f64 {
    let (a, b) = ordered(a, b);
    if a >= MIXED_SMALL {
        sinc(b - a) - sinc(a + b) - 2.0 / 3.0 * kappa(a) * kappa(b)
    } else if b >= MIXED_LARGE {
        let d = (b - a) * (b + a);
        let (sb, cb) = b.sin_cos();
        let core = sb - b * cb;
        2.0 * a * a * a
            * (core * (1.0 / (b * b * d) + k2(a) / (b * b)) - (c2(a) * sb - s2(a) * b * cb) / d)
    } else {
        let (ka, kb) = (k2(a), k2(b));
        let cube = a * a * a * b * b * b;
        cube * small_quad(|t| {
            let t3 = t * t * t;
            (ka * t - t3 * s2(a * t)) * (kb * t - t3 * s2(b * t))
        })
    }
}

/// ∫₋₁¹ sin(at) sin(bt) dt.
fn gram_odd_const(a: f64, b: f64) -> f64 {
    let (a, b) = ordered(a, b);
    if a >= MIXED_SMALL {
        sinc(b - a) - sinc(a + b)
    } else if b >= MIXED_LARGE {
        let d = (b - a) * (b + a);
        let (sb, cb) = b.sin_cos();
        2.0 * a * (sb * a.cos() - b * cb * sinc(a)) / d
    } else {
        a * b * small_quad(|t| t * t * sinc(a * t) * sinc(b * t))
    }
}
