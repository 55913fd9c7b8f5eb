//! Propagator norms `‖e^{-tL}‖` for the per-wavenumber drift-diffusion
//! operators `R = iku − ν∂²ᵧ` and `L = R + νk²`, decay curves, the
//! Gearhart-Prüss certificate `‖e^{-tL}‖ ≤ e^{-tΨ+π/2}` and dissipation times.
//!
//! `R = ν·H_{(ku/ν)}`. The mean of `u` only rotates the phase, so the norm is
//! that of `exp(-tν(D + S))`, computed blockwise on the three `m mod 3`
//! blocks in real arithmetic.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::{spectral_norm, ExpmPlan};
use crate::par;
use crate::profile::ShearProfile;
use crate::spectral::{psi1_direct, OperatorDisc, SpectralResult};

/// Conventional threshold defining the dissipation time.
pub const DEFAULT_THRESHOLD: f64 = 0.367_879_441_171_442_33;
/// Relative slack allowed by the certificate for rounding.
pub const GP_TOLERANCE: f64 = 1e-6;
const TIME_SPAN: f64 = 1e-4;
const BISECT_REL: f64 = 1e-3;
const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// `R = iku − ν∂²ᵧ`.
    R,
    /// `L = R + νk²`.
    L,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" | "r" => Ok(Variant::R),
            "L" | "l" => Ok(Variant::L),
            other => Err(Error::Argument(format!("unknown variant '{other}' (expected R|L)"))),
        }
    }
}

#[derive(Debug)]
pub struct EvolutionOperator {
    plans: Vec<ExpmPlan>,
    /// Real scalar added to the generator (νk² for variant L).
    shift: f64,
    nu: f64,
    k: f64,
    variant: Variant,
    disc: Option<OperatorDisc>,
    psi: Option<f64>,
    spectral: OnceLock<SpectralResult>,
}

impl EvolutionOperator {
    /// Per-wavenumber operator for the shear `u` with viscosity `nu` and
    /// wavenumber `k`, discretized with modes `|m| ≤ modes`.
    pub fn shear(p: &ShearProfile, nu: f64, k: i64, modes: usize, variant: Variant) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::domain("nu", nu, "(0, ∞)"));
        }
        if k == 0 {
            return Err(Error::Argument("wavenumber k must be non-zero".into()));
        }
        let kf = k as f64;
        let disc = OperatorDisc::assemble_scaled(p, kf / nu, modes)?;
        let plans = disc
            .blocks()
            .iter()
            .filter(|b| b.dim() > 0)
            .map(|b| ExpmPlan::new(b.real_dense() * -nu))
            .collect();
        let shift = match variant {
            Variant::R => 0.0,
            Variant::L => nu * kf * kf,
        };
        Ok(EvolutionOperator {
            plans,
            shift,
            nu,
            k: kf,
            variant,
            disc: Some(disc),
            psi: None,
            spectral: OnceLock::new(),
        })
    }

    /// Semigroup `e^{-tG}` of an explicit complex generator, embedded as the
    /// real matrix `[[X, −Y], [Y, X]]` for `G = X + iY`.
    pub fn from_generator(g: &DMatrix<Complex64>) -> Self {
        let n = g.nrows();
        assert!(g.is_square(), "generator must be square");
        let mut emb = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = g[(i, j)];
                emb[(i, j)] = -z.re;
                emb[(i + n, j + n)] = -z.re;
                emb[(i, j + n)] = z.im;
                emb[(i + n, j)] = -z.im;
            }
        }
        EvolutionOperator {
            plans: vec![ExpmPlan::new(emb)],
            shift: 0.0,
            nu: 1.0,
            k: 0.0,
            variant: Variant::R,
            disc: None,
            psi: None,
            spectral: OnceLock::new(),
        }
    }

    /// Overrides the decay rate used by certificates.
    pub fn with_psi(mut self, psi: f64) -> Self {
        self.psi = Some(psi);
        self
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn disc(&self) -> Option<&OperatorDisc> {
        self.disc.as_ref()
    }

    /// The generator as a dense complex matrix (`ν·H_{(ku/ν)}` plus `νk²`
    /// for variant L).
    pub fn generator_dense(&self) -> Option<DMatrix<Complex64>> {
        self.disc.as_ref().map(|d| {
            let mut g = d.to_dense() * Complex64::new(self.nu, 0.0);
            for i in 0..g.nrows() {
                g[(i, i)] += self.shift;
            }
            g
        })
    }

    /// Ψ₁ of the discretization, computed once.
    pub fn spectral(&self) -> Result<Option<&SpectralResult>> {
        let Some(d) = &self.disc else {
            return Ok(None);
        };
        if self.spectral.get().is_none() {
            let r = psi1_direct(d)?;
            let _ = self.spectral.set(r);
        }
        Ok(self.spectral.get())
    }

    /// Rate in `e^{-t·rate+π/2}`: `νΨ₁(ku/ν)` (+ νk² for L), an explicit
    /// override, or 0 when unknown.
    pub fn certificate_rate(&self) -> Result<f64> {
        if let Some(p) = self.psi {
            return Ok(p);
        }
        match self.spectral()? {
            Some(r) => Ok(self.nu * r.psi1 + self.shift),
            None => Ok(0.0),
        }
    }

    /// ‖e^{-tG}‖₂.
    pub fn propagator_norm(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain("t", t, "[0, ∞)"));
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        let n = self
            .plans
            .iter()
            .map(|p| spectral_norm(&p.exp(t)))
            .fold(0.0, f64::max);
        Ok(n * (-t * self.shift).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// `e^{-t·psi+π/2}` at each time.
    pub gp_bound: Vec<f64>,
    /// Decay rate used by the certificate.
    pub psi: f64,
    /// min over samples of bound/norm.
    pub gp_margin: f64,
    /// Whether the spectral value behind `psi` passed its truncation check.
    pub converged: Option<bool>,
}

/// Gearhart-Prüss bound `e^{-t·psi+π/2}`.
pub fn gp_bound(t: f64, psi: f64) -> f64 {
    (-t * psi + FRAC_PI_2).exp()
}

/// `0` followed by `samples` geometric times in `[t_max·1e-4, t_max]`.
pub fn time_grid(t_max: f64, samples: usize) -> Vec<f64> {
    let t0 = t_max * TIME_SPAN;
    let mut times = vec![0.0];
    let denom = (samples - 1) as f64;
    times.extend((0..samples).map(|i| {
        if i + 1 == samples {
            t_max
        } else {
            t0 * (t_max / t0).powf(i as f64 / denom)
        }
    }));
    times
}

pub fn decay_curve(e: &EvolutionOperator, t_max: f64, samples: usize) -> Result<DecayCurve> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::domain("t_max", t_max, "(0, ∞)"));
    }
    if samples < 2 {
        return Err(Error::Argument("decay curve needs at least 2 samples".into()));
    }
    let psi = e.certificate_rate()?;
    let converged = if e.psi.is_some() {
        None
    } else {
        e.spectral()?.map(|r| r.converged)
    };
    let times = time_grid(t_max, samples);
    let norms = par::map_indices(times.len(), |i| e.propagator_norm(times[i]))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(curve_from_samples(times, norms, psi, converged))
}

/// Assembles a curve (bounds and margin) from precomputed samples.
pub fn curve_from_samples(
    times: Vec<f64>,
    norms: Vec<f64>,
    psi: f64,
    converged: Option<bool>,
) -> DecayCurve {
    let gp: Vec<f64> = times.iter().map(|&t| gp_bound(t, psi)).collect();
    let gp_margin = gp
        .iter()
        .zip(&norms)
        .map(|(b, n)| if *n > 0.0 { b / n } else { f64::INFINITY })
        .fold(f64::INFINITY, f64::min);
    DecayCurve {
        times,
        norms,
        gp_bound: gp,
        psi,
        gp_margin,
        converged,
    }
}

/// `(pass, margin)`: pass iff every sample satisfies
/// `norm ≤ e^{-t·psi+π/2}·(1 + 1e-6)`.
pub fn gp_certificate(c: &DecayCurve) -> (bool, f64) {
    gp_certificate_with_psi(c, c.psi)
}

/// The certificate re-evaluated with a different rate.
pub fn gp_certificate_with_psi(c: &DecayCurve, psi: f64) -> (bool, f64) {
    let mut pass = true;
    let mut margin = f64::INFINITY;
    for (&t, &n) in c.times.iter().zip(&c.norms) {
        let b = gp_bound(t, psi);
        if n > b * (1.0 + GP_TOLERANCE) {
            pass = false;
        }
        if n > 0.0 {
            margin = margin.min(b / n);
        }
    }
    (pass, margin)
}

/// First time τ (to relative precision 1e-3) at which the propagator norm
/// drops to `threshold`: `‖e^{-τG}‖ ≤ threshold ≤ ‖e^{-τ(1−1e-3)G}‖`.
pub fn dissipation_time(e: &EvolutionOperator, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain("threshold", threshold, "(0, 1)"));
    }
    let rate = e.certificate_rate()?;
    let cap = if rate > 0.0 {
        10.0 * (FRAC_PI_2 - threshold.ln()) / rate
    } else {
        f64::INFINITY
    };
    let mut lo = 0.0;
    let mut hi = if rate > 0.0 { -threshold.ln() / rate } else { 1.0 };
    let mut doublings = 0;
    while e.propagator_norm(hi)? > threshold {
        lo = hi;
        if hi >= cap || doublings >= MAX_DOUBLINGS {
            return Err(Error::Timeout { lo, hi, cap });
        }
        hi = (2.0 * hi).min(cap);
        doublings += 1;
    }
    while lo < hi * (1.0 - BISECT_REL) {
        let mid = 0.5 * (lo + hi);
        if e.propagator_norm(mid)? > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
