//! Lacunary (Weierstrass-type) shear profiles on the 2π torus.
//!
//! A profile is `u(y) = c₀ + Σₙ aₙ sin(3ⁿ y)` for `n = 1..=N`, together with
//! its stream function `ψ(y) = c₀·y − Σₙ (aₙ/3ⁿ) cos(3ⁿ y)` satisfying
//! `ψ' = u`. Coefficients are stored explicitly so the truncation level is
//! part of every report.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The lacunary base. Fixed: the third-difference cancellation relies on it.
pub const BASE: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileMode {
    /// `aₙ = 3^{-nα}`, α ∈ (0,1).
    Power,
    /// `aₙ = n^{-α}`, α ∈ (1,2).
    Log,
    /// Coefficients supplied by the caller.
    Explicit,
}

impl ProfileMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileMode::Power => "power",
            ProfileMode::Log => "log",
            ProfileMode::Explicit => "explicit",
        }
    }
}

impl std::str::FromStr for ProfileMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(ProfileMode::Power),
            "log" => Ok(ProfileMode::Log),
            "explicit" => Ok(ProfileMode::Explicit),
            other => Err(Error::Argument(format!(
                "unknown profile mode '{other}' (expected power|log|explicit)"
            ))),
        }
    }
}

/// Serialized form of a profile: `{"mode","alpha","terms","coeffs","mean"}`.
///
/// `coeffs` is authoritative when `mode = "explicit"`; otherwise it is
/// regenerated from `alpha` and `terms` and only echoed for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub mode: ProfileMode,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub terms: usize,
    #[serde(default)]
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub mean: f64,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<ShearProfile> {
        let p = match self.mode {
            ProfileMode::Power => ShearProfile::weierstrass_power(self.alpha, self.terms)?,
            ProfileMode::Log => ShearProfile::weierstrass_log(self.alpha, self.terms)?,
            ProfileMode::Explicit => ShearProfile::explicit(self.coeffs.clone(), 0.0)?,
        };
        p.with_mean(self.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShearProfile {
    coeffs: Vec<f64>,
    mean: f64,
    mode: ProfileMode,
    alpha: f64,
}

impl ShearProfile {
    /// Weierstrass profile with `aₙ = 3^{-nα}`.
    pub fn weierstrass_power(alpha: f64, terms: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain("alpha", alpha, "(0, 1)"));
        }
        if terms == 0 {
            return Err(Error::Argument("terms must be at least 1".into()));
        }
        let coeffs = (1..=terms)
            .map(|n| (BASE as f64).powf(-(n as f64) * alpha))
            .collect();
        Ok(ShearProfile {
            coeffs,
            mean: 0.0,
            mode: ProfileMode::Power,
            alpha,
        })
    }

    /// Weierstrass profile with `aₙ = n^{-α}` (logarithmic dissipation rate).
    pub fn weierstrass_log(alpha: f64, terms: usize) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::domain("alpha", alpha, "(1, 2)"));
        }
        if terms == 0 {
            return Err(Error::Argument("terms must be at least 1".into()));
        }
        let coeffs = (1..=terms).map(|n| (n as f64).powf(-alpha)).collect();
        Ok(ShearProfile {
            coeffs,
            mean: 0.0,
            mode: ProfileMode::Log,
            alpha,
        })
    }

    /// Profile with caller-supplied coefficients `a₁..a_N` and mean `c₀`.
    pub fn explicit(coeffs: Vec<f64>, mean: f64) -> Result<Self> {
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::domain("coefficient", *bad, "finite reals"));
        }
        if !mean.is_finite() {
            return Err(Error::domain("mean", mean, "finite reals"));
        }
        Ok(ShearProfile {
            coeffs,
            mean,
            mode: ProfileMode::Explicit,
            alpha: f64::NAN,
        })
    }

    /// Profile built for `mode`, `alpha` and `terms`.
    pub fn from_mode(mode: ProfileMode, alpha: f64, terms: usize) -> Result<Self> {
        match mode {
            ProfileMode::Power => Self::weierstrass_power(alpha, terms),
            ProfileMode::Log => Self::weierstrass_log(alpha, terms),
            ProfileMode::Explicit => Err(Error::Argument(
                "explicit profiles need coefficients, not alpha/terms".into(),
            )),
        }
    }

    pub fn with_mean(mut self, mean: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::domain("mean", mean, "finite reals"));
        }
        self.mean = mean;
        Ok(self)
    }

    /// The profile `factor·u` (coefficients and mean multiplied).
    pub fn scaled(&self, factor: f64) -> Self {
        ShearProfile {
            coeffs: self.coeffs.iter().map(|a| a * factor).collect(),
            mean: self.mean * factor,
            mode: ProfileMode::Explicit,
            alpha: self.alpha,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn base(&self) -> u32 {
        BASE
    }

    pub fn mode(&self) -> ProfileMode {
        self.mode
    }

    /// α for generated profiles, NaN for explicit ones.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn spec(&self) -> ProfileSpec {
        ProfileSpec {
            mode: self.mode,
            alpha: if self.alpha.is_nan() { 0.0 } else { self.alpha },
            terms: self.terms(),
            coeffs: self.coeffs.clone(),
            mean: self.mean,
        }
    }

    /// Frequency `3ⁿ` of the n-th term (1-based).
    pub fn frequency(n: usize) -> f64 {
        (BASE as f64).powi(n as i32)
    }

    /// Iterator over `(3ⁿ, aₙ)`.
    pub fn modes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &a)| (Self::frequency(i + 1), a))
    }

    pub fn eval_u(&self, y: f64) -> f64 {
        self.mean + self.modes().map(|(w, a)| a * (w * y).sin()).sum::<f64>()
    }

    pub fn eval_psi(&self, y: f64) -> f64 {
        self.mean * y - self.modes().map(|(w, a)| a / w * (w * y).cos()).sum::<f64>()
    }

    /// `ψ(y) − 3ψ(y+h) + 3ψ(y+2h) − ψ(y+3h)`.
    pub fn third_difference(&self, h: f64, y: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::domain("h", h, "(0, ∞)"));
        }
        Ok(self.eval_psi(y) - 3.0 * self.eval_psi(y + h) + 3.0 * self.eval_psi(y + 2.0 * h)
            - self.eval_psi(y + 3.0 * h))
    }

    /// Lacunary closed form of the third difference (mean term drops out):
    /// `Σ (aₙ/3ⁿ)·sin(3ⁿ(y + 3h/2))·(2 sin(3ⁿh/2))³`.
    pub fn third_difference_closed(&self, h: f64, y: f64) -> f64 {
        let mid = y + 1.5 * h;
        self.modes()
            .map(|(w, a)| a / w * (w * mid).sin() * (2.0 * (0.5 * w * h).sin()).powi(3))
            .sum()
    }

    /// True iff every `aₙ ≠ 0` and `1 ≤ |aₙ|/|aₙ₊₁| ≤ 3`.
    pub fn validate_ratio(&self) -> bool {
        if self.coeffs.iter().any(|&a| a == 0.0) {
            return false;
        }
        self.coeffs.windows(2).all(|w| {
            let r = w[0].abs() / w[1].abs();
            (1.0..=3.0).contains(&r)
        })
    }

    /// `Σ|aₙ|`, a bound on `|u − c₀|`.
    pub fn amplitude_bound(&self) -> f64 {
        self.coeffs.iter().map(|a| a.abs()).sum()
    }

    /// Smallest term count N with `3^{-N}π ≤ δ/3`, i.e. enough lacunary
    /// levels that the finest mode oscillates at least 1.5 times per window.
    pub fn terms_required(delta: f64) -> usize {
        let mut n = 1usize;
        while PI / Self::frequency(n) > delta / 3.0 && n < 60 {
            n += 1;
        }
        n
    }

    /// Whether the truncation resolves windows of half-width `delta`.
    pub fn resolves(&self, delta: f64) -> bool {
        self.terms() >= Self::terms_required(delta)
    }
}
