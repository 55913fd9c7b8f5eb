//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns a JSON string: the data on success,
//! `{"error": "..."}` otherwise. The plain Rust functions behind them are
//! public so they can be tested natively.

use std::f64::consts::{PI, TAU};

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use dissipator::geometry::{self, Order};
use dissipator::semigroup::{self, DEFAULT_THRESHOLD};
use dissipator::{EvolutionOperator, OperatorDisc, ProfileMode, ShearProfile, Variant};

/// Keeps the propagator at 4·3^4 = 324 modes, interactive in a browser.
pub const MAX_DECAY_TERMS: usize = 4;
pub const MAX_SAMPLES: usize = 4000;

#[derive(Debug, thiserror::Error)]
pub enum WebError {
    #[error(transparent)]
    Core(#[from] dissipator::Error),
    #[error("{0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, WebError>;

fn profile(mode: &str, alpha: f64, terms: usize) -> Result<ShearProfile> {
    let mode: ProfileMode = mode.parse()?;
    if mode == ProfileMode::Explicit {
        return Err(WebError::Input("the demo supports power and log profiles".into()));
    }
    Ok(ShearProfile::from_mode(mode, alpha, terms)?)
}

fn check_samples(samples: usize) -> Result<()> {
    if (2..=MAX_SAMPLES).contains(&samples) {
        Ok(())
    } else {
        Err(WebError::Input(format!("samples must lie in 2..={MAX_SAMPLES}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileCurves {
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub coefficients: Vec<f64>,
}

/// u and its antiderivative ψ on `samples` equispaced points of [0, 2π].
pub fn profile_curves(mode: &str, alpha: f64, terms: usize, samples: usize) -> Result<ProfileCurves> {
    check_samples(samples)?;
    let p = profile(mode, alpha, terms)?;
    let y: Vec<f64> = (0..samples).map(|i| TAU * i as f64 / (samples - 1) as f64).collect();
    let (frequencies, coefficients) = p.modes().unzip();
    Ok(ProfileCurves {
        u: y.iter().map(|&t| p.eval_u(t)).collect(),
        psi: y.iter().map(|&t| p.eval_psi(t)).collect(),
        y,
        frequencies,
        coefficients,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayData {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub gp_bound: Vec<f64>,
    /// νΨ₁ of the truncated operator.
    pub rate: f64,
    pub tau: f64,
    pub threshold: f64,
    pub modes: usize,
    pub pass: bool,
}

/// ‖e^(-tR)‖ against the decay bound, up to five bound time-constants.
pub fn decay_data(mode: &str, alpha: f64, terms: usize, nu: f64, k: i64, samples: usize) -> Result<DecayData> {
    check_samples(samples)?;
    if terms > MAX_DECAY_TERMS {
        return Err(WebError::Input(format!("at most {MAX_DECAY_TERMS} terms in the browser")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(WebError::Input("ν must be positive".into()));
    }
    let p = profile(mode, alpha, terms)?;
    let modes = OperatorDisc::recommended_modes(&p);
    let e = EvolutionOperator::shear(&p, nu, k, modes, Variant::R)?;
    let rate = e.certificate_rate()?;
    if rate <= 0.0 {
        return Err(WebError::Input("zero decay rate".into()));
    }
    let curve = semigroup::decay_curve(&e, 5.0 * (PI / 2.0 + 1.0) / rate, samples)?;
    let (pass, _) = semigroup::gp_certificate(&curve);
    Ok(DecayData {
        tau: semigroup::dissipation_time(&e, DEFAULT_THRESHOLD)?,
        threshold: DEFAULT_THRESHOLD,
        times: curve.times,
        norms: curve.norms,
        gp_bound: curve.gp_bound,
        rate,
        modes,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaScan {
    pub delta: Vec<f64>,
    pub omega0: Vec<f64>,
    pub omega1: Vec<f64>,
    /// Ψ₁ lower bound from ω₁ at each δ.
    pub bound: Vec<f64>,
    /// δ maximizing the bound.
    pub delta_star: f64,
}

/// ω₀, ω₁ and the derived Ψ₁ bound on δ = π·3^(-j/4), j = 0..points.
pub fn omega_scan(mode: &str, alpha: f64, terms: usize, points: usize) -> Result<OmegaScan> {
    check_samples(points)?;
    let p = profile(mode, alpha, terms)?;
    let delta: Vec<f64> = (0..points).map(|j| PI * 3f64.powf(-(j as f64) / 4.0)).collect();
    let mut out = OmegaScan {
        omega0: Vec::with_capacity(points),
        omega1: Vec::with_capacity(points),
        bound: Vec::with_capacity(points),
        delta_star: delta[0],
        delta: Vec::new(),
    };
    let mut best = f64::NEG_INFINITY;
    for &d in &delta {
        let w0 = geometry::omega(&p, d, Order::Constant)?.value;
        let w1 = geometry::omega(&p, d, Order::Affine)?.value;
        let b = geometry::bound_from_omega(d, w1)?.bound;
        if b > best {
            best = b;
            out.delta_star = d;
        }
        out.omega0.push(w0);
        out.omega1.push(w1);
        out.bound.push(b);
    }
    out.delta = delta;
    Ok(out)
}

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("serializable"),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

#[wasm_bindgen]
pub fn profile_json(mode: &str, alpha: f64, terms: usize, samples: usize) -> String {
    to_json(profile_curves(mode, alpha, terms, samples))
}

#[wasm_bindgen]
pub fn decay_json(mode: &str, alpha: f64, terms: usize, nu: f64, k: i32, samples: usize) -> String {
    to_json(decay_data(mode, alpha, terms, nu, k as i64, samples))
}

#[wasm_bindgen]
pub fn omega_json(mode: &str, alpha: f64, terms: usize, points: usize) -> String {
    to_json(omega_scan(mode, alpha, terms, points))
}
