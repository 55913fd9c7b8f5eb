//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use dissipator::quadrature::GaussLegendre;
use dissipator::search::golden_section;
use dissipator::ShearProfile;

/// Window residual by direct quadrature: the affine (or constant) fit is
/// solved from centred moments, then the squared residual is integrated.
pub fn window_residual(p: &ShearProfile, rule: &GaussLegendre, x: f64, delta: f64, affine: bool) -> f64 {
    let ys: Vec<f64> = rule.nodes.iter().map(|t| x + delta * t).collect();
    let psi: Vec<f64> = ys.iter().map(|&y| p.eval_psi(y)).collect();
    let w = &rule.weights;
    let mut m0 = 0.0;
    let mut ms = 0.0;
    let mut mss = 0.0;
    for i in 0..ys.len() {
        let s = ys[i] - x;
        m0 += w[i] * psi[i];
        ms += w[i] * s * psi[i];
        mss += w[i] * s * s;
    }
    let c = m0 / 2.0;
    let slope = if affine { ms / mss } else { 0.0 };
    delta
        * (0..ys.len())
            .map(|i| w[i] * (psi[i] - c - slope * (ys[i] - x)).powi(2))
            .sum::<f64>()
}

/// Brute-force ω: uniform x-grid over one period of ψ, then golden
/// refinement around the best few grid points.
pub fn brute_omega(p: &ShearProfile, delta: f64, affine: bool, grid: usize) -> f64 {
    let rule = GaussLegendre::new(2048);
    let h = 2.0 * PI / grid as f64;
    let vals: Vec<f64> = (0..grid)
        .map(|j| window_residual(p, &rule, j as f64 * h, delta, affine))
        .collect();
    let mut order: Vec<usize> = (0..grid).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut best = vals[order[0]];
    for &j in order.iter().take(6) {
        let c = j as f64 * h;
        let (_, v) = golden_section(c - h, c + h, 1e-11, |x| window_residual(p, &rule, x, delta, affine));
        best = best.min(v);
    }
    best
}

use dissipator::OperatorDisc;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// σ_min(H − iλ) from a full singular value decomposition.
pub fn dense_sigma_min(h: &DMatrix<Complex64>, lambda: f64) -> f64 {
    let mut a = h.clone();
    for i in 0..a.nrows() {
        a[(i, i)] -= Complex64::new(0.0, lambda);
    }
    a.singular_values().min()
}

/// inf over λ of the dense σ_min: a uniform scan over the range where the
/// infimum can lie, then golden refinement of the best few scan points.
pub fn dense_psi1(d: &OperatorDisc, scan: usize) -> (f64, f64) {
    let h = d.to_dense();
    let c = d.center();
    let span = d.amplitude() + 2.0;
    let step = 2.0 * span / scan as f64;
    let pts: Vec<(f64, f64)> = (0..=scan)
        .map(|i| {
            let l = c - span + i as f64 * step;
            (l, dense_sigma_min(&h, l))
        })
        .collect();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| pts[a].1.total_cmp(&pts[b].1));
    let mut best = pts[order[0]];
    for &i in order.iter().take(6) {
        let (l, v) = golden_section(pts[i].0 - step, pts[i].0 + step, 1e-12, |l| dense_sigma_min(&h, l));
        if v < best.1 {
            best = (l, v);
        }
    }
    (best.1, best.0)
}

/// ‖exp(−tG)‖₂ from a dense complex exponential and SVD.
pub fn dense_propagator_norm(g: &DMatrix<Complex64>, t: f64) -> f64 {
    let e = (g * Complex64::new(-t, 0.0)).exp();
    e.singular_values().max()
}
