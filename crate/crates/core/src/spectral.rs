//! Fourier discretization of `H = -∂²ᵧ + iu(y)` and its pseudospectral
//! quantities Ψ₀ = σ_min(H) and Ψ₁ = inf_λ σ_min(H - iλ).
//!
//! In the basis `e^{imy}`, `|m| ≤ M`, the matrix is `D + S + ic₀I` with
//! `D = diag(m²)` and `S` real skew-symmetric: `S[m', m] = ±aₙ/2` for
//! `m' - m = ±3ⁿ`. Modes only couple across multiples of 3, so the matrix
//! splits into three banded blocks by `m mod 3`.

use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::lanczos::{largest_eigenvalue, LanczosOptions};
use crate::par;
use crate::profile::ShearProfile;
use crate::search::golden_section;

/// Largest truncation accepted by [`OperatorDisc::assemble`].
pub const MAX_MODES: usize = 4096;
/// Cap on σ_min evaluations in one Ψ₁ search.
const SEARCH_BUDGET: usize = 3000;
const TARGET_REL: f64 = 1e-6;
const CONVERGENCE_REL: f64 = 1e-4;
const MAX_INITIAL_CELLS: usize = 1024;

/// One `m mod 3` block: modes `m₀ + 3j`, diagonal `m²` and couplings
/// `(offset, a/2)` meaning `+a/2` at `(j + offset, j)` and `-a/2` at
/// `(j, j + offset)`.
#[derive(Debug, Clone)]
pub struct Block {
    pub modes: Vec<i64>,
    pub couplings: Vec<(usize, f64)>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.couplings
            .iter()
            .map(|&(o, _)| o)
            .filter(|&o| o < self.dim())
            .max()
            .unwrap_or(0)
    }

    /// Dense real matrix `D + S` of this block.
    pub fn real_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut a = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            self.modes.iter().map(|&m| (m * m) as f64),
        ));
        for &(off, half) in &self.couplings {
            for j in 0..n.saturating_sub(off) {
                a[(j + off, j)] += half;
                a[(j, j + off)] -= half;
            }
        }
        a
    }
}

#[derive(Debug, Clone)]
pub struct OperatorDisc {
    modes: usize,
    profile: ShearProfile,
    scale: f64,
    blocks: Vec<Block>,
}

impl OperatorDisc {
    /// Discretization of `H_{(u)}` with modes `|m| ≤ modes`.
    pub fn assemble(p: &ShearProfile, modes: usize) -> Result<Self> {
        Self::assemble_scaled(p, 1.0, modes)
    }

    /// Discretization of `H_{(scale·u)}`; the profile is kept unscaled.
    pub fn assemble_scaled(p: &ShearProfile, scale: f64, modes: usize) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::domain("scale", scale, "finite reals"));
        }
        let required = Self::required_modes(p);
        if modes > MAX_MODES {
            return Err(Error::Resolution {
                reason: "mode count exceeds the supported maximum",
                required: required.max(modes),
                given: MAX_MODES,
            });
        }
        if modes < required {
            return Err(Error::Resolution {
                reason: "truncation cannot represent the finest profile mode",
                required,
                given: modes,
            });
        }
        let m = modes as i64;
        let mut blocks = Vec::with_capacity(3);
        for r in 0..3i64 {
            let first = (-m..=m).find(|x| x.rem_euclid(3) == r);
            let block_modes: Vec<i64> = match first {
                Some(f) => (f..=m).step_by(3).collect(),
                None => Vec::new(),
            };
            let couplings = p
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, &a)| (3usize.pow(i as u32), 0.5 * scale * a))
                .collect();
            blocks.push(Block {
                modes: block_modes,
                couplings,
            });
        }
        Ok(OperatorDisc {
            modes,
            profile: p.clone(),
            scale,
            blocks,
        })
    }

    /// Hard minimum truncation `2·3^N` (zero for a constant profile).
    pub fn required_modes(p: &ShearProfile) -> usize {
        if p.terms() == 0 {
            0
        } else {
            2 * 3usize.pow(p.terms() as u32)
        }
    }

    /// Recommended truncation `4·3^N`.
    pub fn recommended_modes(p: &ShearProfile) -> usize {
        (2 * Self::required_modes(p)).max(2)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn profile(&self) -> &ShearProfile {
        &self.profile
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// The mean of the scaled multiplier; Ψ₁'s λ-landscape is symmetric about it.
    pub fn center(&self) -> f64 {
        self.scale * self.profile.mean()
    }

    /// Bound on `|scale·u − center|`.
    pub fn amplitude(&self) -> f64 {
        self.scale.abs() * self.profile.amplitude_bound()
    }

    /// Same operator at a different truncation.
    pub fn with_modes(&self, modes: usize) -> Result<Self> {
        Self::assemble_scaled(&self.profile, self.scale, modes)
    }

    /// Dense matrix indexed by `m + M`, `m = -M..=M`.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let m = self.modes as i64;
        let c0 = self.center();
        let mut a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let mm = i as i64 - m;
                Complex64::new((mm * mm) as f64, c0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        for (i, &ak) in self.profile.coeffs().iter().enumerate() {
            let f = 3usize.pow(i as u32 + 1);
            let half = 0.5 * self.scale * ak;
            for j in 0..n.saturating_sub(f) {
                a[(j + f, j)] += half;
                a[(j, j + f)] -= half;
            }
        }
        a
    }

    /// `D + S − iμ` on one block, where `μ = λ − centre`.
    fn block_minus_shift(&self, b: &Block, mu: f64) -> BandMatrix {
        let n = b.dim();
        let bw = b.bandwidth();
        let mut band = BandMatrix::zeros(n, bw, bw);
        let im = -mu;
        for (j, &m) in b.modes.iter().enumerate() {
            band.set(j, j, Complex64::new((m * m) as f64, im));
        }
        for &(off, half) in &b.couplings {
            for j in 0..n.saturating_sub(off) {
                band.set(j + off, j, Complex64::new(half, 0.0));
                band.set(j, j + off, Complex64::new(-half, 0.0));
            }
        }
        band
    }

    fn block_sigma_min(&self, b: &Block, mu: f64) -> f64 {
        let n = b.dim();
        if n == 0 {
            return f64::INFINITY;
        }
        let Some(lu) = self.block_minus_shift(b, mu).factor() else {
            return 0.0;
        };
        let theta = largest_eigenvalue::<Complex64, _>(n, LanczosOptions::default(), |v| {
            let mut x: Vec<Complex64> = v.iter().copied().collect();
            lu.solve_adjoint(&mut x);
            lu.solve(&mut x);
            DVector::from_vec(x)
        });
        if theta.is_finite() && theta > 0.0 {
            theta.powf(-0.5)
        } else {
            0.0
        }
    }

    /// Smallest singular value of `H − iλ`.
    pub fn sigma_min(&self, lambda: f64) -> f64 {
        self.sigma_offset(lambda - self.center())
    }

    /// `σ_min(H − i(centre + μ))`; independent of the centre bit for bit.
    fn sigma_offset(&self, mu: f64) -> f64 {
        self.blocks
            .iter()
            .map(|b| self.block_sigma_min(b, mu))
            .fold(f64::INFINITY, f64::min)
    }

    /// `1/σ_min(H − iλ)`, infinite when singular.
    pub fn resolvent_norm(&self, lambda: f64) -> f64 {
        let s = self.sigma_min(lambda);
        if s == 0.0 {
            f64::INFINITY
        } else {
            1.0 / s
        }
    }

    /// Ψ₀ = σ_min(H).
    pub fn psi0(&self) -> f64 {
        self.sigma_min(0.0)
    }

    /// Ψ₁ by certified branch-and-bound over λ, without the truncation check.
    pub fn psi1_search(&self) -> LambdaSearch {
        lambda_search(self)
    }
}

/// Outcome of the λ-minimization of `σ_min(H − iλ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub value: f64,
    pub lambda_star: f64,
    /// `value − (certified lower bound on the infimum)`.
    pub gap: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub psi0: f64,
    pub psi1: f64,
    pub lambda_star: f64,
    pub modes_used: usize,
    pub converged: bool,
    /// Certified accuracy of `psi1` on this discretization.
    pub gap: f64,
    /// Ψ₁ at the comparison truncation (doubled or halved), if any.
    pub psi1_check: Option<f64>,
}

pub fn assemble(p: &ShearProfile, modes: usize) -> Result<OperatorDisc> {
    OperatorDisc::assemble(p, modes)
}

pub fn sigma_min(d: &OperatorDisc, lambda: f64) -> f64 {
    d.sigma_min(lambda)
}

pub fn resolvent_norm(d: &OperatorDisc, lambda: f64) -> f64 {
    d.resolvent_norm(lambda)
}

pub fn psi0_direct(d: &OperatorDisc) -> f64 {
    d.psi0()
}

/// Ψ₀, Ψ₁ and λ*, with a truncation check at twice (or, at the mode
/// limit, half) the number of modes.
pub fn psi1_direct(d: &OperatorDisc) -> Result<SpectralResult> {
    let psi0 = d.psi0();
    let search = d.psi1_search();
    let (psi1, lambda_star) = (search.value, search.lambda_star);
    let required = OperatorDisc::required_modes(d.profile());
    let other = if 2 * d.modes() <= MAX_MODES {
        Some(2 * d.modes())
    } else if d.modes() / 2 >= required.max(1) {
        Some(d.modes() / 2)
    } else {
        None
    };
    let psi1_check = match other {
        Some(m) => Some(local_refine(&d.with_modes(m)?, lambda_star, search_step(d), psi1)),
        None => None,
    };
    let converged = psi1_check
        .is_some_and(|c| (c - psi1).abs() <= CONVERGENCE_REL * psi1.max(f64::MIN_POSITIVE));
    Ok(SpectralResult {
        psi0,
        psi1,
        lambda_star,
        modes_used: d.modes(),
        converged,
        gap: search.gap,
        psi1_check,
    })
}

/// Minimum of σ_min near `lambda` on another discretization.
fn local_refine(d: &OperatorDisc, lambda: f64, width: f64, reference: f64) -> f64 {
    let mu = lambda - d.center();
    let at = d.sigma_offset(mu);
    if at == 0.0 {
        return 0.0;
    }
    let tol = TARGET_REL * (1.0 + reference);
    let (_, v) = golden_section(mu - width, mu + width, tol, |m| d.sigma_offset(m));
    v.min(at)
}

fn search_step(d: &OperatorDisc) -> f64 {
    let span = 2.0 * d.amplitude();
    if span > 0.0 {
        span / 256.0
    } else {
        1.0 / 256.0
    }
}

/// Cell `[a, b]` of the λ-offset axis with its certified lower bound.
#[derive(Debug, Clone, Copy)]
struct Cell {
    a: f64,
    b: f64,
    sa: f64,
    sb: f64,
    lb: f64,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.lb == o.lb
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    // Min-heap on the lower bound.
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        o.lb.total_cmp(&self.lb)
    }
}

/// Lower bound for `σ(μ)` on `[a, b]` given endpoint values, where `μ` is
/// the offset from the centre and `amp` bounds `|u − centre|`.
///
/// Three valid bounds are combined: σ is 1-Lipschitz; `σ(μ)² − μ²` is
/// concave (a minimum of affine functions of μ); `σ(μ) ≥ dist(μ, [-amp, amp])`.
fn cell_bound(a: f64, b: f64, sa: f64, sb: f64, amp: f64) -> f64 {
    let h = b - a;
    let lip = 0.5 * (sa + sb - h);
    let ga = sa * sa - a * a;
    let gb = sb * sb - b * b;
    let slope = (gb - ga) / h;
    let v = (-0.5 * slope).clamp(a, b);
    let q = v * v + ga + slope * (v - a);
    let conc = q.max(0.0).sqrt();
    let dist = (a - amp).max(0.0);
    lip.max(conc).max(dist).max(0.0)
}

fn lambda_search(d: &OperatorDisc) -> LambdaSearch {
    let c = d.center();
    let amp = d.amplitude();
    let sigma = |mu: f64| d.sigma_offset(mu);
    let s0 = sigma(0.0);
    if s0 == 0.0 || amp == 0.0 {
        // Constant multiplier: σ(μ)² = min_m (m⁴ + μ²) is minimal at μ = 0.
        return LambdaSearch {
            value: s0,
            lambda_star: c,
            gap: 0.0,
            evaluations: 1,
        };
    }
    // σ(c + μ) = σ(c − μ), and for |μ| > amp + s0 every value exceeds s0.
    let hi = amp + s0.max(1.0);
    let step = search_step(d);
    let cells0 = ((hi / step).ceil() as usize).clamp(2, MAX_INITIAL_CELLS);
    let grid: Vec<f64> = (0..=cells0).map(|i| hi * i as f64 / cells0 as f64).collect();
    let mut vals = par::map_indices(grid.len(), |i| if i == 0 { s0 } else { sigma(grid[i]) });
    vals[0] = s0;
    let mut evaluations = grid.len();
    let (mut best, mut best_mu) = (s0, 0.0);
    for (i, &v) in vals.iter().enumerate() {
        if v < best {
            best = v;
            best_mu = grid[i];
        }
    }
    let mut heap: BinaryHeap<Cell> = (0..cells0)
        .map(|i| {
            let (a, b, sa, sb) = (grid[i], grid[i + 1], vals[i], vals[i + 1]);
            Cell {
                a,
                b,
                sa,
                sb,
                lb: cell_bound(a, b, sa, sb, amp),
            }
        })
        .collect();
    // Smallest lower bound among discarded cells.
    let mut floor = f64::INFINITY;
    while let Some(cell) = heap.pop() {
        let target = TARGET_REL * (1.0 + best);
        if cell.lb >= best - target
            || evaluations >= SEARCH_BUDGET
            || cell.b - cell.a <= f64::EPSILON * hi
        {
            floor = floor.min(cell.lb);
            break;
        }
        let mid = 0.5 * (cell.a + cell.b);
        let sm = sigma(mid);
        evaluations += 1;
        if sm < best {
            best = sm;
            best_mu = mid;
        }
        for (a, b, sa, sb) in [(cell.a, mid, cell.sa, sm), (mid, cell.b, sm, cell.sb)] {
            let lb = cell_bound(a, b, sa, sb, amp);
            if lb < best - TARGET_REL * (1.0 + best) {
                heap.push(Cell { a, b, sa, sb, lb });
            } else {
                floor = floor.min(lb);
            }
        }
    }
    let gap = (best - floor.min(best)).max(0.0);
    LambdaSearch {
        value: best,
        lambda_star: c + best_mu,
        gap,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(c: f64) -> ShearProfile {
        ShearProfile::explicit(vec![], c).unwrap()
    }

    #[test]
    fn zero_profile_is_laplacian() {
        let d = assemble(&constant(0.0), 2).unwrap();
        let a = d.to_dense();
        for (i, want) in [4.0, 1.0, 0.0, 1.0, 4.0].iter().enumerate() {
            assert_eq!(a[(i, i)], Complex64::new(*want, 0.0));
        }
        assert_eq!(a.iter().filter(|z| z.norm() != 0.0).count(), 4);
        assert_eq!(d.sigma_min(0.0), 0.0);
        assert_eq!(d.resolvent_norm(0.0), f64::INFINITY);
    }

    #[test]
    fn constant_profile_spot_values() {
        for c in [0.5, 2.0, 7.0] {
            let d = assemble(&constant(c), 2).unwrap();
            assert_eq!(d.to_dense()[(2, 2)], Complex64::new(0.0, c));
            assert!((d.psi0() - c).abs() < 1e-10);
            assert!((d.resolvent_norm(0.0) - 1.0 / c).abs() < 1e-10);
            let r = psi1_direct(&d).unwrap();
            assert!(r.psi1.abs() < 1e-10);
            assert_eq!(r.lambda_star, c);
            assert!(r.converged);
        }
    }

    #[test]
    fn single_mode_couplings() {
        let p = ShearProfile::weierstrass_power(0.5, 1).unwrap();
        let d = assemble(&p, 8).unwrap();
        let a = d.to_dense();
        let a1 = p.coeffs()[0];
        for i in 0..17 {
            for j in 0..17 {
                if i == j {
                    continue;
                }
                let want = match i as i64 - j as i64 {
                    3 => a1 / 2.0,
                    -3 => -a1 / 2.0,
                    _ => 0.0,
                };
                assert_eq!(a[(i, j)], Complex64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn resolution_errors() {
        let p = ShearProfile::weierstrass_power(0.5, 6).unwrap();
        match assemble(&p, 8) {
            Err(Error::Resolution { required, given, .. }) => {
                assert_eq!(required, 2 * 729);
                assert_eq!(given, 8);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(assemble(&constant(1.0), MAX_MODES + 1).is_err());
    }

    #[test]
    fn sigma_matches_dense_svd() {
        let p = ShearProfile::explicit(vec![1.0], 0.0).unwrap();
        let d = assemble(&p, 64).unwrap();
        for lambda in [0.0, 0.3, -0.7] {
            let mut a = d.to_dense();
            for i in 0..a.nrows() {
                a[(i, i)] -= Complex64::new(0.0, lambda);
            }
            let sv = a.singular_values().min();
            assert!((d.sigma_min(lambda) - sv).abs() <= 1e-8 * sv);
        }
    }

    #[test]
    fn cell_bound_is_valid_for_known_function() {
        // σ(μ) = sqrt(1 + μ²) has σ² − μ² constant (concave, flat).
        let f = |m: f64| (1.0 + m * m).sqrt();
        let lb = cell_bound(0.0, 2.0, f(0.0), f(2.0), 10.0);
        assert!(lb <= 1.0 + 1e-15 && lb > 0.99);
    }
}
