//! Lanczos iteration with full reorthogonalization for the largest
//! eigenvalue of a Hermitian positive semi-definite operator.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Stop when `|βⱼ·sⱼ| ≤ tol·θ` for the leading Ritz pair.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-11,
            max_iter: 400,
        }
    }
}

/// Deterministic start vector with no structured zeros.
pub fn start_vector<T: ComplexField<RealField = f64>>(n: usize) -> DVector<T> {
    let mut s: u64 = 0x9E37_79B9_7F4A_7C15;
    DVector::from_fn(n, |_, _| {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        T::from_real(0.5 + (s >> 11) as f64 / (1u64 << 53) as f64)
    })
}

/// Largest eigenvalue of the operator `apply` on vectors of length `n`.
pub fn largest_eigenvalue<T, F>(n: usize, opts: LanczosOptions, mut apply: F) -> f64
where
    T: ComplexField<RealField = f64> + Copy,
    F: FnMut(&DVector<T>) -> DVector<T>,
{
    if n == 0 {
        return 0.0;
    }
    let max_iter = opts.max_iter.min(n).max(1);
    let mut q = start_vector::<T>(n);
    q /= T::from_real(q.norm());
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(max_iter);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_iter);
    let mut beta: Vec<f64> = Vec::with_capacity(max_iter);
    let mut theta = 0.0;
    for j in 0..max_iter {
        let mut w = apply(&q);
        let a = q.dotc(&w).real();
        basis.push(q.clone());
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for v in &basis {
                let h = v.dotc(&w);
                w.axpy(-h, v, T::one());
            }
        }
        let b = w.norm();
        let k = j + 1;
        let check = k == max_iter || k < 8 || k % 4 == 0 || b == 0.0;
        if check {
            let (t, resid) = leading_ritz(&alpha, &beta, b);
            theta = t;
            if b <= f64::EPSILON * t.abs() * 1e-2 || resid <= opts.tol * t.abs() {
                break;
            }
        }
        if b == 0.0 {
            break;
        }
        beta.push(b);
        q = w / T::from_real(b);
    }
    theta
}

/// Largest eigenvalue of the tridiagonal `(alpha, beta)` and its residual
/// estimate `|β_next · s_last|`.
fn leading_ritz(alpha: &[f64], beta: &[f64], b_next: f64) -> (f64, f64) {
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (imax, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let last = eig.eigenvectors[(k - 1, imax)];
    (theta, (b_next * last).abs())
}
