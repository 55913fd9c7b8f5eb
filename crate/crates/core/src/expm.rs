//! Real matrix exponential `exp(tA)` by degree-13 Padé scaling and squaring,
//! with powers of `A` cached so a time grid costs three products, one LU
//! solve and the squarings per sample.

use nalgebra::DMatrix;

use crate::lanczos::{largest_eigenvalue, LanczosOptions};

/// ‖tA‖₁ threshold for the degree-13 approximant.
const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

#[derive(Debug, Clone)]
pub struct ExpmPlan {
    a: DMatrix<f64>,
    a2: DMatrix<f64>,
    a4: DMatrix<f64>,
    a6: DMatrix<f64>,
    norm1: f64,
}

impl ExpmPlan {
    pub fn new(a: DMatrix<f64>) -> Self {
        assert!(a.is_square(), "exponential of a non-square matrix");
        let a2 = &a * &a;
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let norm1 = a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
        ExpmPlan {
            a,
            a2,
            a4,
            a6,
            norm1,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// exp(tA).
    pub fn exp(&self, t: f64) -> DMatrix<f64> {
        let n = self.dim();
        if t == 0.0 || n == 0 {
            return DMatrix::identity(n, n);
        }
        let tn = t.abs() * self.norm1;
        let s = if tn > THETA_13 {
            (tn / THETA_13).log2().ceil() as i32
        } else {
            0
        };
        let tau = t / 2f64.powi(s);
        let (t2, t4, t6) = (tau * tau, tau.powi(4), tau.powi(6));
        let b = &PADE_13;
        let id = DMatrix::<f64>::identity(n, n);

        let w1 = &self.a6 * (b[13] * t6) + &self.a4 * (b[11] * t4) + &self.a2 * (b[9] * t2);
        let w = (&self.a6 * &w1) * t6
            + &self.a6 * (b[7] * t6)
            + &self.a4 * (b[5] * t4)
            + &self.a2 * (b[3] * t2)
            + &id * b[1];
        let u = &self.a * tau * &w;
        let z1 = &self.a6 * (b[12] * t6) + &self.a4 * (b[10] * t4) + &self.a2 * (b[8] * t2);
        let v = (&self.a6 * &z1) * t6
            + &self.a6 * (b[6] * t6)
            + &self.a4 * (b[4] * t4)
            + &self.a2 * (b[2] * t2)
            + &id * b[0];
        let p = &v + &u;
        let q = &v - &u;
        let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular");
        for _ in 0..s {
            r = &r * &r;
        }
        r
    }
}

/// Largest singular value of a real matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let mt = m.transpose();
    let lam = largest_eigenvalue::<f64, _>(m.ncols(), LanczosOptions::default(), |v| {
        &mt * (m * v)
    });
    lam.max(0.0).sqrt()
}
