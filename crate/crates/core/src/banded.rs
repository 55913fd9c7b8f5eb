//! Complex banded LU with partial pivoting and solves with `A` and `Aᴴ`.
//!
//! Storage follows the LAPACK band layout: `A[i, j]` lives at row
//! `kl + ku + i - j` of column `j`, leaving `kl` extra super-diagonals for
//! pivoting fill-in.

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ld,
            data: vec![Complex64::new(0.0, 0.0); ld * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && i <= j + self.kl);
        self.kl + self.ku + i - j + j * self.ld
    }

    /// Sets an entry inside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(
            i <= j + self.kl && j <= i + self.ku,
            "entry ({i}, {j}) outside band"
        );
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i > j + self.kl || j > i + self.ku + self.kl {
            return Complex64::new(0.0, 0.0);
        }
        self.data[self.idx(i, j)]
    }

    /// In-place LU factorization. Returns `None` when a pivot column is
    /// exactly zero (the matrix is singular).
    pub fn factor(mut self) -> Option<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut pmax = -1.0;
            for r in 0..=km {
                let v = self.data[self.idx(j + r, j)].norm_sqr();
                if v > pmax {
                    pmax = v;
                    p = r;
                }
            }
            piv[j] = j + p;
            if pmax == 0.0 {
                return None;
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + p, c);
                    self.data.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.data[self.idx(j, j)];
                let col = self.idx(j + 1, j);
                for r in 0..km {
                    self.data[col + r] *= inv;
                }
                for c in j + 1..=ju {
                    let ujc = self.data[self.idx(j, c)];
                    if ujc == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let dst = self.idx(j + 1, c);
                    for r in 0..km {
                        let l = self.data[col + r];
                        self.data[dst + r] -= l * ujc;
                    }
                }
            }
        }
        Some(BandLu { lu: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    /// Overwrites `b` with `A⁻¹b`.
    pub fn solve(&self, b: &mut [Complex64]) {
        let m = &self.lu;
        let (n, kl) = (m.n, m.kl);
        let kuu = m.kl + m.ku;
        for j in 0..n.saturating_sub(1) {
            let km = kl.min(n - 1 - j);
            let l = self.piv[j];
            if l != j {
                b.swap(l, j);
            }
            if km == 0 {
                continue;
            }
            let bj = b[j];
            let col = m.idx(j + 1, j);
            for r in 0..km {
                b[j + 1 + r] -= m.data[col + r] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= m.data[m.idx(j, j)];
            let bj = b[j];
            let lo = j.saturating_sub(kuu);
            for i in lo..j {
                b[i] -= m.data[m.idx(i, j)] * bj;
            }
        }
    }

    /// Overwrites `b` with `A⁻ᴴb`.
    pub fn solve_adjoint(&self, b: &mut [Complex64]) {
        let m = &self.lu;
        let (n, kl) = (m.n, m.kl);
        let kuu = m.kl + m.ku;
        for j in 0..n {
            let lo = j.saturating_sub(kuu);
            let mut s = b[j];
            for i in lo..j {
                s -= m.data[m.idx(i, j)].conj() * b[i];
            }
            b[j] = s / m.data[m.idx(j, j)].conj();
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let km = kl.min(n - 1 - j);
            if km > 0 {
                let col = m.idx(j + 1, j);
                let mut s = b[j];
                for r in 0..km {
                    s -= m.data[col + r].conj() * b[j + 1 + r];
                }
                b[j] = s;
            }
            let l = self.piv[j];
            if l != j {
                b.swap(l, j);
            }
        }
    }
}
