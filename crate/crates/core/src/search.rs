//! One-dimensional minimization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `[a, b]` until the bracket is shorter than `tol`.
/// Returns `(x, f(x))` for the best point evaluated.
pub fn golden_section(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        iters += 1;
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Indices of grid local minima (endpoints compare with their single
/// neighbour), sorted by value, at most `keep` of them.
pub fn best_local_minima(values: &[f64], keep: usize) -> Vec<usize> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] <= values[i - 1];
            let right = i + 1 == n || values[i] <= values[i + 1];
            left && right
        })
        .collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    idx.truncate(keep);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_section(-3.0, 5.0, 1e-12, |x| (x - 1.25).powi(2) + 2.0);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn local_minima_sorted() {
        let v = [3.0, 1.0, 2.0, 0.5, 4.0, 4.0, 0.7];
        assert_eq!(best_local_minima(&v, 2), vec![3, 6]);
        assert_eq!(best_local_minima(&v, 9), vec![3, 6, 1]);
    }
}
