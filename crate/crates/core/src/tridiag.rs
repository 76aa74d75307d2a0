//! Constant-coefficient complex tridiagonal systems.

use num_complex::Complex64;

/// LU factors of a Toeplitz tridiagonal matrix `(off, diag, off)` of size `n`,
/// computed once and reused for every right-hand side.
#[derive(Debug, Clone)]
pub struct ToeplitzTridiag {
    off: Complex64,
    /// Modified super-diagonal of the forward sweep.
    upper: Vec<Complex64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<Complex64>,
}

impl ToeplitzTridiag {
    pub fn new(diag: Complex64, off: Complex64, n: usize) -> Self {
        assert!(n >= 1);
        let mut upper = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = diag;
        inv_pivot[0] = 1.0 / pivot;
        upper[0] = off * inv_pivot[0];
        for i in 1..n {
            pivot = diag - off * upper[i - 1];
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = off * inv_pivot[i];
        }
        Self {
            off,
            upper,
            inv_pivot,
        }
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [Complex64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

/// Solves a general real tridiagonal system in place by the Thomas algorithm.
/// `sub[i]` couples row `i` to `i−1` and `sup[i]` row `i` to `i+1`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut pivot = diag[0];
    c[0] = sup[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / pivot;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_product() {
        let n = 25;
        let sub: Vec<f64> = (0..n).map(|i| 0.3 + 0.01 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.2 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + (i as f64).cos()).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += sup[i] * x[i + 1];
                }
                s
            })
            .collect();
        solve_tridiagonal(&sub, &diag, &sup, &mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn solves_against_dense_product() {
        let n = 40;
        let diag = Complex64::new(-2.0, 3.0);
        let off = Complex64::new(1.0, 0.0);
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut b: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut s = diag * x[i];
                if i > 0 {
                    s += off * x[i - 1];
                }
                if i + 1 < n {
                    s += off * x[i + 1];
                }
                s
            })
            .collect();
        ToeplitzTridiag::new(diag, off, n).solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).norm() < 1e-12);
        }
    }
}
