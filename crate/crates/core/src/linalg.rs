//! Dense helpers for small symmetric positive-definite matrices (row-major).

use alloc::vec;
use alloc::vec::Vec;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `a` (`n x n`, row-major). Returns `None` unless `a` is
    /// numerically positive definite.
    pub fn new(a: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s.is_nan() || s <= 0.0 {
                        return None;
                    }
                    l[i * n + i] = libm::sqrt(s);
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Self { n, l })
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| libm::log(self.l[i * self.n + i])).sum::<f64>() * 2.0
    }

    /// Squared Mahalanobis norm `vᵀ A⁻¹ v` via forward substitution.
    pub fn mahalanobis_sq(&self, v: &[f64]) -> f64 {
        let n = self.n;
        let mut y = vec![0.0; n];
        let mut acc = 0.0;
        for i in 0..n {
            let mut s = v[i];
            for (k, yk) in y.iter().enumerate().take(i) {
                s -= self.l[i * n + k] * yk;
            }
            y[i] = s / self.l[i * n + i];
            acc += y[i] * y[i];
        }
        acc
    }
}
