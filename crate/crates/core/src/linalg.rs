//! Dense Cholesky factorisation for small symmetric positive-definite
//! matrices (row-major `n × n` slices).

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky<T> {
    n: usize,
    /// Lower-triangular factor, row-major; the upper triangle is zero.
    lower: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors `a = L Lᵀ`. Only the lower triangle of `a` is read.
    pub fn factor(a: &[T], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Argument(format!("expected {} entries for a {n}x{n} matrix, got {}", n * n, a.len())));
        }
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            // Pivots lost to rounding count as singular; NaN fails the
            // comparison too.
            let floor = a[j * n + j].abs() * T::epsilon() * T::from_count(n.max(2));
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(d > floor) || !d.is_finite() {
                return Err(Error::Conditioning(format!("pivot {j} is {d}")));
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    /// `ln det A = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> T {
        let two = T::one() + T::one();
        two * (0..self.n).map(|i| self.lower[i * self.n + i].ln()).sum::<T>()
    }

    /// Solves `L y = b` in place.
    pub fn forward_substitute(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// `xᵀ A⁻¹ x`, via `‖L⁻¹ x‖²`. `scratch` must have length `n`.
    pub fn mahalanobis_sq(&self, x: &[T], scratch: &mut [T]) -> T {
        scratch.copy_from_slice(x);
        self.forward_substitute(scratch);
        scratch.iter().map(|&v| v * v).sum()
    }
}
