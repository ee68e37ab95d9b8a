//! Hermitian matrix helpers shared across the crate.
//!
//! All inversions and fractional powers go through an explicit Hermitian
//! eigendecomposition with a relative eigenvalue floor, so ill-conditioned
//! covariances degrade gracefully instead of blowing up.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Relative eigenvalue floor used for pseudo-inverses.
pub const INV_FLOOR: f64 = 1e-12;

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Real eigenvalues, descending.
    pub values: Vec<f64>,
    /// Unitary eigenvector matrix, column k pairs with `values[k]`.
    pub vectors: DMatrix<Complex64>,
}

pub fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative deviation from Hermitian symmetry, ||A - A^H||_F / ||A||_F.
pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let nrm = frobenius(m);
    if nrm == 0.0 {
        return 0.0;
    }
    let d = m - m.adjoint();
    frobenius(&d) / nrm
}

/// Exact symmetrization (A + A^H)/2; removes roundoff-level asymmetry.
pub fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()).scale(0.5)
}

/// Hermitian eigendecomposition with descending eigenvalues.
pub fn hermitian_eig(m: &DMatrix<Complex64>) -> HermitianEig {
    let n = m.nrows();
    if n == 0 {
        return HermitianEig {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let se = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    HermitianEig { values, vectors }
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Rebuilds sum_k f(lambda_k) w_k w_k^H, skipping eigenvalues below
    /// `rel_floor * lambda_max` (treated as numerically zero).
    pub fn spectral_map(&self, rel_floor: f64, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        let floor = rel_floor * self.max_eigenvalue().max(0.0);
        for (k, &lam) in self.values.iter().enumerate() {
            if lam <= floor || lam <= 0.0 {
                continue;
            }
            let w = self.vectors.column(k);
            let fl = f(lam);
            if fl == 0.0 {
                continue;
            }
            // out += f(lam) * w w^H
            out.ger(Complex64::new(fl, 0.0), &w, &w.conjugate(), Complex64::new(1.0, 0.0));
        }
        out
    }

    /// Matrix power A^p on the retained eigenspace (p may be negative or
    /// fractional). Eigenvalues below the floor are dropped, which realizes
    /// the truncated decomposition used for ill-conditioned covariances.
    pub fn power(&self, p: f64, rel_floor: f64) -> DMatrix<Complex64> {
        self.spectral_map(rel_floor, |lam| lam.powf(p))
    }

    /// Pseudo-inverse with the default floor.
    pub fn pinv(&self) -> DMatrix<Complex64> {
        self.power(-1.0, INV_FLOOR)
    }
}

/// Pseudo-inverse of a Hermitian matrix with the default eigenvalue floor.
pub fn hermitian_pinv(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    hermitian_eig(m).pinv()
}

/// Real diagonal of a Hermitian matrix.
pub fn real_diagonal(m: &DMatrix<Complex64>) -> DVector<f64> {
    DVector::from_fn(m.nrows(), |i, _| m[(i, i)].re)
}

/// Real part of the trace.
pub fn trace_re(m: &DMatrix<Complex64>) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}
