//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn op_norm_real(m: &RMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// (M + M*)/2
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// (M - M*)/(2i)
pub fn imaginary_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * Complex64::new(0.0, -0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    if h.is_empty() {
        return Vec::new();
    }
    // Symmetrize to kill round-off asymmetry before the eigensolve.
    let h = hermitian_part(h);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn lambda_min(h: &CMatrix) -> f64 {
    hermitian_eigenvalues(h).first().copied().unwrap_or(f64::INFINITY)
}

pub fn lambda_max(h: &CMatrix) -> f64 {
    hermitian_eigenvalues(h).last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Symmetric square root and inverse square root of an SPD matrix.
///
/// Returns `None` when the smallest eigenvalue is not positive.
pub fn spd_sqrt(c: &RMatrix) -> Option<(RMatrix, RMatrix)> {
    let sym = (c + c.transpose()).scale(0.5);
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
        return None;
    }
    let q = &eig.eigenvectors;
    let sqrt = q * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose();
    let inv_sqrt = q * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * q.transpose();
    Some((sqrt, inv_sqrt))
}

pub fn is_symmetric(m: &RMatrix, rel: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() <= rel * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imaginary_part_of_real_symmetric_is_zero() {
        let m = to_complex(&RMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]));
        assert!(imaginary_part(&m).norm() < 1e-15);
    }

    #[test]
    fn imaginary_part_of_scalar() {
        let m = CMatrix::from_element(1, 1, Complex64::new(1.0, -2.5));
        assert!((imaginary_part(&m)[(0, 0)].re + 2.5).abs() < 1e-15);
    }

    #[test]
    fn spd_sqrt_rejects_indefinite() {
        let m = RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(spd_sqrt(&m).is_none());
    }
}
