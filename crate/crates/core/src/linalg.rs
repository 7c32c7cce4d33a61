//! Small fixed-size complex linear algebra used throughout the crate.
//!
//! Everything here works on 3×3 matrices in the fixed level order
//! (|0⟩, |g⟩, |1⟩). Hermitian functions go through a dense eigendecomposition,
//! which is exact up to rounding at this size.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix3 = Matrix3<C64>;
pub type CVector3 = Vector3<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix3) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |m - m†|`.
pub fn hermiticity_defect(m: &CMatrix3) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `max |u† u - 1|`.
pub fn unitarity_defect(u: &CMatrix3) -> f64 {
    max_abs(&(u.adjoint() * u - CMatrix3::identity()))
}

/// Eigenvalues (ascending) and matching unit eigenvectors (columns) of a
/// Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix3) -> (Vector3<f64>, CMatrix3) {
    // Symmetrize first so tiny rounding asymmetries never leak into the solver.
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vector3::new(eig.eigenvalues[order[0]], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    let vectors = CMatrix3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    (values, vectors)
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_map(m: &CMatrix3, f: impl Fn(f64) -> C64) -> CMatrix3 {
    let (values, vectors) = hermitian_eigen(m);
    let diag = CMatrix3::from_diagonal(&CVector3::new(f(values[0]), f(values[1]), f(values[2])));
    vectors * diag * vectors.adjoint()
}

/// `exp(-i h dt)` for Hermitian `h`, via the spectral decomposition.
pub fn expm_hermitian(h: &CMatrix3, dt: f64) -> CMatrix3 {
    hermitian_map(h, |lambda| C64::from_polar(1.0, -lambda * dt))
}

/// Principal square root of a positive semidefinite Hermitian matrix;
/// negative rounding noise in the spectrum is clipped to zero.
pub fn psd_sqrt(m: &CMatrix3) -> CMatrix3 {
    hermitian_map(m, |lambda| C64::new(lambda.max(0.0).sqrt(), 0.0))
}

pub fn commutator(a: &CMatrix3, b: &CMatrix3) -> CMatrix3 {
    a * b - b * a
}

/// Outer product `|a⟩⟨b|`.
pub fn ket_bra(a: &CVector3, b: &CVector3) -> CMatrix3 {
    a * b.adjoint()
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_hermitian() -> CMatrix3 {
        CMatrix3::new(
            real(1.0),
            C64::new(0.3, -0.2),
            C64::new(0.0, 0.7),
            C64::new(0.3, 0.2),
            real(-0.5),
            C64::new(1.1, 0.4),
            C64::new(0.0, -0.7),
            C64::new(1.1, -0.4),
            real(2.0),
        )
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let h = sample_hermitian();
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        let rebuilt = vecs * CMatrix3::from_diagonal(&vals.map(real)) * vecs.adjoint();
        assert!(max_abs(&(rebuilt - h)) < 1e-12);
    }

    #[test]
    fn expm_is_unitary_and_matches_taylor() {
        let h = sample_hermitian();
        let dt = 1e-3;
        let u = expm_hermitian(&h, dt);
        assert!(unitarity_defect(&u) < 1e-13);
        // second-order Taylor oracle
        let taylor = CMatrix3::identity() - h * C64::new(0.0, dt) - h * h * real(dt * dt / 2.0);
        assert!(max_abs(&(u - taylor)) < 1e-8);
    }

    #[test]
    fn sqrt_squares_back() {
        let h = sample_hermitian();
        let psd = h * h;
        let s = psd_sqrt(&psd);
        assert!(max_abs(&(s * s - psd)) < 1e-10);
    }
}
