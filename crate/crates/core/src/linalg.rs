//! Small dense linear-algebra helpers over fixed-size matrices.

use nalgebra::{Cholesky, SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub type Mat<const R: usize, const C: usize> = SMatrix<f64, R, C>;
pub type Vector<const N: usize> = SVector<f64, N>;

/// `(m + m^T) / 2`.
pub fn symmetrize<const N: usize>(m: &Mat<N, N>) -> Mat<N, N> {
    (m + m.transpose()) * 0.5
}

/// Lower-triangular `L` with `L L^T = m` for a symmetric PSD matrix.
///
/// Singular matrices are handled by adding a small diagonal jitter; an all
/// zero matrix yields a zero factor so noiseless models stay noiseless.
pub fn psd_factor<const N: usize>(m: &Mat<N, N>) -> Mat<N, N> {
    let scale = m.diagonal().iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if scale == 0.0 {
        return Mat::zeros();
    }
    let sym = symmetrize(m);
    if let Some(ch) = Cholesky::new(sym) {
        return ch.l();
    }
    let mut jitter = scale * 1e-12;
    for _ in 0..12 {
        if let Some(ch) = Cholesky::new(sym + Mat::<N, N>::identity() * jitter) {
            return ch.l();
        }
        jitter *= 10.0;
    }
    // Not PSD at all; fall back to the clipped diagonal.
    Mat::from_diagonal(&sym.diagonal().map(|d| libm::sqrt(d.max(0.0))))
}

/// True when every eigenvalue of the symmetric part of `m` exceeds `-tol`.
pub fn is_psd<const N: usize>(m: &Mat<N, N>, tol: f64) -> bool {
    let sym = symmetrize(m);
    if sym.iter().any(|v| !v.is_finite()) {
        return false;
    }
    Cholesky::new(sym + Mat::<N, N>::identity() * tol).is_some()
}

/// Largest absolute asymmetry `|m_ij - m_ji|`.
pub fn asymmetry<const N: usize>(m: &Mat<N, N>) -> f64 {
    (m - m.transpose()).iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn standard_normal<R: Rng + ?Sized, const N: usize>(rng: &mut R) -> Vector<N> {
    Vector::<N>::from_fn(|_, _| rng.sample(StandardNormal))
}

/// One draw from `N(mean, L L^T)`.
pub fn sample_gaussian<R: Rng + ?Sized, const N: usize>(mean: &Vector<N>, factor: &Mat<N, N>, rng: &mut R) -> Vector<N> {
    mean + factor * standard_normal::<R, N>(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reconstructs_matrix() {
        let m = Mat::<3, 3>::new(4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0);
        let l = psd_factor(&m);
        assert!((l * l.transpose() - m).norm() < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_zero_factor() {
        assert_eq!(psd_factor(&Mat::<4, 4>::zeros()), Mat::<4, 4>::zeros());
    }

    #[test]
    fn singular_psd_matrix_factors() {
        let v = Vector::<3>::new(1.0, 2.0, -1.0);
        let m = v * v.transpose();
        let l = psd_factor(&m);
        assert!((l * l.transpose() - m).norm() < 1e-4);
        assert!(is_psd(&m, 1e-9));
    }

    #[test]
    fn indefinite_matrix_is_not_psd() {
        let m = Mat::<2, 2>::new(1.0, 0.0, 0.0, -1e-6);
        assert!(!is_psd(&m, 1e-9));
        assert!(is_psd(&m, 1e-5));
    }
}
