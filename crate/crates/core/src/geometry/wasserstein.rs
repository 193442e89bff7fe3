use nalgebra::Matrix2;

use super::Ellipse;

/// Symmetric PSD square root via eigendecomposition, clamping
/// eigenvalues at zero (tolerance 1e-12) for numerical safety.
pub fn sqrt_psd(m: &Matrix2<f64>) -> Matrix2<f64> {
    let sym = nalgebra::SymmetricEigen::new(0.5 * (m + m.transpose()));
    let mut d = Matrix2::zeros();
    for i in 0..2 {
        let l = sym.eigenvalues[i];
        d[(i, i)] = if l > 1e-12 { l.sqrt() } else { 0.0 };
    }
    sym.eigenvectors * d * sym.eigenvectors.transpose()
}

/// Squared Wasserstein-2 distance between the Gaussian views of two
/// ellipses:
///
/// `W2^2 = |m1 - m2|^2 + tr(S1 + S2 - 2 (S2^1/2 S1 S2^1/2)^1/2)`
pub fn wasserstein2_sq(e1: &Ellipse, e2: &Ellipse) -> f64 {
    let dm = e1.center() - e2.center();
    let s1 = e1.covariance();
    let s2 = e2.covariance();
    let s2_half = sqrt_psd(&s2);
    let cross = sqrt_psd(&(s2_half * s1 * s2_half));
    let trace = (s1 + s2 - 2.0 * cross).trace();
    // Clamp tiny negative round-off so the distance stays non-negative.
    dm.norm_squared() + trace.max(0.0)
}
