//! Singular values of dense complex matrices, via nalgebra's SVD.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<Complex64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut values: Vec<f64> = a.singular_values().iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

/// Largest singular value.
pub fn operator_norm(a: &DMatrix<Complex64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// `(Σ s^p)^{1/p}`.
pub fn schatten_norm(singular_values: &[f64], p: f64) -> f64 {
    singular_values.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p)
}
