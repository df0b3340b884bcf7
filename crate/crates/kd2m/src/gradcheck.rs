//! Central finite differences used to verify analytic gradients in tests
//! and in the acceptance suite.

use ndarray::Array2;

/// Central difference (f(x+h) - f(x-h)) / 2h of a scalar function.
pub fn central_diff<F: FnMut(f64) -> f64>(x: f64, step: f64, mut f: F) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// Entry-wise central differences of a scalar function of a matrix.
pub fn finite_diff_matrix<F: FnMut(&Array2<f64>) -> f64>(
    x: &Array2<f64>,
    step: f64,
    mut f: F,
) -> Array2<f64> {
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = x[[r, c]];
        probe[[r, c]] = orig + step;
        let plus = f(&probe);
        probe[[r, c]] = orig - step;
        let minus = f(&probe);
        probe[[r, c]] = orig;
        grad[[r, c]] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Relative error between gradient vectors in the Frobenius sense:
/// ||a - b|| / max(||b||, floor).
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}
