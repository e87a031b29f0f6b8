//! Central finite-difference gradient verification.
//!
//! This module is a verification aid: it evaluates a black-box scalar
//! function at perturbed inputs and never touches the tape machinery, so
//! it stays an independent oracle for the analytic gradients.

/// Central-difference step. Matches the tolerance regime used by the
/// gradient checks (relative 1e-4 with absolute floor 1e-8).
pub const FD_STEP: f64 = 1e-6;

/// Numeric gradient of `f` at `x` by central differences.
pub fn central_difference(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut work = x.to_vec();
    for i in 0..x.len() {
        let orig = work[i];
        work[i] = orig + FD_STEP;
        let hi = f(&work);
        work[i] = orig - FD_STEP;
        let lo = f(&work);
        work[i] = orig;
        grad.push((hi - lo) / (2.0 * FD_STEP));
    }
    grad
}

/// True when `analytic` matches `numeric` within relative tolerance `rel`
/// using an absolute floor of 1e-8 on the denominator.
pub fn gradients_match(analytic: &[f64], numeric: &[f64], rel: f64) -> bool {
    analytic.len() == numeric.len()
        && analytic
            .iter()
            .zip(numeric.iter())
            .all(|(a, n)| (a - n).abs() <= rel * a.abs().max(n.abs()).max(1e-8))
}
