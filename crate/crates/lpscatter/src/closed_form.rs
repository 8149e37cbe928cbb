//! Closed-form values for the one-pole Lorentzian state `1/(E - mu)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// `int_0^inf dE / |E - mu|^2`.
pub fn app_norm_sqr(e0: f64, gamma: f64) -> f64 {
    (0.5 * PI + (e0 / gamma).atan()) / gamma
}

/// `int_R dE / |E - mu|^2`.
pub fn res_norm_sqr(gamma: f64) -> f64 {
    PI / gamma
}

/// Ratio of the two norms above.
pub fn ratio(e0: f64, gamma: f64) -> f64 {
    0.5 + (e0 / gamma).atan() / PI
}

/// Constant multiplying `(1 - r)^(1/2)` in the projection estimate.
pub const BOUND_CONSTANT: f64 = 1.0 + SQRT_2 + FRAC_1_SQRT_2;

/// Constant produced when the two residual-versus-approximant estimates are
/// both carried through the final triangle inequality.
pub const CHAIN_CONSTANT: f64 = 2.0 * (1.0 + SQRT_2) + FRAC_1_SQRT_2;

/// Bound on the background term of the survival amplitude.
pub fn background_bound(r: f64) -> f64 {
    (1.0 / (r * r) - 1.0).max(0.0).sqrt()
}

/// `|| P_plus (1/(E - conj mu)) 1_{E>0} ||`.
pub fn conjugate_projection_norm(e0: f64, gamma: f64) -> f64 {
    (0.5 * (1.0 - ratio(e0, gamma)) * app_norm_sqr(e0, gamma)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((app_norm_sqr(1.0, 0.1) - 30.41924).abs() < 1e-4);
        assert!((ratio(1.0, 0.1) - 0.9682745).abs() < 1e-6);
        assert!((BOUND_CONSTANT - 3.1213).abs() < 1e-4);
        assert!((background_bound(ratio(1.0, 0.1)) - 0.2581).abs() < 1e-4);
        assert!((conjugate_projection_norm(1.0, 0.1) - 0.6947).abs() < 1e-4);
    }
}
