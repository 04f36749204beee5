//! Double-precision error function helpers.
//!
//! `erfc` comes from `libm` (the fdlibm rational approximations, accurate to a
//! few ulp over the whole line). `erfc_inv` starts from the `statrs`
//! approximation and is finished with Newton steps on `libm::erfc`.

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Inverse of [`erfc`] on `(0, 2)`.
pub fn erfc_inv(p: f64) -> f64 {
    let mut x = statrs::function::erf::erfc_inv(p);
    if !x.is_finite() {
        return x;
    }
    for _ in 0..3 {
        // d/dx erfc(x) = -2/sqrt(pi) exp(-x^2)
        let slope = -std::f64::consts::FRAC_2_SQRT_PI * (-x * x).exp();
        if slope == 0.0 {
            break;
        }
        let dx = (erfc(x) - p) / slope;
        x -= dx;
        if dx.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    x
}

/// Power needed by a single user with unit-amplitude effective gain `gain`
/// (the magnitude of the noiseless rotated sample per unit sqrt-power) to meet
/// a union-bound target `p` when both decision-boundary distances are equal.
///
/// `P = (sigma_w * erfcinv(p) / (gain * sin(phi)))^2`
pub fn single_user_power(p: f64, gain: f64, half_angle: f64, sigma_w: f64) -> f64 {
    let d = sigma_w * erfc_inv(p);
    let amp = gain * half_angle.sin();
    (d / amp).powi(2)
}
