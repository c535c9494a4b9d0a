//! Scalar special functions: gamma, unit-ball volume, and the standard normal.

use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `erfc` loses relative precision, so the normal tail
/// switches to its asymptotic series.
const TAIL_SWITCH: f64 = -30.0;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Volume of the unit ball in R^m.
pub fn unit_ball_volume(m: usize) -> f64 {
    let h = m as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn norm_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// log Φ(z), accurate far into the lower tail.
pub fn norm_log_cdf(z: f64) -> f64 {
    if z > TAIL_SWITCH {
        if z > 5.0 {
            // Φ close to 1: log1p of the upper tail.
            (-0.5 * libm::erfc(z / SQRT_2)).ln_1p()
        } else {
            norm_cdf(z).ln()
        }
    } else {
        norm_log_pdf(z) - (-z).ln() + tail_series(z).ln()
    }
}

/// φ(z)/Φ(z), the inverse Mills ratio of the lower tail.
pub fn inv_mills(z: f64) -> f64 {
    if z > TAIL_SWITCH {
        norm_pdf(z) / norm_cdf(z)
    } else {
        -z / tail_series(z)
    }
}

// Φ(z) ≈ φ(z)/(-z) · (1 - 1/z² + 3/z⁴ - 15/z⁶ + 105/z⁸) for z → -∞.
fn tail_series(z: f64) -> f64 {
    let w = 1.0 / (z * z);
    1.0 - w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn log_cdf_continuous_at_switch() {
        let a = norm_log_cdf(TAIL_SWITCH + 1e-9);
        let b = norm_log_cdf(TAIL_SWITCH - 1e-9);
        assert!((a - b).abs() / a.abs() < 1e-9, "{a} {b}");
        let a = inv_mills(TAIL_SWITCH + 1e-9);
        let b = inv_mills(TAIL_SWITCH - 1e-9);
        assert!((a - b).abs() / a < 1e-9);
    }

    #[test]
    fn cdf_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((norm_log_cdf(-10.0) - (-53.231_285_150_512_48)).abs() < 1e-9);
        assert!(norm_log_cdf(-100.0).is_finite());
        assert!((norm_log_cdf(10.0) + 7.619_853_024_160_473e-24).abs() < 1e-30);
    }

    #[test]
    fn mills_ratio_large_negative() {
        // φ(z)/Φ(z) ~ -z for z → -∞.
        let z = -200.0;
        assert!((inv_mills(z) / -z - 1.0).abs() < 1e-4);
    }
}
