//! Densities and distribution functions of the gamma and normal laws.

use std::f64::consts::PI;

use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// Density of the gamma law with shape `k` and scale `eta` at `x`.
///
/// Infinite at `x = 0` when `k < 1`.
pub fn gamma_pdf(k: f64, eta: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if k < 1.0 {
            f64::INFINITY
        } else if k == 1.0 {
            1.0 / eta
        } else {
            0.0
        };
    }
    let z = x / eta;
    ((k - 1.0) * z.ln() - z - ln_gamma(k)).exp() / eta
}

/// `P(G ≤ x)` for `G` gamma with shape `k` and scale `eta`.
pub fn gamma_cdf(k: f64, eta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(k, x / eta)
    }
}

/// `P(G > x)`, accurate in the upper tail.
pub fn gamma_sf(k: f64, eta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(k, x / eta)
    }
}

pub fn normal_pdf(mean: f64, sd: f64, x: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

pub fn normal_cdf(mean: f64, sd: f64, x: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

/// Quantile by bisection of a continuous nondecreasing distribution function.
pub fn invert_cdf(cdf: impl Fn(f64) -> f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    while cdf(lo) > p {
        lo -= (hi - lo).max(1.0);
    }
    while cdf(hi) < p {
        hi += (hi - lo).max(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gamma_law() {
        assert_abs_diff_eq!(gamma_pdf(1.0, 1.0, 2.0), (-2f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(gamma_pdf(2.0, 1.0, 1.5), 1.5 * (-1.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(gamma_pdf(3.0, 2.0, 1.0), (-0.5f64).exp() / 16.0, epsilon = 1e-15);
        assert!(gamma_pdf(0.5, 1.0, 0.0).is_infinite());
        assert_eq!(gamma_pdf(2.0, 1.0, -1.0), 0.0);
        assert_abs_diff_eq!(gamma_cdf(2.0, 1.0, 1.0), 1.0 - 2.0 * (-1f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(gamma_sf(2.0, 1.0, 1.0), 2.0 * (-1f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn normal_law() {
        assert_abs_diff_eq!(normal_cdf(0.0, 1.0, 0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_cdf(1.0, 2.0, 1.0 + 2.0 * 1.959963984540054), 0.975, epsilon = 1e-10);
        assert_abs_diff_eq!(normal_pdf(0.0, 2f64.sqrt(), 0.0), 0.5 / PI.sqrt(), epsilon = 1e-15);
        let q = invert_cdf(|x| normal_cdf(0.0, 1.0, x), 0.975, -1.0, 1.0);
        assert_abs_diff_eq!(q, 1.959963984540054, epsilon = 1e-9);
    }
}
