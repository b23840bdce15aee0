//! Band-limited flat-top kernels.
//!
//! `FK(u) = 1` on `[−c, c]`, decays smoothly to zero on `c < |u| < 1` and
//! vanishes outside `[−1, 1]`. All derivatives of `FK` vanish at the origin,
//! so every moment of `K` beyond the zeroth is zero.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::quad::GaussLegendre;

pub const DEFAULT_FLAT_RADIUS: f64 = 0.5;

/// Highest moment order checked when certifying a kernel.
pub const MAX_ORDER: usize = 10;
pub const MASS_TOLERANCE: f64 = 1e-10;
pub const MOMENT_TOLERANCE: f64 = 1e-8;

/// Width of the Gaussian window applied to the moment integrals.
const MOMENT_WINDOW: f64 = 20.0;
const MOMENT_STEP: f64 = 0.25;
/// Radius on which moments and the decay bound are evaluated.
pub const CERTIFY_RADIUS: f64 = 200.0;

const RULE_NODES: usize = 32;

/// Smooth ramp from 1 at `s = 0` to 0 at `s = 1`.
pub fn ramp(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        (-(-1.0 / s).exp() / (1.0 - s)).exp()
    }
}

/// Numerical certificate of the moment and decay conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCertificate {
    /// `moments[l]` approximates `∫ x^l K(x) dx`, `l = 0..=MAX_ORDER`.
    pub moments: Vec<f64>,
    /// `sup (1 + x²)(|K(x)| + |K′(x)|)` over `|x| ≤ CERTIFY_RADIUS`.
    pub decay_constant: f64,
    /// The same supremum restricted to the outer half of the range.
    pub tail_decay_constant: f64,
}

#[derive(Clone, Debug)]
pub struct Kernel {
    fk: GridFunction,
    flat_radius: f64,
    order: usize,
    certificate: KernelCertificate,
    rule: Arc<GaussLegendre>,
}

/// Flat-top kernel with flat region `[−c, c]`.
pub fn build_flat_top(flat_radius: f64) -> Result<Kernel> {
    if !(flat_radius > 0.0 && flat_radius < 1.0) {
        return Err(Error::InvalidRadius(flat_radius));
    }
    let c = flat_radius;
    let fk_grid = Grid::new(-1.0, 1.0, 1024)?;
    let fk = GridFunction::from_real_fn(fk_grid, |u| ft_value(c, u));
    let mut kernel = Kernel {
        fk,
        flat_radius: c,
        order: 0,
        certificate: KernelCertificate {
            moments: Vec::new(),
            decay_constant: 0.0,
            tail_decay_constant: 0.0,
        },
        rule: Arc::new(GaussLegendre::new(RULE_NODES)),
    };
    kernel.certificate = kernel.certify();
    kernel.order = certified_order(&kernel.certificate.moments);
    log::debug!("flat-top kernel c = {c}: certified order {}", kernel.order);
    Ok(kernel)
}

/// Derivative of [`ramp`].
fn ramp_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let e = (-1.0 / s).exp();
    let a = 1.0 / (s * s * (1.0 - s)) + 1.0 / ((1.0 - s) * (1.0 - s));
    -ramp(s) * e * a
}

fn ft_value(c: f64, u: f64) -> f64 {
    let a = u.abs();
    if a <= c {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        ramp((a - c) / (1.0 - c))
    }
}

fn certified_order(moments: &[f64]) -> usize {
    if (moments[0] - 1.0).abs() >= MASS_TOLERANCE {
        return 0;
    }
    moments[1..]
        .iter()
        .take_while(|m| m.abs() < MOMENT_TOLERANCE)
        .count()
}

impl Kernel {
    pub fn flat_radius(&self) -> f64 {
        self.flat_radius
    }

    /// Largest `L` with `|∫x^l K| < 1e−8` for all `1 ≤ l ≤ L`, capped at [`MAX_ORDER`].
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn fk(&self) -> &GridFunction {
        &self.fk
    }

    pub fn certificate(&self) -> &KernelCertificate {
        &self.certificate
    }

    /// `FK(u)`.
    pub fn ft(&self, u: f64) -> f64 {
        ft_value(self.flat_radius, u)
    }

    fn panels(&self, x: f64, length: f64) -> usize {
        6 + (x.abs() * length / 4.0).ceil() as usize
    }

    /// `FK′(u)` for `u > 0`.
    fn ft_deriv(&self, u: f64) -> f64 {
        let c = self.flat_radius;
        ramp_deriv((u - c) / (1.0 - c)) / (1.0 - c)
    }

    /// `∫_c^1 FK′(u) w(u) du` over the ramp.
    fn ramp_integral(&self, x: f64, w: impl Fn(f64) -> f64) -> f64 {
        let c = self.flat_radius;
        self.rule
            .composite(|u| self.ft_deriv(u) * w(u), c, 1.0, self.panels(x, 1.0 - c))
    }

    /// `K(x) = (1/π) ∫_0^1 FK(u) cos(ux) du`.
    ///
    /// Away from the origin the integral is taken by parts, so only `FK′` on
    /// the ramp enters and the flat part does not cancel against it.
    pub fn eval(&self, x: f64) -> f64 {
        let c = self.flat_radius;
        if x.abs() < 1.0 {
            let flat = if x == 0.0 { c } else { (c * x).sin() / x };
            let ramp_part = self.rule.composite(
                |u| ramp((u - c) / (1.0 - c)) * (u * x).cos(),
                c,
                1.0,
                self.panels(x, 1.0 - c),
            );
            return (flat + ramp_part) / PI;
        }
        -self.ramp_integral(x, |u| (u * x).sin()) / (PI * x)
    }

    /// `K′(x) = −(1/π) ∫_0^1 u FK(u) sin(ux) du`.
    pub fn deriv(&self, x: f64) -> f64 {
        let c = self.flat_radius;
        if x.abs() < 1.0 {
            let flat = self.rule.composite(|u| u * (u * x).sin(), 0.0, c, self.panels(x, c));
            let ramp_part = self.rule.composite(
                |u| u * ramp((u - c) / (1.0 - c)) * (u * x).sin(),
                c,
                1.0,
                self.panels(x, 1.0 - c),
            );
            return -(flat + ramp_part) / PI;
        }
        let s = self.ramp_integral(x, |u| (u * x).sin());
        let t = self.ramp_integral(x, |u| u * (u * x).cos());
        (s / (x * x) - t / x) / PI
    }

    /// `∫_{−∞}^z K = 1/2 + (1/π) ∫_0^1 FK(u) sin(uz)/u du`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.5;
        }
        let c = self.flat_radius;
        let flat = self.rule.composite(|u| (u * z).sin() / u, 0.0, c, self.panels(z, c));
        let ramp_part = self.rule.composite(
            |u| ramp((u - c) / (1.0 - c)) * (u * z).sin() / u,
            c,
            1.0,
            self.panels(z, 1.0 - c),
        );
        0.5 + (flat + ramp_part) / PI
    }

    /// `FK(h·u)` on the dual of `grid`: the spectrum of `K_h = h^{−1} K(·/h)`.
    pub fn scale(&self, h: f64, grid: &Grid) -> Result<GridFunction> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidBandwidth(h));
        }
        Ok(GridFunction::spectrum(grid, |u| Complex64::new(self.ft(h * u), 0.0)))
    }

    /// `∫ x^l K(x) dx`, computed with a Gaussian summability window.
    pub fn moment(&self, l: usize) -> Option<f64> {
        self.certificate.moments.get(l).copied()
    }

    fn certify(&self) -> KernelCertificate {
        let count = (CERTIFY_RADIUS / MOMENT_STEP).round() as usize;
        let xs: Vec<f64> = (0..=count).map(|k| k as f64 * MOMENT_STEP).collect();
        let k_vals: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        let dk_vals: Vec<f64> = xs.iter().map(|&x| self.deriv(x)).collect();

        let moments = (0..=MAX_ORDER)
            .map(|l| {
                let mut sum = 0.0;
                for (&x, &k) in xs.iter().zip(&k_vals) {
                    let w = (-0.5 * (x / MOMENT_WINDOW).powi(2)).exp() * k;
                    if x == 0.0 {
                        sum += if l == 0 { w } else { 0.0 };
                    } else {
                        // Contributions of x and −x.
                        let p = x.powi(l as i32);
                        sum += w * (p + if l % 2 == 0 { p } else { -p });
                    }
                }
                sum * MOMENT_STEP
            })
            .collect();

        let mut decay_constant: f64 = 0.0;
        let mut tail_decay_constant: f64 = 0.0;
        for ((&x, &k), &dk) in xs.iter().zip(&k_vals).zip(&dk_vals) {
            let v = (1.0 + x * x) * (k.abs() + dk.abs());
            decay_constant = decay_constant.max(v);
            if x >= 0.5 * CERTIFY_RADIUS {
                tail_decay_constant = tail_decay_constant.max(v);
            }
        }
        KernelCertificate { moments, decay_constant, tail_decay_constant }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn kernel() -> &'static Kernel {
        static K: std::sync::OnceLock<Kernel> = std::sync::OnceLock::new();
        K.get_or_init(|| build_flat_top(DEFAULT_FLAT_RADIUS).unwrap())
    }

    #[test]
    fn rejects_bad_radius() {
        for c in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(build_flat_top(c), Err(Error::InvalidRadius(_))));
        }
    }

    #[test]
    fn fourier_side_shape() {
        let k = kernel();
        assert_eq!(k.ft(0.0), 1.0);
        assert_eq!(k.ft(0.5), 1.0);
        assert_eq!(k.ft(-0.3), 1.0);
        assert_eq!(k.ft(1.0), 0.0);
        assert_eq!(k.ft(-1.7), 0.0);
        assert!(k.ft(0.75) > 0.0 && k.ft(0.75) < 1.0);
        for i in 0..100 {
            let u = i as f64 / 37.0;
            assert_eq!(k.ft(u), k.ft(-u));
        }
        assert_eq!(k.fk().values()[512].re, 1.0);
    }

    #[test]
    fn moments_certified() {
        let k = kernel();
        assert!((k.moment(0).unwrap() - 1.0).abs() < MASS_TOLERANCE);
        assert!(k.moment(3).unwrap().abs() < MOMENT_TOLERANCE);
        for l in 1..=6 {
            assert!(k.moment(l).unwrap().abs() < MOMENT_TOLERANCE, "l = {l}: {:?}", k.certificate());
        }
        assert!(k.order() >= 6);
    }

    #[test]
    fn decay_bound() {
        let k = kernel();
        let cert = k.certificate();
        assert!(cert.decay_constant.is_finite());
        assert!(cert.tail_decay_constant <= cert.decay_constant);
        assert!(cert.decay_constant < 10.0);
    }

    #[test]
    fn kernel_values() {
        let k = kernel();
        // Reference values from an independent high-precision evaluation.
        assert_abs_diff_eq!(k.eval(0.0), 0.2614, epsilon = 1e-4);
        assert_abs_diff_eq!(k.eval(10.0), 0.0184, epsilon = 1e-4);
        for x in [0.3, 2.0, 17.5, 150.0] {
            assert!((k.eval(x) - k.eval(-x)).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let k = kernel();
        for x in [-3.0, 0.4, 7.0, 41.0] {
            let e = 1e-5;
            let fd = (k.eval(x + e) - k.eval(x - e)) / (2.0 * e);
            assert_abs_diff_eq!(k.deriv(x), fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn cdf_limits_and_derivative() {
        let k = kernel();
        assert_eq!(k.cdf(0.0), 0.5);
        assert_abs_diff_eq!(k.cdf(2000.0), 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(k.cdf(-2000.0), 0.0, epsilon = 1e-4);
        for z in [-5.0, 0.7, 12.0] {
            assert_abs_diff_eq!(k.cdf(z) + k.cdf(-z), 1.0, epsilon = 1e-13);
            let e = 1e-5;
            let fd = (k.cdf(z + e) - k.cdf(z - e)) / (2.0 * e);
            assert_abs_diff_eq!(fd, k.eval(z), epsilon = 1e-9);
        }
    }

    #[test]
    fn scaling() {
        let k = kernel();
        let g = Grid::new(-10.0, 10.0, 256).unwrap();
        assert!(matches!(k.scale(0.0, &g), Err(Error::InvalidBandwidth(_))));
        let s1 = k.scale(1.0, &g).unwrap();
        for (j, &u) in g.dual().nodes().iter().enumerate() {
            assert_eq!(s1.values()[j].re, k.ft(u));
        }
        let s = k.scale(0.5, &g).unwrap();
        for (j, &u) in g.dual().nodes().iter().enumerate() {
            if u.abs() <= 1.0 {
                assert_eq!(s.values()[j].re, 1.0);
            }
            if u == 0.0 {
                assert_eq!(s.values()[j].re, 1.0);
            }
        }
    }

    proptest! {
        #[test]
        fn ft_bounded_by_one(h in 1e-3f64..10.0, u in -1e3f64..1e3) {
            let k = kernel();
            let v = k.ft(h * u);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn ft_monotone_in_radius(c1 in 0.05f64..0.9, dc in 0.0f64..0.09, u in 0.0f64..1.0) {
            let c2 = c1 + dc;
            prop_assert!(ft_value(c1, u) <= ft_value(c2, u));
        }
    }
}
