//! Leading power-law behaviour of spectral multipliers.

use std::f64::consts::PI;

use num_complex::Complex64;

/// `M(u) ≈ plus·u^power` as `u → +∞` and `M(u) ≈ minus·|u|^power` as `u → −∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Asymptote {
    pub power: f64,
    pub plus: Complex64,
    pub minus: Complex64,
}

impl Asymptote {
    pub fn new(power: f64, plus: Complex64, minus: Complex64) -> Self {
        Self { power, plus, minus }
    }

    /// Tail of `c·(1 − iηu)^q`.
    pub fn of_left_power(c: f64, eta: f64, q: f64) -> Self {
        let scale = c * eta.powf(q);
        Self {
            power: q,
            plus: Complex64::from_polar(scale, -0.5 * PI * q),
            minus: Complex64::from_polar(scale, 0.5 * PI * q),
        }
    }

    /// Tail of `c·(1 + iηu)^q`.
    pub fn of_right_power(c: f64, eta: f64, q: f64) -> Self {
        Self::of_left_power(c, eta, q).reflect()
    }

    pub fn constant(c: Complex64) -> Self {
        Self { power: 0.0, plus: c, minus: c }
    }

    /// Tail of `u ↦ M(−u)`.
    pub fn reflect(self) -> Self {
        Self { power: self.power, plus: self.minus, minus: self.plus }
    }

    pub fn product(self, other: Self) -> Self {
        Self {
            power: self.power + other.power,
            plus: self.plus * other.plus,
            minus: self.minus * other.minus,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Self { power: self.power, plus: self.plus * c, minus: self.minus * c }
    }

    pub fn eval(&self, u: f64) -> Complex64 {
        if u >= 0.0 {
            self.plus * u.powf(self.power)
        } else {
            self.minus * (-u).powf(self.power)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_complex_powers() {
        for (eta, q) in [(1.0, 0.3), (2.0, -0.8), (0.5, 1.7)] {
            let left = Asymptote::of_left_power(1.0, eta, q);
            let right = Asymptote::of_right_power(1.0, eta, q);
            for u in [1e6, -1e6, 3e7] {
                let l = Complex64::new(1.0, -eta * u).powf(q);
                let r = Complex64::new(1.0, eta * u).powf(q);
                assert!((left.eval(u) - l).norm() < 1e-5 * l.norm());
                assert!((right.eval(u) - r).norm() < 1e-5 * r.norm());
            }
        }
    }
}
