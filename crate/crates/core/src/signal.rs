//! Laws of the unobserved signal `X`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_cdf, gamma_pdf, invert_cdf, normal_cdf, normal_pdf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalLaw {
    /// Gamma law with density `x^{shape−1} e^{−x/scale} / (Γ(shape) scale^shape)`.
    Gamma { shape: f64, scale: f64 },
    Normal { mean: f64, sd: f64 },
    /// `weight·N(mean1, sd1²) + (1 − weight)·N(mean2, sd2²)`.
    Mixture { weight: f64, mean1: f64, sd1: f64, mean2: f64, sd2: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SignalLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SignalLaw::Gamma { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
            SignalLaw::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidParam("mean must be finite".into()));
                }
                positive("sd", sd)
            }
            SignalLaw::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                if !(0.0..=1.0).contains(&weight) || !mean1.is_finite() || !mean2.is_finite() {
                    return Err(Error::InvalidParam("mixture weight must lie in [0, 1]".into()));
                }
                positive("sd1", sd1)?;
                positive("sd2", sd2)
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            SignalLaw::Gamma { shape, scale } => gamma_pdf(shape, scale, x),
            SignalLaw::Normal { mean, sd } => normal_pdf(mean, sd, x),
            SignalLaw::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                weight * normal_pdf(mean1, sd1, x) + (1.0 - weight) * normal_pdf(mean2, sd2, x)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            SignalLaw::Gamma { shape, scale } => gamma_cdf(shape, scale, x),
            SignalLaw::Normal { mean, sd } => normal_cdf(mean, sd, x),
            SignalLaw::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                weight * normal_cdf(mean1, sd1, x) + (1.0 - weight) * normal_cdf(mean2, sd2, x)
            }
        }
    }

    pub fn cf(&self, u: f64) -> Complex64 {
        let normal_cf = |m: f64, s: f64| Complex64::from_polar((-0.5 * s * s * u * u).exp(), m * u);
        match *self {
            SignalLaw::Gamma { shape, scale } => Complex64::new(1.0, -scale * u).powf(-shape),
            SignalLaw::Normal { mean, sd } => normal_cf(mean, sd),
            SignalLaw::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                normal_cf(mean1, sd1) * weight + normal_cf(mean2, sd2) * (1.0 - weight)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            SignalLaw::Gamma { shape, scale } => shape * scale,
            SignalLaw::Normal { mean, .. } => mean,
            SignalLaw::Mixture { weight, mean1, mean2, .. } => weight * mean1 + (1.0 - weight) * mean2,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            SignalLaw::Gamma { shape, scale } => shape * scale * scale,
            SignalLaw::Normal { sd, .. } => sd * sd,
            SignalLaw::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                let m = self.mean();
                weight * (sd1 * sd1 + (mean1 - m).powi(2))
                    + (1.0 - weight) * (sd2 * sd2 + (mean2 - m).powi(2))
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let m = self.mean();
        let s = self.variance().sqrt();
        let q = invert_cdf(|x| self.cdf(x), p, m - s, m + s);
        match self {
            SignalLaw::Gamma { .. } => q.max(0.0),
            _ => q,
        }
    }

    /// Sobolev smoothness index declared for bandwidth rules.
    ///
    /// A gamma density with shape `k` lies in `H^α` for every `α < k − 1/2`.
    pub fn smoothness(&self) -> f64 {
        match *self {
            SignalLaw::Gamma { shape, .. } => shape - 0.51,
            SignalLaw::Normal { .. } | SignalLaw::Mixture { .. } => f64::INFINITY,
        }
    }

    /// Points where the density is not smooth.
    pub fn singular_points(&self) -> Vec<f64> {
        match self {
            SignalLaw::Gamma { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SignalLaw::Gamma { shape, scale } => {
                Gamma::new(shape, scale).expect("validated parameters").sample(rng)
            }
            SignalLaw::Normal { mean, sd } => {
                Normal::new(mean, sd).expect("validated parameters").sample(rng)
            }
            SignalLaw::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                let z: f64 = StandardNormal.sample(rng);
                if rng.random::<f64>() < weight {
                    mean1 + sd1 * z
                } else {
                    mean2 + sd2 * z
                }
            }
        }
    }

    /// Closed interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            SignalLaw::Gamma { .. } => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            SignalLaw::Gamma { shape, scale } => format!("gamma({shape}, {scale})"),
            SignalLaw::Normal { mean, sd } => format!("normal({mean}, {sd})"),
            SignalLaw::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                format!("mixture({weight}: normal({mean1}, {sd1}), normal({mean2}, {sd2}))")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_pieces;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn laws() -> Vec<SignalLaw> {
        vec![
            SignalLaw::Gamma { shape: 2.0, scale: 1.0 },
            SignalLaw::Normal { mean: 0.5, sd: 1.5 },
            SignalLaw::Mixture { weight: 0.3, mean1: -2.0, sd1: 0.5, mean2: 1.0, sd2: 1.0 },
        ]
    }

    #[test]
    fn densities_integrate_to_cdf() {
        for law in laws() {
            let lo = law.quantile(1e-12);
            for x in [law.quantile(0.2), law.mean(), law.quantile(0.9)] {
                let a = lo.min(x - 1.0);
                let mut breaks = vec![a];
                breaks.extend(law.singular_points().into_iter().filter(|&s| s > a && s < x));
                breaks.push(x);
                let v = adaptive_pieces(|y| law.pdf(y), &breaks, 1e-12).value;
                assert_abs_diff_eq!(v, law.cdf(x), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn quantiles_invert() {
        for law in laws() {
            for p in [0.01, 0.5, 0.99] {
                assert_abs_diff_eq!(law.cdf(law.quantile(p)), p, epsilon = 1e-12);
            }
        }
        let g = SignalLaw::Gamma { shape: 2.0, scale: 1.0 };
        assert_abs_diff_eq!(g.quantile(0.5), 1.678346990016661, epsilon = 1e-10);
    }

    #[test]
    fn sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for law in laws() {
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            assert!((mean - law.mean()).abs() < 5.0 * (law.variance() / n as f64).sqrt());
        }
    }

    #[test]
    fn cf_at_zero_and_symmetry() {
        for law in laws() {
            assert!((law.cf(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            assert!((law.cf(-1.3) - law.cf(1.3).conj()).norm() < 1e-15);
        }
        assert!(SignalLaw::Normal { mean: 0.0, sd: -1.0 }.validate().is_err());
        assert!(SignalLaw::Gamma { shape: 2.0, scale: 1.0 }.validate().is_ok());
    }
}
