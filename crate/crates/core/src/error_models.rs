//! Ordinary smooth measurement-error laws.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::asymptote::Asymptote;
use crate::error::{Error, Result};
use crate::grid::{inverse_transform, Grid, GridFunction};
use crate::special::gamma_pdf;

/// Law of the additive error `ε`.
///
/// `Gamma` has characteristic function `(1 − iηu)^{−β}`; `ReflectedGamma` is
/// the law of `−ε` for gamma `ε`, with `(1 + iηu)^{−β}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorModel {
    None,
    Gamma { beta: f64, eta: f64 },
    ReflectedGamma { beta: f64, eta: f64 },
    Laplace { eta: f64 },
    Convolution { parts: Vec<ErrorModel> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn gamma_error(beta: f64, eta: f64) -> Result<ErrorModel> {
    positive("beta", beta)?;
    positive("eta", eta)?;
    Ok(ErrorModel::Gamma { beta, eta })
}

pub fn reflected_gamma_error(beta: f64, eta: f64) -> Result<ErrorModel> {
    positive("beta", beta)?;
    positive("eta", eta)?;
    Ok(ErrorModel::ReflectedGamma { beta, eta })
}

pub fn laplace_error(eta: f64) -> Result<ErrorModel> {
    positive("eta", eta)?;
    Ok(ErrorModel::Laplace { eta })
}

/// Chi-squared law with `k` degrees of freedom, as gamma(k/2, 2).
pub fn chi_squared_error(k: f64) -> Result<ErrorModel> {
    gamma_error(0.5 * k, 2.0)
}

pub fn no_noise() -> ErrorModel {
    ErrorModel::None
}

/// Law of the sum of independent errors.
pub fn convolve_errors(a: ErrorModel, b: ErrorModel) -> ErrorModel {
    let mut parts = Vec::new();
    for e in [a, b] {
        match e {
            ErrorModel::None => {}
            ErrorModel::Convolution { parts: p } => parts.extend(p),
            other => parts.push(other),
        }
    }
    match parts.len() {
        0 => ErrorModel::None,
        1 => parts.pop().expect("one part"),
        _ => ErrorModel::Convolution { parts },
    }
}

impl ErrorModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ErrorModel::None => Ok(()),
            ErrorModel::Gamma { beta, eta } | ErrorModel::ReflectedGamma { beta, eta } => {
                positive("beta", *beta)?;
                positive("eta", *eta)
            }
            ErrorModel::Laplace { eta } => positive("eta", *eta),
            ErrorModel::Convolution { parts } => parts.iter().try_for_each(|p| p.validate()),
        }
    }

    /// Decay index: `|φ_ε(u)| ≍ ⟨u⟩^{−β}`.
    pub fn beta(&self) -> f64 {
        match self {
            ErrorModel::None => 0.0,
            ErrorModel::Gamma { beta, .. } | ErrorModel::ReflectedGamma { beta, .. } => *beta,
            ErrorModel::Laplace { .. } => 2.0,
            ErrorModel::Convolution { parts } => parts.iter().map(|p| p.beta()).sum(),
        }
    }

    pub fn cf(&self, u: f64) -> Complex64 {
        match self {
            ErrorModel::None => Complex64::new(1.0, 0.0),
            ErrorModel::Gamma { beta, eta } => Complex64::new(1.0, -eta * u).powf(-beta),
            ErrorModel::ReflectedGamma { beta, eta } => Complex64::new(1.0, eta * u).powf(-beta),
            ErrorModel::Laplace { eta } => Complex64::new(1.0 / (1.0 + eta * eta * u * u), 0.0),
            ErrorModel::Convolution { parts } => parts.iter().map(|p| p.cf(u)).product(),
        }
    }

    /// `1/φ_ε(u)`, evaluated without dividing.
    pub fn cf_recip(&self, u: f64) -> Complex64 {
        match self {
            ErrorModel::None => Complex64::new(1.0, 0.0),
            ErrorModel::Gamma { beta, eta } => Complex64::new(1.0, -eta * u).powf(*beta),
            ErrorModel::ReflectedGamma { beta, eta } => Complex64::new(1.0, eta * u).powf(*beta),
            ErrorModel::Laplace { eta } => Complex64::new(1.0 + eta * eta * u * u, 0.0),
            ErrorModel::Convolution { parts } => parts.iter().map(|p| p.cf_recip(u)).product(),
        }
    }

    /// `(1/φ_ε)′(u)`.
    pub fn cf_recip_deriv(&self, u: f64) -> Complex64 {
        match self {
            ErrorModel::None => Complex64::new(0.0, 0.0),
            ErrorModel::Gamma { beta, eta } => {
                Complex64::new(0.0, -eta * beta) * Complex64::new(1.0, -eta * u).powf(beta - 1.0)
            }
            ErrorModel::ReflectedGamma { beta, eta } => {
                Complex64::new(0.0, eta * beta) * Complex64::new(1.0, eta * u).powf(beta - 1.0)
            }
            ErrorModel::Laplace { eta } => Complex64::new(2.0 * eta * eta * u, 0.0),
            ErrorModel::Convolution { parts } => {
                let recips: Vec<Complex64> = parts.iter().map(|p| p.cf_recip(u)).collect();
                parts
                    .iter()
                    .enumerate()
                    .map(|(k, p)| {
                        let others: Complex64 = recips
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != k)
                            .map(|(_, r)| *r)
                            .product();
                        p.cf_recip_deriv(u) * others
                    })
                    .sum()
            }
        }
    }

    /// Leading behaviour of `1/φ_ε(u)` for large `|u|`.
    pub fn recip_asymptote(&self) -> Asymptote {
        match self {
            ErrorModel::None => Asymptote::constant(Complex64::new(1.0, 0.0)),
            ErrorModel::Gamma { beta, eta } => Asymptote::of_left_power(1.0, *eta, *beta),
            ErrorModel::ReflectedGamma { beta, eta } => Asymptote::of_right_power(1.0, *eta, *beta),
            ErrorModel::Laplace { eta } => {
                let c = Complex64::new(eta * eta, 0.0);
                Asymptote::new(2.0, c, c)
            }
            ErrorModel::Convolution { parts } => parts.iter().fold(
                Asymptote::constant(Complex64::new(1.0, 0.0)),
                |acc, p| acc.product(p.recip_asymptote()),
            ),
        }
    }

    /// Closed interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            ErrorModel::None => (0.0, 0.0),
            ErrorModel::Gamma { .. } => (0.0, f64::INFINITY),
            ErrorModel::ReflectedGamma { .. } => (f64::NEG_INFINITY, 0.0),
            ErrorModel::Laplace { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ErrorModel::Convolution { parts } => parts.iter().fold((0.0, 0.0), |(a, b), p| {
                let (c, d) = p.support();
                (a + c, b + d)
            }),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ErrorModel::None | ErrorModel::Laplace { .. } => 0.0,
            ErrorModel::Gamma { beta, eta } => beta * eta,
            ErrorModel::ReflectedGamma { beta, eta } => -beta * eta,
            ErrorModel::Convolution { parts } => parts.iter().map(|p| p.mean()).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            ErrorModel::None => 0.0,
            ErrorModel::Gamma { beta, eta } | ErrorModel::ReflectedGamma { beta, eta } => {
                beta * eta * eta
            }
            ErrorModel::Laplace { eta } => 2.0 * eta * eta,
            ErrorModel::Convolution { parts } => parts.iter().map(|p| p.variance()).sum(),
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Closed-form density where one exists.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            ErrorModel::Gamma { beta, eta } => Some(gamma_pdf(*beta, *eta, x)),
            ErrorModel::ReflectedGamma { beta, eta } => Some(gamma_pdf(*beta, *eta, -x)),
            ErrorModel::Laplace { eta } => Some((-x.abs() / eta).exp() / (2.0 * eta)),
            ErrorModel::None | ErrorModel::Convolution { .. } => None,
        }
    }

    /// Density sampled on `grid`; convolutions are inverted from their
    /// characteristic function.
    pub fn density_on(&self, grid: &Grid) -> Result<GridFunction> {
        match self {
            ErrorModel::None => Err(Error::InvalidParam("the point mass has no density".into())),
            ErrorModel::Convolution { .. } => {
                let spec = GridFunction::spectrum(grid, |u| self.cf(u));
                let f = inverse_transform(&spec);
                Ok(f.map(|_, v| Complex64::new(v.re, 0.0)))
            }
            _ => Ok(GridFunction::from_real_fn(*grid, |x| {
                self.density(x).expect("closed form")
            })),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ErrorModel::None => 0.0,
            ErrorModel::Gamma { beta, eta } => {
                Gamma::new(*beta, *eta).expect("validated parameters").sample(rng)
            }
            ErrorModel::ReflectedGamma { beta, eta } => {
                -Gamma::new(*beta, *eta).expect("validated parameters").sample(rng)
            }
            ErrorModel::Laplace { eta } => {
                let a: f64 = Exp1.sample(rng);
                let b: f64 = Exp1.sample(rng);
                eta * (a - b)
            }
            ErrorModel::Convolution { parts } => parts.iter().map(|p| p.sample(rng)).sum(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ErrorModel::None => "none".into(),
            ErrorModel::Gamma { beta, eta } => format!("gamma({beta}, {eta})"),
            ErrorModel::ReflectedGamma { beta, eta } => format!("reflected_gamma({beta}, {eta})"),
            ErrorModel::Laplace { eta } => format!("laplace({eta})"),
            ErrorModel::Convolution { parts } => {
                parts.iter().map(|p| p.describe()).collect::<Vec<_>>().join(" * ")
            }
        }
    }
}
