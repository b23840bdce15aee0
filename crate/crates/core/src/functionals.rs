//! Test functions `ζ` whose translates `ζ_t = ζ(· − t)` define the targets
//! `ϑ_t = ∫ ζ_t f_X`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptote::Asymptote;
use crate::error::{Error, Result};
use crate::special::{gamma_pdf, gamma_sf, invert_cdf, normal_pdf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalKind {
    /// `1_{(−∞, 0]}`.
    Indicator,
    /// `max(width − |x|, 0)`.
    Triangle { width: f64 },
    /// `γ_{σ,η}(−x)`, the gamma density reflected onto the negative half-line.
    FlippedGamma { sigma: f64, eta: f64 },
    /// Centred normal density with standard deviation `sd`.
    Gaussian { sd: f64 },
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

/// A functional `ζ`, optionally multiplied by a constant weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    #[serde(flatten)]
    kind: FunctionalKind,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    weight: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn indicator() -> Functional {
    Functional { kind: FunctionalKind::Indicator, weight: 1.0 }
}

pub fn triangle(width: f64) -> Result<Functional> {
    positive("width", width)?;
    Ok(Functional { kind: FunctionalKind::Triangle { width }, weight: 1.0 })
}

pub fn flipped_gamma(sigma: f64, eta: f64) -> Result<Functional> {
    positive("sigma", sigma)?;
    positive("eta", eta)?;
    Ok(Functional { kind: FunctionalKind::FlippedGamma { sigma, eta }, weight: 1.0 })
}

pub fn gaussian(sd: f64) -> Result<Functional> {
    positive("sd", sd)?;
    Ok(Functional { kind: FunctionalKind::Gaussian { sd }, weight: 1.0 })
}

/// `e^{iut}Fζ(u)`, the transform of `ζ_t = ζ(· − t)`.
pub fn translate_ft(f: &Functional, t: f64, u: f64) -> Result<Complex64> {
    Ok(Complex64::from_polar(1.0, u * t) * f.ft(u)?)
}

impl Functional {
    pub fn validate(&self) -> Result<()> {
        if !self.weight.is_finite() {
            return Err(Error::InvalidParam(format!("weight must be finite, got {}", self.weight)));
        }
        match self.kind {
            FunctionalKind::Indicator => Ok(()),
            FunctionalKind::Triangle { width } => positive("width", width),
            FunctionalKind::FlippedGamma { sigma, eta } => {
                positive("sigma", sigma)?;
                positive("eta", eta)
            }
            FunctionalKind::Gaussian { sd } => positive("sd", sd),
        }
    }

    pub fn kind(&self) -> &FunctionalKind {
        &self.kind
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `c·ζ`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { kind: self.kind.clone(), weight: self.weight * c }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FunctionalKind::Indicator => "indicator",
            FunctionalKind::Triangle { .. } => "triangle",
            FunctionalKind::FlippedGamma { .. } => "flipped_gamma",
            FunctionalKind::Gaussian { .. } => "gaussian",
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self.kind, FunctionalKind::Indicator)
    }

    /// Bounded and continuous, so grid quadrature of `ζ_t f̂` is accurate.
    pub fn is_smooth(&self) -> bool {
        matches!(self.kind, FunctionalKind::Triangle { .. } | FunctionalKind::Gaussian { .. })
    }

    /// Declared index `γs`: `⟨u⟩^{γs} Fζ` is square integrable.
    pub fn gamma_s(&self) -> f64 {
        match self.kind {
            FunctionalKind::Indicator => 0.49,
            FunctionalKind::Triangle { .. } => 1.49,
            FunctionalKind::FlippedGamma { sigma, .. } => sigma - 0.51,
            FunctionalKind::Gaussian { .. } => f64::INFINITY,
        }
    }

    /// Declared index `γc` of the smooth remainder.
    pub fn gamma_c(&self) -> f64 {
        match self.kind {
            FunctionalKind::Indicator | FunctionalKind::Gaussian { .. } => f64::INFINITY,
            _ => self.gamma_s(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let v = match self.kind {
            FunctionalKind::Indicator => {
                if x <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionalKind::Triangle { width } => (width - x.abs()).max(0.0),
            FunctionalKind::FlippedGamma { sigma, eta } => gamma_pdf(sigma, eta, -x),
            FunctionalKind::Gaussian { sd } => normal_pdf(0.0, sd, x),
        };
        self.weight * v
    }

    /// `Fζ(u) = ∫ e^{iux} ζ(x) dx`. The indicator has no function-valued transform.
    pub fn ft(&self, u: f64) -> Result<Complex64> {
        let v = match self.kind {
            FunctionalKind::Indicator => return Err(Error::UnsupportedRoute("indicator")),
            FunctionalKind::Triangle { width } => {
                if u == 0.0 {
                    Complex64::new(width * width, 0.0)
                } else {
                    let s = (0.5 * width * u).sin();
                    Complex64::new(4.0 * s * s / (u * u), 0.0)
                }
            }
            FunctionalKind::FlippedGamma { sigma, eta } => Complex64::new(1.0, eta * u).powf(-sigma),
            FunctionalKind::Gaussian { sd } => Complex64::new((-0.5 * sd * sd * u * u).exp(), 0.0),
        };
        Ok(v * self.weight)
    }

    /// Leading power law of `Fζ` for large `|u|`, when `Fζ` has one.
    ///
    /// For the indicator this describes the `1/(iu)` tail of its transform.
    pub fn ft_asymptote(&self) -> Option<Asymptote> {
        match self.kind {
            FunctionalKind::Indicator => Some(Asymptote::new(
                -1.0,
                Complex64::new(0.0, -self.weight),
                Complex64::new(0.0, self.weight),
            )),
            FunctionalKind::FlippedGamma { sigma, eta } => {
                Some(Asymptote::of_right_power(self.weight, eta, -sigma))
            }
            FunctionalKind::Triangle { .. } | FunctionalKind::Gaussian { .. } => None,
        }
    }

    /// Points where `ζ` is not smooth.
    pub fn singular_points(&self) -> Vec<f64> {
        match self.kind {
            FunctionalKind::Indicator | FunctionalKind::FlippedGamma { .. } => vec![0.0],
            FunctionalKind::Triangle { width } => vec![-width, 0.0, width],
            FunctionalKind::Gaussian { .. } => Vec::new(),
        }
    }

    /// Interval outside which `|ζ|` is negligible, `None` for unbounded support.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self.kind {
            FunctionalKind::Indicator => None,
            FunctionalKind::Triangle { width } => Some((-width, width)),
            FunctionalKind::FlippedGamma { sigma, eta } => {
                let q = invert_cdf(|x| 1.0 - gamma_sf(sigma, eta, x), 1.0 - 1e-14, 0.0, 10.0 * eta);
                Some((-q, 0.0))
            }
            FunctionalKind::Gaussian { sd } => Some((-9.0 * sd, 9.0 * sd)),
        }
    }

    /// Half-width of [`Functional::support`] about the origin, zero for the indicator.
    pub fn support_radius(&self) -> f64 {
        self.support().map(|(a, b)| a.abs().max(b.abs())).unwrap_or(0.0)
    }

    /// `∫ ζ(x)^2 dx` where finite; useful for scaling checks.
    pub fn l2_norm_sq(&self) -> Option<f64> {
        let w2 = self.weight * self.weight;
        match self.kind {
            FunctionalKind::Indicator => None,
            FunctionalKind::Triangle { width } => Some(w2 * 2.0 * width.powi(3) / 3.0),
            FunctionalKind::Gaussian { sd } => Some(w2 / (2.0 * sd * PI.sqrt())),
            FunctionalKind::FlippedGamma { sigma, eta } => {
                if sigma <= 0.5 {
                    None
                } else {
                    let ln = statrs::function::gamma::ln_gamma;
                    Some(w2 * (ln(2.0 * sigma - 1.0) - 2.0 * ln(sigma)).exp()
                        / (eta * 2f64.powf(2.0 * sigma - 1.0)))
                }
            }
        }
    }
}
