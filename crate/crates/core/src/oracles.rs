//! Reference values computed without the FFT pipeline.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::ErrorModel;
use crate::estimator::Sample;
use crate::functionals::{Functional, FunctionalKind};
use crate::grid::{inverse_transform, Grid, GridFunction};
use crate::kernels::Kernel;
use crate::quad::{adaptive_pieces, tanh_sinh, GaussLegendre};
use crate::signal::SignalLaw;
use crate::special::{gamma_pdf, normal_pdf};

/// Largest sample accepted by [`brute_estimate`].
pub const BRUTE_MAX_N: usize = 50;
const ORACLE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub signal: SignalLaw,
    pub error: ErrorModel,
    pub functional: Functional,
}

impl Scenario {
    pub fn new(signal: SignalLaw, error: ErrorModel, functional: Functional) -> Self {
        Self { signal, error, functional }
    }

    pub fn truth(&self, t: f64) -> Result<f64> {
        analytic_truth(self, t)
    }
}

/// `ϑ_t = ∫ ζ(x − t) f_X(x) dx`.
pub fn analytic_truth(sc: &Scenario, t: f64) -> Result<f64> {
    let f = &sc.functional;
    let w = f.weight();
    let normal_parts = |law: &SignalLaw| -> Option<Vec<(f64, f64, f64)>> {
        match *law {
            SignalLaw::Normal { mean, sd } => Some(vec![(1.0, mean, sd)]),
            SignalLaw::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                Some(vec![(weight, mean1, sd1), (1.0 - weight, mean2, sd2)])
            }
            SignalLaw::Gamma { .. } => None,
        }
    };
    match (f.kind(), &sc.signal) {
        (FunctionalKind::Indicator, law) => Ok(w * law.cdf(t)),
        (FunctionalKind::Gaussian { sd }, law) if normal_parts(law).is_some() => Ok(w
            * normal_parts(law)
                .unwrap()
                .into_iter()
                .map(|(p, m, s)| p * normal_pdf(m, (s * s + sd * sd).sqrt(), t))
                .sum::<f64>()),
        (FunctionalKind::FlippedGamma { sigma, eta }, SignalLaw::Gamma { shape, scale }) if eta == scale => {
            Ok(w * gamma_pdf(sigma + shape, *eta, t))
        }
        _ => truth_by_quadrature(sc, t),
    }
}

fn truth_by_quadrature(sc: &Scenario, t: f64) -> Result<f64> {
    let f = &sc.functional;
    let law = &sc.signal;
    let (a, b) = f.support().ok_or_else(|| Error::UnsupportedScenario(f.name().into()))?;
    let (lo, hi) = (t + a, t + b);
    let mut breaks: Vec<f64> = f
        .singular_points()
        .into_iter()
        .map(|s| s + t)
        .chain(law.singular_points())
        .filter(|&x| x > lo && x < hi)
        .collect();
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for wdw in breaks.windows(2) {
        let est = tanh_sinh(|x, _| f.eval(x - t) * law.pdf(x), wdw[0], wdw[1], 1e-12);
        if !est.converged {
            return Err(Error::UnsupportedScenario(format!(
                "quadrature for {} against {} did not converge",
                f.name(),
                law.describe()
            )));
        }
        total += est.value;
    }
    Ok(total)
}

/// `f_Y = f_X ∗ f_ε` by spectral multiplication on `grid`.
pub fn convolved_density(law: &SignalLaw, em: &ErrorModel, grid: &Grid) -> GridFunction {
    let spec = GridFunction::spectrum(grid, |u| law.cf(u) * em.cf(u));
    let (a, b) = law.support();
    let (c, d) = em.support();
    let (lo, hi) = (a + c, b + d);
    inverse_transform(&spec).map(|x, v| {
        if x < lo || x > hi {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(v.re, 0.0)
        }
    })
}

fn deconvolved_spectrum(s: &Sample, em: &ErrorModel, k: &Kernel, h: f64, u: f64) -> Complex64 {
    crate::estimator::ecf_at(s, u) * em.cf_recip(u) * k.ft(h * u)
}

/// `f̂(x) = (1/π) ∫_0^{1/h} Re[e^{−iux} FK(hu) φ_n(u)/φ_ε(u)] du`.
fn density_at(s: &Sample, em: &ErrorModel, k: &Kernel, h: f64, x: f64) -> f64 {
    let breaks = [0.0, k.flat_radius() / h, 1.0 / h];
    adaptive_pieces(
        |u| (Complex64::from_polar(1.0, -u * x) * deconvolved_spectrum(s, em, k, h, u)).re,
        &breaks,
        ORACLE_TOL,
    )
    .value
        / PI
}

/// The estimator by direct quadrature in `u` and `x`, with no FFT.
pub fn brute_estimate(
    s: &Sample,
    em: &ErrorModel,
    k: &Kernel,
    f: &Functional,
    h: f64,
    t: f64,
) -> Result<f64> {
    if s.n() > BRUTE_MAX_N {
        return Err(Error::TooLarge(s.n()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidBandwidth(h));
    }
    let fhat = |x: f64| density_at(s, em, k, h, x);
    let w = f.weight();
    match *f.kind() {
        FunctionalKind::Indicator => {
            // Gil-Pelaez inversion of the band-limited spectrum.
            let breaks = [0.0, k.flat_radius() / h, 1.0 / h];
            let tail = adaptive_pieces(
                |u| {
                    if u == 0.0 {
                        return 0.0;
                    }
                    (Complex64::from_polar(1.0, -u * t) * deconvolved_spectrum(s, em, k, h, u)).im / u
                },
                &breaks,
                ORACLE_TOL,
            )
            .value;
            Ok(w * (0.5 - tail / PI))
        }
        FunctionalKind::FlippedGamma { .. } => {
            let (a, _) = f.support().expect("bounded support");
            let est = tanh_sinh(|x, _| f.eval(x - t) * fhat(x), t + a, t, 1e-10);
            Ok(est.value)
        }
        FunctionalKind::Triangle { .. } | FunctionalKind::Gaussian { .. } => {
            let (a, b) = f.support().expect("bounded support");
            let mut breaks: Vec<f64> = f.singular_points().into_iter().map(|p| p + t).collect();
            breaks.push(t + a);
            breaks.push(t + b);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let rule = GaussLegendre::new(32);
            Ok(breaks
                .windows(2)
                .map(|wdw| {
                    let panels = ((wdw[1] - wdw[0]) / h).ceil().max(1.0) as usize;
                    rule.composite(|x| f.eval(x - t) * fhat(x), wdw[0], wdw[1], panels)
                })
                .sum())
        }
    }
}
