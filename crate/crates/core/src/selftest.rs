//! Built-in numerical checks run by the `selftest` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::error_models::{gamma_error, laplace_error, no_noise, reflected_gamma_error, ErrorModel};
use crate::estimator::{estimate_curve, estimate_functional_direct, estimation_grid, Sample};
use crate::functionals::{flipped_gamma, gaussian, indicator, triangle, Functional};
use crate::grid::Grid;
use crate::kernels::{build_flat_top, Kernel, MASS_TOLERANCE, MOMENT_TOLERANCE};
use crate::limit_process::{default_cutoff, influence_function_spectral, simulate_sup_quantile, CovarianceEstimate};
use crate::oracles::brute_estimate;
use crate::signal::SignalLaw;
use crate::special::gamma_pdf;

pub const ADJOINT_TOLERANCE: f64 = 1e-4;
pub const BRUTE_TOLERANCE: f64 = 1e-6;
pub const ORACLE_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn below(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self { name: name.into(), value, tolerance, passed: value < tolerance, detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// One randomized configuration for the adjoint-identity check.
#[derive(Clone, Debug)]
pub struct AdjointCase {
    pub signal: SignalLaw,
    pub error: ErrorModel,
    pub functional: Functional,
    pub n: usize,
    pub h: f64,
}

pub fn random_adjoint_case<R: Rng>(rng: &mut R) -> AdjointCase {
    let signal = if rng.random_bool(0.5) {
        SignalLaw::Gamma { shape: rng.random_range(1.5..4.0), scale: rng.random_range(0.5..1.5) }
    } else {
        SignalLaw::Normal { mean: rng.random_range(-1.0..1.0), sd: rng.random_range(0.5..2.0) }
    };
    let error = match rng.random_range(0..4) {
        0 => gamma_error(rng.random_range(0.1..0.9), rng.random_range(0.3..1.5)),
        1 => reflected_gamma_error(rng.random_range(0.1..0.9), rng.random_range(0.3..1.5)),
        2 => laplace_error(rng.random_range(0.1..0.6)),
        _ => Ok(no_noise()),
    }
    .expect("valid error parameters");
    let functional = match rng.random_range(0..3) {
        0 => triangle(rng.random_range(0.5..2.0)),
        1 => gaussian(rng.random_range(0.3..1.5)),
        _ => flipped_gamma(rng.random_range(1.2..3.0), rng.random_range(0.5..1.5)),
    }
    .expect("valid functional parameters");
    AdjointCase {
        signal,
        error,
        functional,
        n: rng.random_range(50..=1000),
        h: rng.random_range(0.15..0.5),
    }
}

/// Largest absolute gap between the density-plug-in and direct estimates over a t-grid.
pub fn adjoint_gap(case: &AdjointCase, k: &Kernel, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..case.n)
        .map(|_| case.signal.sample(&mut rng) + case.error.sample(&mut rng))
        .collect();
    let s = Sample::new(y)?;
    let t: Vec<f64> = (0..=20).map(|i| s.quantile(0.05 + 0.045 * i as f64)).collect();
    let grid = estimation_grid(&s, &case.error, &case.functional, case.h, 1 << 13)?;
    let a = estimate_curve(&s, &case.error, k, &case.functional, case.h, &t, &grid)?;
    let b = estimate_functional_direct(&s, &case.error, k, &case.functional, case.h, &t)?;
    Ok(a.theta_hat.iter().zip(&b.theta_hat).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

pub fn adjoint_check(k: &Kernel, cases: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    for i in 0..cases {
        let case = random_adjoint_case(&mut rng);
        let gap = adjoint_gap(&case, k, seed.wrapping_add(i as u64 + 1))?;
        if gap >= worst {
            worst = gap;
            worst_case = format!(
                "{} / {} / {}, n = {}, h = {:.3}",
                case.signal.describe(),
                case.error.describe(),
                case.functional.name(),
                case.n,
                case.h
            );
        }
    }
    Ok(Check::below(
        "adjoint identity",
        worst,
        ADJOINT_TOLERANCE,
        format!("{cases} random configurations; worst: {worst_case}"),
    ))
}

/// FFT pipeline against direct quadrature of the estimator on small samples.
pub fn brute_check(k: &Kernel, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let law = SignalLaw::Gamma { shape: 2.0, scale: 1.0 };
    let cases: Vec<(ErrorModel, Functional, f64)> = vec![
        (gamma_error(0.3, 1.0)?, indicator(), 0.3),
        (laplace_error(0.3)?, triangle(1.0)?, 0.25),
        (gamma_error(0.5, 0.8)?, gaussian(0.7)?, 0.3),
        (no_noise(), indicator(), 0.2),
    ];
    let mut worst = 0.0f64;
    for (em, f, h) in &cases {
        let y: Vec<f64> = (0..30).map(|_| law.sample(&mut rng) + em.sample(&mut rng)).collect();
        let s = Sample::new(y)?;
        let t = [s.quantile(0.25), s.quantile(0.5), s.quantile(0.75)];
        let grid = estimation_grid(&s, em, f, *h, 1 << 14)?;
        let fft = estimate_curve(&s, em, k, f, *h, &t, &grid)?;
        for (ti, v) in t.iter().zip(&fft.theta_hat) {
            worst = worst.max((brute_estimate(&s, em, k, f, *h, *ti)? - v).abs());
        }
    }
    Ok(Check::below(
        "fft against brute force",
        worst,
        BRUTE_TOLERANCE,
        format!("{} configurations, n = 30, 3 points each", cases.len()),
    ))
}

pub fn kernel_checks(k: &Kernel) -> Vec<Check> {
    let cert = k.certificate();
    let mass = (cert.moments[0] - 1.0).abs();
    let moment = cert.moments[1..=6].iter().map(|m| m.abs()).fold(0.0, f64::max);
    let decay_ratio = cert.tail_decay_constant / cert.decay_constant;
    vec![
        Check::below("kernel mass", mass, MASS_TOLERANCE, "|∫K − 1|".into()),
        Check::below("kernel moments", moment, MOMENT_TOLERANCE, "max |∫x^l K|, l = 1..6".into()),
        Check {
            name: "kernel decay".into(),
            value: cert.decay_constant,
            tolerance: f64::INFINITY,
            passed: cert.decay_constant.is_finite() && decay_ratio <= 1.0,
            detail: format!(
                "sup (1 + x²)(|K| + |K′|) on |x| ≤ 200 is {:.4}; outer half {:.4}",
                cert.decay_constant, cert.tail_decay_constant
            ),
        },
    ]
}

/// Relative L² error of the spectral `g₀` against the exact flipped gamma density.
pub fn influence_oracle_error() -> Result<f64> {
    let f = flipped_gamma(0.8, 1.0)?;
    let em = gamma_error(0.3, 1.0)?;
    let grid = Grid::new(-40.0, 40.0, 1 << 15)?;
    let inf = influence_function_spectral(&f, &em, default_cutoff(&grid), &grid)?;
    let step = grid.step();
    let (mut num, mut den) = (0.0, 0.0);
    for (k, x) in grid.nodes().into_iter().enumerate() {
        if x.abs() > 10.0 || x.abs() <= 2.0 * step {
            continue;
        }
        let e = gamma_pdf(0.5, 1.0, -x);
        num += (inf.g().values()[k].re - e).powi(2);
        den += e * e;
    }
    Ok((num / den).sqrt())
}

pub fn sup_quantile_check(seed: u64) -> Result<Check> {
    let cov = CovarianceEstimate::from_matrix(vec![0.0], nalgebra::DMatrix::identity(1, 1), 1)?;
    let q = simulate_sup_quantile(&cov, 0.05, 100_000, seed)?.q;
    Ok(Check::below(
        "sup-quantile",
        (q - 1.959_964).abs(),
        0.03,
        format!("q = {q:.4} for a unit variance"),
    ))
}

pub fn run_selftest(seed: u64) -> Result<SelftestReport> {
    let k = build_flat_top(0.5)?;
    let mut checks = kernel_checks(&k);
    checks.push(adjoint_check(&k, 20, seed)?);
    checks.push(brute_check(&k, seed)?);
    checks.push(Check::below(
        "influence oracle",
        influence_oracle_error()?,
        ORACLE_TOLERANCE,
        "flipped gamma through gamma errors".into(),
    ));
    checks.push(sup_quantile_check(seed)?);
    Ok(SelftestReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        let r = run_selftest(1).unwrap();
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
    }
}
