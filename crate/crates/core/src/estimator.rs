//! The deconvolution estimator `ϑ̂_t = ∫ ζ_t F^{−1}[FK_h φ_n / φ_ε]` and
//! bandwidth rules.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::ErrorModel;
use crate::functionals::{Functional, FunctionalKind};
use crate::grid::{interpolate_real, inverse_transform, Grid, GridFunction};
use crate::kernels::Kernel;

/// `|φ_ε|` below this inside the kernel band is treated as vanishing.
pub const CF_FLOOR: f64 = 1e-12;

/// Kernel half-widths added to the grid pad; `|K(x)| < 2e-6` beyond it.
pub const KERNEL_PAD: f64 = 100.0;

/// Pad for the indicator, whose estimate integrates the kernel tails;
/// `|∫_{−∞}^{−x} K| < 2e-9` beyond it.
pub const INDICATOR_KERNEL_PAD: f64 = 600.0;

fn kernel_pad(f: &Functional, h: f64) -> f64 {
    if f.is_indicator() {
        INDICATOR_KERNEL_PAD * h
    } else {
        KERNEL_PAD * h
    }
}

/// Observations `Y_1, …, Y_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    y: Vec<f64>,
}

impl Sample {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidSample("no observations".into()));
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite observation {bad}")));
        }
        Ok(Self { y })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn min(&self) -> f64 {
        self.y.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linearly interpolated empirical quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        let mut sorted = self.y.clone();
        sorted.sort_by(f64::total_cmp);
        let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self { y: self.y.iter().map(|v| v + c).collect() }
    }

    /// `(1/n) Σ 1{Y_j ≤ t}`.
    pub fn ecdf(&self, t: f64) -> f64 {
        self.y.iter().filter(|&&v| v <= t).count() as f64 / self.n() as f64
    }
}

/// `φ_n(u) = (1/n) Σ e^{iuY_j}`.
pub fn ecf_at(s: &Sample, u: f64) -> Complex64 {
    if u == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let (mut re, mut im) = (0.0, 0.0);
    for &y in &s.y {
        let (sn, cs) = (u * y).sin_cos();
        re += cs;
        im += sn;
    }
    let n = s.n() as f64;
    Complex64::new(re / n, im / n)
}

/// `φ_n` sampled on the nodes of `u_grid`.
pub fn empirical_cf(s: &Sample, u_grid: &Grid) -> GridFunction {
    GridFunction::from_fn(*u_grid, |u| ecf_at(s, u))
}

/// `φ_n` on the dual of `space`, computed only for `|u| ≤ u_max` and zero elsewhere.
///
/// Values at `±u` are computed once, which keeps the result exactly Hermitian.
fn ecf_band(s: &Sample, space: &Grid, u_max: f64) -> Vec<Complex64> {
    let dual = space.dual();
    let m = dual.m();
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let centre = m / 2;
    for j in centre..m {
        let u = dual.node(j);
        if u.abs() > u_max {
            break;
        }
        let v = ecf_at(s, u);
        out[j] = v;
        let mirror = 2 * centre - j;
        if mirror < m && mirror != j {
            out[mirror] = v.conj();
        }
    }
    out
}

/// `f̂ = F^{−1}[FK(h·) φ_n / φ_ε]` on a grid.
#[derive(Clone, Debug)]
pub struct DensityEstimate {
    f_hat: GridFunction,
    spectrum: GridFunction,
    h: f64,
    grid: Grid,
}

impl DensityEstimate {
    pub fn f_hat(&self) -> &GridFunction {
        &self.f_hat
    }

    /// `FK(hu) φ_n(u) / φ_ε(u)` on the dual grid.
    pub fn spectrum(&self) -> &GridFunction {
        &self.spectrum
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        interpolate_real(&self.grid, &self.f_hat.real_parts(), x)
    }
}

fn check_band(h: f64, grid: &Grid) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidBandwidth(h));
    }
    if 1.0 / h >= PI / grid.step() {
        return Err(Error::InvalidGrid(format!(
            "step {} cannot resolve the kernel band 1/h = {}",
            grid.step(),
            1.0 / h
        )));
    }
    Ok(())
}

fn real_tagged(f: GridFunction, what: &str) -> GridFunction {
    let ratio = f.imag_ratio();
    if ratio > crate::grid::REAL_TOLERANCE {
        log::warn!("{what}: imaginary part {ratio:e} of the maximum modulus");
    }
    f.map(|_, v| Complex64::new(v.re, 0.0))
}

pub fn density_estimate(
    s: &Sample,
    em: &ErrorModel,
    k: &Kernel,
    h: f64,
    grid: &Grid,
) -> Result<DensityEstimate> {
    check_band(h, grid)?;
    let dual = grid.dual();
    let phi_n = ecf_band(s, grid, 1.0 / h);
    let mut values = vec![Complex64::new(0.0, 0.0); dual.m()];
    for (j, v) in values.iter_mut().enumerate() {
        let u = dual.node(j);
        let fk = k.ft(h * u);
        if fk == 0.0 {
            continue;
        }
        if em.cf(u).norm() < CF_FLOOR {
            return Err(Error::CfVanishes(u));
        }
        *v = phi_n[j] * em.cf_recip(u) * fk;
    }
    let spectrum = GridFunction::new(dual, values)?.with_origin(grid.lo());
    let f_hat = real_tagged(inverse_transform(&spectrum), "density estimate");
    let mass = crate::grid::integrate(&f_hat).re;
    if !(0.9..=1.1).contains(&mass) {
        log::debug!("density estimate has mass {mass}");
    }
    Ok(DensityEstimate { f_hat, spectrum, h, grid: *grid })
}

/// Lower and upper band limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateCurve {
    pub t: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub n: usize,
    pub h: f64,
    pub se: Option<Vec<f64>>,
    pub band: Option<Band>,
}

impl EstimateCurve {
    pub fn new(t: Vec<f64>, theta_hat: Vec<f64>, n: usize, h: f64) -> Self {
        Self { t, theta_hat, n, h, se: None, band: None }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV with columns `t, theta_hat, se, lo, hi`; absent fields are left empty.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "theta_hat", "se", "lo", "hi"])?;
        for i in 0..self.len() {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.write_record([
                self.t[i].to_string(),
                self.theta_hat[i].to_string(),
                opt(self.se.as_ref().map(|s| s[i])),
                opt(self.band.as_ref().map(|b| b.lo[i])),
                opt(self.band.as_ref().map(|b| b.hi[i])),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_t_grid(grid: &Grid, t_grid: &[f64]) -> Result<()> {
    for &t in t_grid {
        if !grid.contains(t) {
            return Err(Error::OutOfDomain { x: t, lo: grid.lo(), hi: grid.hi() });
        }
    }
    Ok(())
}

/// Route A: integrate `ζ_t` against the gridded density estimate.
///
/// The indicator uses the running integral of `f̂`, in closed form from its
/// spectrum. The Gaussian uses the trapezoid rule on the grid. Functionals
/// with kinks or an integrable singularity are paired with `f̂` through
/// Parseval's identity, using the exact band-limited spectrum of `f̂`.
pub fn estimate_functional(
    d: &DensityEstimate,
    f: &Functional,
    t_grid: &[f64],
) -> Result<EstimateCurve> {
    check_t_grid(&d.grid, t_grid)?;
    let grid = d.grid;
    let theta: Vec<f64> = match f.kind() {
        FunctionalKind::Indicator => {
            // ∫_{lo}^t of the trigonometric polynomial carried by the spectrum.
            let spec = &d.spectrum;
            let du = spec.grid().step();
            let lo = grid.lo();
            let band: Vec<(f64, Complex64)> = spec
                .grid()
                .nodes()
                .into_iter()
                .zip(spec.values().iter().copied())
                .filter(|(_, v)| v.norm() > 0.0)
                .collect();
            t_grid
                .iter()
                .map(|&t| {
                    let total: f64 = band
                        .iter()
                        .map(|&(u, v)| {
                            if u == 0.0 {
                                v.re * (t - lo)
                            } else {
                                let e = Complex64::from_polar(1.0, -u * t) - Complex64::from_polar(1.0, -u * lo);
                                (v * e / Complex64::new(0.0, -u)).re
                            }
                        })
                        .sum();
                    total * du / (2.0 * PI) * f.weight()
                })
                .collect()
        }
        FunctionalKind::Gaussian { .. } => {
            let values = d.f_hat.real_parts();
            let (a, b) = f.support().expect("bounded support");
            let step = grid.step();
            t_grid
                .iter()
                .map(|&t| {
                    let k0 = (((t + a - grid.lo()) / step).floor().max(0.0)) as usize;
                    let k1 = (((t + b - grid.lo()) / step).ceil() as usize).min(grid.m() - 1);
                    (k0..=k1)
                        .map(|k| f.eval(grid.node(k) - t) * values[k])
                        .sum::<f64>()
                        * step
                })
                .collect()
        }
        FunctionalKind::Triangle { .. } | FunctionalKind::FlippedGamma { .. } => {
            let spec = &d.spectrum;
            let du = spec.grid().step();
            let band: Vec<(f64, Complex64)> = spec
                .grid()
                .nodes()
                .into_iter()
                .zip(spec.values().iter().copied())
                .filter(|(_, v)| v.norm() > 0.0)
                .map(|(u, v)| (u, v * f.ft(-u).expect("fourier route")))
                .collect();
            t_grid
                .iter()
                .map(|&t| {
                    band.iter()
                        .map(|&(u, v)| (v * Complex64::from_polar(1.0, -u * t)).re)
                        .sum::<f64>()
                        * du
                        / (2.0 * PI)
                })
                .collect()
        }
    };
    Ok(EstimateCurve::new(t_grid.to_vec(), theta, 0, d.h))
}

/// Route A with the sample size recorded on the curve.
pub fn estimate_curve(
    s: &Sample,
    em: &ErrorModel,
    k: &Kernel,
    f: &Functional,
    h: f64,
    t_grid: &[f64],
    grid: &Grid,
) -> Result<EstimateCurve> {
    let d = density_estimate(s, em, k, h, grid)?;
    let mut curve = estimate_functional(&d, f, t_grid)?;
    curve.n = s.n();
    Ok(curve)
}

/// Estimation grid covering the data with room for the error law, the
/// functional and the kernel tails, zero-padded to twice the span.
pub fn estimation_grid(
    s: &Sample,
    em: &ErrorModel,
    f: &Functional,
    h: f64,
    min_m: usize,
) -> Result<Grid> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidBandwidth(h));
    }
    let pad = 8.0 * em.sd() + f.support_radius() + kernel_pad(f, h);
    let lo = s.min() - pad;
    let hi = s.max() + pad;
    let span = hi - lo;
    Grid::with_max_step(lo - 0.5 * span, hi + 0.5 * span, h / 16.0, min_m)
}

/// `w_h = F^{−1}[Fζ(u) FK(hu) / φ_ε(−u)]` on `grid`.
pub fn smoothed_influence(
    em: &ErrorModel,
    k: &Kernel,
    f: &Functional,
    h: f64,
    grid: &Grid,
) -> Result<GridFunction> {
    if f.is_indicator() {
        return Err(Error::UnsupportedRoute("indicator"));
    }
    check_band(h, grid)?;
    let bad = std::cell::Cell::new(None);
    let spec = GridFunction::spectrum(grid, |u| {
        let fk = k.ft(h * u);
        if fk == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if em.cf(-u).norm() < CF_FLOOR {
            bad.set(Some(u));
        }
        f.ft(u).expect("fourier route") * em.cf_recip(-u) * fk
    });
    if let Some(u) = bad.get() {
        return Err(Error::CfVanishes(u));
    }
    Ok(real_tagged(inverse_transform(&spec), "smoothed influence"))
}

/// Grid for [`smoothed_influence`] large enough to hold every `Y_j − t`.
pub fn direct_grid(
    s: &Sample,
    em: &ErrorModel,
    f: &Functional,
    h: f64,
    t_grid: &[f64],
) -> Result<Grid> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidBandwidth(h));
    }
    let t_lo = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let t_hi = t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 8.0 * em.sd() + f.support_radius() + KERNEL_PAD * h;
    let lo = (s.min() - t_hi).min(0.0) - pad;
    let hi = (s.max() - t_lo).max(0.0) + pad;
    let span = hi - lo;
    Grid::with_max_step(lo - 0.5 * span, hi + 0.5 * span, h / 16.0, 1 << 13)
}

/// Route B: `ϑ̂_t = (1/n) Σ_j w_h(Y_j − t)`.
pub fn estimate_functional_direct(
    s: &Sample,
    em: &ErrorModel,
    k: &Kernel,
    f: &Functional,
    h: f64,
    t_grid: &[f64],
) -> Result<EstimateCurve> {
    if f.is_indicator() {
        return Err(Error::UnsupportedRoute("indicator"));
    }
    let grid = direct_grid(s, em, f, h, t_grid)?;
    estimate_functional_direct_on(s, em, k, f, h, t_grid, &grid)
}

pub fn estimate_functional_direct_on(
    s: &Sample,
    em: &ErrorModel,
    k: &Kernel,
    f: &Functional,
    h: f64,
    t_grid: &[f64],
    grid: &Grid,
) -> Result<EstimateCurve> {
    let w = smoothed_influence(em, k, f, h, grid)?.real_parts();
    let n = s.n() as f64;
    let theta = t_grid
        .iter()
        .map(|&t| {
            let mut acc = 0.0;
            for &y in s.y() {
                acc += interpolate_real(grid, &w, y - t)?;
            }
            Ok(acc / n)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut curve = EstimateCurve::new(t_grid.to_vec(), theta, s.n(), h);
    curve.n = s.n();
    Ok(curve)
}

/// Outcome of a bandwidth rule together with the side conditions it was checked against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub h: f64,
    pub exponent: f64,
    pub rho: f64,
    /// Whether `h^ρ n ≥ 1` at `ρ = 4β − 4γs + 2 + 0.01`.
    pub rho_condition: bool,
    pub warnings: Vec<String>,
}

/// Warnings for the side conditions of the uniform central limit theorem.
pub fn admissibility_warnings(alpha: f64, beta: f64, gamma_s: f64) -> Vec<String> {
    let mut out = Vec::new();
    if gamma_s <= beta {
        out.push(format!(
            "gamma_s = {gamma_s} does not exceed beta = {beta}: the functional is too rough for the error law"
        ));
    } else if gamma_s <= beta + 0.5 && alpha + 3.0 * gamma_s <= 2.0 * beta + 1.0 {
        out.push(format!(
            "alpha + 3 gamma_s = {} does not exceed 2 beta + 1 = {}",
            alpha + 3.0 * gamma_s,
            2.0 * beta + 1.0
        ));
    }
    out
}

pub fn rho(beta: f64, gamma_s: f64) -> f64 {
    4.0 * beta - 4.0 * gamma_s + 2.0 + 0.01
}

/// `h^ρ n ≥ 1` at the default `ρ`.
pub fn rho_condition(n: usize, h: f64, beta: f64, gamma_s: f64) -> bool {
    h.powf(rho(beta, gamma_s)) * n as f64 >= 1.0
}

/// `h = constant · n^{−1/(α + 2β − γs + 1)}` with its admissibility report.
pub fn bandwidth_rate_report(
    n: usize,
    alpha: f64,
    beta: f64,
    gamma_s: f64,
    constant: f64,
) -> Result<BandwidthReport> {
    let denom = alpha + 2.0 * beta - gamma_s + 1.0;
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::InvalidExponent(denom));
    }
    let exponent = -1.0 / denom;
    let h = constant * (n as f64).powf(exponent);
    let warnings = admissibility_warnings(alpha, beta, gamma_s);
    for w in &warnings {
        log::warn!("{w}");
    }
    let ok = rho_condition(n, h, beta, gamma_s);
    log::info!("rate bandwidth h = {h} (n = {n}); h^rho n >= 1: {ok}");
    Ok(BandwidthReport { h, exponent, rho: rho(beta, gamma_s), rho_condition: ok, warnings })
}

pub fn bandwidth_rate(n: usize, alpha: f64, beta: f64, gamma_s: f64) -> Result<f64> {
    Ok(bandwidth_rate_report(n, alpha, beta, gamma_s, 1.0)?.h)
}

/// `h = n^{−1/(2α + 2β)}`.
pub fn bandwidth_classical(n: usize, alpha: f64, beta: f64) -> Result<f64> {
    let denom = 2.0 * alpha + 2.0 * beta;
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::InvalidExponent(denom));
    }
    Ok((n as f64).powf(-1.0 / denom))
}
