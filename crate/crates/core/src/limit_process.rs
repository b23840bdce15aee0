//! Influence functions `g_t`, the covariance `Σ_{s,t}`, simulated sup-quantiles,
//! uniform bands and the efficiency bound.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::ErrorModel;
use crate::estimator::{Band, EstimateCurve, Sample};
use crate::functionals::{Functional, FunctionalKind};
use crate::grid::{interpolate_real, inverse_transform, Grid, GridFunction};
use crate::quad::tanh_sinh;
use crate::special::{gamma_cdf, gamma_pdf, normal_cdf, normal_pdf};

/// Default spectral cutoff as a fraction of the Nyquist frequency `π/step`.
pub const CUTOFF_FRACTION: f64 = 0.9;
/// Scale of the Gaussian CDF split off the indicator.
pub const INDICATOR_SPLIT_SD: f64 = 0.5;
/// Eigenvalue floor for the covariance repair, relative to the trace.
pub const EIGEN_FLOOR: f64 = 1e-10;
const CHUNK: usize = 256;
const DRAW_CHUNK: usize = 4096;

pub fn default_cutoff(grid: &Grid) -> f64 {
    CUTOFF_FRACTION * PI / grid.step()
}

/// Raised cosine: one on `|u| ≤ U/2`, zero beyond `U`.
pub fn taper(u: f64, cutoff: f64) -> f64 {
    let a = u.abs();
    if a <= 0.5 * cutoff {
        1.0
    } else if a >= cutoff {
        0.0
    } else {
        0.5 * (1.0 + (PI * (a - 0.5 * cutoff) / (0.5 * cutoff)).cos())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ClosedForm {
    Identity,
    /// `w·γ_{k,η}(−x)`.
    FlippedGamma { k: f64, eta: f64 },
    /// `w·1{x ≤ 0}[P(1−β, −x/η) + η γ_{1−β,η}(−x)]`.
    IndicatorGamma { beta: f64, eta: f64 },
    /// `w·φ_sd(x)[1 − η²(x² − sd²)/sd⁴]`.
    GaussianLaplace { sd: f64, eta: f64 },
}

fn closed_form(f: &Functional, em: &ErrorModel) -> Option<ClosedForm> {
    match (f.kind(), em) {
        (_, ErrorModel::None) => Some(ClosedForm::Identity),
        (FunctionalKind::FlippedGamma { sigma, eta }, ErrorModel::Gamma { beta, eta: e })
            if eta == e && sigma > beta =>
        {
            Some(ClosedForm::FlippedGamma { k: sigma - beta, eta: *eta })
        }
        (FunctionalKind::Indicator, ErrorModel::Gamma { beta, eta }) if *beta < 1.0 => {
            Some(ClosedForm::IndicatorGamma { beta: *beta, eta: *eta })
        }
        (FunctionalKind::Gaussian { sd }, ErrorModel::Laplace { eta }) => {
            Some(ClosedForm::GaussianLaplace { sd: *sd, eta: *eta })
        }
        _ => None,
    }
}

impl ClosedForm {
    fn eval(&self, f: &Functional, x: f64) -> f64 {
        let w = f.weight();
        match *self {
            ClosedForm::Identity => f.eval(x),
            ClosedForm::FlippedGamma { k, eta } => w * gamma_pdf(k, eta, -x),
            ClosedForm::IndicatorGamma { beta, eta } => {
                if x > 0.0 {
                    0.0
                } else {
                    w * (gamma_cdf(1.0 - beta, eta, -x) + eta * gamma_pdf(1.0 - beta, eta, -x))
                }
            }
            ClosedForm::GaussianLaplace { sd, eta } => {
                let s2 = sd * sd;
                w * normal_pdf(0.0, sd, x) * (1.0 - eta * eta * (x * x - s2) / (s2 * s2))
            }
        }
    }

    /// Mean over `[x − step/2, x + step/2]` for the node at an unbounded point.
    fn cell_mean(&self, f: &Functional, step: f64) -> Option<f64> {
        match *self {
            ClosedForm::FlippedGamma { k, eta } if k < 1.0 => {
                Some(f.weight() * gamma_cdf(k, eta, 0.5 * step) / step)
            }
            ClosedForm::IndicatorGamma { beta, eta } => {
                let k = 1.0 - beta;
                let mass = gamma_cdf(k, eta, 0.5 * step);
                let cdf_part = tanh_sinh(|y, _| gamma_cdf(k, eta, y), 0.0, 0.5 * step, 1e-14).value;
                Some(f.weight() * (cdf_part + eta * mass) / step)
            }
            _ => None,
        }
    }
}

/// `c_r γ_{k,1}(x) + c_l γ_{k,1}(−x)`: the part of `g₀` carrying the leading spectral tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPart {
    pub shape: f64,
    pub right: f64,
    pub left: f64,
}

impl SingularPart {
    /// Fits `c_r(1 − iu)^p + c_l(1 + iu)^p` to a tail `plus·u^p`, `minus·|u|^p`.
    fn fit(power: f64, plus: Complex64, minus: Complex64) -> Option<Self> {
        if power >= 0.0 {
            return None;
        }
        let a = Complex64::from_polar(1.0, 0.5 * PI * power);
        let det = a.inv() * a.inv() - a * a;
        let (cr, cl) = if det.norm() < 1e-8 {
            (plus * a, Complex64::new(0.0, 0.0))
        } else {
            ((plus * a.inv() - minus * a) / det, (minus * a.inv() - plus * a) / det)
        };
        let scale = plus.norm().max(minus.norm());
        if cr.im.abs() > 1e-10 * scale || cl.im.abs() > 1e-10 * scale {
            log::warn!("singular part has complex coefficients {cr}, {cl}");
        }
        Some(Self { shape: -power, right: cr.re, left: cl.re })
    }

    pub fn ft(&self, u: f64) -> Complex64 {
        Complex64::new(1.0, -u).powf(-self.shape) * self.right
            + Complex64::new(1.0, u).powf(-self.shape) * self.left
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.right * gamma_pdf(self.shape, 1.0, x) + self.left * gamma_pdf(self.shape, 1.0, -x)
    }

    fn cell_mean(&self, step: f64) -> f64 {
        (self.right + self.left) * gamma_cdf(self.shape, 1.0, 0.5 * step) / step
    }
}

/// `g₀ = F^{−1}[Fζ / φ_ε(−•)]`, so that `g_t(x) = g₀(x − t)`.
#[derive(Clone, Debug)]
pub struct InfluenceFunction {
    g: GridFunction,
    smooth: Vec<f64>,
    singular: Option<SingularPart>,
    closed: Option<ClosedForm>,
    cutoff: f64,
    functional: Functional,
    em: ErrorModel,
}

fn check_cutoff(cutoff: f64, grid: &Grid) -> Result<()> {
    if !(cutoff > 0.0 && cutoff.is_finite()) || cutoff > PI / grid.step() * (1.0 + 1e-12) {
        return Err(Error::InvalidCutoff(cutoff));
    }
    Ok(())
}

/// `g₀` from its closed form when one is known, otherwise spectrally.
pub fn influence_function(
    f: &Functional,
    em: &ErrorModel,
    cutoff: f64,
    grid: &Grid,
) -> Result<InfluenceFunction> {
    check_cutoff(cutoff, grid)?;
    f.validate()?;
    em.validate()?;
    match closed_form(f, em) {
        Some(c) => {
            let step = grid.step();
            let values: Vec<f64> = grid
                .nodes()
                .into_iter()
                .map(|x| match c.cell_mean(f, step) {
                    Some(v) if x.abs() < 1e-9 * step => v,
                    _ => c.eval(f, x),
                })
                .collect();
            Ok(InfluenceFunction {
                g: GridFunction::from_real(*grid, &values)?,
                smooth: values,
                singular: None,
                closed: Some(c),
                cutoff,
                functional: f.clone(),
                em: em.clone(),
            })
        }
        None => influence_function_spectral(f, em, cutoff, grid),
    }
}

/// `g₀` by tapered spectral inversion, always bypassing closed forms.
///
/// The leading power tail of the multiplier is removed first and inverted
/// exactly through gamma densities; for the indicator the Gaussian CDF
/// `1 − Φ(x/s)` is split off so the remainder has an integrable spectrum.
pub fn influence_function_spectral(
    f: &Functional,
    em: &ErrorModel,
    cutoff: f64,
    grid: &Grid,
) -> Result<InfluenceFunction> {
    check_cutoff(cutoff, grid)?;
    f.validate()?;
    em.validate()?;
    let w = f.weight();
    let split_sd = f.is_indicator().then_some(INDICATOR_SPLIT_SD);
    let slope = em.cf_recip_deriv(0.0);
    let multiplier = |u: f64| -> Complex64 {
        match split_sd {
            Some(s) => {
                if u == 0.0 {
                    // limit of (φ_ε^{-1}(−u) − e^{−s²u²/2}) / (iu)
                    return Complex64::new(0.0, w) * slope;
                }
                (em.cf_recip(-u) - (-0.5 * s * s * u * u).exp()) / Complex64::new(0.0, u) * w
            }
            None => f.ft(u).expect("fourier route") * em.cf_recip(-u),
        }
    };
    let singular = f.ft_asymptote().and_then(|a| {
        let t = a.product(em.recip_asymptote().reflect());
        SingularPart::fit(t.power, t.plus, t.minus)
    });
    let spec = GridFunction::spectrum(grid, |u| {
        let tp = taper(u, cutoff);
        if tp == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let r = singular.map(|s| s.ft(u)).unwrap_or_default();
        (multiplier(u) - r) * tp
    });
    let residual = inverse_transform(&spec);
    let ratio = residual.imag_ratio();
    if ratio > 1e-6 {
        log::warn!("influence function residual has imaginary ratio {ratio:e}");
    }
    let mut smooth = residual.real_parts();
    if let Some(s) = split_sd {
        for (v, x) in smooth.iter_mut().zip(grid.nodes()) {
            *v += w * (1.0 - normal_cdf(0.0, s, x));
        }
    }
    let step = grid.step();
    let values: Vec<f64> = grid
        .nodes()
        .into_iter()
        .zip(&smooth)
        .map(|(x, &v)| match singular {
            Some(s) if x.abs() < 1e-9 * step => v + s.cell_mean(step),
            Some(s) => v + s.eval(x),
            None => v,
        })
        .collect();
    Ok(InfluenceFunction {
        g: GridFunction::from_real(*grid, &values)?,
        smooth,
        singular,
        closed: None,
        cutoff,
        functional: f.clone(),
        em: em.clone(),
    })
}

impl InfluenceFunction {
    /// Samples of `g₀` on the grid; unbounded points hold cell means.
    pub fn g(&self) -> &GridFunction {
        &self.g
    }

    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn functional(&self) -> &Functional {
        &self.functional
    }

    pub fn error_model(&self) -> &ErrorModel {
        &self.em
    }

    pub fn is_analytic(&self) -> bool {
        self.closed.is_some()
    }

    pub fn singular_part(&self) -> Option<&SingularPart> {
        self.singular.as_ref()
    }

    pub fn singular_points(&self) -> Vec<f64> {
        match self.closed {
            Some(ClosedForm::GaussianLaplace { .. }) => Vec::new(),
            _ => self.functional.singular_points(),
        }
    }

    /// `g₀(x)`; closed forms and singular parts are evaluated exactly.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if let Some(c) = self.closed {
            return Ok(c.eval(&self.functional, x));
        }
        let mut v = interpolate_real(self.grid(), &self.smooth, x)?;
        if let Some(s) = self.singular {
            v += s.eval(x);
        }
        Ok(v)
    }

    /// `g_t(x) = g₀(x − t)`.
    pub fn eval_at(&self, t: f64, x: f64) -> Result<f64> {
        self.eval(x - t)
    }

    /// Rebuild spectrally on the refined grid with twice the cutoff and
    /// compare at `probes` random points of `[a, b]`.
    pub fn stability_certificate(
        &self,
        a: f64,
        b: f64,
        probes: usize,
        seed: u64,
    ) -> Result<StabilityReport> {
        let coarse = if self.closed.is_some() {
            influence_function_spectral(&self.functional, &self.em, self.cutoff, self.grid())?
        } else {
            self.clone()
        };
        let fine_grid = self.grid().refined();
        let fine = influence_function_spectral(&self.functional, &self.em, 2.0 * self.cutoff, &fine_grid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exclusion = 2.0 * self.grid().step();
        let singular = self.singular_points();
        let xs: Vec<f64> = (0..probes)
            .map(|_| {
                loop {
                    let x = a + (b - a) * rand::Rng::random::<f64>(&mut rng);
                    if singular.iter().all(|s| (x - s).abs() > exclusion) {
                        break x;
                    }
                }
            })
            .collect();
        let pairs = xs
            .iter()
            .map(|&x| Ok((coarse.eval(x)?, fine.eval(x)?)))
            .collect::<Result<Vec<_>>>()?;
        let scale = pairs.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        let floor = 1e-3 * scale;
        let max_rel_change = pairs
            .iter()
            .map(|(c, f)| (c - f).abs() / f.abs().max(floor).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        Ok(StabilityReport { probes, max_rel_change, passed: max_rel_change < 1e-4 })
    }
}

/// Effect of doubling the spectral cutoff on `g₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub probes: usize,
    pub max_rel_change: f64,
    pub passed: bool,
}

/// Grid holding `g₀` at every `Y_k − t` for data in `[y_lo, y_hi]` and `t` in `[t_lo, t_hi]`.
pub fn influence_grid(
    y_lo: f64,
    y_hi: f64,
    t_lo: f64,
    t_hi: f64,
    em: &ErrorModel,
    f: &Functional,
    max_step: f64,
) -> Result<Grid> {
    let pad = 8.0 * em.sd() + f.support_radius() + 1.0;
    let lo = (y_lo - t_hi).min(0.0) - pad;
    let hi = (y_hi - t_lo).max(0.0) + pad;
    let span = hi - lo;
    Grid::with_max_step(lo - 0.5 * span, hi + 0.5 * span, max_step, 1 << 13)
}

/// Plug-in `Σ̂` on a `t` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub t: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    /// Sample means of `g₀(Y_k − t)`, used for centering.
    pub theta: Vec<f64>,
    pub n: usize,
    /// Largest eigenvalue change made by the repair.
    pub repair_shift: f64,
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.t.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |i, j| self.sigma[i][j])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.sigma[i][i]).collect()
    }

    /// Covariance with given entries, repaired to be positive semidefinite.
    pub fn from_matrix(t: Vec<f64>, sigma: DMatrix<f64>, n: usize) -> Result<Self> {
        let m = t.len();
        if sigma.nrows() != m || sigma.ncols() != m {
            return Err(Error::InvalidParam("covariance shape does not match the t grid".into()));
        }
        let (repaired, shift) = repair_psd(&sigma);
        Ok(Self {
            sigma: (0..m).map(|i| (0..m).map(|j| repaired[(i, j)]).collect()).collect(),
            theta: vec![0.0; m],
            t,
            n,
            repair_shift: shift,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.t.iter().map(|t| t.to_string()));
        out.write_record(&header)?;
        for (t, row) in self.t.iter().zip(&self.sigma) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Symmetrises and floors eigenvalues at `EIGEN_FLOOR · trace`.
pub fn repair_psd(sigma: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let sym = (sigma + sigma.transpose()) * 0.5;
    let trace = sym.trace().max(0.0);
    let floor = EIGEN_FLOOR * trace;
    let eig = SymmetricEigen::new(sym.clone());
    let mut shift: f64 = 0.0;
    let vals = eig.eigenvalues.map(|l| {
        if l < floor {
            shift = shift.max(floor - l);
            floor
        } else {
            l
        }
    });
    if shift == 0.0 {
        return (sym, 0.0);
    }
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&vals) * q.transpose();
    for i in 0..out.nrows() {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    (out, shift)
}

/// `Σ̂_{s,t} = (1/n) Σ_k g₀(Y_k − s) g₀(Y_k − t) − ḡ_s ḡ_t`, then repaired.
pub fn covariance_plugin(
    inf: &InfluenceFunction,
    s: &Sample,
    t_grid: &[f64],
) -> Result<CovarianceEstimate> {
    let m = t_grid.len();
    let n = s.n();
    let partials = s
        .y()
        .par_chunks(CHUNK)
        .map(|ys| {
            let mut first = vec![0.0; m];
            let mut second = DMatrix::<f64>::zeros(m, m);
            let mut row = DVector::<f64>::zeros(m);
            for &y in ys {
                for (i, &t) in t_grid.iter().enumerate() {
                    row[i] = inf.eval(y - t)?;
                    first[i] += row[i];
                }
                second.syger(1.0, &row, &row, 1.0);
            }
            Ok((first, second))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut first = vec![0.0; m];
    let mut second = DMatrix::<f64>::zeros(m, m);
    for (f, sm) in partials {
        for i in 0..m {
            first[i] += f[i];
        }
        second += sm;
    }
    let nf = n as f64;
    let mean: Vec<f64> = first.iter().map(|v| v / nf).collect();
    let mut sigma = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let lower = if i >= j { second[(i, j)] } else { second[(j, i)] };
            let v = lower / nf - mean[i] * mean[j];
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    let mut cov = CovarianceEstimate::from_matrix(t_grid.to_vec(), sigma, n)?;
    cov.theta = mean;
    Ok(cov)
}

/// Monte Carlo quantile of `sup_t |G(t)|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandResult {
    pub q: f64,
    pub alpha: f64,
    pub reps: usize,
    pub n: usize,
    pub band_halfwidth: f64,
}

/// Empirical `p`-quantile `x_{(⌈p·r⌉)}`.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let r = sorted.len();
    let k = ((p * r as f64).ceil() as usize).clamp(1, r);
    sorted[k - 1]
}

/// Draws of `sup_i |Z_i|` with `Z ~ N(0, Σ)`, deterministic in `seed` for any thread count.
pub fn simulate_sup_draws(cov: &CovarianceEstimate, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let m = cov.dim();
    if m == 0 {
        return Err(Error::InvalidParam("empty covariance".into()));
    }
    let chol = cov.matrix().cholesky().ok_or(Error::CholeskyFailure)?;
    let l = chol.l();
    let chunks = reps.div_ceil(DRAW_CHUNK);
    let draws: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = DRAW_CHUNK.min(reps - c * DRAW_CHUNK);
            let mut z = DVector::<f64>::zeros(m);
            (0..count)
                .map(|_| {
                    for v in z.iter_mut() {
                        *v = StandardNormal.sample(&mut rng);
                    }
                    (&l * &z).amax()
                })
                .collect()
        })
        .collect();
    Ok(draws.concat())
}

pub fn simulate_sup_quantile(
    cov: &CovarianceEstimate,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<BandResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if reps == 0 {
        return Err(Error::InvalidParam("at least one simulation draw is needed".into()));
    }
    if reps < 1000 {
        log::warn!("only {reps} draws for the sup-quantile");
    }
    let mut draws = simulate_sup_draws(cov, reps, seed)?;
    draws.sort_by(f64::total_cmp);
    let q = empirical_quantile(&draws, 1.0 - alpha);
    Ok(BandResult { q, alpha, reps, n: cov.n, band_halfwidth: q / (cov.n as f64).sqrt() })
}

/// Attaches `ϑ̂_t ± q/√n` to the curve.
pub fn confidence_band(mut curve: EstimateCurve, band: &BandResult) -> Result<EstimateCurve> {
    if curve.n != band.n {
        return Err(Error::InvalidParam(format!(
            "curve has n = {} but the band was built for n = {}",
            curve.n, band.n
        )));
    }
    let hw = band.band_halfwidth;
    curve.band = Some(Band {
        lo: curve.theta_hat.iter().map(|v| v - hw).collect(),
        hi: curve.theta_hat.iter().map(|v| v + hw).collect(),
    });
    Ok(curve)
}

/// Attaches plug-in standard errors `√(Σ̂_{t,t}/n)`.
pub fn attach_se(mut curve: EstimateCurve, cov: &CovarianceEstimate) -> EstimateCurve {
    let n = cov.n as f64;
    curve.se = Some(cov.diagonal().iter().map(|v| (v.max(0.0) / n).sqrt()).collect());
    curve
}

/// `∫ g_t² f_Y − ϑ_t²` with `f_Y` given on a grid.
pub fn efficiency_bound_at(
    inf: &InfluenceFunction,
    fy: &GridFunction,
    t: f64,
    theta_t: f64,
) -> Result<f64> {
    efficiency_bound_on(inf, fy, (f64::NEG_INFINITY, f64::INFINITY), t, theta_t)
}

/// As [`efficiency_bound_at`] with `f_Y` known to vanish outside `support`.
pub fn efficiency_bound_on(
    inf: &InfluenceFunction,
    fy: &GridFunction,
    support: (f64, f64),
    t: f64,
    theta_t: f64,
) -> Result<f64> {
    let grid = *fy.grid();
    if !grid.contains(t) {
        return Err(Error::OutOfDomain { x: t, lo: grid.lo(), hi: grid.hi() });
    }
    let lo = grid.lo().max(support.0);
    let hi = grid.hi().min(support.1);
    if lo >= hi {
        return Ok(-theta_t * theta_t);
    }
    let values = fy.real_parts();
    let mut breaks = vec![lo];
    let mut inner: Vec<f64> = inf
        .singular_points()
        .into_iter()
        .map(|s| s + t)
        .filter(|&x| x > lo && x < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    breaks.extend(inner);
    breaks.push(hi);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        // Split long pieces so tanh-sinh sees the structure of f_Y.
        let pieces = ((b - a) / 2.0).ceil().max(1.0) as usize;
        for p in 0..pieces {
            let lo = a + (b - a) * p as f64 / pieces as f64;
            let hi = a + (b - a) * (p + 1) as f64 / pieces as f64;
            let est = tanh_sinh(
                |x, _| {
                    let g = inf.eval(x - t).unwrap_or(0.0);
                    let f = interpolate_real(&grid, &values, x).unwrap_or(0.0);
                    g * g * f
                },
                lo,
                hi,
                1e-11,
            );
            total += est.value;
        }
    }
    Ok(total - theta_t * theta_t)
}

/// Efficiency bound at `t = 0`, with `g₀` built on the grid of `fy`.
pub fn efficiency_bound(
    f: &Functional,
    em: &ErrorModel,
    fy: &GridFunction,
    theta0: f64,
) -> Result<f64> {
    let grid = *fy.grid();
    let inf = influence_function(f, em, default_cutoff(&grid), &grid)?;
    efficiency_bound_at(&inf, fy, 0.0, theta0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_models::{gamma_error, laplace_error, no_noise};
    use crate::functionals::{flipped_gamma, gaussian, indicator, triangle};
    use crate::grid::integrate;
    use crate::quad::adaptive_pieces;
    use crate::signal::SignalLaw;
    use approx::assert_abs_diff_eq;

    fn rel_l2_error(inf: &InfluenceFunction, exact: impl Fn(f64) -> f64, singular: &[f64]) -> f64 {
        let grid = inf.grid();
        let step = grid.step();
        let (mut num, mut den) = (0.0, 0.0);
        for (k, x) in grid.nodes().into_iter().enumerate() {
            if x.abs() > 10.0 || singular.iter().any(|s| (x - s).abs() <= 2.0 * step) {
                continue;
            }
            let e = exact(x);
            num += (inf.g().values()[k].re - e).powi(2);
            den += e * e;
        }
        (num / den).sqrt()
    }

    #[test]
    fn flipped_gamma_oracle_spectral() {
        let f = flipped_gamma(0.8, 1.0).unwrap();
        let em = gamma_error(0.3, 1.0).unwrap();
        let grid = Grid::new(-40.0, 40.0, 1 << 15).unwrap();
        let inf = influence_function_spectral(&f, &em, default_cutoff(&grid), &grid).unwrap();
        let err = rel_l2_error(&inf, |x| gamma_pdf(0.5, 1.0, -x), &[0.0]);
        assert!(err < 1e-3, "{err}");
        let analytic = influence_function(&f, &em, default_cutoff(&grid), &grid).unwrap();
        assert!(analytic.is_analytic());
        assert_abs_diff_eq!(analytic.eval(-1.0).unwrap(), gamma_pdf(0.5, 1.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn indicator_gamma_spectral_matches_closed_form() {
        let f = indicator();
        let em = gamma_error(0.3, 1.0).unwrap();
        let grid = Grid::new(-60.0, 60.0, 1 << 15).unwrap();
        let spectral = influence_function_spectral(&f, &em, default_cutoff(&grid), &grid).unwrap();
        let analytic = influence_function(&f, &em, default_cutoff(&grid), &grid).unwrap();
        assert!(analytic.is_analytic() && !spectral.is_analytic());
        for x in [-8.0, -3.3, -1.0, -0.2, -0.05, 0.05, 0.4, 2.0, 7.5] {
            let a = analytic.eval(x).unwrap();
            let s = spectral.eval(x).unwrap();
            assert!((a - s).abs() < 1e-4 * a.abs().max(1e-2), "x = {x}: {a} vs {s}");
        }
    }

    #[test]
    fn no_noise_is_identity() {
        let grid = Grid::new(-20.0, 20.0, 1 << 12).unwrap();
        for f in [indicator(), triangle(1.5).unwrap(), gaussian(0.7).unwrap()] {
            let inf = influence_function(&f, &no_noise(), default_cutoff(&grid), &grid).unwrap();
            for x in [-3.0, -0.4, 0.0, 0.2, 1.0] {
                assert_eq!(inf.eval(x).unwrap(), f.eval(x));
            }
        }
    }

    #[test]
    fn gaussian_laplace_against_quadrature() {
        let f = gaussian(1.0).unwrap();
        let em = laplace_error(0.5).unwrap();
        let grid = Grid::new(-30.0, 30.0, 1 << 14).unwrap();
        let spectral = influence_function_spectral(&f, &em, default_cutoff(&grid), &grid).unwrap();
        let analytic = influence_function(&f, &em, default_cutoff(&grid), &grid).unwrap();
        for x in [-3.0, -1.0, 0.0, 0.5, 2.5] {
            // g₀(x) = (1/π)∫_0^∞ (1 + η²u²) e^{−u²/2} cos(ux) du
            let q = adaptive_pieces(
                |u| (1.0 + 0.25 * u * u) * (-0.5 * u * u).exp() * (u * x).cos() / PI,
                &[0.0, 10.0, 40.0],
                1e-13,
            )
            .value;
            assert_abs_diff_eq!(analytic.eval(x).unwrap(), q, epsilon = 1e-6);
            assert_abs_diff_eq!(spectral.eval(x).unwrap(), q, epsilon = 1e-6);
        }
    }

    #[test]
    fn triangle_gamma_is_stable() {
        let f = triangle(1.0).unwrap();
        let em = gamma_error(0.3, 1.0).unwrap();
        let grid = Grid::new(-40.0, 40.0, 1 << 14).unwrap();
        let inf = influence_function(&f, &em, default_cutoff(&grid), &grid).unwrap();
        assert!(!inf.is_analytic());
        let cert = inf.stability_certificate(-10.0, 10.0, 100, 1).unwrap();
        assert!(cert.passed, "{cert:?}");
    }

    #[test]
    fn cutoff_validation() {
        let grid = Grid::new(-10.0, 10.0, 1024).unwrap();
        let f = triangle(1.0).unwrap();
        let em = gamma_error(0.3, 1.0).unwrap();
        for u in [0.0, -1.0, f64::NAN, 10.0 * PI / grid.step()] {
            assert!(matches!(influence_function(&f, &em, u, &grid), Err(Error::InvalidCutoff(_))));
        }
    }

    #[test]
    fn singular_part_fit_reproduces_tails() {
        for (p, plus) in [(-0.5, Complex64::new(0.3, -0.8)), (-0.7, Complex64::new(-1.1, 0.2))] {
            let minus = plus.conj();
            let s = SingularPart::fit(p, plus, minus).unwrap();
            for u in [1e8f64, -1e8] {
                let target = if u > 0.0 { plus } else { minus } * u.abs().powf(p);
                assert!((s.ft(u) - target).norm() < 1e-6 * target.norm());
            }
        }
    }

    fn sample_of(ys: Vec<f64>) -> Sample {
        Sample::new(ys).unwrap()
    }

    #[test]
    fn plugin_no_noise_is_sample_covariance() {
        let f = gaussian(1.0).unwrap();
        let grid = Grid::new(-20.0, 20.0, 1 << 12).unwrap();
        let inf = influence_function(&f, &no_noise(), default_cutoff(&grid), &grid).unwrap();
        let s = sample_of((0..700).map(|i| ((i * 37) % 101) as f64 / 25.0 - 2.0).collect());
        let t = [-0.5, 0.0, 1.25];
        let cov = covariance_plugin(&inf, &s, &t).unwrap();
        for (i, &ti) in t.iter().enumerate() {
            let z: Vec<f64> = s.y().iter().map(|y| f.eval(y - ti)).collect();
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64;
            assert_abs_diff_eq!(cov.sigma[i][i], var, epsilon = 1e-14);
            assert_abs_diff_eq!(cov.theta[i], mean, epsilon = 1e-14);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((cov.sigma[i][j] - cov.sigma[j][i]).abs() < 1e-12);
            }
        }
        let single = covariance_plugin(&inf, &s, &[0.3]).unwrap();
        assert!(single.sigma[0][0] >= 0.0);
    }

    #[test]
    fn psd_repair_floors_eigenvalues() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, -1e-9]);
        let (r, shift) = repair_psd(&m);
        let floor = EIGEN_FLOOR * m.trace();
        let eig = SymmetricEigen::new(r.clone());
        assert!(eig.eigenvalues.iter().all(|&l| l >= floor * (1.0 - 1e-6) - 1e-15));
        assert!(shift > 0.0);
        assert!(r.clone().cholesky().is_some());
    }

    #[test]
    fn sup_quantile_examples() {
        let id = CovarianceEstimate::from_matrix(vec![0.0], DMatrix::identity(1, 1), 100).unwrap();
        let b = simulate_sup_quantile(&id, 0.05, 100_000, 7).unwrap();
        assert!((b.q - 1.96).abs() < 0.03, "{}", b.q);
        assert_abs_diff_eq!(b.band_halfwidth, b.q / 10.0, epsilon = 1e-15);

        let scaled = CovarianceEstimate::from_matrix(vec![0.0], DMatrix::identity(1, 1) * 9.0, 100).unwrap();
        let c = simulate_sup_quantile(&scaled, 0.05, 100_000, 7).unwrap();
        assert!((c.q / b.q - 3.0).abs() < 0.06);

        let ones = CovarianceEstimate::from_matrix((0..10).map(f64::from).collect(), DMatrix::from_element(10, 10, 1.0), 100)
            .unwrap();
        let d = simulate_sup_quantile(&ones, 0.05, 100_000, 8).unwrap();
        assert!((d.q - 1.96).abs() < 0.03, "{}", d.q);
    }

    #[test]
    fn sup_draws_are_thread_independent() {
        let cov = CovarianceEstimate::from_matrix(vec![0.0, 1.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]), 10)
            .unwrap();
        let a = simulate_sup_draws(&cov, 10_000, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate_sup_draws(&cov, 10_000, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn band_examples() {
        let curve = EstimateCurve::new(vec![0.0, 1.0], vec![0.2, 0.4], 100, 0.1);
        let zero = BandResult { q: 0.0, alpha: 0.05, reps: 1, n: 100, band_halfwidth: 0.0 };
        let c = confidence_band(curve.clone(), &zero).unwrap();
        let band = c.band.unwrap();
        assert_eq!(band.lo, curve.theta_hat);
        assert_eq!(band.hi, curve.theta_hat);

        let one = CovarianceEstimate::from_matrix(vec![0.0], DMatrix::identity(1, 1), 100).unwrap();
        let two = CovarianceEstimate::from_matrix(vec![0.0], DMatrix::identity(1, 1), 200).unwrap();
        let b1 = simulate_sup_quantile(&one, 0.05, 2000, 1).unwrap();
        let b2 = simulate_sup_quantile(&two, 0.05, 2000, 1).unwrap();
        assert_abs_diff_eq!(b2.band_halfwidth / b1.band_halfwidth, 0.5f64.sqrt(), epsilon = 1e-14);
        assert!(confidence_band(curve, &b2).is_err());
    }

    fn fy_on(law: &SignalLaw, em: &ErrorModel, grid: &Grid) -> GridFunction {
        let spec = GridFunction::spectrum(grid, |u| law.cf(u) * em.cf(u));
        let f = inverse_transform(&spec);
        f.map(|_, v| Complex64::new(v.re, 0.0))
    }

    #[test]
    fn bound_for_ecdf_variance() {
        let law = SignalLaw::Normal { mean: 0.0, sd: 1.0 };
        let grid = Grid::new(-30.0, 30.0, 1 << 15).unwrap();
        let fy = fy_on(&law, &no_noise(), &grid);
        assert_abs_diff_eq!(integrate(&fy).re, 1.0, epsilon = 1e-9);
        let b = efficiency_bound(&indicator(), &no_noise(), &fy, 0.5).unwrap();
        assert_abs_diff_eq!(b, 0.25, epsilon = 1e-7);
        let b2 = efficiency_bound(&indicator().scaled(2.0), &no_noise(), &fy, 1.0).unwrap();
        assert_abs_diff_eq!(b2, 4.0 * b, epsilon = 1e-7);
    }

    #[test]
    fn bound_cross_route() {
        let law = SignalLaw::Gamma { shape: 2.0, scale: 1.0 };
        let em = gamma_error(0.3, 1.0).unwrap();
        let f = flipped_gamma(1.0, 1.0).unwrap();
        let grid = Grid::new(-40.0, 60.0, 1 << 16).unwrap();
        let fy = fy_on(&law, &em, &grid);
        let t = 2.0;
        let theta = adaptive_pieces(|x| f.eval(x - t) * law.pdf(x), &[0.0, t], 1e-13).value;
        let analytic = influence_function(&f, &em, default_cutoff(&grid), &grid).unwrap();
        let spectral = influence_function_spectral(&f, &em, default_cutoff(&grid), &grid).unwrap();
        let a = efficiency_bound_at(&analytic, &fy, t, theta).unwrap();
        let s = efficiency_bound_at(&spectral, &fy, t, theta).unwrap();
        assert!(a > 0.0);
        assert!((a - s).abs() < 5e-3 * a, "{a} vs {s}");
    }
}
