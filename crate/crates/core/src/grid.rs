//! Uniform grids, sampled functions and the discrete Fourier transform.
//!
//! The continuous transform is `Ff(u) = ∫ e^{iux} f(x) dx`. A grid with `m`
//! nodes `x_k = lo + k·step` is paired with the dual frequency grid
//! `u_j = (j − m/2)·du`, `du = 2π/(m·step)`, which covers `[−π/step, π/step)`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `max|Im| / max|z|` for a function to count as real.
pub const REAL_TOLERANCE: f64 = 1e-9;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], direction: FftDirection) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft(buf.len(), direction));
    plan.process(buf);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: f64,
    hi: f64,
    m: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidGrid(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("m must be a power of two >= 8, got {m}")));
        }
        Ok(Self { lo, hi, m })
    }

    /// Grid on `[−half_width, half_width)`.
    pub fn centered(half_width: f64, m: usize) -> Result<Self> {
        Self::new(-half_width, half_width, m)
    }

    /// Smallest power-of-two grid on `[lo, hi]` whose step does not exceed `max_step`.
    pub fn with_max_step(lo: f64, hi: f64, max_step: f64, min_m: usize) -> Result<Self> {
        if !(max_step > 0.0 && max_step.is_finite()) {
            return Err(Error::InvalidGrid(format!("step bound must be positive, got {max_step}")));
        }
        let needed = ((hi - lo) / max_step).ceil();
        if !needed.is_finite() || needed > (1u64 << 26) as f64 {
            return Err(Error::InvalidGrid(format!("{needed} nodes requested")));
        }
        let m = (needed as usize).max(min_m).max(8).next_power_of_two();
        Self::new(lo, hi, m)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.m as f64
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn node(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|k| self.node(k)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Spacing of the dual frequency grid.
    pub fn freq_step(&self) -> f64 {
        2.0 * PI / (self.m as f64 * self.step())
    }

    /// Frequency grid `[−π/step, π/step)` with the same number of nodes.
    pub fn dual(&self) -> Grid {
        let nyquist = PI / self.step();
        Grid { lo: -nyquist, hi: nyquist, m: self.m }
    }

    /// Same interval with twice as many nodes.
    pub fn refined(&self) -> Grid {
        Grid { lo: self.lo, hi: self.hi, m: 2 * self.m }
    }
}

/// Complex samples on a [`Grid`].
///
/// Frequency-domain functions remember the left endpoint of the spatial grid
/// they belong to (`origin`), which fixes the phase used by
/// [`inverse_transform`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
    origin: Option<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.m {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.m
            )));
        }
        Ok(Self { grid, values, origin: None })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.m], origin: None }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.m).map(|k| f(grid.node(k))).collect();
        Self { grid, values, origin: None }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Samples of a frequency-domain function on the dual of `space`.
    pub fn spectrum(space: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let mut out = Self::from_fn(space.dual(), f);
        out.origin = Some(space.lo);
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn origin(&self) -> Option<f64> {
        self.origin
    }

    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max|Im| / max|z|`, zero for the zero function.
    pub fn imag_ratio(&self) -> f64 {
        let top = self.max_abs();
        if top == 0.0 {
            return 0.0;
        }
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max) / top
    }

    pub fn is_real(&self) -> bool {
        self.imag_ratio() <= REAL_TOLERANCE
    }

    /// Pointwise map `v_k ↦ f(x_k, v_k)`.
    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(self.grid.node(k), v))
            .collect();
        Self { grid: self.grid, values, origin: self.origin }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|_, v| c * v)
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("operands live on different grids".into()));
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Self { grid: self.grid, values, origin: self.origin.or(other.origin) })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid, values, origin: self.origin.or(other.origin) })
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;

    fn add(self, rhs: &GridFunction) -> GridFunction {
        self.try_add(rhs).expect("grid mismatch in addition")
    }
}

impl Mul for &GridFunction {
    type Output = GridFunction;

    fn mul(self, rhs: &GridFunction) -> GridFunction {
        self.try_mul(rhs).expect("grid mismatch in product")
    }
}

fn alternating(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Samples of `Ff(u) = ∫ e^{iux} f(x) dx` on the dual grid, by the trapezoid rule.
pub fn forward_transform(f: &GridFunction) -> GridFunction {
    let grid = f.grid;
    let step = grid.step();
    let mut buf: Vec<Complex64> = f
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| v * alternating(k))
        .collect();
    fft_in_place(&mut buf, FftDirection::Inverse);
    let dual = grid.dual();
    for (j, v) in buf.iter_mut().enumerate() {
        let u = dual.node(j);
        *v *= Complex64::from_polar(step, u * grid.lo);
    }
    GridFunction { grid: dual, values: buf, origin: Some(grid.lo) }
}

/// Samples of `(1/2π) ∫ e^{−iux} F(u) du` on the spatial grid paired with `F`.
///
/// The spatial grid has step `2π/(m·du)` and starts at `F.origin()`, or is
/// centred at zero when no origin is recorded.
pub fn inverse_transform(spec: &GridFunction) -> GridFunction {
    let m = spec.grid.m;
    let du = spec.grid.step();
    let step = 2.0 * PI / (m as f64 * du);
    let width = m as f64 * step;
    let lo = spec.origin.unwrap_or(-0.5 * width);
    let space = Grid { lo, hi: lo + width, m };
    let u_lo = spec.grid.lo;
    let mut buf: Vec<Complex64> = spec
        .values
        .iter()
        .enumerate()
        .map(|(j, &v)| v * Complex64::from_polar(1.0, -spec.grid.node(j) * lo))
        .collect();
    fft_in_place(&mut buf, FftDirection::Forward);
    let standard = (u_lo * step + PI).abs() < 1e-12;
    let norm = du / (2.0 * PI);
    for (k, v) in buf.iter_mut().enumerate() {
        let phase = if standard {
            Complex64::new(alternating(k), 0.0)
        } else {
            Complex64::from_polar(1.0, -u_lo * step * k as f64)
        };
        *v *= phase * norm;
    }
    GridFunction { grid: space, values: buf, origin: None }
}

/// Four-point Lagrange weights for offset `s` from the first stencil node.
fn lagrange_weights(s: f64) -> [f64; 4] {
    let a = s;
    let b = s - 1.0;
    let c = s - 2.0;
    let d = s - 3.0;
    [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0]
}

fn locate(grid: &Grid, x: f64) -> Result<(usize, f64, Option<usize>)> {
    if !grid.contains(x) {
        return Err(Error::OutOfDomain { x, lo: grid.lo, hi: grid.hi });
    }
    let pos = (x - grid.lo) / grid.step();
    let nearest = pos.round();
    if (pos - nearest).abs() < 1e-10 && (nearest as usize) < grid.m {
        return Ok((0, 0.0, Some(nearest as usize)));
    }
    let base = (pos.floor() as isize - 1).clamp(0, grid.m as isize - 4) as usize;
    Ok((base, pos - base as f64, None))
}

/// Cubic interpolation through the four surrounding nodes.
///
/// Exact at nodes and for cubic polynomials. Points in the last cell
/// `(x_{m−1}, hi]` are extrapolated from the final stencil.
pub fn interpolate(f: &GridFunction, x: f64) -> Result<Complex64> {
    let (base, s, node) = locate(&f.grid, x)?;
    if let Some(k) = node {
        return Ok(f.values[k]);
    }
    let w = lagrange_weights(s);
    Ok((0..4).map(|i| f.values[base + i] * w[i]).sum())
}

/// Real-valued counterpart of [`interpolate`] for plain sample vectors.
pub fn interpolate_real(grid: &Grid, values: &[f64], x: f64) -> Result<f64> {
    let (base, s, node) = locate(grid, x)?;
    if let Some(k) = node {
        return Ok(values[k]);
    }
    let w = lagrange_weights(s);
    Ok((0..4).map(|i| values[base + i] * w[i]).sum())
}

/// Trapezoid rule over one period of the grid, `step · Σ f_k`.
pub fn integrate(f: &GridFunction) -> Complex64 {
    f.values.iter().sum::<Complex64>() * f.grid.step()
}

/// Running trapezoid integral with `F(lo) = 0`.
pub fn cumulative(f: &GridFunction) -> GridFunction {
    let half = 0.5 * f.grid.step();
    let mut values = Vec::with_capacity(f.grid.m);
    let mut acc = Complex64::new(0.0, 0.0);
    values.push(acc);
    for pair in f.values.windows(2) {
        acc += (pair[0] + pair[1]) * half;
        values.push(acc);
    }
    GridFunction { grid: f.grid, values, origin: None }
}
