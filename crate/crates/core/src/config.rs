//! Scenario configuration read from JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_models::ErrorModel;
use crate::estimator::{bandwidth_classical, bandwidth_rate_report, Sample};
use crate::functionals::Functional;
use crate::grid::{cumulative, interpolate_real, Grid, GridFunction};
use crate::kernels::{build_flat_top, Kernel, DEFAULT_FLAT_RADIUS};
use crate::oracles::{convolved_density, Scenario};
use crate::signal::SignalLaw;

/// Grid size for the population density of `Y`.
pub const FY_GRID_POINTS: usize = 1 << 15;
/// Default number of evaluation points.
pub const DEFAULT_T_POINTS: usize = 101;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_radius")]
    pub flat_radius: f64,
}

fn default_radius() -> f64 {
    DEFAULT_FLAT_RADIUS
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { flat_radius: DEFAULT_FLAT_RADIUS }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthConfig {
    /// `h = constant · n^{−1/(α + 2β − γs + 1)}`.
    Rate {
        #[serde(default = "one")]
        constant: f64,
    },
    /// `h = constant · n^{−1/(2α + 2β)}`.
    Classical {
        #[serde(default = "one")]
        constant: f64,
    },
    Fixed { h: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TGridSpec {
    /// 101 points spanning the central 98% of the law of `Y`.
    #[default]
    Default,
    Points { values: Vec<f64> },
    Range { lo: f64, hi: f64, count: usize },
}

fn default_replications() -> usize {
    1
}

fn default_alpha() -> f64 {
    0.05
}

fn default_sup_reps() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub signal: SignalLaw,
    pub error: ErrorModel,
    pub functional: Functional,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub bandwidth: BandwidthConfig,
    pub n: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub t_grid: TGridSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sup_reps")]
    pub sup_reps: usize,
    /// Declared Sobolev index of `f_X`; defaults to the signal law's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    /// Sample sizes for the rate study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    /// Evaluation point for the rate and efficiency studies; defaults to the median of `X`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.signal.validate().map_err(|e| invalid(format!("signal: {e}")))?;
        self.error.validate().map_err(|e| invalid(format!("error: {e}")))?;
        self.functional.validate().map_err(|e| invalid(format!("functional: {e}")))?;
        let c = self.kernel.flat_radius;
        if !(c > 0.0 && c < 1.0) {
            return Err(invalid(format!("kernel flat_radius must lie in (0, 1), got {c}")));
        }
        if self.n < 2 {
            return Err(invalid(format!("n must be at least 2, got {}", self.n)));
        }
        if self.replications < 1 {
            return Err(invalid("replications must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.sup_reps < 1 {
            return Err(invalid("sup_reps must be at least 1"));
        }
        match self.bandwidth {
            BandwidthConfig::Rate { constant } | BandwidthConfig::Classical { constant } => {
                if !(constant > 0.0 && constant.is_finite()) {
                    return Err(invalid(format!("bandwidth constant must be positive, got {constant}")));
                }
            }
            BandwidthConfig::Fixed { h } => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(invalid(format!("fixed bandwidth must be positive, got {h}")));
                }
            }
        }
        if let Some(a) = self.smoothness {
            let cap = self.signal.smoothness();
            if !(a > 0.0 && a <= cap) {
                return Err(invalid(format!(
                    "declared smoothness {a} is inconsistent with {} (at most {cap})",
                    self.signal.describe()
                )));
            }
        }
        match &self.t_grid {
            TGridSpec::Default => {}
            TGridSpec::Points { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("t_grid points must be finite and non-empty"));
                }
            }
            TGridSpec::Range { lo, hi, count } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) || *count == 0 || (*count > 1 && lo == hi) {
                    return Err(invalid("t_grid range needs lo < hi and count ≥ 1"));
                }
            }
        }
        if let Some(list) = &self.n_list {
            if list.is_empty() || list.iter().any(|&n| n < 2) {
                return Err(invalid("n_list entries must be at least 2"));
            }
        }
        if let Some(t) = self.t_star {
            if !t.is_finite() {
                return Err(invalid("t_star must be finite"));
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        Scenario::new(self.signal.clone(), self.error.clone(), self.functional.clone())
    }

    pub fn kernel(&self) -> Result<Kernel> {
        build_flat_top(self.kernel.flat_radius)
    }

    /// Declared `α`.
    pub fn smoothness_index(&self) -> f64 {
        self.smoothness.unwrap_or_else(|| self.signal.smoothness())
    }

    pub fn bandwidth_for(&self, n: usize) -> Result<f64> {
        let alpha = self.smoothness_index();
        let beta = self.error.beta();
        if !alpha.is_finite() && !matches!(self.bandwidth, BandwidthConfig::Fixed { .. }) {
            return Err(invalid(format!(
                "the {} signal has infinite smoothness; set `smoothness` or use a fixed bandwidth",
                self.signal.describe()
            )));
        }
        match self.bandwidth {
            BandwidthConfig::Rate { constant } => {
                Ok(bandwidth_rate_report(n, alpha, beta, self.functional.gamma_s(), constant)?.h)
            }
            BandwidthConfig::Classical { constant } => Ok(constant * bandwidth_classical(n, alpha, beta)?),
            BandwidthConfig::Fixed { h } => Ok(h),
        }
    }

    pub fn bandwidth(&self) -> Result<f64> {
        self.bandwidth_for(self.n)
    }

    pub fn t_star(&self) -> f64 {
        self.t_star.unwrap_or_else(|| self.signal.quantile(0.5))
    }

    /// Evaluation points for a study, where the default grid uses the law of `Y`.
    pub fn t_points(&self, fy: &PopulationDensity) -> Vec<f64> {
        match &self.t_grid {
            TGridSpec::Default => {
                equispaced(fy.quantile(0.01), fy.quantile(0.99), DEFAULT_T_POINTS)
            }
            other => fixed_points(other).expect("fixed spec"),
        }
    }

    /// Evaluation points for a single data set, where the default grid uses the sample.
    pub fn t_points_for_sample(&self, s: &Sample) -> Vec<f64> {
        match &self.t_grid {
            TGridSpec::Default => equispaced(s.quantile(0.01), s.quantile(0.99), DEFAULT_T_POINTS),
            other => fixed_points(other).expect("fixed spec"),
        }
    }
}

fn fixed_points(spec: &TGridSpec) -> Option<Vec<f64>> {
    match spec {
        TGridSpec::Default => None,
        TGridSpec::Points { values } => Some(values.clone()),
        TGridSpec::Range { lo, hi, count } => Some(equispaced(*lo, *hi, *count)),
    }
}

pub fn equispaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// `f_Y = f_X ∗ f_ε` on a fine grid with its distribution function.
#[derive(Clone, Debug)]
pub struct PopulationDensity {
    density: GridFunction,
    cdf: Vec<f64>,
    support: (f64, f64),
}

impl PopulationDensity {
    pub fn new(signal: &SignalLaw, em: &ErrorModel) -> Result<Self> {
        let spread = signal.variance().sqrt() + em.sd();
        let lo = signal.quantile(1e-10) + em.mean() - 15.0 * em.sd() - 2.0 * spread;
        let hi = signal.quantile(1.0 - 1e-10) + em.mean() + 15.0 * em.sd() + 2.0 * spread;
        let span = hi - lo;
        let grid = Grid::new(lo - 0.5 * span, hi + 0.5 * span, FY_GRID_POINTS)?;
        let density = convolved_density(signal, em, &grid);
        let cdf = cumulative(&density).real_parts();
        let (a, b) = signal.support();
        let (c, d) = em.support();
        Ok(Self { density, cdf, support: (a + c, b + d) })
    }

    pub fn density(&self) -> &GridFunction {
        &self.density
    }

    pub fn grid(&self) -> &Grid {
        self.density.grid()
    }

    /// Closed interval outside which `f_Y` vanishes.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            return 0.0;
        }
        interpolate_real(self.grid(), &self.density.real_parts(), x).unwrap_or(0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let g = self.grid();
        if x <= g.lo() {
            return 0.0;
        }
        if x >= g.hi() {
            return 1.0;
        }
        interpolate_real(g, &self.cdf, x).unwrap_or(1.0)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let g = self.grid();
        crate::special::invert_cdf(|x| self.cdf(x), p, g.lo(), g.hi())
    }
}
