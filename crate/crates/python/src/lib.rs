use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kdeconv::config::ScenarioConfig;
use kdeconv::error_models::{gamma_error, laplace_error, no_noise, reflected_gamma_error, ErrorModel};
use kdeconv::estimator::{estimate_curve, estimation_grid, EstimateCurve, Sample};
use kdeconv::functionals::{flipped_gamma, gaussian, indicator, triangle, Functional};
use kdeconv::kernels::{build_flat_top, Kernel};
use kdeconv::study::{
    band_for_sample, generate_sample, run_coverage_study, run_efficiency_study, run_rate_study, scenario_bound,
    sup_seed, StudyContext,
};

fn to_py(e: kdeconv::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

fn parse_config(json: &str) -> PyResult<ScenarioConfig> {
    let c = ScenarioConfig::from_json(json).map_err(to_py)?;
    c.validate().map_err(to_py)?;
    Ok(c)
}

#[pyclass(name = "ErrorModel", frozen)]
struct PyErrorModel(ErrorModel);

#[pymethods]
impl PyErrorModel {
    #[staticmethod]
    fn none() -> Self {
        Self(no_noise())
    }

    #[staticmethod]
    fn gamma(beta: f64, eta: f64) -> PyResult<Self> {
        gamma_error(beta, eta).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn reflected_gamma(beta: f64, eta: f64) -> PyResult<Self> {
        reflected_gamma_error(beta, eta).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn laplace(eta: f64) -> PyResult<Self> {
        laplace_error(eta).map(Self).map_err(to_py)
    }

    fn cf(&self, u: f64) -> Complex64 {
        self.0.cf(u)
    }

    fn beta(&self) -> f64 {
        self.0.beta()
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.0.sample(&mut rng)).collect()
    }

    fn __repr__(&self) -> String {
        format!("ErrorModel({})", self.0.describe())
    }
}

#[pyclass(name = "Functional", frozen)]
struct PyFunctional(Functional);

#[pymethods]
impl PyFunctional {
    #[staticmethod]
    fn indicator() -> Self {
        Self(indicator())
    }

    #[staticmethod]
    fn triangle(width: f64) -> PyResult<Self> {
        triangle(width).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn gaussian(sd: f64) -> PyResult<Self> {
        gaussian(sd).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn flipped_gamma(sigma: f64, eta: f64) -> PyResult<Self> {
        flipped_gamma(sigma, eta).map(Self).map_err(to_py)
    }

    fn eval(&self, x: f64) -> f64 {
        self.0.eval(x)
    }

    fn gamma_s(&self) -> f64 {
        self.0.gamma_s()
    }

    fn __repr__(&self) -> String {
        format!("Functional({})", self.0.name())
    }
}

#[pyclass(name = "Kernel", frozen)]
struct PyKernel(Kernel);

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (flat_radius = 0.5))]
    fn new(flat_radius: f64) -> PyResult<Self> {
        build_flat_top(flat_radius).map(Self).map_err(to_py)
    }

    fn eval(&self, x: f64) -> f64 {
        self.0.eval(x)
    }

    fn ft(&self, u: f64) -> f64 {
        self.0.ft(u)
    }

    fn cdf(&self, z: f64) -> f64 {
        self.0.cdf(z)
    }

    fn order(&self) -> usize {
        self.0.order()
    }
}

/// Estimated curve with optional standard errors and band.
#[pyclass(name = "Curve", get_all, frozen)]
struct PyCurve {
    t: Vec<f64>,
    theta_hat: Vec<f64>,
    n: usize,
    h: f64,
    se: Option<Vec<f64>>,
    lo: Option<Vec<f64>>,
    hi: Option<Vec<f64>>,
    q: Option<f64>,
}

impl PyCurve {
    fn new(c: EstimateCurve, q: Option<f64>) -> Self {
        let (lo, hi) = match c.band {
            Some(b) => (Some(b.lo), Some(b.hi)),
            None => (None, None),
        };
        Self { t: c.t, theta_hat: c.theta_hat, n: c.n, h: c.h, se: c.se, lo, hi, q }
    }
}

#[pymethods]
impl PyCurve {
    fn __len__(&self) -> usize {
        self.t.len()
    }
}

/// Plug-in estimate of `t ↦ ⟨ζ(· − t), f_X⟩` from contaminated observations.
#[pyfunction]
#[pyo3(signature = (y, error, functional, h, t, flat_radius = 0.5))]
fn estimate(
    y: Vec<f64>,
    error: &PyErrorModel,
    functional: &PyFunctional,
    h: f64,
    t: Vec<f64>,
    flat_radius: f64,
) -> PyResult<PyCurve> {
    let s = Sample::new(y).map_err(to_py)?;
    let k = build_flat_top(flat_radius).map_err(to_py)?;
    let grid = estimation_grid(&s, &error.0, &functional.0, h, 1 << 13).map_err(to_py)?;
    let c = estimate_curve(&s, &error.0, &k, &functional.0, h, &t, &grid).map_err(to_py)?;
    Ok(PyCurve::new(c, None))
}

/// Estimate with a uniform band for a JSON scenario; simulates replication 0 when `y` is omitted.
#[pyfunction]
#[pyo3(signature = (config, y = None))]
fn band(config: &str, y: Option<Vec<f64>>) -> PyResult<PyCurve> {
    let c = parse_config(config)?;
    let s = match y {
        Some(y) => Sample::new(y).map_err(to_py)?,
        None => generate_sample(&c, 0),
    };
    let ctx = StudyContext::new(&c).map_err(to_py)?;
    let t = c.t_points_for_sample(&s);
    let inf = ctx.influence_over(s.min(), s.max(), &t).map_err(to_py)?;
    let (curve, _, b) = band_for_sample(&ctx, &inf, &s, &t, sup_seed(c.seed, 0)).map_err(to_py)?;
    Ok(PyCurve::new(curve, Some(b.q)))
}

#[pyfunction]
#[pyo3(signature = (config, rep = 0))]
fn simulate(config: &str, rep: usize) -> PyResult<Vec<f64>> {
    let c = parse_config(config)?;
    Ok(generate_sample(&c, rep).y().to_vec())
}

/// Runs a `coverage`, `rate` or `efficiency` study and returns its summary as JSON.
#[pyfunction]
fn run_study(kind: &str, config: &str) -> PyResult<String> {
    let c = parse_config(config)?;
    let r = match kind {
        "coverage" => run_coverage_study(&c),
        "rate" => {
            let ns = c.n_list.clone().ok_or_else(|| PyValueError::new_err("rate study needs n_list"))?;
            run_rate_study(&c, &ns)
        }
        "efficiency" => run_efficiency_study(&c),
        other => return Err(PyValueError::new_err(format!("unknown study {other:?}"))),
    }
    .map_err(to_py)?;
    serde_json::to_string(&kdeconv::report::summary_document(&r)).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// `∫ g_t² f_Y − ϑ_t²` for a JSON scenario.
#[pyfunction]
fn efficiency_bound(config: &str, t: f64) -> PyResult<f64> {
    let c = parse_config(config)?;
    let ctx = StudyContext::new(&c).map_err(to_py)?;
    scenario_bound(&ctx, t).map_err(to_py)
}

#[pyfunction]
fn bandwidth_rate(n: usize, alpha: f64, beta: f64, gamma_s: f64) -> PyResult<f64> {
    kdeconv::estimator::bandwidth_rate(n, alpha, beta, gamma_s).map_err(to_py)
}

/// Built-in checks as `(name, value, tolerance, passed)` tuples.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn selftest(seed: u64) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let r = kdeconv::selftest::run_selftest(seed).map_err(to_py)?;
    Ok(r.checks.into_iter().map(|c| (c.name, c.value, c.tolerance, c.passed)).collect())
}

#[pymodule]
fn pykdeconv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyErrorModel>()?;
    m.add_class::<PyFunctional>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyCurve>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(band, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bandwidth_rate, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
