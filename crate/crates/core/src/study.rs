//! Replication studies: coverage, rate, efficiency and bias.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PopulationDensity, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate_curve, estimation_grid, EstimateCurve, Sample};
use crate::kernels::Kernel;
use crate::limit_process::{
    covariance_plugin, default_cutoff, efficiency_bound_on, influence_function, influence_grid,
    simulate_sup_quantile, InfluenceFunction,
};

/// Grid spacing for influence functions used in studies.
pub const INFLUENCE_STEP: f64 = 0.01;

/// `Y_j = X_j + ε_j` with independent streams for `X` and `ε` derived from `(seed, rep)`.
pub fn generate_sample(sc: &ScenarioConfig, rep: usize) -> Sample {
    generate_sample_n(sc, rep, sc.n)
}

/// As [`generate_sample`] with an explicit size; smaller sizes give prefixes of larger ones.
pub fn generate_sample_n(sc: &ScenarioConfig, rep: usize, n: usize) -> Sample {
    let mut rx = ChaCha8Rng::seed_from_u64(sc.seed);
    rx.set_stream(2 * rep as u64);
    let mut re = ChaCha8Rng::seed_from_u64(sc.seed);
    re.set_stream(2 * rep as u64 + 1);
    let y = (0..n).map(|_| sc.signal.sample(&mut rx) + sc.error.sample(&mut re)).collect();
    Sample::new(y).expect("finite draws")
}

/// Seed for the sup-quantile simulation of replication `rep`.
pub fn sup_seed(seed: u64, rep: usize) -> u64 {
    seed ^ (rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Coverage,
    Rate,
    Efficiency,
    Bias,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Coverage => "coverage",
            StudyKind::Rate => "rate",
            StudyKind::Efficiency => "efficiency",
            StudyKind::Bias => "bias",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub rep: usize,
    pub n: usize,
    pub h: f64,
    pub t: f64,
    pub theta_hat: f64,
    pub truth: f64,
    pub covered: Option<bool>,
    pub halfwidth: Option<f64>,
}

/// Summary of all replications sharing `(n, h, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub h: f64,
    pub t: f64,
    pub reps: usize,
    pub truth: f64,
    pub mean_bias: f64,
    pub rmse: f64,
    /// Empirical variance of `√n(ϑ̂_t − ϑ_t)`.
    pub scaled_variance: f64,
    pub scaled_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    /// Least-squares slope of `log RMSE` against `log n`.
    pub slope: Option<f64>,
    pub bound: Option<f64>,
    pub efficiency_ratio: Option<f64>,
}

/// Recomputes every summary from the rows; `bound` is the efficiency bound when known.
pub fn summarize(rows: &[Row], bound: Option<f64>) -> Summary {
    let mut keys: Vec<(usize, u64, u64)> = Vec::new();
    let mut members: Vec<Vec<&Row>> = Vec::new();
    for r in rows {
        let key = (r.n, r.h.to_bits(), r.t.to_bits());
        match keys.iter().position(|k| *k == key) {
            Some(i) => members[i].push(r),
            None => {
                keys.push(key);
                members.push(vec![r]);
            }
        }
    }
    let groups: Vec<GroupSummary> = members
        .iter()
        .map(|g| {
            let reps = g.len();
            let first = g[0];
            let errs: Vec<f64> = g.iter().map(|r| r.theta_hat - r.truth).collect();
            let mean_bias = errs.iter().sum::<f64>() / reps as f64;
            let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / reps as f64).sqrt();
            let scale = first.n as f64;
            let var = errs.iter().map(|e| (e - mean_bias).powi(2)).sum::<f64>()
                / (reps.max(2) - 1) as f64
                * scale;
            GroupSummary {
                n: first.n,
                h: first.h,
                t: first.t,
                reps,
                truth: first.truth,
                mean_bias,
                rmse,
                scaled_variance: var,
                scaled_sd: var.sqrt(),
            }
        })
        .collect();

    let (coverage, coverage_se) = if rows.iter().any(|r| r.covered.is_some()) {
        let mut reps: Vec<(usize, usize, bool)> = Vec::new();
        for r in rows {
            let ok = r.covered.unwrap_or(false);
            match reps.iter_mut().find(|(n, rep, _)| *n == r.n && *rep == r.rep) {
                Some(e) => e.2 &= ok,
                None => reps.push((r.n, r.rep, ok)),
            }
        }
        let total = reps.len() as f64;
        let p = reps.iter().filter(|e| e.2).count() as f64 / total;
        (Some(p), Some((p * (1.0 - p) / total).sqrt()))
    } else {
        (None, None)
    };

    let mut distinct: Vec<usize> = groups.iter().map(|g| g.n).collect();
    distinct.dedup();
    let slope = (distinct.len() >= 2 && groups.iter().all(|g| g.rmse > 0.0)).then(|| {
        let xs: Vec<f64> = groups.iter().map(|g| (g.n as f64).ln()).collect();
        let ys: Vec<f64> = groups.iter().map(|g| g.rmse.ln()).collect();
        least_squares_slope(&xs, &ys)
    });

    let efficiency_ratio = match (bound, groups.as_slice()) {
        (Some(b), [g]) if b > 0.0 => Some(g.scaled_variance / b),
        _ => None,
    };
    Summary { groups, coverage, coverage_se, slope, bound, efficiency_ratio }
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub t: f64,
    pub theta_hat: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub truth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: ScenarioConfig,
    pub version: String,
    pub threads: usize,
    pub elapsed_secs: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub rows: Vec<Row>,
    pub summary: Summary,
    pub metadata: Metadata,
    pub plot: Vec<PlotRow>,
}

/// Objects shared by every replication of a scenario.
pub struct StudyContext {
    pub config: ScenarioConfig,
    pub kernel: Kernel,
    pub population: PopulationDensity,
}

impl StudyContext {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            kernel: config.kernel()?,
            population: PopulationDensity::new(&config.signal, &config.error)?,
        })
    }

    pub fn truth(&self, t: &[f64]) -> Result<Vec<f64>> {
        let sc = self.config.scenario();
        t.iter().map(|&x| sc.truth(x)).collect()
    }

    /// `g₀` on a grid wide enough for every plausible `Y − t`.
    pub fn influence(&self, t: &[f64]) -> Result<InfluenceFunction> {
        let p = &self.population;
        self.influence_over(p.quantile(1e-12), p.quantile(1.0 - 1e-12), t)
    }

    /// `g₀` on a grid covering `y − t` for `y ∈ [y_lo, y_hi]` and every `t`.
    pub fn influence_over(&self, y_lo: f64, y_hi: f64, t: &[f64]) -> Result<InfluenceFunction> {
        let c = &self.config;
        let t_lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let t_hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let grid = influence_grid(
            y_lo,
            y_hi,
            t_lo,
            t_hi,
            &c.error,
            &c.functional,
            INFLUENCE_STEP,
        )?;
        influence_function(&c.functional, &c.error, default_cutoff(&grid), &grid)
    }

    pub fn estimate(&self, s: &Sample, h: f64, t: &[f64]) -> Result<EstimateCurve> {
        let c = &self.config;
        let grid = estimation_grid(s, &c.error, &c.functional, h, 1 << 13)?;
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let grid = if grid.contains(lo) && grid.contains(hi) {
            grid
        } else {
            let span = hi.max(grid.hi()) - lo.min(grid.lo());
            crate::grid::Grid::with_max_step(lo.min(grid.lo()) - 0.1 * span, hi.max(grid.hi()) + 0.1 * span, grid.step(), grid.m())?
        };
        estimate_curve(s, &c.error, &self.kernel, &c.functional, h, t, &grid)
    }
}

fn metadata(config: &ScenarioConfig, start: Instant, notes: Vec<String>) -> Metadata {
    Metadata {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: rayon::current_num_threads(),
        elapsed_secs: start.elapsed().as_secs_f64(),
        notes,
    }
}

/// Estimate, plug-in covariance, simulated quantile and band for one data set.
pub fn band_for_sample(
    ctx: &StudyContext,
    inf: &InfluenceFunction,
    s: &Sample,
    t: &[f64],
    sim_seed: u64,
) -> Result<(EstimateCurve, crate::limit_process::CovarianceEstimate, crate::limit_process::BandResult)> {
    let c = &ctx.config;
    let h = c.bandwidth_for(s.n())?;
    let curve = ctx.estimate(s, h, t)?;
    let cov = covariance_plugin(inf, s, t)?;
    let band = simulate_sup_quantile(&cov, c.alpha, c.sup_reps, sim_seed)?;
    let curve = crate::limit_process::attach_se(curve, &cov);
    let curve = crate::limit_process::confidence_band(curve, &band)?;
    Ok((curve, cov, band))
}

pub fn run_coverage_study(sc: &ScenarioConfig) -> Result<StudyReport> {
    let start = Instant::now();
    let ctx = StudyContext::new(sc)?;
    let t = sc.t_points(&ctx.population);
    let truth = ctx.truth(&t)?;
    let inf = ctx.influence(&t)?;
    let per_rep = (0..sc.replications)
        .into_par_iter()
        .map(|rep| {
            let s = generate_sample(sc, rep);
            let (curve, _, band) = band_for_sample(&ctx, &inf, &s, &t, sup_seed(sc.seed, rep))?;
            let hw = band.band_halfwidth;
            let rows: Vec<Row> = t
                .iter()
                .zip(&curve.theta_hat)
                .zip(&truth)
                .map(|((&ti, &th), &tr)| Row {
                    rep,
                    n: sc.n,
                    h: curve.h,
                    t: ti,
                    theta_hat: th,
                    truth: tr,
                    covered: Some((th - tr).abs() <= hw),
                    halfwidth: Some(hw),
                })
                .collect();
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let plot = per_rep
        .first()
        .map(|rows| {
            rows.iter()
                .map(|r| PlotRow {
                    t: r.t,
                    theta_hat: r.theta_hat,
                    lo: r.halfwidth.map(|w| r.theta_hat - w),
                    hi: r.halfwidth.map(|w| r.theta_hat + w),
                    truth: r.truth,
                })
                .collect()
        })
        .unwrap_or_default();
    let rows: Vec<Row> = per_rep.concat();
    let summary = summarize(&rows, None);
    let notes = vec![format!(
        "simultaneous coverage is checked on {} grid points as a proxy for all t",
        t.len()
    )];
    Ok(StudyReport {
        kind: StudyKind::Coverage,
        rows,
        summary,
        metadata: metadata(sc, start, notes),
        plot,
    })
}

pub fn run_rate_study(sc: &ScenarioConfig, n_list: &[usize]) -> Result<StudyReport> {
    let start = Instant::now();
    if n_list.len() < 2 {
        return Err(Error::InvalidConfig("the rate study needs at least two sample sizes".into()));
    }
    let ctx = StudyContext::new(sc)?;
    let t_star = sc.t_star();
    let truth = ctx.truth(&[t_star])?[0];
    let mut rows = Vec::new();
    for &n in n_list {
        let h = sc.bandwidth_for(n)?;
        let part = (0..sc.replications)
            .into_par_iter()
            .map(|rep| {
                let s = generate_sample_n(sc, rep, n);
                let c = ctx.estimate(&s, h, &[t_star])?;
                Ok(Row {
                    rep,
                    n,
                    h,
                    t: t_star,
                    theta_hat: c.theta_hat[0],
                    truth,
                    covered: None,
                    halfwidth: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.extend(part);
    }
    let summary = summarize(&rows, None);
    let mut notes = Vec::new();
    if sc.functional.gamma_s() <= sc.error.beta() {
        notes.push(format!(
            "inadmissible scenario (gamma_s = {} <= beta = {}): a slope above -0.4 is expected",
            sc.functional.gamma_s(),
            sc.error.beta()
        ));
    }
    Ok(StudyReport { kind: StudyKind::Rate, rows, summary, metadata: metadata(sc, start, notes), plot: Vec::new() })
}

/// `∫ g_t² f_Y − ϑ_t²` for the scenario.
pub fn scenario_bound(ctx: &StudyContext, t: f64) -> Result<f64> {
    let truth = ctx.truth(&[t])?[0];
    let inf = ctx.influence(&[t])?;
    efficiency_bound_on(&inf, ctx.population.density(), ctx.population.support(), t, truth)
}

pub fn run_efficiency_study(sc: &ScenarioConfig) -> Result<StudyReport> {
    let start = Instant::now();
    let ctx = StudyContext::new(sc)?;
    let t_star = sc.t_star();
    let truth = ctx.truth(&[t_star])?[0];
    let bound = scenario_bound(&ctx, t_star)?;
    let h = sc.bandwidth()?;
    let rows = (0..sc.replications)
        .into_par_iter()
        .map(|rep| {
            let s = generate_sample(sc, rep);
            let c = ctx.estimate(&s, h, &[t_star])?;
            Ok(Row { rep, n: sc.n, h, t: t_star, theta_hat: c.theta_hat[0], truth, covered: None, halfwidth: None })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&rows, Some(bound));
    let mut notes = Vec::new();
    if sc.error.beta().fract() == 0.0 {
        notes.push("integer beta lies outside the efficiency theory".into());
    }
    if bound <= 0.0 {
        notes.push(format!("efficiency bound {bound} is not positive; the ratio is not meaningful"));
    }
    Ok(StudyReport {
        kind: StudyKind::Efficiency,
        rows,
        summary,
        metadata: metadata(sc, start, notes),
        plot: Vec::new(),
    })
}

/// Mean error at `t*` for each bandwidth in `hs`, reusing the same samples.
pub fn run_bias_study(sc: &ScenarioConfig, hs: &[f64]) -> Result<StudyReport> {
    let start = Instant::now();
    let ctx = StudyContext::new(sc)?;
    let t_star = sc.t_star();
    let truth = ctx.truth(&[t_star])?[0];
    let mut rows = Vec::new();
    for &h in hs {
        let part = (0..sc.replications)
            .into_par_iter()
            .map(|rep| {
                let s = generate_sample(sc, rep);
                let c = ctx.estimate(&s, h, &[t_star])?;
                Ok(Row { rep, n: sc.n, h, t: t_star, theta_hat: c.theta_hat[0], truth, covered: None, halfwidth: None })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.extend(part);
    }
    let summary = summarize(&rows, None);
    Ok(StudyReport { kind: StudyKind::Bias, rows, summary, metadata: metadata(sc, start, Vec::new()), plot: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> ScenarioConfig {
        ScenarioConfig::from_json(&format!(
            r#"{{
                "signal": {{"kind": "normal", "mean": 0.0, "sd": 1.0}},
                "error": {{"kind": "none"}},
                "functional": {{"kind": "indicator"}},
                "bandwidth": {{"rule": "fixed", "h": 0.2}},
                "n": 200{extra}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn samples_are_deterministic() {
        let c = config("");
        assert_eq!(generate_sample(&c, 3), generate_sample(&c, 3));
        assert_ne!(generate_sample(&c, 3), generate_sample(&c, 4));
        let long = generate_sample_n(&c, 2, 500);
        assert_eq!(&long.y()[..200], generate_sample(&c, 2).y());
    }

    #[test]
    fn no_noise_samples_are_signal_draws() {
        let c = config("");
        let s = generate_sample(&c, 0);
        let mut rx = ChaCha8Rng::seed_from_u64(c.seed);
        rx.set_stream(0);
        let x: Vec<f64> = (0..c.n).map(|_| c.signal.sample(&mut rx)).collect();
        assert_eq!(s.y(), x.as_slice());
    }

    #[test]
    fn sample_mean_matches_moments() {
        let mut c = ScenarioConfig::from_json(
            r#"{
                "signal": {"kind": "gamma", "shape": 2.0, "scale": 1.0},
                "error": {"kind": "gamma", "beta": 0.3, "eta": 1.0},
                "functional": {"kind": "indicator"},
                "bandwidth": {"rule": "rate"},
                "n": 100000
            }"#,
        )
        .unwrap();
        c.seed = 9;
        let s = generate_sample(&c, 0);
        let mean = s.y().iter().sum::<f64>() / s.n() as f64;
        let se = ((c.signal.variance() + c.error.variance()) / s.n() as f64).sqrt();
        assert!((mean - 2.3).abs() < 5.0 * se);
    }

    #[test]
    fn single_replication_coverage() {
        let c = config(r#", "replications": 1, "sup_reps": 2000, "t_grid": {"kind": "range", "lo": -1.0, "hi": 1.0, "count": 11}"#);
        let r = run_coverage_study(&c).unwrap();
        assert_eq!(r.rows.len(), 11);
        let cov = r.summary.coverage.unwrap();
        assert!(cov == 0.0 || cov == 1.0);
        assert_eq!(r.plot.len(), 11);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let c = config(r#", "replications": 6, "sup_reps": 1000, "t_grid": {"kind": "range", "lo": -1.0, "hi": 1.0, "count": 5}"#);
        let a = run_coverage_study(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_coverage_study(&c).unwrap());
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn coverage_is_monotone_in_alpha() {
        let base = r#", "replications": 40, "sup_reps": 2000, "t_grid": {"kind": "range", "lo": -1.5, "hi": 1.5, "count": 21}"#;
        let a = run_coverage_study(&config(&format!("{base}, \"alpha\": 0.05"))).unwrap();
        let b = run_coverage_study(&config(&format!("{base}, \"alpha\": 0.10"))).unwrap();
        assert!(a.summary.coverage.unwrap() >= b.summary.coverage.unwrap());
    }

    #[test]
    fn summaries_from_rows() {
        let rows = vec![
            Row { rep: 0, n: 100, h: 0.1, t: 0.0, theta_hat: 0.6, truth: 0.5, covered: Some(true), halfwidth: Some(0.2) },
            Row { rep: 1, n: 100, h: 0.1, t: 0.0, theta_hat: 0.3, truth: 0.5, covered: Some(false), halfwidth: Some(0.1) },
            Row { rep: 0, n: 100, h: 0.1, t: 1.0, theta_hat: 0.8, truth: 0.8, covered: Some(true), halfwidth: Some(0.2) },
            Row { rep: 1, n: 100, h: 0.1, t: 1.0, theta_hat: 0.8, truth: 0.8, covered: Some(true), halfwidth: Some(0.1) },
        ];
        let s = summarize(&rows, None);
        assert_eq!(s.groups.len(), 2);
        assert_eq!(s.coverage, Some(0.5));
        let g = &s.groups[0];
        assert!((g.mean_bias - (-0.05)).abs() < 1e-15);
        assert!((g.rmse - ((0.01 + 0.04) / 2.0f64).sqrt()).abs() < 1e-15);
        assert!((g.scaled_variance - 100.0 * 0.045).abs() < 1e-12);
        assert!(s.slope.is_none());
    }

    #[test]
    fn slope_of_exact_root_n_errors() {
        let rows: Vec<Row> = [100usize, 400, 1600]
            .iter()
            .flat_map(|&n| {
                let e = 1.0 / (n as f64).sqrt();
                [e, -e].into_iter().enumerate().map(move |(rep, err)| Row {
                    rep,
                    n,
                    h: 0.1,
                    t: 0.0,
                    theta_hat: err,
                    truth: 0.0,
                    covered: None,
                    halfwidth: None,
                })
            })
            .collect();
        let s = summarize(&rows, None);
        assert!((s.slope.unwrap() + 0.5).abs() < 1e-12);
    }
}
