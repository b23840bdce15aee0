//! Acceptance criteria. Each test prints one PASS/FAIL line.

use kdeconv::config::ScenarioConfig;
use kdeconv::error_models::{gamma_error, no_noise};
use kdeconv::estimator::{estimate_curve, estimation_grid, Sample};
use kdeconv::functionals::{flipped_gamma, indicator};
use kdeconv::grid::Grid;
use kdeconv::kernels::build_flat_top;
use kdeconv::limit_process::{default_cutoff, influence_function_spectral, simulate_sup_quantile, CovarianceEstimate};
use kdeconv::selftest::{adjoint_gap, random_adjoint_case};
use kdeconv::study::{run_bias_study, run_efficiency_study, run_rate_study};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Continuous, Gamma};

fn verdict(id: &str, pass: bool, msg: String) {
    println!("criterion {id} {}: {msg}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id}: {msg}");
}

fn config(json: &str) -> ScenarioConfig {
    ScenarioConfig::from_json(json).unwrap()
}

#[test]
fn c1_influence_oracle() {
    let f = flipped_gamma(0.8, 1.0).unwrap();
    let em = gamma_error(0.3, 1.0).unwrap();
    let grid = Grid::new(-40.0, 40.0, 1 << 15).unwrap();
    let inf = influence_function_spectral(&f, &em, default_cutoff(&grid), &grid).unwrap();
    let exact = Gamma::new(0.5, 1.0).unwrap();
    let step = grid.step();
    let (mut num, mut den) = (0.0, 0.0);
    for (k, x) in grid.nodes().into_iter().enumerate() {
        if x.abs() > 10.0 || x.abs() <= 2.0 * step {
            continue;
        }
        let e = if x < 0.0 { exact.pdf(-x) } else { 0.0 };
        num += (inf.g().values()[k].re - e).powi(2);
        den += e * e;
    }
    let err = (num / den).sqrt();
    verdict("1", err < 1e-3, format!("relative L2 error of g0 = {err:.3e} (< 1e-3)"));
}

#[test]
fn c2_adjoint_identity() {
    let k = build_flat_top(0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let case = random_adjoint_case(&mut rng);
        assert!(case.n <= 1000 && !case.functional.is_indicator());
        worst = worst.max(adjoint_gap(&case, &k, 100 + i).unwrap());
    }
    verdict("2", worst < 1e-4, format!("max |route A - route B| over 20 configs = {worst:.3e} (< 1e-4)"));
}

#[test]
fn c3_kernel_certification() {
    let k = build_flat_top(0.5).unwrap();
    let cert = k.certificate();
    let mass = (cert.moments[0] - 1.0).abs();
    let moments = cert.moments[1..=6].iter().map(|m| m.abs()).fold(0.0, f64::max);
    let mut bound = 0.0f64;
    for i in 0..=4000 {
        let x = -200.0 + 0.1 * i as f64;
        bound = bound.max((1.0 + x * x) * (k.eval(x).abs() + k.deriv(x).abs()));
    }
    let pass = mass < 1e-10 && moments < 1e-8 && bound.is_finite() && bound < 10.0;
    verdict(
        "3",
        pass,
        format!("|mass - 1| = {mass:.2e} (< 1e-10), max moment 1..6 = {moments:.2e} (< 1e-8), sup <x>^2(|K|+|K'|) = {bound:.3}"),
    );
}

#[test]
fn c4_root_n_rate() {
    let c = config(
        r#"{
            "signal": {"kind": "gamma", "shape": 2.0, "scale": 1.0},
            "error": {"kind": "gamma", "beta": 0.3, "eta": 1.0},
            "functional": {"kind": "indicator"},
            "bandwidth": {"rule": "rate"},
            "n": 8000, "replications": 300, "seed": 4
        }"#,
    );
    let r = run_rate_study(&c, &[500, 2000, 8000]).unwrap();
    let slope = r.summary.slope.unwrap();
    verdict("4", (-0.6..=-0.4).contains(&slope), format!("log-RMSE slope = {slope:.3} (in [-0.6, -0.4])"));
}

fn efficiency(sigma: f64, t_star: Option<f64>) -> (f64, f64, f64) {
    let mut c = config(&format!(
        r#"{{
            "signal": {{"kind": "gamma", "shape": 2.0, "scale": 1.0}},
            "error": {{"kind": "gamma", "beta": 0.3, "eta": 1.0}},
            "functional": {{"kind": "flipped_gamma", "sigma": {sigma}, "eta": 1.0}},
            "bandwidth": {{"rule": "rate"}},
            "n": 8000, "replications": 500, "seed": 5
        }}"#
    ));
    c.t_star = t_star;
    let r = run_efficiency_study(&c).unwrap();
    let var = r.summary.groups[0].scaled_variance;
    let bound = r.summary.bound.unwrap();
    (var, bound, var / bound)
}

#[test]
fn c5_efficiency_bound() {
    let (var, bound, ratio) = efficiency(0.8, Some(0.0));
    verdict(
        "5",
        (0.85..=1.15).contains(&ratio),
        format!("n var = {var:.4e}, bound = {bound:.4e}, ratio = {ratio:.3} (in [0.85, 1.15])"),
    );
}

/// Same study where the bound is positive: sigma = 1 at the median of X.
#[test]
fn c5b_efficiency_bound_interior() {
    let (var, bound, ratio) = efficiency(1.0, None);
    verdict(
        "5b",
        (0.85..=1.15).contains(&ratio),
        format!("n var = {var:.4e}, bound = {bound:.4e}, ratio = {ratio:.3} (in [0.85, 1.15])"),
    );
}

/// As 5b with sigma = 2, where g0 is continuous and the rate bandwidth is small.
#[test]
fn c5c_efficiency_bound_regular() {
    let (var, bound, ratio) = efficiency(2.0, None);
    verdict(
        "5c",
        (0.85..=1.15).contains(&ratio),
        format!("n var = {var:.4e}, bound = {bound:.4e}, ratio = {ratio:.3} (in [0.85, 1.15])"),
    );
}

#[test]
fn c6_uniform_coverage() {
    let c = config(
        r#"{
            "signal": {"kind": "gamma", "shape": 2.0, "scale": 1.0},
            "error": {"kind": "gamma", "beta": 0.3, "eta": 1.0},
            "functional": {"kind": "indicator"},
            "bandwidth": {"rule": "rate"},
            "n": 4000, "replications": 500, "alpha": 0.05, "seed": 6
        }"#,
    );
    let r = kdeconv::study::run_coverage_study(&c).unwrap();
    assert_eq!(r.rows.len(), 500 * 101);
    let cov = r.summary.coverage.unwrap();
    verdict(
        "6",
        (0.90..=0.985).contains(&cov),
        format!("simultaneous coverage = {cov:.3} +- {:.3} (in [0.90, 0.985])", r.summary.coverage_se.unwrap()),
    );
}

#[test]
fn c7_degenerate_noise() {
    let k = build_flat_top(0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let s = Sample::new(y.clone()).unwrap();
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let ecdf = |t: f64| sorted.partition_point(|&v| v <= t) as f64 / sorted.len() as f64;
    let h = 0.02;
    let t: Vec<f64> = (0..=600).map(|i| -3.0 + 0.01 * i as f64).collect();
    let grid = estimation_grid(&s, &no_noise(), &indicator(), h, 1 << 13).unwrap();
    let curve = estimate_curve(&s, &no_noise(), &k, &indicator(), h, &t, &grid).unwrap();
    let mut smooth_gap = 0.0f64;
    let mut raw_gap = 0.0f64;
    for (&ti, &v) in t.iter().zip(&curve.theta_hat) {
        let smoothed = y.iter().map(|yj| k.cdf((ti - yj) / h)).sum::<f64>() / y.len() as f64;
        smooth_gap = smooth_gap.max((v - smoothed).abs());
        raw_gap = raw_gap.max((v - ecdf(ti)).abs());
    }
    verdict(
        "7",
        smooth_gap < 1e-8 && raw_gap < 0.01,
        format!("sup gap to smoothed ECDF = {smooth_gap:.2e} (< 1e-8), to raw ECDF = {raw_gap:.4} (< 0.01)"),
    );
}

fn bias_log_ratio(c: &ScenarioConfig, h: f64) -> (f64, f64, f64) {
    let r = run_bias_study(c, &[h, h / 2.0]).unwrap();
    let b1 = r.summary.groups[0].mean_bias;
    let b2 = r.summary.groups[1].mean_bias;
    (b1, b2, (b1.abs() / b2.abs()).log2())
}

#[test]
fn c8_bias_rate() {
    let c = config(
        r#"{
            "signal": {"kind": "normal", "mean": 0.0, "sd": 1.0},
            "error": {"kind": "laplace", "eta": 0.3},
            "functional": {"kind": "gaussian", "sd": 1.0},
            "bandwidth": {"rule": "fixed", "h": 0.4},
            "n": 1000, "replications": 500, "seed": 8
        }"#,
    );
    let target = c.smoothness_index() + c.functional.gamma_s();
    let (b1, b2, ratio) = bias_log_ratio(&c, 0.4);
    verdict(
        "8",
        (ratio - target).abs() <= 0.5,
        format!("bias {b1:.3e} at h = 0.4, {b2:.3e} at h = 0.2, log2 ratio = {ratio:.3} (target {target} +- 0.5)"),
    );
}

/// A scenario with finite alpha + gamma_s where the bias order is attained at t = 0.
#[test]
fn c8b_bias_rate_finite_smoothness() {
    let c = config(
        r#"{
            "signal": {"kind": "gamma", "shape": 1.5, "scale": 1.0},
            "error": {"kind": "gamma", "beta": 0.3, "eta": 1.0},
            "functional": {"kind": "indicator"},
            "bandwidth": {"rule": "fixed", "h": 0.2},
            "n": 2000, "replications": 500, "t_star": 0.0, "seed": 9
        }"#,
    );
    let target = c.smoothness_index() + c.functional.gamma_s();
    let (b1, b2, ratio) = bias_log_ratio(&c, 0.2);
    verdict(
        "8b",
        (ratio - target).abs() <= 0.5,
        format!("bias {b1:.3e} at h = 0.2, {b2:.3e} at h = 0.1, log2 ratio = {ratio:.3} (target {target:.2} +- 0.5)"),
    );
}

#[test]
fn c9_sup_quantile() {
    let cov = CovarianceEstimate::from_matrix(vec![0.0], DMatrix::identity(1, 1), 1).unwrap();
    let q = simulate_sup_quantile(&cov, 0.05, 100_000, 9).unwrap().q;
    verdict("9", (q - 1.96).abs() <= 0.03, format!("q_0.95 = {q:.4} (1.96 +- 0.03)"));
}
