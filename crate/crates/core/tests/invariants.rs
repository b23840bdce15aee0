use kdeconv::error_models::{gamma_error, laplace_error, ErrorModel};
use kdeconv::estimator::{estimate_curve, estimation_grid, Sample};
use kdeconv::functionals::{gaussian, indicator, triangle, Functional};
use kdeconv::kernels::{build_flat_top, Kernel};
use proptest::prelude::*;
use std::sync::OnceLock;

fn kernel() -> &'static Kernel {
    static K: OnceLock<Kernel> = OnceLock::new();
    K.get_or_init(|| build_flat_top(0.5).unwrap())
}

fn theta(y: &[f64], em: &ErrorModel, f: &Functional, h: f64, t: &[f64]) -> Vec<f64> {
    let s = Sample::new(y.to_vec()).unwrap();
    let grid = estimation_grid(&s, em, f, h, 1 << 12).unwrap();
    estimate_curve(&s, em, kernel(), f, h, t, &grid).unwrap().theta_hat
}

fn models() -> impl Strategy<Value = (ErrorModel, Functional)> {
    (0usize..3, 0usize..3).prop_map(|(e, f)| {
        let em = match e {
            0 => gamma_error(0.3, 1.0).unwrap(),
            1 => gamma_error(0.7, 0.5).unwrap(),
            _ => laplace_error(0.2).unwrap(),
        };
        let func = match f {
            0 => indicator(),
            1 => triangle(0.8).unwrap(),
            _ => gaussian(0.5).unwrap(),
        };
        (em, func)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimate_is_an_average_over_observations(
        a in prop::collection::vec(0.0f64..5.0, 1..20),
        b in prop::collection::vec(0.0f64..5.0, 1..20),
        (em, f) in models(),
        h in 0.2f64..0.6,
    ) {
        let t = [1.0, 2.5];
        let mut all = a.clone();
        all.extend(&b);
        let (ta, tb, tall) = (theta(&a, &em, &f, h, &t), theta(&b, &em, &f, h, &t), theta(&all, &em, &f, h, &t));
        let (na, nb) = (a.len() as f64, b.len() as f64);
        for i in 0..t.len() {
            let pooled = (na * ta[i] + nb * tb[i]) / (na + nb);
            prop_assert!((tall[i] - pooled).abs() < 1e-7, "{} vs {}", tall[i], pooled);
        }
    }

    #[test]
    fn shifting_data_and_points_together_changes_nothing(
        y in prop::collection::vec(0.0f64..5.0, 2..30),
        (em, f) in models(),
        h in 0.2f64..0.6,
        c in -3.0f64..3.0,
    ) {
        let t = [0.5, 1.5, 3.0];
        let base = theta(&y, &em, &f, h, &t);
        let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
        let ts: Vec<f64> = t.iter().map(|v| v + c).collect();
        let shifted = theta(&ys, &em, &f, h, &ts);
        for (p, q) in base.iter().zip(&shifted) {
            prop_assert!((p - q).abs() < 1e-7, "{p} vs {q}");
        }
    }

    #[test]
    fn indicator_estimate_has_unit_total_mass(
        y in prop::collection::vec(0.0f64..5.0, 2..30),
        h in 0.2f64..0.6,
    ) {
        let em = gamma_error(0.3, 1.0).unwrap();
        let v = theta(&y, &em, &indicator(), h, &[-400.0 * h - 20.0, 400.0 * h + 25.0]);
        prop_assert!(v[0].abs() < 1e-6, "{}", v[0]);
        prop_assert!((v[1] - 1.0).abs() < 1e-6, "{}", v[1]);
    }
}
