use std::f64::consts::PI;
use std::sync::Arc;

use fracdiff::asymptotics::*;
use fracdiff::forward::*;
use fracdiff::laplace::invert_laplace;
use fracdiff::special::{gamma, ml_eval, MlParams};
use fracdiff::spectral::*;
use proptest::prelude::*;

fn model(orders: &[f64], coeffs: &[f64]) -> MultiTermModel {
    MultiTermModel::new(orders.to_vec(), coeffs.to_vec(), Arc::new(dirichlet_laplacian(PI, 200).unwrap())).unwrap()
}

fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// `sin x` has the single coefficient `sqrt(π/2)` on the first mode.
fn sine(m: &MultiTermModel) -> FieldCoefficients {
    FieldCoefficients::from_leading(&[(PI / 2.0).sqrt()], m.operator().mode_count()).unwrap()
}

fn trace(m: &MultiTermModel, a: &FieldCoefficients, x0: f64, times: &[f64]) -> ObservationTrace {
    let z = FieldCoefficients::zeros(m.operator().mode_count());
    solve_trace(m, a, &z, &SourceTemporalProfile::None, x0, times).unwrap()
}

#[test]
fn leading_coefficient_matches_l_at_point() {
    let cases: [(&[f64], &[f64], f64); 3] = [(&[0.5], &[1.0], 1.0), (&[0.8, 0.4], &[1.0, 0.5], 0.7), (&[0.9, 0.6, 0.3], &[2.0, 1.0, 1.0], 2.0)];
    for (orders, coeffs, x0) in cases {
        let m = model(orders, coeffs);
        let a = project_fn(|x| (x * (PI - x)).powi(3), m.operator()).unwrap();
        let s = short_time_series(&m, &a, x0, orders[0]).unwrap();
        let la = apply_l_at_point(&a, m.operator(), x0).unwrap();
        let want = -la / (coeffs[0] * gamma(orders[0] + 1.0));
        let got = s.coefficient(orders[0]).unwrap();
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
        assert!((s.anchor_value() - a.value_at(m.operator(), x0).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn monomials_invert_to_power_over_gamma() {
    let m = model(&[0.9, 0.6, 0.3], &[1.0, 0.6, 0.3]);
    let terms = large_p_expand(&m, 1.7, 2.7).unwrap();
    assert_eq!(terms.len(), 8);
    for (e, _) in terms {
        let got = invert_laplace(|p| p.powf(e), 0.1, 48).unwrap();
        let s = -1.0 - e;
        let want = 0.1f64.powf(s) / gamma(s + 1.0);
        assert!((got - want).abs() <= 1e-8 * want, "exponent {e}: {got} vs {want}");
    }
}

#[test]
fn single_term_remainder_is_twice_the_order() {
    let m = model(&[0.5], &[1.0]);
    let a = sine(&m);
    let s = short_time_series(&m, &a, 1.0, 0.5).unwrap();
    assert_eq!(s.remainder_order, 1.0);
    let tr = trace(&m, &a, 1.0, &log_times(1e-4, 1e-2, 40));
    let slope = empirical_order(&tr, &s, (1e-4, 1e-2)).unwrap();
    assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn two_term_remainder_follows_first_correction() {
    let m = model(&[0.8, 0.4], &[1.0, 0.5]);
    let a = sine(&m);
    let s = short_time_series(&m, &a, PI / 2.0, 0.8).unwrap();
    assert!((s.remainder_order - 1.2).abs() < 1e-12);
    let tr = trace(&m, &a, PI / 2.0, &log_times(1e-5, 1e-3, 40));
    let slope = empirical_order(&tr, &s, (1e-5, 1e-3)).unwrap();
    assert!((slope - 1.2).abs() < 0.1, "slope {slope}");
}

#[test]
fn default_cap_residual_order() {
    for (orders, coeffs) in [(vec![0.5], vec![1.0]), (vec![0.8, 0.4], vec![1.0, 0.5]), (vec![0.9, 0.6, 0.3], vec![1.0, 1.0, 1.0])] {
        let m = model(&orders, &coeffs);
        let a = sine(&m);
        let s = short_time_series(&m, &a, 1.0, default_order_cap(&m)).unwrap();
        let tr = trace(&m, &a, 1.0, &log_times(1e-5, 1e-2, 40));
        let slope = empirical_order(&tr, &s, (1e-5, 1e-2)).unwrap();
        assert!((slope - s.remainder_order).abs() < 0.1, "{orders:?}: slope {slope} vs {}", s.remainder_order);
    }
}

/// Least-squares coefficients of `Σ c_i t^{e_i}` through the normal equations.
fn fit_powers(times: &[f64], values: &[f64], exps: &[f64]) -> Vec<f64> {
    let n = exps.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for (t, v) in times.iter().zip(values) {
        let basis: Vec<f64> = exps.iter().map(|e| t.powf(*e)).collect();
        let w = 1.0 / (v * v);
        for i in 0..n {
            for j in 0..n {
                a[i][j] += w * basis[i] * basis[j];
            }
            a[i][n] += w * basis[i] * v;
        }
    }
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

#[test]
fn correction_coefficient_from_solver_residual() {
    let m = model(&[0.8, 0.4], &[1.0, 0.5]);
    let a = sine(&m);
    let x0 = PI / 2.0;
    let s = short_time_series(&m, &a, x0, 1.6).unwrap();
    let la = apply_l_at_point(&a, m.operator(), x0).unwrap();
    let want = la * 0.5 / gamma(2.2);
    assert!((s.coefficient(1.2).unwrap() - want).abs() < 1e-8);

    let times = log_times(1e-4, 1e-2, 60);
    let tr = trace(&m, &a, x0, &times);
    let lower = ExpansionSeries { terms: s.terms[..2].to_vec(), remainder_order: 1.2 };
    let resid: Vec<f64> = times.iter().zip(&tr.values).map(|(t, u)| u - lower.evaluate(*t)).collect();
    let fitted = fit_powers(&times, &resid, &[1.2, 1.6, 2.0, 2.4]);
    assert!((fitted[0] - want).abs() < 0.02 * want, "{} vs {want}", fitted[0]);
}

#[test]
fn source_series_matches_single_mode_closed_form() {
    // f = sin x, μ = 0: u(x0, t) = sin(x0) t^α E_{α,α+1}(-t^α)
    let m = model(&[0.5], &[1.0]);
    let f = sine(&m);
    let x0 = PI / 2.0;
    let s = short_time_series_source(&m, &f, 0.0, 1.0, x0, 2.5).unwrap();
    assert!((s.terms[0].exp - 0.5).abs() < 1e-15);
    assert!((s.terms[0].coef - 1.0 / gamma(1.5)).abs() < 1e-12);
    for (k, term) in s.terms.iter().enumerate() {
        let e = 0.5 * (k + 1) as f64;
        let want = if k % 2 == 0 { 1.0 } else { -1.0 } / gamma(e + 1.0);
        assert!((term.exp - e).abs() < 1e-12);
        assert!((term.coef - want).abs() < 1e-8 * want.abs());
    }
    let ml = MlParams::new(0.5, 1.5).unwrap();
    for t in log_times(1e-6, 1e-3, 10) {
        let exact = t.sqrt() * ml_eval(ml, -t.sqrt()).unwrap();
        assert!((s.evaluate(t) - exact).abs() <= 1e-12 + 2.0 * t.powf(3.0));
    }
}

#[test]
fn exact_series_reports_infinite_order() {
    let times = log_times(1e-4, 1e-2, 10);
    let s = ExpansionSeries { terms: vec![SeriesTerm { exp: 0.0, coef: 2.0 }, SeriesTerm { exp: 0.5, coef: -1.0 }], remainder_order: 1.0 };
    let values = times.iter().map(|t| s.evaluate(*t)).collect();
    let tr = ObservationTrace::new(1.0, times, values, TraceSource::Synthetic).unwrap();
    assert_eq!(empirical_order(&tr, &s, (1e-4, 1e-2)).unwrap(), f64::INFINITY);
    assert!(empirical_order(&tr, &s, (0.5, 1.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn exponents_strictly_increase(
        a1 in 0.3f64..0.95,
        gaps in proptest::collection::vec(0.25f64..0.9, 0..3),
        qs in proptest::collection::vec(0.1f64..3.0, 3),
        lambda in 0.1f64..50.0,
    ) {
        let mut orders = vec![a1];
        for g in &gaps {
            let next = orders.last().unwrap() * (1.0 - g);
            orders.push(next);
        }
        let coeffs = qs[..orders.len()].to_vec();
        let m = MultiTermModel::new(orders.clone(), coeffs, Arc::new(dirichlet_laplacian(PI, 8).unwrap())).unwrap();
        let cap = 2.0 * a1;
        let terms = large_p_expand(&m, lambda, cap).unwrap();
        prop_assert_eq!(terms[0], (-1.0, 1.0));
        prop_assert!(terms.windows(2).all(|w| w[0].0 - w[1].0 > MERGE_TOL));
        prop_assert!(terms.iter().all(|t| -1.0 - t.0 <= cap + MERGE_TOL));

        let a = FieldCoefficients::from_leading(&[1.0, 0.3, -0.2], 8).unwrap();
        let s = short_time_series(&m, &a, 1.1, cap).unwrap();
        prop_assert!(s.validate().is_ok());
        prop_assert!(s.remainder_order > cap);
    }
}
