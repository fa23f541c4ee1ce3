use std::f64::consts::PI;
use std::sync::Arc;

use fracdiff::forward::*;
use fracdiff::identify::*;
use fracdiff::special::gamma;
use fracdiff::spectral::*;
use fracdiff::Error;
use proptest::prelude::*;

fn model(orders: &[f64], coeffs: &[f64]) -> MultiTermModel {
    MultiTermModel::new(orders.to_vec(), coeffs.to_vec(), Arc::new(dirichlet_laplacian(PI, 200).unwrap())).unwrap()
}

/// `sin(k x)` is `sqrt(π/2)` times the k-th eigenfunction.
fn sine_mode(m: &MultiTermModel, k: usize, scale: f64) -> FieldCoefficients {
    let mut lead = vec![0.0; k];
    lead[k - 1] = scale * (PI / 2.0).sqrt();
    FieldCoefficients::from_leading(&lead, m.operator().mode_count()).unwrap()
}

fn homogeneous_with(m: &MultiTermModel, a: &FieldCoefficients, x0: f64, times: &[f64]) -> ObservationTrace {
    let z = FieldCoefficients::zeros(m.operator().mode_count());
    solve_trace(m, a, &z, &SourceTemporalProfile::None, x0, times).unwrap()
}

fn homogeneous(m: &MultiTermModel, x0: f64, times: &[f64]) -> ObservationTrace {
    homogeneous_with(m, &sine_mode(m, 1, 1.0), x0, times)
}

fn source(m: &MultiTermModel, mu: f64, x0: f64, times: &[f64]) -> ObservationTrace {
    let z = FieldCoefficients::zeros(m.operator().mode_count());
    solve_trace(m, &z, &sine_mode(m, 1, 1.0), &SourceTemporalProfile::power_law(mu, 1.0).unwrap(), x0, times).unwrap()
}

const BENCH: [(&[f64], &[f64]); 3] = [(&[0.5], &[1.0]), (&[0.8, 0.4], &[1.0, 0.5]), (&[0.9, 0.6, 0.3], &[1.0, 1.0, 1.0])];

fn window_times() -> Vec<f64> {
    log_spaced(1e-6, 1e-2, 200)
}

fn dense() -> Vec<f64> {
    let mut t = vec![0.0];
    t.extend(log_spaced(1e-11, 1.0, 4000));
    t
}

fn check(res: &IdentificationResult, orders: &[f64], coeffs: &[f64]) {
    assert_eq!(res.m_hat, orders.len(), "{res:?}");
    for (a, b) in res.orders_hat.iter().zip(orders) {
        assert!((a - b).abs() <= 1e-2, "orders {:?} vs {orders:?}", res.orders_hat);
    }
    for (r, q) in res.coeff_ratios.iter().zip(coeffs) {
        let want = q / coeffs[0];
        assert!((r - want).abs() <= 0.05 * want, "ratios {:?} vs {coeffs:?}", res.coeff_ratios);
    }
    assert_eq!(res.coeff_ratios[0], 1.0);
}

#[test]
fn benchmark_round_trips() {
    let cfg = IdentificationConfig::default();
    for (orders, coeffs) in BENCH {
        let m = model(orders, coeffs);
        let tr = homogeneous(&m, PI / 2.0, &window_times());
        let res = peel_orders(&tr, 1.0, &cfg, IdentificationMode::Homogeneous).unwrap();
        check(&res, orders, coeffs);
        assert_eq!(res.diagnostics.stages.len(), orders.len());
        // c_1 = -(La)(x0) / (q_1 Γ(α_1 + 1)) with La = sin x
        let want = -1.0 / (coeffs[0] * gamma(orders[0] + 1.0));
        assert!((res.leading_composite - want).abs() <= 1e-3 * want.abs(), "{} vs {want}", res.leading_composite);
    }
}

#[test]
fn source_round_trips() {
    let cfg = IdentificationConfig::default();
    let cases: [(&[f64], &[f64], f64); 3] = [(&[0.8, 0.4], &[1.0, 0.5], 0.0), (&[0.8, 0.4], &[1.0, 0.5], 1.0), (&[0.6], &[1.0], 1.0)];
    for (orders, coeffs, mu) in cases {
        let m = model(orders, coeffs);
        let tr = source(&m, mu, PI / 2.0, &window_times());
        let res = peel_orders(&tr, 0.0, &cfg, IdentificationMode::Source { mu }).unwrap();
        check(&res, orders, coeffs);
        // leading term f(x0) Γ(μ+1) t^{μ+α_1} / (q_1 Γ(μ+α_1+1))
        let want = gamma(mu + 1.0) / (coeffs[0] * gamma(mu + orders[0] + 1.0));
        assert!((res.leading_composite - want).abs() <= 1e-3, "{} vs {want}", res.leading_composite);
    }
}

#[test]
fn twin_example_leading_order() {
    let m = model(&[0.5], &[4.0]);
    let a = sine_mode(&m, 2, 1.0 / (2.0 * 1f64.cos()));
    let mut times = vec![0.0];
    times.extend(window_times());
    let tr = homogeneous_with(&m, &a, 1.0, &times);
    let baseline = estimate_baseline(&tr, &IdentificationConfig::default()).unwrap();
    assert!((baseline - 1f64.sin()).abs() < 1e-12);
    let fitted = estimate_baseline(&homogeneous_with(&m, &a, 1.0, &window_times()), &IdentificationConfig::default()).unwrap();
    // one correction power only, so the fitted constant is rougher
    assert!((fitted - 1f64.sin()).abs() < 1e-3, "{fitted}");
    let (alpha, c) = estimate_leading_order(&tr, baseline, &IdentificationConfig::default()).unwrap();
    assert!((alpha - 0.5).abs() <= 1e-2);
    // (La)(1) = 4 sin 2 / (2 cos 1) = 4 sin 1 and q = 4
    let want = -(1f64.sin()) / gamma(1.5);
    assert!((c - want).abs() <= 0.02 * want.abs(), "{c} vs {want}");
}

#[test]
fn global_coefficient_scaling_only_moves_leading_composite() {
    let cfg = IdentificationConfig::default();
    let kappa = 3.0;
    let base = model(&[0.8, 0.4], &[1.0, 0.5]);
    let scaled = model(&[0.8, 0.4], &[kappa, 0.5 * kappa]);
    let r0 = peel_orders(&homogeneous(&base, 1.2, &window_times()), 0.0, &cfg, IdentificationMode::Homogeneous);
    assert!(r0.is_err(), "a wrong baseline must not fit");
    let b = 1.2f64.sin();
    let r1 = peel_orders(&homogeneous(&base, 1.2, &window_times()), b, &cfg, IdentificationMode::Homogeneous).unwrap();
    let r2 = peel_orders(&homogeneous(&scaled, 1.2, &window_times()), b, &cfg, IdentificationMode::Homogeneous).unwrap();
    assert_eq!(r1.m_hat, r2.m_hat);
    for (a, b) in r1.orders_hat.iter().zip(&r2.orders_hat).chain(r1.coeff_ratios.iter().zip(&r2.coeff_ratios)) {
        assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
    }
    let ratio = r2.leading_composite / r1.leading_composite;
    assert!((ratio - 1.0 / kappa).abs() <= 1e-3, "{ratio}");
}

#[test]
fn shrinking_the_window_barely_moves_the_leading_order() {
    let times = window_times();
    for (orders, coeffs) in BENCH {
        let m = model(orders, coeffs);
        let tr = homogeneous(&m, PI / 2.0, &times);
        let wide = IdentificationConfig::default();
        let narrow = IdentificationConfig { fit_window: (1e-6, 1e-3), ..IdentificationConfig::default() };
        let (a, _) = estimate_leading_order(&tr, 1.0, &wide).unwrap();
        let (b, _) = estimate_leading_order(&tr, 1.0, &narrow).unwrap();
        assert!((a - b).abs() < 5e-3, "{orders:?}: {a} vs {b}");
    }
}

#[test]
fn transform_residual_has_the_leading_slope() {
    let m = model(&[0.5], &[1.0]);
    let tr = homogeneous(&m, PI / 2.0, &dense());
    let p = log_spaced(1e2, 1e4, 21);
    let g = laplace_residual(&tr, 1.0, &p, 0.0).unwrap();
    // one mode, λ = 1: p û - 1 = -1 / (p^{1/2} + 1)
    for (p, g) in p.iter().zip(&g) {
        let exact = -1.0 / (p.sqrt() + 1.0);
        assert!((g - exact).abs() <= 1e-6 * exact.abs(), "{p}: {g} vs {exact}");
    }
    let top = p.len() - 1;
    let slope = (g[top].abs().ln() - g[top - 10].abs().ln()) / (p[top].ln() - p[top - 10].ln());
    assert!((slope + 0.5).abs() <= 1e-2, "{slope}");
}

#[test]
fn laplace_fit_agrees_with_time_domain() {
    let cfg = IdentificationConfig::default();
    for (orders, coeffs) in BENCH {
        let m = model(orders, coeffs);
        let tr = homogeneous(&m, PI / 2.0, &dense());
        let res = laplace_domain_fit(&tr, 1.0, &cfg, IdentificationMode::Homogeneous).unwrap();
        check(&res, orders, coeffs);
        assert_eq!(res.diagnostics.method, "laplace-domain");
        assert!(res.diagnostics.effective_floor >= cfg.residual_floor);
    }
}

#[test]
fn laplace_fit_rejects_flat_and_short_traces() {
    let cfg = IdentificationConfig::default();
    let flat = ObservationTrace::new(1.0, dense(), vec![0.7; 4001], TraceSource::Synthetic).unwrap();
    assert!(matches!(
        laplace_domain_fit(&flat, 0.7, &cfg, IdentificationMode::Homogeneous),
        Err(Error::SignalBelowFloor { .. })
    ));
    // a trace that starts too late cannot carry the transform at large p
    let m = model(&[0.5], &[1.0]);
    let late = homogeneous(&m, PI / 2.0, &log_spaced(1e-3, 1.0, 500));
    assert!(matches!(
        laplace_domain_fit(&late, 1.0, &cfg, IdentificationMode::Homogeneous),
        Err(Error::QuadratureTail { .. })
    ));
}

#[test]
fn orders_are_distinguishable_from_the_difference_exponent() {
    let times = log_spaced(1e-10, 1e-6, 60);
    let u = homogeneous(&model(&[0.8], &[1.0]), PI / 2.0, &times);
    let v = homogeneous(&model(&[0.7], &[1.0]), PI / 2.0, &times);
    match coincidence_test(&u, &v, 1.0, (1e-10, 1e-6)).unwrap() {
        CoincidenceOutcome::Divergent { exponent } => assert!((exponent - 0.7).abs() <= 0.05, "{exponent}"),
        other => panic!("{other:?}"),
    }
    assert!(coincidence_test(&u, &u, 1.0, (1e-10, 1e-6)).unwrap().is_consistent());
}

fn twin_traces(times: &[f64]) -> (ObservationTrace, ObservationTrace) {
    let mu = model(&[0.5], &[4.0]);
    let mv = model(&[0.5], &[1.0]);
    let a = sine_mode(&mu, 2, 1.0 / (2.0 * 1f64.cos()));
    let b = sine_mode(&mv, 1, 1.0);
    (homogeneous_with(&mu, &a, 1.0, times), homogeneous_with(&mv, &b, 1.0, times))
}

#[test]
fn twin_traces_coincide() {
    let times = log_spaced(1e-6, 1.0, 100);
    let (u, v) = twin_traces(&times);
    assert!(coincidence_test(&u, &v, 1.0, (1e-6, 1.0)).unwrap().is_consistent());
}

#[test]
fn dyadic_sampling_matches_full_window() {
    let samples: Vec<f64> = (1..=20).map(|m| 0.5f64.powi(m)).collect();
    let mut times = log_spaced(1e-6, 1.0, 100);
    times.extend(&samples);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (u, v) = twin_traces(&times);
    let d = sampled_equivalence_detail(&u, &v, &samples, 1.0).unwrap();
    assert!(d.agree && d.sampled.is_consistent());
    let p = homogeneous(&model(&[0.8], &[1.0]), PI / 2.0, &times);
    let q = homogeneous(&model(&[0.7], &[1.0]), PI / 2.0, &times);
    let d = sampled_equivalence_detail(&p, &q, &samples, 1.0).unwrap();
    assert!(d.agree && !d.sampled.is_consistent());
    assert!(sampled_equivalence_check(&p, &q, &samples, 1.0).unwrap());
}

#[test]
fn jitter_degrades_gracefully() {
    // no acceptance bound. Jitter relative to u swamps u - a(x0) near
    // t = 1e-6, which the monotonicity check reports; a window where the
    // signal dominates still yields the leading order.
    let m = model(&[0.8, 0.4], &[1.0, 0.5]);
    let tr = homogeneous(&m, PI / 2.0, &window_times());
    let noisy = add_relative_jitter(&tr, 1e-6, 11).unwrap();
    match estimate_leading_order(&noisy, 1.0, &IdentificationConfig::default()) {
        Ok((alpha, _)) => assert!((alpha - 0.8).abs() < 2e-2, "{alpha}"),
        Err(e) => assert!(matches!(e, Error::NonMonotone), "{e:?}"),
    }
    let cfg = IdentificationConfig { fit_window: (1e-4, 1e-2), ..IdentificationConfig::default() };
    let (alpha, _) = estimate_leading_order(&noisy, 1.0, &cfg).unwrap();
    assert!((alpha - 0.8).abs() < 2e-2, "{alpha}");
    match peel_orders(&noisy, 1.0, &cfg, IdentificationMode::Homogeneous) {
        Ok(res) => assert!((res.orders_hat[0] - 0.8).abs() < 2e-2),
        Err(e) => assert!(matches!(e, Error::FloorNotReached { .. } | Error::ClassificationAmbiguity { .. }), "{e:?}"),
    }
}

#[test]
fn result_json_round_trip() {
    let m = model(&[0.5], &[1.0]);
    let tr = homogeneous(&m, PI / 2.0, &window_times());
    let res = peel_orders(&tr, 1.0, &IdentificationConfig::default(), IdentificationMode::Homogeneous).unwrap();
    let json = res.to_json().unwrap();
    let back: IdentificationResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back, res);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn single_term_orders_are_recovered(alpha in 0.4f64..0.9, q in 0.5f64..4.0) {
        let m = model(&[alpha], &[q]);
        let tr = homogeneous(&m, PI / 2.0, &window_times());
        let res = peel_orders(&tr, 1.0, &IdentificationConfig::default(), IdentificationMode::Homogeneous).unwrap();
        prop_assert_eq!(res.m_hat, 1);
        prop_assert!((res.orders_hat[0] - alpha).abs() < 1e-6);
        prop_assert!((res.leading_composite * q * gamma(alpha + 1.0) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn coincidence_is_symmetric(a in 0.3f64..0.9, b in 0.3f64..0.9) {
        let times = log_spaced(1e-8, 1e-3, 40);
        let u = homogeneous(&model(&[a], &[1.0]), 1.0, &times);
        let v = homogeneous(&model(&[b], &[1.0]), 1.0, &times);
        let x = coincidence_test(&u, &v, 1.0, (1e-8, 1e-3)).unwrap();
        let y = coincidence_test(&v, &u, 1.0, (1e-8, 1e-3)).unwrap();
        prop_assert_eq!(x, y);
        if (a - b).abs() > 0.2 {
            let e = x.exponent().unwrap();
            prop_assert!((e - a.min(b)).abs() < 0.05, "{} vs {}", e, a.min(b));
        }
    }
}
