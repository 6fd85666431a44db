use std::sync::Arc;

use gcalc_core::functional::{alpha_rescale, evaluate, evaluate_window, FunctionalSpec};
use gcalc_core::gheat::{g_expectation, Boundary, Grid1D};
use gcalc_core::scenario::{
    default_family, estimate_over_family, euler_gsde, sample_control, simulate_gbm, CoefficientSet, ControlPolicy, Payoff, ScenarioPath,
    TimeGrid,
};
use gcalc_core::VolatilityBand;

type Payoff1d = fn(f64) -> f64;

fn band12() -> VolatilityBand {
    VolatilityBand::scalar(1.0, 2.0).unwrap()
}

fn ou_path(seed: u64, index: u64) -> ScenarioPath {
    let band = band12();
    let grid = TimeGrid::new(0.0, 1.0, 128).unwrap();
    let control = sample_control(&band, &grid, &ControlPolicy::PiecewiseRandom, seed).unwrap();
    let coeffs = CoefficientSet::scalar(|_, x| -0.5 * x, |t, _| 0.2 * t, |_, x| 1.0 + 0.1 * x.sin(), 1.0);
    euler_gsde(&coeffs, &[0.3], simulate_gbm(Arc::new(control), seed, index)).unwrap()
}

#[test]
fn functional_is_additive_over_windows() {
    let band = band12();
    let spec = FunctionalSpec::scalar(0.7, -1.3, |t, x| x * x - t, |_, x| x.cos());
    for index in 0..8 {
        let path = ou_path(11, index);
        let full = evaluate(&spec, &band, &path).unwrap();
        for split in [1, 37, 64, 127] {
            let head = evaluate_window(&spec, &band, &path, 0, split).unwrap();
            let tail = evaluate_window(&spec, &band, &path, split, 128).unwrap();
            let joined = head.terminal() + tail.terminal();
            assert!((joined - full.terminal()).abs() <= 1e-12 * (1.0 + full.terminal().abs()));
            assert_eq!(head.terminal(), full.a[split]);
        }
    }
}

#[test]
fn functional_is_linear_in_g() {
    let band = band12();
    let g1 = |_: f64, x: f64| x.sin();
    let g2 = |t: f64, x: f64| t - 2.0 * x;
    let spec = |g: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>| FunctionalSpec::scalar(0.0, 0.0, |_, _| 0.0, g);
    for index in 0..8 {
        let path = ou_path(5, index);
        let a1 = evaluate(&spec(Box::new(g1)), &band, &path).unwrap();
        let a2 = evaluate(&spec(Box::new(g2)), &band, &path).unwrap();
        let sum = evaluate(&spec(Box::new(move |t, x| 2.5 * g1(t, x) + g2(t, x))), &band, &path).unwrap();
        for k in 0..a1.a.len() {
            let want = 2.5 * a1.a[k] + a2.a[k];
            assert!((sum.a[k] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }
}

#[test]
fn alpha_rescaled_spec_gives_scaled_functional() {
    let band = band12();
    let spec = FunctionalSpec::scalar(-2.0, 0.5, |_, x| x, |_, x| 1.0 + x);
    let unit = alpha_rescale(&spec).unwrap();
    for index in 0..4 {
        let path = ou_path(9, index);
        let a = evaluate(&spec, &band, &path).unwrap().terminal();
        let b = evaluate(&unit, &band, &path).unwrap().terminal();
        assert!((b - a / -2.0).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

/// Scenario upper estimates never exceed the PDE value by more than the
/// sampling error, and come within 5 % of it once the endpoint constant
/// controls are in the family.
fn estimator_domination(n_mc: usize) -> Vec<(&'static str, f64, f64, f64)> {
    let band = band12();
    let time = TimeGrid::new(0.0, 1.0, 16).unwrap();
    let family = default_family(&band, &time, 6, 2024).unwrap();
    let pde_grid = Grid1D::with_cfl_dt(-10.0, 10.0, 801, &band, Boundary::ExtrapolateLinear).unwrap();
    let cases: [(&str, Payoff1d); 3] = [("x^2", |x| x * x), ("x^4", |x| x.powi(4)), ("|x|", f64::abs)];
    cases
        .into_iter()
        .map(|(name, phi)| {
            let pde = g_expectation(&phi, &band, &pde_grid, 1.0).unwrap();
            let est = estimate_over_family(&Payoff::terminal(move |x| phi(x[0])), None, &[0.0], &family, n_mc, 77).unwrap();
            (name, est.value, est.std_error, pde)
        })
        .collect()
}

#[test]
fn scenario_estimates_are_dominated_by_the_pde_value() {
    for (name, est, se, pde) in estimator_domination(20_000) {
        assert!(est <= pde + 3.0 * se, "{name}: {est} > {pde} + 3·{se}");
        assert!(est >= pde * 0.95, "{name}: {est} < 95% of {pde}");
    }
}
