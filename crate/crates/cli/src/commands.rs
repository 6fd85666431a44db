use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use gcalc_core::exprdsl::Expression;
use gcalc_core::functional::FunctionalSpec;
use gcalc_core::gheat::{solve_terminal, Grid1D};
use gcalc_core::harmonic::{build_example_spec, build_v0, check_harmonic, example_coefficients, uniform_grid, HarmonicProfile};
use gcalc_core::pathcheck::{
    convergence_order, mixed_ensemble, pathwise_residual, pde_residuals, product_grid, ConvergenceReport, PathwiseReport,
    PdeResidualReport, ValueFunction,
};
use gcalc_core::scenario::{default_family, estimate_over_family, simulate_gbm, CoefficientSet, Payoff, TimeGrid, UpperEstimate};
use gcalc_core::{SymMatrix, VolatilityBand};
use nalgebra::DVector;
use serde::Serialize;

use crate::config::*;
use crate::output::{write_atomic, write_json};

/// How a command ended; errors are returned separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Falsified,
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref().ok_or_else(|| anyhow!("config has no \"{name}\" section"))
}

#[derive(Serialize)]
struct GheatSummary<'a> {
    value_at_origin: f64,
    grid: &'a Grid1D,
    cfl_dt: f64,
    horizon: f64,
    n_time_levels: usize,
    phi: &'a str,
}

pub fn gheat(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let band = cfg.band.build()?;
    let g = section(&cfg.gheat, "gheat")?;
    let phi = Expression::parse(&g.phi).with_context(|| format!("gheat.phi: '{}'", g.phi))?;
    let probe = Grid1D::with_cfl_dt(g.x_min, g.x_max, g.nx, &band, g.boundary.into())?;
    let cfl_dt = probe.max_dt(&band)?;
    let grid = match g.dt {
        Some(dt) => Grid1D::new(g.x_min, g.x_max, g.nx, dt, g.boundary.into())?,
        None => probe,
    };
    let horizon = g.horizon;
    let terminal = |x: f64| phi.eval_or_nan(horizon, x);
    let surface = solve_terminal(&terminal, &band, &grid, horizon)?;
    let mut csv = Vec::new();
    surface.write_csv(&mut csv, g.surface_stride.max(1))?;
    write_atomic(out, "surface.csv", &csv)?;
    let summary = GheatSummary {
        value_at_origin: surface.value_at(0.0, 0.0)?,
        grid: &grid,
        cfl_dt,
        horizon,
        n_time_levels: surface.times.len(),
        phi: &g.phi,
    };
    write_json(out, "summary.json", &summary)?;
    Ok(Outcome::Pass)
}

fn coefficient_set(c: &CoefficientsConfig) -> Result<CoefficientSet> {
    let b = field(&c.b.expression("coefficients.b")?);
    let h = field(&c.h.expression("coefficients.h")?);
    let s = field(&c.sigma.expression("coefficients.sigma")?);
    Ok(CoefficientSet::scalar(move |t, x| b(t, x), move |t, x| h(t, x), move |t, x| s(t, x), c.lipschitz_k))
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    estimate: &'a UpperEstimate,
    payoff: &'a str,
    horizon: f64,
    n_steps: usize,
    n_controls: usize,
    n_mc: usize,
    x0: f64,
    seed: u64,
    used_coefficients: bool,
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let band = cfg.band.build()?;
    let s = section(&cfg.simulate, "simulate")?;
    let payoff_expr = Expression::parse(&s.payoff).with_context(|| format!("simulate.payoff: '{}'", s.payoff))?;
    let coeffs = if s.use_coefficients { Some(coefficient_set(section(&cfg.coefficients, "coefficients")?)?) } else { None };
    let grid = TimeGrid::new(0.0, s.horizon, s.n_steps)?;
    let family = default_family(&band, &grid, s.n_controls, cfg.seed)?;
    let horizon = s.horizon;
    let pe = payoff_expr.clone();
    let payoff = Payoff::terminal(move |x| pe.eval_or_nan(horizon, x[0]));
    let est = estimate_over_family(&payoff, coeffs.as_ref(), &[s.x0], &family, s.n_mc, cfg.seed)?;
    if !est.value.is_finite() {
        bail!("payoff '{}' produced a non-finite estimate", s.payoff);
    }

    if s.dump_paths {
        let mut csv = String::new();
        let mut rows = 0;
        'dump: for member in &family {
            for j in 0..s.n_mc {
                let path = simulate_gbm(member.control.clone(), cfg.seed, j as u64);
                let path = match &coeffs {
                    Some(c) => gcalc_core::scenario::euler_gsde(c, &[s.x0], path)?,
                    None => path,
                };
                let mut buf = Vec::new();
                path.write_csv(&mut buf, rows == 0)?;
                let text = String::from_utf8(buf)?;
                for (i, line) in text.lines().enumerate() {
                    if rows == 0 && i == 0 {
                        csv.push_str("control,sample,");
                        csv.push_str(line);
                        csv.push('\n');
                        continue;
                    }
                    if rows >= s.max_path_rows {
                        break 'dump;
                    }
                    csv.push_str(&format!("{},{j},{line}\n", member.label));
                    rows += 1;
                }
            }
        }
        write_atomic(out, "paths.csv", csv.as_bytes())?;
    }

    let summary = SimulateSummary {
        estimate: &est,
        payoff: &s.payoff,
        horizon: s.horizon,
        n_steps: s.n_steps,
        n_controls: family.len(),
        n_mc: s.n_mc,
        x0: s.x0,
        seed: cfg.seed,
        used_coefficients: coeffs.is_some(),
    };
    write_json(out, "estimate.json", &summary)?;
    Ok(Outcome::Pass)
}

/// The harmonic profile and everything derived from it.
struct Example {
    profile: HarmonicProfile,
    value: ValueFunction,
    spec: FunctionalSpec,
    coeffs: CoefficientSet,
    h: Expression,
    sigma: Expression,
}

fn build_example(e: &ExampleConfig, band: &VolatilityBand) -> Result<Example> {
    let parse = |what: &str, s: &str| Expression::parse(s).with_context(|| format!("example4_1.{what}: '{s}'"));
    let h = parse("h", &e.h)?;
    let sigma = parse("sigma", &e.sigma)?;
    let phi = parse("phi", &e.phi)?;
    let phi_prime = parse("phi_prime", &e.phi_prime)?;
    let b = parse("b", &e.b)?;
    let grid = uniform_grid(e.x_min, e.x_max, e.dx)?;
    let profile = build_v0(field_x(&h), field_x(&sigma), grid, e.v0_at_0, e.v0prime_at_0)?;
    let setup = build_example_spec(&profile, field_t(&phi), field_t(&phi_prime), field(&b), band)?;
    let coeffs = example_coefficients(&profile, field(&b), 1.0);
    Ok(Example { profile, value: setup.value, spec: setup.spec, coeffs, h, sigma })
}

#[derive(Serialize)]
struct SpecSummary<'a> {
    alpha: f64,
    beta: f64,
    f: &'static str,
    g: &'static str,
    v: &'static str,
    example: &'a ExampleConfig,
    band: &'a BandConfig,
    v0_increment_0_1: f64,
    harmonic_residual: f64,
}

pub fn example(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let band = cfg.band.build()?;
    let e = section(&cfg.example4_1, "example4_1")?;
    let ex = build_example(e, &band)?;
    let mut csv = Vec::new();
    ex.profile.write_csv(&mut csv)?;
    write_atomic(out, "profile.csv", &csv)?;

    let (h, sigma) = (ex.h.clone(), ex.sigma.clone());
    let residual = check_harmonic(&ex.profile, &|x| h.eval_or_nan(0.0, x), &|x| sigma.eval_or_nan(0.0, x))?;
    let summary = SpecSummary {
        alpha: ex.spec.alpha,
        beta: ex.spec.beta,
        f: "1/2 G^-1(phi'(t) V0(x) + b(t,x) phi(t) V0'(x))",
        g: "sigma(x) phi(t) V0'(x)",
        v: "phi(t) V0(x)",
        example: e,
        band: &cfg.band,
        v0_increment_0_1: ex.profile.v0(1.0)? - ex.profile.v0(0.0)?,
        harmonic_residual: residual,
    };
    write_json(out, "spec.json", &summary)?;

    let verify_cfg = ExperimentConfig {
        band: cfg.band.clone(),
        coefficients: None,
        functional: None,
        value_function: None,
        example4_1: Some(e.clone()),
        gheat: None,
        simulate: None,
        verify: Some(VerifyConfig {
            x0: 0.0,
            horizon: [0.0, 1.0],
            dt_list: (6..=10).map(|k| 0.5f64.powi(k)).collect(),
            n_scenarios: 256,
            pde_grid: PdeGridConfig { t_min: 0.0, t_max: 1.0, nt: 21, x_min: -2.0, x_max: 2.0, nx: 401 },
            pde_tolerance: 1e-8,
            min_slope: 0.4,
            max_pathwise: None,
            f_perturbation: 0.0,
            g_perturbation: 0.0,
        }),
        seed: cfg.seed,
        output_dir: None,
    };
    write_json(out, "verify_config.json", &verify_cfg)?;
    Ok(Outcome::Pass)
}

fn user_triple(cfg: &ExperimentConfig) -> Result<(ValueFunction, FunctionalSpec, CoefficientSet)> {
    let coeffs = coefficient_set(section(&cfg.coefficients, "coefficients")?)?;
    let fc = section(&cfg.functional, "functional")?;
    let f = field(&fc.f.expression("functional.f")?);
    let g = field(&fc.g.expression("functional.g")?);
    let spec = FunctionalSpec::scalar(fc.alpha, fc.beta, move |t, x| f(t, x), move |t, x| g(t, x));
    let vc = section(&cfg.value_function, "value_function")?;
    let v_expr = Expression::parse(&vc.v).with_context(|| format!("value_function.v: '{}'", vc.v))?;
    let v = field(&v_expr);
    let v_field: gcalc_core::pathcheck::ScalarField = Arc::new(move |t, x| v(t, x[0]));
    let value = match vc.mode {
        ValueMode::FiniteDifference => ValueFunction::finite_difference(1, v_field, vc.hx, vc.ht)?,
        ValueMode::Analytic => {
            let need = |e: &Option<Entry>, name: &str| {
                e.as_ref()
                    .ok_or_else(|| anyhow!("value_function.{name} is required in analytic mode"))
                    .and_then(|e| e.expression(&format!("value_function.{name}")))
            };
            let dv_dt = need(&vc.dv_dt.as_deref().map(Entry::from), "dv_dt")?;
            let grad = field(&need(&vc.grad, "grad")?);
            let hess = field(&need(&vc.hessian, "hessian")?);
            let dv_dt = field(&dv_dt);
            ValueFunction::analytic(
                1,
                v_field,
                Arc::new(move |t, x| dv_dt(t, x[0])),
                Arc::new(move |t, x| DVector::from_element(1, grad(t, x[0]))),
                Arc::new(move |t, x| SymMatrix::scalar(hess(t, x[0]))),
            )
        }
    };
    Ok((value, spec, coeffs))
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    pde: &'a PdeResidualReport,
    pathwise: &'a PathwiseReport,
    convergence: &'a ConvergenceReport,
    thresholds: &'a VerifyConfig,
    /// Empty when every check passed.
    flags: Vec<&'static str>,
    passed: bool,
}

pub fn verify(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let band = cfg.band.build()?;
    let vc = section(&cfg.verify, "verify")?;
    let (value, spec, coeffs) = match &cfg.example4_1 {
        Some(e) => {
            let ex = build_example(e, &band)?;
            (ex.value, ex.spec, ex.coeffs)
        }
        None => user_triple(cfg)?,
    };
    let mut spec = spec;
    if vc.f_perturbation != 0.0 {
        spec = spec.with_f_shift(vc.f_perturbation);
    }
    if vc.g_perturbation != 0.0 {
        spec = spec.with_g_shift(vc.g_perturbation);
    }

    let g = &vc.pde_grid;
    let points = product_grid(g.t_min, g.t_max, g.nt, &[g.x_min], &[g.x_max], g.nx);
    let pde = pde_residuals(&value, &coeffs, &spec, &band, &points)?;
    if !pde.max().is_finite() {
        bail!("PDE residuals are not finite on the configured grid (is it inside the value function's domain?)");
    }

    let horizon = (vc.horizon[0], vc.horizon[1]);
    let x0 = [vc.x0];
    let convergence = convergence_order(&value, &coeffs, &spec, &band, &x0, horizon, &vc.dt_list, vc.n_scenarios, cfg.seed)?;
    let (coarsest, finest) = {
        let steps = |dt: f64| ((horizon.1 - horizon.0) / dt).round() as usize;
        (steps(vc.dt_list[0]), steps(*vc.dt_list.last().unwrap()))
    };
    let coarse = TimeGrid::new(horizon.0, horizon.1, coarsest)?;
    let paths = mixed_ensemble(&coeffs, &x0, &band, &coarse, finest / coarsest, 1, vc.n_scenarios, cfg.seed)?;
    let pathwise = pathwise_residual(&value, &spec, &band, &paths, horizon.0)?;
    if !pathwise.ensemble_max.is_finite() {
        bail!("pathwise residual is not finite: scenario paths leave the value function's domain (widen the profile range)");
    }

    let mut flags = Vec::new();
    if pde.max() > vc.pde_tolerance {
        flags.push("pde residual");
    }
    // A NaN slope counts as a plateau.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !convergence.degenerate && !(convergence.slope >= vc.min_slope) {
        flags.push("pathwise plateau");
    }
    if let Some(cap) = vc.max_pathwise {
        if pathwise.ensemble_max > cap {
            flags.push("pathwise level");
        }
    }
    let passed = flags.is_empty();
    let report = VerifyReport { pde: &pde, pathwise: &pathwise, convergence: &convergence, thresholds: vc, flags, passed };
    write_json(out, "verify.json", &report)?;
    Ok(if passed { Outcome::Pass } else { Outcome::Falsified })
}
