//! Numerical checks of path independence.
//!
//! `A^{f,g}` is path independent with potential `V` iff
//!
//! ```text
//! ∂ₜV + ⟨∇V, b⟩ − β G(f) = 0,
//! α fᵢⱼ − ⟨∇V, hᵢⱼ⟩ − ½⟨σᵢ, ∇²V σⱼ⟩ = 0,
//! g − σᵀ∇V = 0.
//! ```
//!
//! This module measures the three residuals on a grid, the pathwise defect
//! `A_{s,t} − (V(t,X_t) − V(s,X_s))` along scenarios and its decay under
//! refinement, and provides the `δₙ`-norm estimator and the Itô-integral
//! harness used to test the uniqueness of the `dt / d⟨B⟩ / dB` decomposition.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{evaluate, FunctionalSpec, SymField};
use crate::gcore::{eval_g_matrix, AscentOptions, VolatilityBand};
use crate::linalg::SymMatrix;
use crate::par;
use crate::scenario::{
    euler_gsde, sample_control, simulate_feedback, simulate_gbm, simulate_gbm_nested, CoefficientSet, ControlEstimate, ControlPath,
    ControlPolicy, FamilyMember, FeedbackRule, ScenarioPath, Sign, TimeGrid, VectorField,
};

pub type ScalarField = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Default finite-difference steps.
pub const FD_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { hx: f64, ht: f64 },
}

/// A candidate potential `V(t, x)` with its derivatives.
#[derive(Clone)]
pub struct ValueFunction {
    dim: usize,
    v: ScalarField,
    dv_dt: Option<ScalarField>,
    grad: Option<VectorField>,
    hessian: Option<SymField>,
    mode: DerivativeMode,
}

impl ValueFunction {
    pub fn analytic(dim: usize, v: ScalarField, dv_dt: ScalarField, grad: VectorField, hessian: SymField) -> Self {
        Self { dim, v, dv_dt: Some(dv_dt), grad: Some(grad), hessian: Some(hessian), mode: DerivativeMode::Analytic }
    }

    /// Derivatives by centered differences with one Richardson step.
    pub fn finite_difference(dim: usize, v: ScalarField, hx: f64, ht: f64) -> Result<Self> {
        if !(hx > 0.0 && ht > 0.0) {
            return Err(Error::InvalidInput(format!("finite-difference steps must be positive, got hx={hx} ht={ht}")));
        }
        Ok(Self { dim, v, dv_dt: None, grad: None, hessian: None, mode: DerivativeMode::FiniteDifference { hx, ht } })
    }

    /// `V ≡ c` with zero derivatives.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self::analytic(
            dim,
            Arc::new(move |_, _| c),
            Arc::new(|_, _| 0.0),
            Arc::new(move |_, _| DVector::zeros(dim)),
            Arc::new(move |_, _| SymMatrix::zeros(dim)),
        )
    }

    /// The same `V` with derivatives recomputed by finite differences.
    pub fn to_finite_difference(&self, hx: f64, ht: f64) -> Result<Self> {
        Self::finite_difference(self.dim, self.v.clone(), hx, ht)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        (self.v)(t, x)
    }

    pub fn dv_dt(&self, t: f64, x: &[f64]) -> f64 {
        match (&self.dv_dt, self.mode) {
            (Some(f), _) => f(t, x),
            (None, DerivativeMode::FiniteDifference { ht, .. }) => {
                let d1 = |h: f64| ((self.v)(t + h, x) - (self.v)(t - h, x)) / (2.0 * h);
                richardson(d1(ht), d1(ht / 2.0))
            }
            (None, DerivativeMode::Analytic) => unreachable!("analytic value functions carry all derivatives"),
        }
    }

    pub fn grad(&self, t: f64, x: &[f64]) -> DVector<f64> {
        match (&self.grad, self.mode) {
            (Some(f), _) => f(t, x),
            (None, DerivativeMode::FiniteDifference { hx, .. }) => {
                let mut y = x.to_vec();
                DVector::from_fn(self.dim, |i, _| {
                    let mut d1 = |h: f64| {
                        y[i] = x[i] + h;
                        let up = (self.v)(t, &y);
                        y[i] = x[i] - h;
                        let down = (self.v)(t, &y);
                        y[i] = x[i];
                        (up - down) / (2.0 * h)
                    };
                    let (coarse, fine) = (d1(hx), d1(hx / 2.0));
                    richardson(coarse, fine)
                })
            }
            (None, DerivativeMode::Analytic) => unreachable!("analytic value functions carry all derivatives"),
        }
    }

    pub fn hessian(&self, t: f64, x: &[f64]) -> SymMatrix {
        match (&self.hessian, self.mode) {
            (Some(f), _) => f(t, x),
            (None, DerivativeMode::FiniteDifference { hx, .. }) => {
                let d = self.dim;
                let centre = (self.v)(t, x);
                let mut y = x.to_vec();
                let mut eval_at = |shifts: &[(usize, f64)]| {
                    for &(i, s) in shifts {
                        y[i] += s;
                    }
                    let v = (self.v)(t, &y);
                    y.copy_from_slice(x);
                    v
                };
                let mut m = DMatrix::zeros(d, d);
                for i in 0..d {
                    let mut second = |h: f64| (eval_at(&[(i, h)]) - 2.0 * centre + eval_at(&[(i, -h)])) / (h * h);
                    let (coarse, fine) = (second(hx), second(hx / 2.0));
                    m[(i, i)] = richardson(coarse, fine);
                    for j in 0..i {
                        let mut mixed = |h: f64| {
                            (eval_at(&[(i, h), (j, h)]) - eval_at(&[(i, h), (j, -h)]) - eval_at(&[(i, -h), (j, h)])
                                + eval_at(&[(i, -h), (j, -h)]))
                                / (4.0 * h * h)
                        };
                        let (coarse, fine) = (mixed(hx), mixed(hx / 2.0));
                        m[(i, j)] = richardson(coarse, fine);
                        m[(j, i)] = m[(i, j)];
                    }
                }
                SymMatrix::new(m).expect("square Hessian")
            }
            (None, DerivativeMode::Analytic) => unreachable!("analytic value functions carry all derivatives"),
        }
    }
}

fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct EvalPoint {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridDescription {
    pub n_points: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

impl GridDescription {
    fn of(points: &[EvalPoint]) -> Self {
        let d = points.first().map_or(0, |p| p.x.len());
        let mut g = GridDescription {
            n_points: points.len(),
            t_min: f64::INFINITY,
            t_max: f64::NEG_INFINITY,
            x_min: vec![f64::INFINITY; d],
            x_max: vec![f64::NEG_INFINITY; d],
        };
        for p in points {
            g.t_min = g.t_min.min(p.t);
            g.t_max = g.t_max.max(p.t);
            for i in 0..d {
                g.x_min[i] = g.x_min[i].min(p.x[i]);
                g.x_max[i] = g.x_max[i].max(p.x[i]);
            }
        }
        g
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PdeResidualReport {
    pub sup_r1: f64,
    pub sup_r2: f64,
    pub sup_r3: f64,
    pub grid: GridDescription,
    pub worst_r1: Option<EvalPoint>,
    pub worst_r2: Option<EvalPoint>,
    pub worst_r3: Option<EvalPoint>,
    pub lower_bound_only: bool,
}

impl PdeResidualReport {
    pub fn max(&self) -> f64 {
        nan_max(nan_max(self.sup_r1, self.sup_r2), self.sup_r3)
    }
}

/// Max that propagates NaN.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Cartesian `(t, x)` grid with `nt` times on `[t0, t1]` and `nx` points per
/// axis on the box `[lo, hi]`.
pub fn product_grid(t0: f64, t1: f64, nt: usize, lo: &[f64], hi: &[f64], nx: usize) -> Vec<EvalPoint> {
    let lin = |a: f64, b: f64, n: usize, i: usize| if n <= 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
    let d = lo.len();
    let per_t = nx.pow(d as u32);
    let mut out = Vec::with_capacity(nt * per_t);
    for it in 0..nt {
        let t = lin(t0, t1, nt, it);
        for flat in 0..per_t {
            let mut rem = flat;
            let x = (0..d)
                .map(|i| {
                    let k = rem % nx;
                    rem /= nx;
                    lin(lo[i], hi[i], nx, k)
                })
                .collect();
            out.push(EvalPoint { t, x });
        }
    }
    out
}

/// Sup norms of the three residual lines over `points`.
pub fn pde_residuals(
    v: &ValueFunction,
    coeffs: &CoefficientSet,
    spec: &FunctionalSpec,
    band: &VolatilityBand,
    points: &[EvalPoint],
) -> Result<PdeResidualReport> {
    let d = coeffs.dim();
    if v.dim() != d || band.dim() != d || points.iter().any(|p| p.x.len() != d) {
        return Err(Error::Dimension(format!("value function d = {}, coefficients d = {d}, band d = {}", v.dim(), band.dim())));
    }
    let opts = AscentOptions::default();
    let rows = par::map_slice(points, |p| -> Result<([f64; 3], bool)> {
        let (t, x) = (p.t, p.x.as_slice());
        let grad = v.grad(t, x);
        let hess = v.hessian(t, x);
        let f = (spec.f)(t, x);
        let gv = eval_g_matrix(&f, band, &opts)?;
        let b = (coeffs.b)(t, x);
        let r1 = (v.dv_dt(t, x) + grad.dot(&b) - spec.beta * gv.value).abs();
        let sigma = (coeffs.sigma)(t, x);
        let hs = hess.as_matrix() * &sigma;
        let mut r2 = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let quad = sigma.column(i).dot(&hs.column(j));
                let r = (spec.alpha * f.get(i, j) - grad.dot(&coeffs.h_ij(i, j, t, x)) - 0.5 * quad).abs();
                r2 = nan_max(r2, r);
            }
        }
        let g = (spec.g)(t, x);
        let r3 = if g.iter().chain(grad.iter()).any(|v| v.is_nan()) { f64::NAN } else { (g - sigma.transpose() * &grad).amax() };
        Ok(([r1, r2, r3], gv.lower_bound_only))
    });
    let mut sups = [0.0f64; 3];
    let mut worst: [Option<EvalPoint>; 3] = [None, None, None];
    let mut lower_bound_only = false;
    for (p, row) in points.iter().zip(rows) {
        let (r, lb) = row?;
        lower_bound_only |= lb;
        for l in 0..3 {
            if sups[l].is_nan() {
                continue;
            }
            if r[l].is_nan() || r[l] > sups[l] || worst[l].is_none() {
                sups[l] = if r[l].is_nan() { f64::NAN } else { r[l].max(sups[l]) };
                worst[l] = Some(p.clone());
            }
        }
    }
    let [worst_r1, worst_r2, worst_r3] = worst;
    Ok(PdeResidualReport {
        sup_r1: sups[0],
        sup_r2: sups[1],
        sup_r3: sups[2],
        grid: GridDescription::of(points),
        worst_r1,
        worst_r2,
        worst_r3,
        lower_bound_only,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PathwiseReport {
    pub per_scenario: Vec<f64>,
    pub ensemble_max: f64,
    pub ensemble_mean: f64,
    pub dt: f64,
}

/// `max_k |A[k] − (V(t_k, X_k) − V(s, X_0))|` for every scenario.
pub fn pathwise_residual(
    v: &ValueFunction,
    spec: &FunctionalSpec,
    band: &VolatilityBand,
    scenarios: &[ScenarioPath],
    s: f64,
) -> Result<PathwiseReport> {
    if scenarios.is_empty() {
        return Err(Error::InvalidInput("no scenarios".into()));
    }
    let dt = scenarios[0].grid().dt();
    let per = par::map_slice(scenarios, |path| -> Result<f64> {
        let trace = evaluate(spec, band, path)?;
        let grid = path.grid();
        let x0 = path.x_node(0).expect("evaluate checks the state");
        let v0 = v.value(s, x0);
        let mut worst = 0.0f64;
        for (k, a) in trace.a.iter().enumerate() {
            let x = path.x_node(k).expect("evaluate checks the state");
            worst = nan_max(worst, (a - (v.value(grid.t(k), x) - v0)).abs());
        }
        Ok(worst)
    });
    let per_scenario = per.into_iter().collect::<Result<Vec<f64>>>()?;
    let ensemble_max = per_scenario.iter().copied().fold(0.0, nan_max);
    let ensemble_mean = per_scenario.iter().sum::<f64>() / per_scenario.len() as f64;
    Ok(PathwiseReport { per_scenario, ensemble_max, ensemble_mean, dt })
}

/// Scenario policies cycled through by [`mixed_ensemble`].
pub const MIXED_POLICIES: [&str; 6] = ["fixed_lower", "fixed_upper", "constant_random", "piecewise_random", "bang_bang", "feedback"];

/// The `i`-th scenario of the mixed-policy ensemble at a refinement level.
///
/// Controls are drawn on `coarse` and repeated on finer grids; the feedback
/// policy (`σ̄` while `B¹ > 0`, else `σ̲`) is re-evaluated on each level. All
/// levels aggregate normals of the finest grid, `substeps` per step, so the
/// Brownian skeleton is shared across levels.
pub fn mixed_scenario(
    band: &VolatilityBand,
    coarse: &TimeGrid,
    factor: usize,
    substeps: usize,
    seed: u64,
    index: u64,
) -> Result<ScenarioPath> {
    let control_seed = seed ^ index.wrapping_mul(0x2545_f491_4f6c_dd1d).rotate_left(17);
    let policy = match index as usize % MIXED_POLICIES.len() {
        0 => ControlPolicy::Fixed(band.lower().clone()),
        1 => ControlPolicy::Fixed(band.upper().clone()),
        2 => ControlPolicy::ConstantRandom,
        3 => ControlPolicy::PiecewiseRandom,
        4 => ControlPolicy::BangBang(vec![Sign::Plus, Sign::Minus]),
        _ => {
            let (lo, hi) = (band.lower().clone(), band.upper().clone());
            let rule: FeedbackRule = Arc::new(move |_, b| if b[0] > 0.0 { hi.clone() } else { lo.clone() });
            return simulate_feedback(band, &coarse.refined(factor), &rule, seed, index, substeps);
        }
    };
    let control = sample_control(band, coarse, &policy, control_seed)?.refined(factor);
    Ok(simulate_gbm_nested(Arc::new(control), seed, index, substeps))
}

/// `n` scenarios of [`mixed_scenario`] with the G-SDE integrated from `x0`.
#[allow(clippy::too_many_arguments)]
pub fn mixed_ensemble(
    coeffs: &CoefficientSet,
    x0: &[f64],
    band: &VolatilityBand,
    coarse: &TimeGrid,
    factor: usize,
    substeps: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<ScenarioPath>> {
    par::map_indices(n, |i| euler_gsde(coeffs, x0, mixed_scenario(band, coarse, factor, substeps, seed, i as u64)?)).into_iter().collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    pub ensemble_max: Vec<f64>,
    pub ensemble_mean: Vec<f64>,
    /// Least-squares slope of `log(ensemble max)` against `log(dt)`;
    /// `+∞` when the residuals vanish.
    pub slope: f64,
    pub degenerate: bool,
}

/// Refinement levels `t_start..t_end` with the given decreasing step sizes.
/// Every step count must divide the finest one.
#[allow(clippy::too_many_arguments)]
pub fn convergence_order(
    v: &ValueFunction,
    coeffs: &CoefficientSet,
    spec: &FunctionalSpec,
    band: &VolatilityBand,
    x0: &[f64],
    horizon: (f64, f64),
    dt_list: &[f64],
    n_scenarios: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    if dt_list.len() < 3 {
        return Err(Error::InvalidInput("need at least three step sizes".into()));
    }
    if dt_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("step sizes must be strictly decreasing".into()));
    }
    let (t0, t1) = horizon;
    let steps: Vec<usize> = dt_list
        .iter()
        .map(|dt| {
            let n = ((t1 - t0) / dt).round();
            if n < 1.0 || ((t1 - t0) / n - dt).abs() > 1e-9 * dt {
                Err(Error::InvalidInput(format!("dt = {dt} does not divide [{t0}, {t1}]")))
            } else {
                Ok(n as usize)
            }
        })
        .collect::<Result<_>>()?;
    let (coarsest, finest) = (steps[0], *steps.last().unwrap());
    if steps.iter().any(|n| finest % n != 0 || n % coarsest != 0) {
        return Err(Error::InvalidInput("step counts must be nested".into()));
    }
    let coarse = TimeGrid::new(t0, t1, coarsest)?;
    let mut ensemble_max = Vec::with_capacity(steps.len());
    let mut ensemble_mean = Vec::with_capacity(steps.len());
    for &n in &steps {
        let paths = mixed_ensemble(coeffs, x0, band, &coarse, n / coarsest, finest / n, n_scenarios, seed)?;
        let rep = pathwise_residual(v, spec, band, &paths, t0)?;
        ensemble_max.push(rep.ensemble_max);
        ensemble_mean.push(rep.ensemble_mean);
    }
    let (slope, degenerate) = if ensemble_max.iter().any(|r| !(*r > 0.0)) {
        (f64::INFINITY, true)
    } else {
        let xs: Vec<f64> = dt_list.iter().map(|d| d.ln()).collect();
        let ys: Vec<f64> = ensemble_max.iter().map(|r| r.ln()).collect();
        (ls_slope(&xs, &ys), false)
    };
    Ok(ConvergenceReport { dts: dt_list.to_vec(), ensemble_max, ensemble_mean, slope, degenerate })
}

pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub type StepVector = Arc<dyn Fn(usize, &ScenarioPath) -> DVector<f64> + Send + Sync>;
pub type StepMatrices = Arc<dyn Fn(usize, &ScenarioPath) -> Vec<DMatrix<f64>> + Send + Sync>;
pub type StepMatrix = Arc<dyn Fn(usize, &ScenarioPath) -> DMatrix<f64> + Send + Sync>;

/// Per-step integrands of `X = ∫ξ dt + Σᵢⱼ∫ηⁱʲ d⟨Bⁱ,Bʲ⟩ + ∫ζ dB` with
/// values in `ℝᵐ`: `ξ` is an `m`-vector, `η` is `m` matrices of size `d×d`
/// (one per output component), `ζ` is `m×d`.
#[derive(Clone)]
pub struct ItoIntegrands {
    pub m: usize,
    pub xi: StepVector,
    pub eta: StepMatrices,
    pub zeta: StepMatrix,
}

impl ItoIntegrands {
    pub fn zero(m: usize, d: usize) -> Self {
        Self::constant(DVector::zeros(m), vec![DMatrix::zeros(d, d); m], DMatrix::zeros(m, d))
    }

    pub fn constant(xi: DVector<f64>, eta: Vec<DMatrix<f64>>, zeta: DMatrix<f64>) -> Self {
        let m = xi.len();
        Self { m, xi: Arc::new(move |_, _| xi.clone()), eta: Arc::new(move |_, _| eta.clone()), zeta: Arc::new(move |_, _| zeta.clone()) }
    }

    /// One-dimensional constant triple.
    pub fn scalar(xi: f64, eta: f64, zeta: f64) -> Self {
        Self::constant(DVector::from_element(1, xi), vec![DMatrix::from_element(1, 1, eta)], DMatrix::from_element(1, 1, zeta))
    }
}

/// Left-endpoint sums of the three integrals, `X[0] = 0`.
pub fn integrate_ito(integrands: &ItoIntegrands, path: &ScenarioPath) -> Vec<DVector<f64>> {
    let (m, d) = (integrands.m, path.dim());
    let dt = path.grid().dt();
    let mut out = Vec::with_capacity(path.n_steps() + 1);
    let mut x = DVector::zeros(m);
    out.push(x.clone());
    for k in 0..path.n_steps() {
        let xi = (integrands.xi)(k, path);
        let eta = (integrands.eta)(k, path);
        let zeta = (integrands.zeta)(k, path);
        let qv = path.qv_increment(k);
        let db = path.db(k);
        for l in 0..m {
            let mut inc = xi[l] * dt;
            for i in 0..d {
                for j in 0..d {
                    inc += eta[l][(i, j)] * qv[i * d + j];
                }
            }
            for i in 0..d {
                inc += zeta[(l, i)] * db[i];
            }
            x[l] += inc;
        }
        out.push(x.clone());
    }
    out
}

/// `δₙ` on `[0, 1]`: `(−1)ⁱ` on `(i/n, (i+1)/n]` for `1 ≤ i ≤ n−1`, `0` on
/// `[0, 1/n]`.
pub fn delta_n(n: usize, s: f64) -> f64 {
    if s <= 1.0 / n as f64 || s > 1.0 {
        return 0.0;
    }
    let i = ((s * n as f64).ceil() as usize).saturating_sub(1).min(n - 1);
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `∫_a^b δₙ(s) ds` computed exactly from the breakpoints, `0 ≤ a ≤ b ≤ 1`.
pub fn delta_n_integral(n: usize, a: f64, b: f64) -> f64 {
    let nf = n as f64;
    let mut total = 0.0;
    let first = ((a * nf).floor() as usize).max(1);
    for i in first..n {
        let (lo, hi) = (i as f64 / nf, (i + 1) as f64 / nf);
        let overlap = b.min(hi) - a.max(lo);
        if lo >= b {
            break;
        }
        if overlap > 0.0 {
            total += if i % 2 == 0 { overlap } else { -overlap };
        }
    }
    total
}

/// The `δₙ`-aligned bang-bang control (`σ̄` where `δₙ = +1`, `σ̲` elsewhere)
/// and its flip (`σ̲` where `δₙ = +1`, `σ̄` elsewhere), decided at step
/// midpoints of the time-normalized grid.
pub fn aligned_bang_bang(band: &VolatilityBand, grid: &TimeGrid, n: usize) -> Result<(FamilyMember, FamilyMember)> {
    let span = grid.t_end - grid.t_start;
    let mut aligned = Vec::with_capacity(grid.n_steps);
    let mut flipped = Vec::with_capacity(grid.n_steps);
    for k in 0..grid.n_steps {
        let mid = ((grid.t(k) + grid.t(k + 1)) / 2.0 - grid.t_start) / span;
        let plus = delta_n(n, mid) > 0.0;
        aligned.push(if plus { band.upper() } else { band.lower() }.clone());
        flipped.push(if plus { band.lower() } else { band.upper() }.clone());
    }
    Ok((
        FamilyMember { label: format!("aligned_bang_bang_{n}"), control: Arc::new(ControlPath::new(*grid, aligned, band)?) },
        FamilyMember { label: format!("flipped_bang_bang_{n}"), control: Arc::new(ControlPath::new(*grid, flipped, band)?) },
    ))
}

pub type StepSym = Arc<dyn Fn(usize, &ScenarioPath) -> SymMatrix + Send + Sync>;

#[derive(Clone, Debug, Serialize)]
pub struct DeltaNormReport {
    pub n: usize,
    pub estimate: f64,
    pub argmax_label: String,
    pub c0: f64,
    #[serde(rename = "C0")]
    pub big_c0: f64,
    /// Estimate of `Ē ∫ ‖η‖_HS dt` (maximum over the family of the means).
    pub eta_l1: f64,
    pub lower_envelope: f64,
    pub upper_envelope: f64,
    pub per_control: Vec<ControlEstimate>,
}

/// `max over the family of the Monte-Carlo mean of ∫ δₙ(s) ⟨η_s, d⟨B⟩_s⟩_HS`,
/// with `δₙ` integrated exactly over each step (time rescaled to `[0, 1]`).
pub fn delta_n_norm(
    eta: &StepSym,
    band: &VolatilityBand,
    n: usize,
    family: &[FamilyMember],
    n_mc: usize,
    seed: u64,
) -> Result<DeltaNormReport> {
    if n < 2 {
        return Err(Error::InvalidInput("δₙ needs n >= 2".into()));
    }
    if family.is_empty() || n_mc == 0 {
        return Err(Error::InvalidInput("empty control family or sample".into()));
    }
    let d = band.dim();
    let gap = (band.upper_sq() - band.lower_sq()).scale(0.5);
    let c0 = gap.min_eigenvalue();
    let big_c0 = gap.hs_norm();

    let mut per_control = Vec::with_capacity(family.len());
    let mut eta_l1 = 0.0f64;
    for member in family {
        let grid = *member.control.grid();
        let span = grid.t_end - grid.t_start;
        let dt = grid.dt();
        let weights: Vec<f64> = (0..grid.n_steps)
            .map(|k| {
                let a = (grid.t(k) - grid.t_start) / span;
                let b = (grid.t(k + 1) - grid.t_start) / span;
                delta_n_integral(n, a, b) / (b - a)
            })
            .collect();
        let samples = par::map_indices(n_mc, |j| {
            let path = simulate_gbm(member.control.clone(), seed, j as u64);
            let (mut stat, mut l1) = (0.0, 0.0);
            for (k, w) in weights.iter().enumerate() {
                let e = eta(k, &path);
                let qv = path.qv_increment(k);
                let mut hs = 0.0;
                for i in 0..d {
                    for l in 0..d {
                        hs += e.get(i, l) * qv[i * d + l];
                    }
                }
                stat += w * hs;
                l1 += e.hs_norm() * dt;
            }
            (stat, l1)
        });
        let stats: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let mean = stats.iter().sum::<f64>() / n_mc as f64;
        let std_error = if n_mc > 1 { crate::scenario::mean_and_se(&stats).1 } else { 0.0 };
        eta_l1 = eta_l1.max(samples.iter().map(|s| s.1).sum::<f64>() / n_mc as f64);
        per_control.push(ControlEstimate { label: member.label.clone(), mean, std_error });
    }
    let mut best = 0;
    for (c, est) in per_control.iter().enumerate() {
        if est.mean > per_control[best].mean {
            best = c;
        }
    }
    Ok(DeltaNormReport {
        n,
        estimate: per_control[best].mean,
        argmax_label: per_control[best].label.clone(),
        c0,
        big_c0,
        eta_l1,
        lower_envelope: c0 * eta_l1,
        upper_envelope: big_c0 * eta_l1,
        per_control,
    })
}

/// `δₙ` resolutions tried by [`decomposition_check`].
pub const DELTA_N_LEVELS: [usize; 4] = [8, 16, 32, 64];

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Witness {
    pub control: String,
    pub scenario: u64,
    pub step: usize,
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AllZero,
    Violated(Witness),
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub verdict: Verdict,
    pub max_abs_x: f64,
    /// Largest `|δₙ`-norm estimate| of `η` over components and resolutions.
    pub delta_norm: Option<f64>,
    /// Largest mean of `Σₖ ζₖ γₖ² ζₖᵀ dt` over components and controls.
    pub zeta_qv: Option<f64>,
}

/// Decides whether `∫ξ dt + ∫η d⟨B⟩ + ∫ζ dB` vanishes on every scenario
/// of `family` × `n_mc` draws, and if so whether each integrand does.
pub fn decomposition_check(
    integrands: &ItoIntegrands,
    band: &VolatilityBand,
    family: &[FamilyMember],
    n_mc: usize,
    tol: f64,
    seed: u64,
) -> Result<DecompositionReport> {
    if family.is_empty() || n_mc == 0 {
        return Err(Error::InvalidInput("empty control family or sample".into()));
    }
    let d = band.dim();
    let mut max_abs_x = 0.0f64;
    let mut witness: Option<Witness> = None;
    for member in family {
        let worst = par::map_indices(n_mc, |j| {
            let path = simulate_gbm(member.control.clone(), seed, j as u64);
            let xs = integrate_ito(integrands, &path);
            let mut best = (0.0f64, 0usize);
            for (k, x) in xs.iter().enumerate() {
                let a = x.amax();
                if a > best.0 || a.is_nan() {
                    best = (a, k);
                }
            }
            (best, path.grid().t(best.1), xs[best.1].iter().copied().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m }))
        });
        for (j, ((a, k), t, value)) in worst.into_iter().enumerate() {
            if a > max_abs_x || a.is_nan() {
                max_abs_x = a;
                if a > tol || a.is_nan() {
                    witness = Some(Witness { control: member.label.clone(), scenario: j as u64, step: k, t, value });
                }
            }
        }
    }
    if let Some(w) = witness {
        return Ok(DecompositionReport { verdict: Verdict::Violated(w), max_abs_x, delta_norm: None, zeta_qv: None });
    }

    // X vanishes on the sample: check that the d⟨B⟩ and dB parts do too.
    let grid = *family[0].control.grid();
    let mut delta_norm = 0.0f64;
    for n in DELTA_N_LEVELS {
        let (aligned, flipped) = aligned_bang_bang(band, &grid, n)?;
        let mut fam = family.to_vec();
        fam.push(aligned);
        fam.push(flipped);
        for l in 0..integrands.m {
            let eta = integrands.eta.clone();
            let component: StepSym = Arc::new(move |k, p| SymMatrix::new(eta(k, p)[l].clone()).expect("square η component"));
            let rep = delta_n_norm(&component, band, n, &fam, n_mc, seed)?;
            delta_norm = delta_norm.max(rep.per_control.iter().map(|c| c.mean.abs()).fold(0.0, f64::max));
        }
    }
    let mut zeta_qv = 0.0f64;
    for member in family {
        let per = par::map_indices(n_mc, |j| {
            let path = simulate_gbm(member.control.clone(), seed, j as u64);
            let mut acc = vec![0.0; integrands.m];
            for k in 0..path.n_steps() {
                let z = (integrands.zeta)(k, &path);
                let qv = path.qv_increment(k);
                for (l, a) in acc.iter_mut().enumerate() {
                    for i in 0..d {
                        for m in 0..d {
                            *a += z[(l, i)] * qv[i * d + m] * z[(l, m)];
                        }
                    }
                }
            }
            acc
        });
        for l in 0..integrands.m {
            zeta_qv = zeta_qv.max(per.iter().map(|a| a[l]).sum::<f64>() / n_mc as f64);
        }
    }
    let verdict = if delta_norm <= tol && zeta_qv <= tol {
        Verdict::AllZero
    } else {
        Verdict::Violated(Witness {
            control: family[0].label.clone(),
            scenario: 0,
            step: 0,
            t: grid.t_start,
            value: delta_norm.max(zeta_qv),
        })
    };
    Ok(DecompositionReport { verdict, max_abs_x, delta_norm: Some(delta_norm), zeta_qv: Some(zeta_qv) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::FunctionalSpec;
    use crate::scenario::default_family;

    fn band12() -> VolatilityBand {
        VolatilityBand::scalar(1.0, 2.0).unwrap()
    }

    fn unit(n: usize) -> TimeGrid {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    fn fixed(band: &VolatilityBand, grid: &TimeGrid, g: f64, label: &str) -> FamilyMember {
        FamilyMember {
            label: label.into(),
            control: Arc::new(sample_control(band, grid, &ControlPolicy::Fixed(SymMatrix::scalar(g)), 0).unwrap()),
        }
    }

    fn identity_v() -> ValueFunction {
        ValueFunction::analytic(
            1,
            Arc::new(|_, x| x[0]),
            Arc::new(|_, _| 0.0),
            Arc::new(|_, _| DVector::from_element(1, 1.0)),
            Arc::new(|_, _| SymMatrix::scalar(0.0)),
        )
    }

    #[test]
    fn pde_residual_trivial_cases() {
        let coeffs = CoefficientSet::scalar(|_, _| 0.0, |_, _| 0.0, |_, _| 1.0, 0.0);
        let pts = product_grid(0.0, 1.0, 3, &[-1.0], &[1.0], 5);
        let spec = FunctionalSpec::scalar(1.0, 0.0, |_, _| 0.0, |_, _| 1.0);
        let r = pde_residuals(&identity_v(), &coeffs, &spec, &band12(), &pts).unwrap();
        assert_eq!((r.sup_r1, r.sup_r2, r.sup_r3), (0.0, 0.0, 0.0));
        let spec = FunctionalSpec::scalar(1.0, 0.0, |_, _| 0.0, |_, _| 1.1);
        let r = pde_residuals(&identity_v(), &coeffs, &spec, &band12(), &pts).unwrap();
        assert!((r.sup_r3 - 0.1).abs() < 1e-12);
        assert_eq!(r.grid.n_points, 15);
    }

    #[test]
    fn finite_differences_match_analytic() {
        let v: ScalarField = Arc::new(|t, x| (t * x[0]).sin() + x[0] * x[0] * x[1] + (0.3 * t).exp() * x[1]);
        let fd = ValueFunction::finite_difference(2, v, FD_STEP, FD_STEP).unwrap();
        let (t, x) = (0.7, [0.4, -1.3]);
        assert!((fd.dv_dt(t, &x) - (x[0] * (t * x[0]).cos() + 0.3 * (0.3 * t).exp() * x[1])).abs() < 1e-8);
        let g = fd.grad(t, &x);
        assert!((g[0] - (t * (t * x[0]).cos() + 2.0 * x[0] * x[1])).abs() < 1e-8);
        assert!((g[1] - (x[0] * x[0] + (0.3 * t).exp())).abs() < 1e-8);
        let h = fd.hessian(t, &x);
        assert!((h.get(0, 0) - (-t * t * (t * x[0]).sin() + 2.0 * x[1])).abs() < 1e-5);
        assert!((h.get(0, 1) - 2.0 * x[0]).abs() < 1e-5);
        assert!(h.get(1, 1).abs() < 1e-5);
    }

    #[test]
    fn pathwise_zero_for_constant_potential() {
        let band = band12();
        let coeffs = CoefficientSet::scalar(|_, x| -x, |_, _| 0.2, |_, _| 1.0, 1.0);
        let paths = mixed_ensemble(&coeffs, &[0.5], &band, &unit(16), 1, 1, 12, 3).unwrap();
        let r = pathwise_residual(&ValueFunction::constant(1, 2.5), &FunctionalSpec::zero(1), &band, &paths, 0.0).unwrap();
        assert_eq!(r.ensemble_max, 0.0);
        assert_eq!(r.per_scenario.len(), 12);
    }

    #[test]
    fn convergence_degenerate_sentinel() {
        let band = band12();
        let coeffs = CoefficientSet::scalar(|_, _| 0.0, |_, _| 0.0, |_, _| 1.0, 0.0);
        let r = convergence_order(
            &ValueFunction::constant(1, 0.0),
            &coeffs,
            &FunctionalSpec::zero(1),
            &band,
            &[0.0],
            (0.0, 1.0),
            &[0.25, 0.125, 0.0625],
            6,
            1,
        )
        .unwrap();
        assert!(r.degenerate);
        assert_eq!(r.slope, f64::INFINITY);
    }

    #[test]
    fn girsanov_type_functional_is_path_independent_for_brownian_motion() {
        // X = x0 + B with b = h = 0, σ = 1: A = ∫ dB = X_t − X_s exactly.
        let band = band12();
        let coeffs = CoefficientSet::scalar(|_, _| 0.0, |_, _| 0.0, |_, _| 1.0, 0.0);
        let spec = FunctionalSpec::scalar(0.0, 0.0, |_, _| 0.0, |_, _| 1.0);
        let paths = mixed_ensemble(&coeffs, &[0.0], &band, &unit(32), 1, 1, 12, 9).unwrap();
        let r = pathwise_residual(&identity_v(), &spec, &band, &paths, 0.0).unwrap();
        assert!(r.ensemble_max < 1e-12);
    }

    #[test]
    fn nested_levels_share_terminal_b() {
        let band = band12();
        let coarse = unit(8);
        for i in [0u64, 2, 3, 4] {
            let a = mixed_scenario(&band, &coarse, 1, 8, 5, i).unwrap();
            let b = mixed_scenario(&band, &coarse, 8, 1, 5, i).unwrap();
            assert!((a.terminal_b()[0] - b.terminal_b()[0]).abs() < 1e-12, "scenario {i}");
        }
    }

    #[test]
    fn integrate_ito_examples() {
        let band = band12();
        let grid = unit(64);
        let upper = fixed(&band, &grid, 2.0, "upper");
        let path = simulate_gbm(upper.control.clone(), 1, 0);
        let xs = integrate_ito(&ItoIntegrands::scalar(1.0, 0.0, 0.0), &path);
        for (k, x) in xs.iter().enumerate() {
            assert!((x[0] - grid.t(k)).abs() < 1e-12);
        }
        let xs = integrate_ito(&ItoIntegrands::scalar(0.0, 0.0, 1.0), &path);
        for (k, x) in xs.iter().enumerate() {
            assert!((x[0] - path.b_node(k)[0]).abs() < 1e-12);
        }
        let cancel = ItoIntegrands::scalar(-1.0, 0.25, 0.0);
        assert!(integrate_ito(&cancel, &path).iter().all(|x| x[0].abs() < 1e-12));
        let lower = fixed(&band, &grid, 1.0, "lower");
        let xs = integrate_ito(&cancel, &simulate_gbm(lower.control, 1, 0));
        assert!((xs.last().unwrap()[0] + 0.75).abs() < 1e-12);
    }

    #[test]
    fn delta_n_shape() {
        assert_eq!(delta_n(4, 0.1), 0.0);
        assert_eq!(delta_n(4, 0.3), -1.0);
        assert_eq!(delta_n(4, 0.6), 1.0);
        assert_eq!(delta_n(4, 0.9), -1.0);
        assert_eq!(delta_n(4, 0.5), -1.0);
        assert!((delta_n_integral(4, 0.0, 1.0) - (-0.25)).abs() < 1e-15);
        assert!((delta_n_integral(4, 0.2, 0.6) - (-0.25 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn delta_norm_examples() {
        let band = band12();
        let grid = unit(1024);
        let (a, f) = aligned_bang_bang(&band, &grid, 64).unwrap();
        let family = vec![a, f];
        let zero: StepSym = Arc::new(|_, _| SymMatrix::scalar(0.0));
        let r = delta_n_norm(&zero, &band, 64, &family, 4, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
        let one: StepSym = Arc::new(|_, _| SymMatrix::scalar(1.0));
        let r = delta_n_norm(&one, &band, 64, &family, 4, 1).unwrap();
        // Exact deterministic sum: 31 intervals at +σ̄², 32 at −σ̲², each 1/64.
        let oracle = (31.0 * 4.0 - 32.0) / 64.0;
        assert!((r.estimate - oracle).abs() < 1e-12);
        assert!((r.estimate - 1.5).abs() <= 0.075);
        assert_eq!((r.c0, r.big_c0), (1.5, 1.5));
        assert!((r.lower_envelope - 1.5).abs() < 1e-12 && (r.upper_envelope - 1.5).abs() < 1e-12);
        assert!(r.lower_envelope <= r.upper_envelope);

        let three: StepSym = Arc::new(|_, _| SymMatrix::scalar(3.0));
        let r3 = delta_n_norm(&three, &band, 64, &family, 4, 1).unwrap();
        assert!((r3.estimate - 3.0 * r.estimate).abs() < 1e-12);
    }

    #[test]
    fn decomposition_examples() {
        let band = band12();
        let grid = unit(64);
        let family = default_family(&band, &grid, 4, 3).unwrap();
        let zero = decomposition_check(&ItoIntegrands::zero(1, 1), &band, &family, 4, 0.0, 1).unwrap();
        assert_eq!(zero.verdict, Verdict::AllZero);
        let b = decomposition_check(&ItoIntegrands::scalar(0.0, 0.0, 1.0), &band, &family, 4, 1e-9, 1).unwrap();
        assert!(matches!(b.verdict, Verdict::Violated(_)));
        let cancel = decomposition_check(&ItoIntegrands::scalar(-1.0, 0.25, 0.0), &band, &family, 4, 1e-9, 1).unwrap();
        match cancel.verdict {
            Verdict::Violated(w) => {
                assert_eq!(w.control, "constant_lower");
                assert!(w.value.abs() >= 0.7);
            }
            v => panic!("{v:?}"),
        }
    }
}
