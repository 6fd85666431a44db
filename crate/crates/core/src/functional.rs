//! Additive functionals
//!
//! ```text
//! A_{s,t} = β ∫ G(f)(r, X_r) dr + α Σᵢⱼ ∫ fᵢⱼ(r, X_r) d⟨Bⁱ,Bʲ⟩_r + ∫ ⟨g(r, X_r), dB_r⟩
//! ```
//!
//! evaluated along discretized scenarios with left-endpoint (Itô) sums.

use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcore::{eval_g_matrix, AscentOptions, VolatilityBand};
use crate::linalg::SymMatrix;
use crate::scenario::{CoefficientSet, ScenarioPath, TimeGrid, VectorField};

pub type SymField = Arc<dyn Fn(f64, &[f64]) -> SymMatrix + Send + Sync>;

#[derive(Clone)]
pub struct FunctionalSpec {
    pub alpha: f64,
    pub beta: f64,
    pub f: SymField,
    pub g: VectorField,
}

impl FunctionalSpec {
    pub fn new(alpha: f64, beta: f64, f: SymField, g: VectorField) -> Self {
        Self { alpha, beta, f, g }
    }

    /// `f ≡ 0`, `g ≡ 0` in dimension `d`.
    pub fn zero(d: usize) -> Self {
        Self { alpha: 0.0, beta: 0.0, f: Arc::new(move |_, _| SymMatrix::zeros(d)), g: Arc::new(move |_, _| DVector::zeros(d)) }
    }

    /// One-dimensional spec from scalar `f(t, x)` and `g(t, x)`.
    pub fn scalar(
        alpha: f64,
        beta: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            alpha,
            beta,
            f: Arc::new(move |t, x| SymMatrix::scalar(f(t, x[0]))),
            g: Arc::new(move |t, x| DVector::from_element(1, g(t, x[0]))),
        }
    }

    /// Same spec with `f` shifted by `shift·I`.
    pub fn with_f_shift(&self, shift: f64) -> Self {
        let f = self.f.clone();
        Self {
            f: Arc::new(move |t, x| {
                let base = f(t, x);
                let d = base.dim();
                &base + &SymMatrix::identity(d).scale(shift)
            }),
            ..self.clone()
        }
    }

    /// Same spec with `g` shifted by `shift` in every component.
    pub fn with_g_shift(&self, shift: f64) -> Self {
        let g = self.g.clone();
        Self { g: Arc::new(move |t, x| g(t, x).add_scalar(shift)), ..self.clone() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionalTrace {
    pub grid: TimeGrid,
    /// Node values, `a[0] = 0`.
    pub a: Vec<f64>,
    /// Some `G(f)` evaluation came from a non-converged ascent.
    pub lower_bound_only: bool,
}

impl FunctionalTrace {
    pub fn terminal(&self) -> f64 {
        *self.a.last().unwrap()
    }

    /// CSV with header `k,t,A`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,t,A")?;
        for (k, a) in self.a.iter().enumerate() {
            writeln!(w, "{k},{},{a}", self.grid.t(k))?;
        }
        Ok(())
    }
}

/// Evaluates `A` along the whole path.
pub fn evaluate(spec: &FunctionalSpec, band: &VolatilityBand, path: &ScenarioPath) -> Result<FunctionalTrace> {
    evaluate_window(spec, band, path, 0, path.n_steps())
}

/// Evaluates `A` over the nodes `k_start..=k_end` of the path, starting from
/// zero at `k_start`.
pub fn evaluate_window(
    spec: &FunctionalSpec,
    band: &VolatilityBand,
    path: &ScenarioPath,
    k_start: usize,
    k_end: usize,
) -> Result<FunctionalTrace> {
    if !path.has_state() {
        return Err(Error::MissingState);
    }
    let d = path.dim();
    if band.dim() != d {
        return Err(Error::Dimension(format!("band d = {}, path d = {d}", band.dim())));
    }
    if k_start > k_end || k_end > path.n_steps() {
        return Err(Error::InvalidInput(format!("window {k_start}..={k_end} outside the path")));
    }
    let grid = *path.grid();
    let dt = grid.dt();
    let opts = AscentOptions::default();
    let mut a = Vec::with_capacity(k_end - k_start + 1);
    a.push(0.0);
    let mut acc = 0.0;
    let mut lower_bound_only = false;
    for k in k_start..k_end {
        let t = grid.t(k);
        let x = path.x_node(k).expect("state checked above");
        let mut inc = 0.0;
        if spec.beta != 0.0 || spec.alpha != 0.0 {
            let f = (spec.f)(t, x);
            if f.dim() != d {
                return Err(Error::Dimension(format!("f is {}x{}, path d = {d}", f.dim(), f.dim())));
            }
            if spec.beta != 0.0 {
                let gv = eval_g_matrix(&f, band, &opts)?;
                lower_bound_only |= gv.lower_bound_only;
                inc += spec.beta * gv.value * dt;
            }
            if spec.alpha != 0.0 {
                let qv = path.qv_increment(k);
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += f.get(i, j) * qv[i * d + j];
                    }
                }
                inc += spec.alpha * s;
            }
        }
        let g = (spec.g)(t, x);
        inc += g.iter().zip(path.db(k)).map(|(gi, dbi)| gi * dbi).sum::<f64>();
        acc += inc;
        a.push(acc);
    }
    let window = TimeGrid { t_start: grid.t(k_start), t_end: grid.t(k_end), n_steps: k_end - k_start };
    Ok(FunctionalTrace { grid: window, a, lower_bound_only })
}

/// Condition-number cap for `σ` in [`girsanov_spec`].
pub const SIGMA_CONDITION_CAP: f64 = 1e8;

/// The Girsanov-type functional: `α = 1`, `β = −1`, `g = σ⁻¹(b + Σᵢ hᵢᵢ)`,
/// `f = (|g|²/d)·I`. `σ` is checked for invertibility at `probes`.
pub fn girsanov_spec(coeffs: &CoefficientSet, probes: &[(f64, Vec<f64>)]) -> Result<FunctionalSpec> {
    let d = coeffs.dim();
    for (t, x) in probes {
        let s = (coeffs.sigma)(*t, x);
        let sv = s.clone().svd(false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        if !(min > 0.0) || max / min > SIGMA_CONDITION_CAP {
            return Err(Error::SingularSigma { t: *t, x: x.clone() });
        }
    }
    let c = coeffs.clone();
    let g: VectorField = Arc::new(move |t, x| {
        let rhs = (c.b)(t, x) + c.h_trace(t, x);
        let s: DMatrix<f64> = (c.sigma)(t, x);
        s.lu().solve(&rhs).unwrap_or_else(|| DVector::from_element(d, f64::NAN))
    });
    let g_for_f = g.clone();
    let f: SymField = Arc::new(move |t, x| {
        let gv = g_for_f(t, x);
        SymMatrix::identity(d).scale(gv.norm_squared() / d as f64)
    });
    Ok(FunctionalSpec { alpha: 1.0, beta: -1.0, f, g })
}

/// Rewrites a spec with `α ≠ 0` as the equivalent `α = 1` spec, whose
/// functional is `A/α`.
pub fn alpha_rescale(spec: &FunctionalSpec) -> Result<FunctionalSpec> {
    let alpha = spec.alpha;
    if alpha == 0.0 {
        return Err(Error::NotReducible);
    }
    if alpha == 1.0 {
        return Ok(spec.clone());
    }
    let g = spec.g.clone();
    Ok(FunctionalSpec { alpha: 1.0, beta: spec.beta / alpha, f: spec.f.clone(), g: Arc::new(move |t, x| g(t, x) / alpha) })
}
