//! JSON experiment configuration.
//!
//! Expressions are strings in the coefficient language; a vector or matrix
//! coefficient is an array (of arrays) of expression strings. Commands
//! currently drive one-dimensional experiments, so every coefficient must
//! reduce to a single entry.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use gcalc_core::exprdsl::Expression;
use gcalc_core::gheat::Boundary;
use gcalc_core::{SymMatrix, VolatilityBand};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub band: BandConfig,
    #[serde(default)]
    pub coefficients: Option<CoefficientsConfig>,
    #[serde(default)]
    pub functional: Option<FunctionalConfig>,
    #[serde(default)]
    pub value_function: Option<ValueFunctionConfig>,
    #[serde(default)]
    pub example4_1: Option<ExampleConfig>,
    #[serde(default)]
    pub gheat: Option<GheatConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// A number, an expression string, or a (nested) array holding exactly one
/// of those.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
    Array(Vec<Entry>),
}

impl Entry {
    fn single(&self, what: &str) -> Result<&Entry> {
        match self {
            Entry::Array(items) if items.len() == 1 => items[0].single(what),
            Entry::Array(items) => bail!("{what}: expected a single entry (d = 1), got {} entries", items.len()),
            leaf => Ok(leaf),
        }
    }

    pub fn number(&self, what: &str) -> Result<f64> {
        match self.single(what)? {
            Entry::Number(v) => Ok(*v),
            Entry::Text(s) => {
                let e = Expression::parse(s).with_context(|| format!("{what}: '{s}'"))?;
                e.eval(0.0, 0.0).with_context(|| format!("{what}: '{s}' is not a constant"))
            }
            Entry::Array(_) => unreachable!(),
        }
    }

    pub fn expression(&self, what: &str) -> Result<Expression> {
        match self.single(what)? {
            Entry::Number(v) => Ok(Expression::constant(*v)),
            Entry::Text(s) => Expression::parse(s).with_context(|| format!("{what}: '{s}'")),
            Entry::Array(_) => unreachable!(),
        }
    }
}

impl From<&str> for Entry {
    fn from(s: &str) -> Self {
        Entry::Text(s.to_string())
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    #[serde(default = "one")]
    pub d: usize,
    pub sigma_lower: Entry,
    pub sigma_upper: Entry,
}

impl BandConfig {
    pub fn build(&self) -> Result<VolatilityBand> {
        if self.d != 1 {
            bail!("band.d = {}: the command line tool drives one-dimensional experiments only", self.d);
        }
        let lo = self.sigma_lower.number("band.sigma_lower")?;
        let hi = self.sigma_upper.number("band.sigma_upper")?;
        VolatilityBand::new(SymMatrix::scalar(lo), SymMatrix::scalar(hi)).context("band")
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub b: Entry,
    pub h: Entry,
    pub sigma: Entry,
    #[serde(default = "one_f")]
    pub lipschitz_k: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    pub alpha: f64,
    pub beta: f64,
    pub f: Entry,
    pub g: Entry,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ValueMode {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ValueFunctionConfig {
    pub mode: ValueMode,
    pub v: String,
    #[serde(default)]
    pub dv_dt: Option<String>,
    #[serde(default)]
    pub grad: Option<Entry>,
    #[serde(default)]
    pub hessian: Option<Entry>,
    #[serde(default = "fd_step")]
    pub hx: f64,
    #[serde(default = "fd_step")]
    pub ht: f64,
}

/// The harmonic-function construction: `V = φ(t)V₀(x)` with `V₀` harmonic
/// for `h ∂ₓ + ½σ² ∂ₓ²`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleConfig {
    pub h: String,
    pub sigma: String,
    #[serde(default = "exp_t")]
    pub phi: String,
    #[serde(default = "exp_t")]
    pub phi_prime: String,
    #[serde(default = "zero_s")]
    pub b: String,
    #[serde(default = "profile_lo")]
    pub x_min: f64,
    #[serde(default = "profile_hi")]
    pub x_max: f64,
    #[serde(default = "profile_dx")]
    pub dx: f64,
    #[serde(default)]
    pub v0_at_0: f64,
    #[serde(default = "one_f")]
    pub v0prime_at_0: f64,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    #[default]
    ExtrapolateLinear,
    ClampTerminal,
}

impl From<BoundaryConfig> for Boundary {
    fn from(b: BoundaryConfig) -> Self {
        match b {
            BoundaryConfig::ExtrapolateLinear => Boundary::ExtrapolateLinear,
            BoundaryConfig::ClampTerminal => Boundary::ClampTerminal,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GheatConfig {
    /// Terminal condition in `x`.
    pub phi: String,
    #[serde(default = "one_f")]
    pub horizon: f64,
    #[serde(default = "gheat_lo")]
    pub x_min: f64,
    #[serde(default = "gheat_hi")]
    pub x_max: f64,
    #[serde(default = "gheat_nx")]
    pub nx: usize,
    /// Defaults to the largest admissible step.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    /// Every `surface_stride`-th time level goes to surface.csv.
    #[serde(default = "stride")]
    pub surface_stride: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Payoff in the terminal state `x` (`t` is the horizon).
    pub payoff: String,
    #[serde(default = "one_f")]
    pub horizon: f64,
    #[serde(default = "n_steps")]
    pub n_steps: usize,
    /// Number of controls; the first two are always the constant endpoints.
    #[serde(default = "two")]
    pub n_controls: usize,
    #[serde(default = "n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub x0: f64,
    /// Integrate the G-SDE of `coefficients`; otherwise the payoff sees `B_T`.
    #[serde(default)]
    pub use_coefficients: bool,
    #[serde(default)]
    pub dump_paths: bool,
    #[serde(default = "max_rows")]
    pub max_path_rows: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PdeGridConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "unit_interval")]
    pub horizon: [f64; 2],
    pub dt_list: Vec<f64>,
    #[serde(default = "n_scenarios")]
    pub n_scenarios: usize,
    pub pde_grid: PdeGridConfig,
    #[serde(default = "pde_tolerance")]
    pub pde_tolerance: f64,
    /// Smallest acceptable fitted slope of the pathwise residual.
    #[serde(default = "min_slope")]
    pub min_slope: f64,
    /// Optional cap on the finest-step ensemble max.
    #[serde(default)]
    pub max_pathwise: Option<f64>,
    #[serde(default)]
    pub f_perturbation: f64,
    #[serde(default)]
    pub g_perturbation: f64,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn one_f() -> f64 {
    1.0
}
fn fd_step() -> f64 {
    gcalc_core::pathcheck::FD_STEP
}
fn exp_t() -> String {
    "exp(t)".into()
}
fn zero_s() -> String {
    "0".into()
}
fn profile_lo() -> f64 {
    -150.0
}
fn profile_hi() -> f64 {
    150.0
}
fn profile_dx() -> f64 {
    0.01
}
fn gheat_lo() -> f64 {
    -8.0
}
fn gheat_hi() -> f64 {
    8.0
}
fn gheat_nx() -> usize {
    801
}
fn stride() -> usize {
    10
}
fn n_steps() -> usize {
    16
}
fn n_mc() -> usize {
    10_000
}
fn max_rows() -> usize {
    100_000
}
fn unit_interval() -> [f64; 2] {
    [0.0, 1.0]
}
fn n_scenarios() -> usize {
    256
}
fn pde_tolerance() -> f64 {
    1e-8
}
fn min_slope() -> f64 {
    0.4
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.band.build()?;
        Ok(cfg)
    }
}

/// `(t, x) ↦ value` closure over a parsed expression; evaluation errors
/// surface as NaN and are caught by the numerical checks downstream.
pub fn field(e: &Expression) -> Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> {
    let e = e.clone();
    Arc::new(move |t, x| e.eval_or_nan(t, x))
}

/// `x ↦ value` at `t = 0`.
pub fn field_x(e: &Expression) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    let e = e.clone();
    Arc::new(move |x| e.eval_or_nan(0.0, x))
}

/// `t ↦ value` at `x = 0`.
pub fn field_t(e: &Expression) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    let e = e.clone();
    Arc::new(move |t| e.eval_or_nan(t, 0.0))
}
