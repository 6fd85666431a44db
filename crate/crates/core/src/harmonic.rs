//! Closed-form path-independent data in one dimension.
//!
//! For time-independent `h`, `σ` the harmonic functions of
//! `ℒ = h ∂ₓ + ½σ² ∂ₓ²` are
//!
//! ```text
//! V₀(x) = V₀(0) + V₀'(0) ∫₀ˣ exp(−2 ∫₀ᵘ h/σ² dr) du,
//! ```
//!
//! and `V(t, x) = φ(t) V₀(x)` makes `A^{f,g}` with `α = 0`, `β = 2`,
//! `f = ½ G⁻¹(φ'V₀ + b φ V₀')`, `g = σ φ V₀'` path independent.

use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::gcore::{eval_g_inverse_1d, VolatilityBand};
use crate::linalg::SymMatrix;
use crate::pathcheck::ValueFunction;

pub type Scalar1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Scalar2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Minimal admissible `|σ|` on the profile grid.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Tabulated `V₀` and `V₀'` with cubic Hermite interpolation in between.
#[derive(Clone)]
pub struct HarmonicProfile {
    x_grid: Vec<f64>,
    v0: Vec<f64>,
    v0_prime: Vec<f64>,
    v0_second: Vec<f64>,
    v0_at_0: f64,
    v0prime_at_0: f64,
    h: Scalar1,
    sigma: Scalar1,
}

/// Uniform grid with spacing `dx` over `[lo, hi]` that contains `0` as a node.
pub fn uniform_grid(lo: f64, hi: f64, dx: f64) -> Result<Vec<f64>> {
    if !(dx > 0.0) || !(lo <= 0.0 && 0.0 <= hi) {
        return Err(Error::InvalidInput(format!("need dx > 0 and lo <= 0 <= hi, got [{lo}, {hi}] dx={dx}")));
    }
    let first = (lo / dx - 1e-9).ceil() as i64;
    let last = (hi / dx + 1e-9).floor() as i64;
    Ok((first..=last).map(|i| i as f64 * dx).collect())
}

/// Builds `V₀` on `x_grid` by cell-wise Simpson rules for the inner integral
/// `∫₀ᵘ h/σ²` and the outer integral, marching from `0` in both directions.
pub fn build_v0(h: Scalar1, sigma: Scalar1, x_grid: Vec<f64>, v0_at_0: f64, v0prime_at_0: f64) -> Result<HarmonicProfile> {
    if x_grid.len() < 2 || x_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("profile grid must be strictly increasing with >= 2 nodes".into()));
    }
    let Some(zero) = x_grid.iter().position(|&x| x == 0.0) else {
        return Err(Error::InvalidInput("profile grid must contain 0".into()));
    };
    let q = |x: f64| -> Result<f64> {
        let s = sigma(x);
        if !(s.abs() >= SIGMA_FLOOR) {
            return Err(Error::SigmaVanishes { x });
        }
        Ok(h(x) / (s * s))
    };

    let n = x_grid.len();
    let mut inner = vec![0.0; n];
    let mut v0 = vec![0.0; n];
    let mut weight = vec![0.0; n];
    v0[zero] = v0_at_0;
    weight[zero] = 1.0;
    let mut q_node = vec![0.0; n];
    for (k, &x) in x_grid.iter().enumerate() {
        q_node[k] = q(x)?;
    }

    let mut march = |from: usize, to: usize| -> Result<()> {
        let (a, b) = (x_grid[from], x_grid[to]);
        let len = b - a;
        let mid = 0.5 * (a + b);
        let q_mid = q(mid)?;
        let q_quarter = q(a + 0.25 * len)?;
        inner[to] = inner[from] + len / 6.0 * (q_node[from] + 4.0 * q_mid + q_node[to]);
        let inner_mid = inner[from] + 0.5 * len / 6.0 * (q_node[from] + 4.0 * q_quarter + q_mid);
        let w_mid = (-2.0 * inner_mid).exp();
        weight[to] = (-2.0 * inner[to]).exp();
        v0[to] = v0[from] + v0prime_at_0 * len / 6.0 * (weight[from] + 4.0 * w_mid + weight[to]);
        Ok(())
    };
    for k in zero..n - 1 {
        march(k, k + 1)?;
    }
    for k in (1..=zero).rev() {
        march(k, k - 1)?;
    }

    let v0_prime: Vec<f64> = weight.iter().map(|w| v0prime_at_0 * w).collect();
    let v0_second: Vec<f64> = v0_prime.iter().zip(&q_node).map(|(vp, qk)| -2.0 * qk * vp).collect();
    Ok(HarmonicProfile { x_grid, v0, v0_prime, v0_second, v0_at_0, v0prime_at_0, h, sigma })
}

impl HarmonicProfile {
    pub fn x_grid(&self) -> &[f64] {
        &self.x_grid
    }

    pub fn v0_values(&self) -> &[f64] {
        &self.v0
    }

    pub fn v0_prime_values(&self) -> &[f64] {
        &self.v0_prime
    }

    pub fn v0_at_0(&self) -> f64 {
        self.v0_at_0
    }

    pub fn v0prime_at_0(&self) -> f64 {
        self.v0prime_at_0
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_grid[0], *self.x_grid.last().unwrap())
    }

    /// Tabulated value at the node equal to `x`, if any.
    pub fn node_value(&self, x: f64) -> Option<f64> {
        self.x_grid.iter().position(|&g| g == x).map(|k| self.v0[k])
    }

    fn cell(&self, x: f64) -> Result<(usize, f64, f64)> {
        let (lo, hi) = self.bounds();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutsideProfile { x, lo, hi });
        }
        let k = self.x_grid.partition_point(|&g| g <= x).saturating_sub(1).min(self.x_grid.len() - 2);
        let len = self.x_grid[k + 1] - self.x_grid[k];
        Ok((k, (x - self.x_grid[k]) / len, len))
    }

    /// `V₀(x)`, cubic Hermite on `(V₀, V₀')`.
    pub fn v0(&self, x: f64) -> Result<f64> {
        let (k, s, len) = self.cell(x)?;
        Ok(hermite(s, len, self.v0[k], self.v0_prime[k], self.v0[k + 1], self.v0_prime[k + 1]))
    }

    /// `V₀'(x)`, cubic Hermite on `(V₀', V₀'')`.
    pub fn v0_prime(&self, x: f64) -> Result<f64> {
        let (k, s, len) = self.cell(x)?;
        Ok(hermite(s, len, self.v0_prime[k], self.v0_second[k], self.v0_prime[k + 1], self.v0_second[k + 1]))
    }

    /// `V₀''(x) = −2 h(x) V₀'(x) / σ²(x)`.
    pub fn v0_second(&self, x: f64) -> Result<f64> {
        let s = (self.sigma)(x);
        Ok(-2.0 * (self.h)(x) / (s * s) * self.v0_prime(x)?)
    }

    /// CSV with header `x,V0,V0_prime`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,V0,V0_prime")?;
        for k in 0..self.x_grid.len() {
            writeln!(w, "{},{},{}", self.x_grid[k], self.v0[k], self.v0_prime[k])?;
        }
        Ok(())
    }
}

fn hermite(s: f64, len: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * len * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * len * d1
}

/// Sup over interior nodes of the centered-difference residual
/// `|h V₀' + ½σ² V₀''|` of the tabulated profile against the operator built
/// from `h` and `sigma`. The grid must be uniform.
pub fn check_harmonic(profile: &HarmonicProfile, h: &dyn Fn(f64) -> f64, sigma: &dyn Fn(f64) -> f64) -> Result<f64> {
    let xs = &profile.x_grid;
    let dx = xs[1] - xs[0];
    if xs.windows(2).any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.abs().max(1.0)) {
        return Err(Error::InvalidInput("check_harmonic needs a uniform grid".into()));
    }
    let v = &profile.v0;
    let mut sup = 0.0f64;
    for k in 1..xs.len() - 1 {
        let d1 = (v[k + 1] - v[k - 1]) / (2.0 * dx);
        let d2 = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (dx * dx);
        let s = sigma(xs[k]);
        sup = sup.max((h(xs[k]) * d1 + 0.5 * s * s * d2).abs());
    }
    Ok(sup)
}

/// The constructed path-independent data: the functional and its potential.
#[derive(Clone)]
pub struct ExampleSetup {
    pub spec: FunctionalSpec,
    pub value: ValueFunction,
}

/// Builds `α = 0`, `β = 2`, `f = ½G⁻¹(φ'V₀ + bφV₀')`, `g = σφV₀'` and
/// `V = φV₀` with analytic derivatives. Evaluations outside the profile grid
/// yield NaN, which the checkers report.
pub fn build_example_spec(
    profile: &HarmonicProfile,
    phi: Scalar1,
    phi_prime: Scalar1,
    b: Scalar2,
    band: &VolatilityBand,
) -> Result<ExampleSetup> {
    if band.dim() != 1 {
        return Err(Error::BandNotScalar);
    }
    let prof = Arc::new(profile.clone());
    let band_f = band.clone();
    let (p, pp, pr, bf) = (phi.clone(), phi_prime.clone(), prof.clone(), b.clone());
    let f = Arc::new(move |t: f64, x: &[f64]| {
        let z = (|| -> Result<f64> {
            let arg = pp(t) * pr.v0(x[0])? + bf(t, x[0]) * p(t) * pr.v0_prime(x[0])?;
            Ok(0.5 * eval_g_inverse_1d(arg, &band_f)?)
        })();
        SymMatrix::scalar(z.unwrap_or(f64::NAN))
    });
    let (p, pr, sigma) = (phi.clone(), prof.clone(), prof.sigma.clone());
    let g = Arc::new(move |t: f64, x: &[f64]| {
        let v = pr.v0_prime(x[0]).map(|vp| sigma(x[0]) * p(t) * vp).unwrap_or(f64::NAN);
        DVector::from_element(1, v)
    });
    let spec = FunctionalSpec { alpha: 0.0, beta: 2.0, f, g };

    let (p, pr) = (phi.clone(), prof.clone());
    let v = Arc::new(move |t: f64, x: &[f64]| pr.v0(x[0]).map(|v0| p(t) * v0).unwrap_or(f64::NAN));
    let (pp, pr) = (phi_prime.clone(), prof.clone());
    let dv_dt = Arc::new(move |t: f64, x: &[f64]| pr.v0(x[0]).map(|v0| pp(t) * v0).unwrap_or(f64::NAN));
    let (p, pr) = (phi.clone(), prof.clone());
    let grad = Arc::new(move |t: f64, x: &[f64]| DVector::from_element(1, pr.v0_prime(x[0]).map(|d| p(t) * d).unwrap_or(f64::NAN)));
    let (p, pr) = (phi, prof);
    let hessian = Arc::new(move |t: f64, x: &[f64]| SymMatrix::scalar(pr.v0_second(x[0]).map(|d| p(t) * d).unwrap_or(f64::NAN)));
    let value = ValueFunction::analytic(1, v, dv_dt, grad, hessian);
    Ok(ExampleSetup { spec, value })
}

/// The matching one-dimensional coefficient set `b`, `h₁₁ = h`, `σ`.
pub fn example_coefficients(profile: &HarmonicProfile, b: Scalar2, lipschitz_k: f64) -> crate::scenario::CoefficientSet {
    let (h, s) = (profile.h.clone(), profile.sigma.clone());
    crate::scenario::CoefficientSet::new(
        1,
        Arc::new(move |t, x| DVector::from_element(1, b(t, x[0]))),
        vec![Arc::new(move |_, x| DVector::from_element(1, h(x[0])))],
        Arc::new(move |_, x| DMatrix::from_element(1, 1, s(x[0]))),
        lipschitz_k,
    )
    .expect("one-dimensional coefficient set")
}
