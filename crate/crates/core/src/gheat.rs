//! One-dimensional G-heat equation `∂ₜu + G(∂ₓ²u) = 0` with terminal data,
//! solved backward in time by an explicit monotone finite-difference scheme,
//! and the (conditional) G-expectations built on it.

use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcore::{g_scalar, VolatilityBand};
use crate::par;
use crate::rng;

/// Spatial sizes above which the space loop of a time step is spread over
/// the thread pool.
const PARALLEL_SPACE_THRESHOLD: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Ghost node by linear extrapolation, i.e. zero second difference at
    /// the two end nodes.
    ExtrapolateLinear,
    /// End nodes pinned to the terminal data.
    ClampTerminal,
}

#[derive(Clone, Debug, Serialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dt: f64,
    pub boundary: Boundary,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, nx: usize, dt: f64, boundary: Boundary) -> Result<Self> {
        if nx < 3 {
            return Err(Error::InvalidInput(format!("grid needs nx >= 3, got {nx}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidInput(format!("empty grid interval [{x_min}, {x_max}]")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { x_min, x_max, nx, dt, boundary })
    }

    /// Grid on `[min, max]` with `dt` at the stability limit of `band`.
    pub fn with_cfl_dt(x_min: f64, x_max: f64, nx: usize, band: &VolatilityBand, boundary: Boundary) -> Result<Self> {
        let dx = (x_max - x_min) / (nx.max(2) - 1) as f64;
        let hi = scalar_band(band)?.1;
        Self::new(x_min, x_max, nx, dx * dx / (hi * hi), boundary)
    }

    /// Domain `center ± 6σ̄√T` with CFL-limited `dt`.
    pub fn auto(center: f64, band: &VolatilityBand, horizon: f64, nx: usize, boundary: Boundary) -> Result<Self> {
        let hi = scalar_band(band)?.1;
        let half = 6.0 * hi * horizon.max(0.0).sqrt();
        Self::with_cfl_dt(center - half, center + half, nx, band, boundary)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Largest stable step `dx² / σ̄²`.
    pub fn max_dt(&self, band: &VolatilityBand) -> Result<f64> {
        let hi = scalar_band(band)?.1;
        let dx = self.dx();
        Ok(dx * dx / (hi * hi))
    }

    fn shifted(&self, center: f64) -> Grid1D {
        let half = 0.5 * (self.x_max - self.x_min);
        Grid1D { x_min: center - half, x_max: center + half, ..self.clone() }
    }
}

fn scalar_band(band: &VolatilityBand) -> Result<(f64, f64)> {
    if band.dim() != 1 {
        return Err(Error::BandNotScalar);
    }
    Ok((band.lower().get(0, 0), band.upper().get(0, 0)))
}

/// `u(t, x)` on all time levels of a backward solve.
#[derive(Clone, Debug)]
pub struct ValueSurface {
    pub grid: Grid1D,
    /// Ascending, `times[0] = 0`, last entry is the horizon.
    pub times: Vec<f64>,
    values: Vec<f64>,
}

impl ValueSurface {
    pub fn level(&self, k: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[k * nx..(k + 1) * nx]
    }

    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.grid.nx + i]
    }

    /// Linear interpolation in both `t` and `x`.
    pub fn value_at(&self, t: f64, x: f64) -> Result<f64> {
        let horizon = *self.times.last().unwrap();
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::InvalidInput(format!("t = {t} outside [0, {horizon}]")));
        }
        let steps = self.times.len() - 1;
        let pos = t / horizon * steps as f64;
        let k = (pos.floor() as usize).min(steps.saturating_sub(1));
        let w = pos - k as f64;
        let a = interp_linear(&self.grid, self.level(k), x)?;
        if w == 0.0 || steps == 0 {
            return Ok(a);
        }
        let b = interp_linear(&self.grid, self.level(k + 1), x)?;
        Ok((1.0 - w) * a + w * b)
    }

    /// CSV with header `t,x,u`, row-major by time level, every `time_stride`-th
    /// level (the last level is always written).
    pub fn write_csv<W: Write>(&self, mut w: W, time_stride: usize) -> io::Result<()> {
        writeln!(w, "t,x,u")?;
        let stride = time_stride.max(1);
        let last = self.times.len() - 1;
        for k in (0..=last).filter(|k| k % stride == 0 || *k == last) {
            for i in 0..self.grid.nx {
                writeln!(w, "{},{},{}", self.times[k], self.grid.x(i), self.at(k, i))?;
            }
        }
        Ok(())
    }
}

fn interp_linear(grid: &Grid1D, row: &[f64], x: f64) -> Result<f64> {
    if x < grid.x_min || x > grid.x_max {
        return Err(Error::InvalidInput(format!("x = {x} outside the grid [{}, {}]", grid.x_min, grid.x_max)));
    }
    let pos = (x - grid.x_min) / grid.dx();
    let i = (pos.floor() as usize).min(grid.nx - 2);
    let w = pos - i as f64;
    if w == 0.0 {
        return Ok(row[i]);
    }
    Ok((1.0 - w) * row[i] + w * row[i + 1])
}

struct Stepper {
    lo: f64,
    hi: f64,
    dt: f64,
    inv_dx2: f64,
    steps: usize,
}

impl Stepper {
    fn new(band: &VolatilityBand, grid: &Grid1D, horizon: f64) -> Result<Self> {
        let (lo, hi) = scalar_band(band)?;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        let max_dt = grid.max_dt(band)?;
        if grid.dt > max_dt {
            return Err(Error::Cfl { dt: grid.dt, max_dt });
        }
        let steps = ((horizon / grid.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dx = grid.dx();
        Ok(Self { lo, hi, dt: horizon / steps as f64, inv_dx2: 1.0 / (dx * dx), steps })
    }

    /// `out = u + dt·G(D²u)`; end nodes carry over unchanged.
    fn step(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let kernel = |i: usize| {
            if i == 0 || i + 1 == n {
                return u[i];
            }
            let d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * self.inv_dx2;
            u[i] + self.dt * g_scalar(d2, self.lo, self.hi)
        };
        if n >= PARALLEL_SPACE_THRESHOLD {
            par::fill(out, kernel);
        } else {
            for (i, v) in out.iter_mut().enumerate() {
                *v = kernel(i);
            }
        }
    }
}

fn terminal_row(phi: &(dyn Fn(f64) -> f64 + Sync), grid: &Grid1D) -> Result<Vec<f64>> {
    let row: Vec<f64> = (0..grid.nx).map(|i| phi(grid.x(i))).collect();
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("terminal data is not finite on the grid".into()));
    }
    Ok(row)
}

/// Solves the terminal-value problem on `[0, T]` and keeps every time level.
///
/// The number of steps is `⌈T/dt⌉`, so the effective step never exceeds the
/// configured one.
pub fn solve_terminal(phi: &(dyn Fn(f64) -> f64 + Sync), band: &VolatilityBand, grid: &Grid1D, horizon: f64) -> Result<ValueSurface> {
    let stepper = Stepper::new(band, grid, horizon)?;
    let nx = grid.nx;
    let levels = stepper.steps + 1;
    let mut values = vec![0.0; levels * nx];
    values[(levels - 1) * nx..].copy_from_slice(&terminal_row(phi, grid)?);
    for k in (0..levels - 1).rev() {
        let (head, tail) = values.split_at_mut((k + 1) * nx);
        let out = &mut head[k * nx..];
        stepper.step(&tail[..nx], out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k });
        }
    }
    let times = (0..levels).map(|k| horizon * k as f64 / stepper.steps as f64).collect();
    Ok(ValueSurface { grid: grid.clone(), times, values })
}

/// Backward solve keeping only the `t = 0` row.
pub(crate) fn solve_to_start(phi: &(dyn Fn(f64) -> f64 + Sync), band: &VolatilityBand, grid: &Grid1D, horizon: f64) -> Result<Vec<f64>> {
    let stepper = Stepper::new(band, grid, horizon)?;
    let mut u = terminal_row(phi, grid)?;
    let mut next = vec![0.0; grid.nx];
    for k in (0..stepper.steps).rev() {
        stepper.step(&u, &mut next);
        std::mem::swap(&mut u, &mut next);
        if !u[grid.nx / 2].is_finite() || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k });
        }
    }
    Ok(u)
}

/// `Ē[φ(B_T)]`: the solution at `(t = 0, x = 0)`.
pub fn g_expectation(phi: &(dyn Fn(f64) -> f64 + Sync), band: &VolatilityBand, grid: &Grid1D, horizon: f64) -> Result<f64> {
    let row = solve_to_start(phi, band, grid, horizon)?;
    interp_linear(grid, &row, 0.0)
}

pub type CylinderFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `ξ = φ(ω(t₁), …, ω(tₙ))` with Lipschitz `φ`.
#[derive(Clone)]
pub struct CylinderFunctional {
    times: Vec<f64>,
    phi: CylinderFn,
    lip_bound: f64,
}

impl CylinderFunctional {
    /// Validates the time grid and spot-checks `|φ(x) − φ(y)| ≤ L|x − y|` on
    /// random pairs.
    pub fn new(times: Vec<f64>, phi: CylinderFn, lip_bound: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidInput("cylinder functional needs at least one time".into()));
        }
        if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!("times must satisfy 0 < t1 < ... < tn, got {times:?}")));
        }
        let n = times.len();
        let mut rng = rng::seeded(0x51ed_270b, n as u64);
        for _ in 0..64 {
            let a: Vec<f64> = (0..n).map(|_| 20.0 * rng::uniform(&mut rng) - 10.0).collect();
            let b: Vec<f64> = (0..n).map(|_| 20.0 * rng::uniform(&mut rng) - 10.0).collect();
            let dist = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let gap = (phi(&a) - phi(&b)).abs();
            if gap > lip_bound * dist * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::InvalidInput(format!("phi violates the Lipschitz bound {lip_bound} between {a:?} and {b:?}")));
            }
        }
        Ok(Self { times, phi, lip_bound })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    pub fn eval(&self, xs: &[f64]) -> f64 {
        (self.phi)(xs)
    }
}

/// Point at which `Ē_t[ξ]` is evaluated.
#[derive(Clone, Copy, Debug)]
pub struct ConditionalQuery {
    pub t: f64,
    pub x: f64,
    /// `ω(t₁)`; required once `t > t₁` for two-marginal functionals.
    pub observed_x1: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ConditionalOptions {
    /// Inner problems are solved at every `inner_stride`-th spatial node and
    /// chained to the outer terminal data by monotone cubic interpolation.
    pub inner_stride: usize,
}

impl Default for ConditionalOptions {
    fn default() -> Self {
        Self { inner_stride: 8 }
    }
}

/// Conditional G-expectation `Ē_t[ξ]` at `(t, x)` for `n ≤ 2` marginals by
/// nested backward solves.
pub fn conditional_g_expectation(
    xi: &CylinderFunctional,
    band: &VolatilityBand,
    grid: &Grid1D,
    query: ConditionalQuery,
    opts: &ConditionalOptions,
) -> Result<f64> {
    let n = xi.times.len();
    if n > 2 {
        return Err(Error::UnsupportedNesting(n));
    }
    let t1 = xi.times[0];
    if !(query.t >= 0.0) || query.t > *xi.times.last().unwrap() {
        return Err(Error::InvalidInput(format!("query time {} outside [0, {}]", query.t, xi.times[n - 1])));
    }
    let observed = |q: &ConditionalQuery| -> Result<f64> {
        match q.observed_x1 {
            Some(v) => Ok(v),
            None if q.t == t1 => Ok(q.x),
            None => Err(Error::InvalidInput("query after t1 needs the observed value x1".into())),
        }
    };

    if n == 1 {
        if query.t >= t1 {
            return Ok(xi.eval(&[observed(&query)?]));
        }
        let phi = |x: f64| xi.eval(&[x]);
        return solve_and_read(&phi, band, grid, t1, query.t, query.x);
    }

    let t2 = xi.times[1];
    if query.t >= t1 {
        let x1 = observed(&query)?;
        if query.t >= t2 {
            return Ok(xi.eval(&[x1, query.x]));
        }
        let inner = |y: f64| xi.eval(&[x1, y]);
        return solve_and_read(&inner, band, grid, t2 - t1, query.t - t1, query.x);
    }

    // Outer terminal data ψ(x₁) = u₂(t₁, x₁; x₁), computed on a sub-grid of
    // x₁ values with the inner grid re-centred at each x₁.
    let stride = opts.inner_stride.max(1);
    let mut knots: Vec<usize> = (0..grid.nx).step_by(stride).collect();
    if *knots.last().unwrap() != grid.nx - 1 {
        knots.push(grid.nx - 1);
    }
    let knot_x: Vec<f64> = knots.iter().map(|&i| grid.x(i)).collect();
    let inner_values = par::map_slice(&knot_x, |&x1| -> Result<f64> {
        let inner_grid = grid.shifted(x1);
        let inner = |y: f64| xi.eval(&[x1, y]);
        let row = solve_to_start(&inner, band, &inner_grid, t2 - t1)?;
        interp_linear(&inner_grid, &row, x1)
    });
    let knot_y = inner_values.into_iter().collect::<Result<Vec<f64>>>()?;
    let chain = MonotoneCubic::new(knot_x, knot_y)?;
    let outer = |x: f64| chain.eval(x);
    solve_and_read(&outer, band, grid, t1, query.t, query.x)
}

fn solve_and_read(phi: &(dyn Fn(f64) -> f64 + Sync), band: &VolatilityBand, grid: &Grid1D, horizon: f64, t: f64, x: f64) -> Result<f64> {
    if t == 0.0 {
        let row = solve_to_start(phi, band, grid, horizon)?;
        return interp_linear(grid, &row, x);
    }
    solve_terminal(phi, band, grid, horizon)?.value_at(t, x)
}

/// Fritsch–Carlson monotone piecewise-cubic Hermite interpolant.
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("monotone cubic needs >= 2 strictly increasing knots".into()));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = delta[0];
        slopes[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] <= 0.0 {
                slopes[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                slopes[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    /// Constant extrapolation outside the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x) - 1;
        let h = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }
}
