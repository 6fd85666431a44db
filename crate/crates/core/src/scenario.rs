//! Volatility-uncertainty scenarios.
//!
//! A scenario is one admissible volatility control `γ` in `[σ̲, σ̄]` together
//! with the G-Brownian increments `dB = γ ξ √dt`, the quadratic-variation
//! increments `γ² dt`, and optionally the Euler trajectory of the G-SDE
//!
//! ```text
//! dX = b(t,X) dt + Σᵢⱼ hᵢⱼ(t,X) d⟨Bⁱ,Bʲ⟩ + σ(t,X) dB.
//! ```
//!
//! Upper expectations are estimated as the maximum of Monte-Carlo means over
//! a finite family of controls.

use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcore::{self, VolatilityBand, BAND_TOL};
use crate::linalg::SymMatrix;
use crate::par;
use crate::rng::{self, NormalStream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidInput("time grid needs at least one step".into()));
        }
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidInput(format!("empty time interval [{t_start}, {t_end}]")));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid { n_steps: self.n_steps * factor, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub enum ControlPolicy {
    /// One uniformly drawn `γ`, held for the whole horizon.
    ConstantRandom,
    /// A fresh uniform draw on every step.
    PiecewiseRandom,
    /// `+` selects `σ̄`, `−` selects `σ̲`; the schedule is cycled.
    BangBang(Vec<Sign>),
    Fixed(SymMatrix),
}

/// Piecewise-constant volatility choice, one matrix per step.
#[derive(Clone, Debug)]
pub struct ControlPath {
    grid: TimeGrid,
    gammas: Vec<SymMatrix>,
}

impl ControlPath {
    pub fn new(grid: TimeGrid, gammas: Vec<SymMatrix>, band: &VolatilityBand) -> Result<Self> {
        if gammas.len() != grid.n_steps {
            return Err(Error::Dimension(format!("{} controls for {} steps", gammas.len(), grid.n_steps)));
        }
        for (k, g) in gammas.iter().enumerate() {
            if !band.contains(g, BAND_TOL) {
                return Err(Error::OutsideBand(format!("step {k}: {g:?}")));
            }
        }
        Ok(Self { grid, gammas })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn gammas(&self) -> &[SymMatrix] {
        &self.gammas
    }

    pub fn gamma(&self, k: usize) -> &SymMatrix {
        &self.gammas[k]
    }

    pub fn dim(&self) -> usize {
        self.gammas[0].dim()
    }

    /// Same control on a grid with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> ControlPath {
        let gammas = self.gammas.iter().flat_map(|g| std::iter::repeat_n(g.clone(), factor)).collect();
        ControlPath { grid: self.grid.refined(factor), gammas }
    }
}

/// Draws an admissible control according to `policy`; the result is a pure
/// function of `(band, grid, policy, seed)`.
pub fn sample_control(band: &VolatilityBand, grid: &TimeGrid, policy: &ControlPolicy, seed: u64) -> Result<ControlPath> {
    let n = grid.n_steps;
    let mut rng = rng::seeded(seed, 0x00c0_4701);
    let gammas = match policy {
        ControlPolicy::ConstantRandom => {
            let g = gcore::random_feasible(band, &mut rng);
            vec![g; n]
        }
        ControlPolicy::PiecewiseRandom => (0..n).map(|_| gcore::random_feasible(band, &mut rng)).collect(),
        ControlPolicy::BangBang(schedule) => {
            if schedule.is_empty() {
                return Err(Error::InvalidInput("empty bang-bang schedule".into()));
            }
            (0..n)
                .map(|k| match schedule[k % schedule.len()] {
                    Sign::Plus => band.upper().clone(),
                    Sign::Minus => band.lower().clone(),
                })
                .collect()
        }
        ControlPolicy::Fixed(g) => {
            if g.dim() != band.dim() || !band.contains(g, BAND_TOL) {
                return Err(Error::OutsideBand(format!("fixed control {g:?}")));
            }
            vec![g.clone(); n]
        }
    };
    ControlPath::new(*grid, gammas, band)
}

/// One discretized scenario. Per-step and per-node data are stored flat:
/// vectors as `d` entries, matrices as `d×d` row-major entries.
#[derive(Clone, Debug)]
pub struct ScenarioPath {
    grid: TimeGrid,
    control: Arc<ControlPath>,
    dim: usize,
    db: Vec<f64>,
    qv_inc: Vec<f64>,
    b: Vec<f64>,
    qv: Vec<f64>,
    x: Option<Vec<f64>>,
    pub seed: u64,
    pub index: u64,
}

impl ScenarioPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn control(&self) -> &ControlPath {
        &self.control
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn db(&self, k: usize) -> &[f64] {
        &self.db[k * self.dim..(k + 1) * self.dim]
    }

    /// `γₖ² dt`, row-major.
    pub fn qv_increment(&self, k: usize) -> &[f64] {
        let m = self.dim * self.dim;
        &self.qv_inc[k * m..(k + 1) * m]
    }

    pub fn b_node(&self, k: usize) -> &[f64] {
        &self.b[k * self.dim..(k + 1) * self.dim]
    }

    pub fn qv_node(&self, k: usize) -> &[f64] {
        let m = self.dim * self.dim;
        &self.qv[k * m..(k + 1) * m]
    }

    pub fn has_state(&self) -> bool {
        self.x.is_some()
    }

    pub fn x_node(&self, k: usize) -> Option<&[f64]> {
        self.x.as_ref().map(|x| &x[k * self.dim..(k + 1) * self.dim])
    }

    pub fn terminal_b(&self) -> &[f64] {
        self.b_node(self.grid.n_steps)
    }

    pub fn terminal_x(&self) -> Option<&[f64]> {
        self.x_node(self.grid.n_steps)
    }

    /// CSV with header `k,t,B_1..B_d,QV_11..QV_dd[,X_1..X_d]`; the `X`
    /// columns appear once the G-SDE has been integrated.
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> io::Result<()> {
        let d = self.dim;
        if header {
            let mut cols = vec!["k".to_string(), "t".to_string()];
            cols.extend((1..=d).map(|i| format!("B_{i}")));
            for i in 1..=d {
                cols.extend((1..=d).map(|j| format!("QV_{i}{j}")));
            }
            if self.x.is_some() {
                cols.extend((1..=d).map(|i| format!("X_{i}")));
            }
            writeln!(w, "{}", cols.join(","))?;
        }
        for k in 0..=self.grid.n_steps {
            let mut row = vec![k.to_string(), self.grid.t(k).to_string()];
            row.extend(self.b_node(k).iter().map(f64::to_string));
            row.extend(self.qv_node(k).iter().map(f64::to_string));
            if let Some(x) = self.x_node(k) {
                row.extend(x.iter().map(f64::to_string));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// G-Brownian scenario under `control`: `dBₖ = γₖ ξₖ √dt` with `ξₖ` drawn
/// from the counter-based stream `(seed, index, k)`.
pub fn simulate_gbm(control: Arc<ControlPath>, seed: u64, index: u64) -> ScenarioPath {
    simulate_gbm_nested(control, seed, index, 1)
}

/// Like [`simulate_gbm`], but each step aggregates `substeps` consecutive
/// draws of the stream, i.e. the path is the coarse skeleton of the scenario
/// simulated on a grid `substeps` times finer. Paths of the same
/// `(seed, index)` at different dyadic levels share one Brownian skeleton.
pub fn simulate_gbm_nested(control: Arc<ControlPath>, seed: u64, index: u64, substeps: usize) -> ScenarioPath {
    let grid = *control.grid();
    let n = grid.n_steps;
    let d = control.dim();
    let m = substeps.max(1);
    let sqrt_dt = grid.dt().sqrt();
    let norm = 1.0 / (m as f64).sqrt();
    let dt = grid.dt();
    let mut stream = NormalStream::new(seed, index);
    let mut db = Vec::with_capacity(n * d);
    let mut qv_inc = Vec::with_capacity(n * d * d);
    let mut xi = vec![0.0; d];
    for k in 0..n {
        xi.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..m {
            for v in xi.iter_mut() {
                *v += stream.next_normal();
            }
        }
        let gamma = control.gamma(k);
        push_increments(gamma, &xi, norm * sqrt_dt, dt, &mut db, &mut qv_inc);
    }
    assemble(grid, control, d, db, qv_inc, seed, index)
}

fn push_increments(gamma: &SymMatrix, xi: &[f64], scale: f64, dt: f64, db: &mut Vec<f64>, qv_inc: &mut Vec<f64>) {
    let d = xi.len();
    if d == 1 {
        let g = gamma.get(0, 0);
        db.push(g * xi[0] * scale);
        qv_inc.push(g * g * dt);
        return;
    }
    let gm = gamma.as_matrix();
    let step = gm * DVector::from_column_slice(xi) * scale;
    db.extend(step.iter());
    let sq = gamma.square();
    for i in 0..d {
        for j in 0..d {
            qv_inc.push(sq.get(i, j) * dt);
        }
    }
}

fn assemble(grid: TimeGrid, control: Arc<ControlPath>, d: usize, db: Vec<f64>, qv_inc: Vec<f64>, seed: u64, index: u64) -> ScenarioPath {
    let n = grid.n_steps;
    let mut b = vec![0.0; (n + 1) * d];
    let mut qv = vec![0.0; (n + 1) * d * d];
    for k in 0..n {
        for j in 0..d {
            b[(k + 1) * d + j] = b[k * d + j] + db[k * d + j];
        }
        let m = d * d;
        for j in 0..m {
            qv[(k + 1) * m + j] = qv[k * m + j] + qv_inc[k * m + j];
        }
    }
    ScenarioPath { grid, control, dim: d, db, qv_inc, b, qv, x: None, seed, index }
}

/// State-feedback control rule `γ = rule(t, B_t)`; outputs are pulled into
/// the band before use.
pub type FeedbackRule = Arc<dyn Fn(f64, &[f64]) -> SymMatrix + Send + Sync>;

/// Simulates a scenario whose control depends on the current value of `B`.
/// The realized control is recorded in the returned path.
pub fn simulate_feedback(
    band: &VolatilityBand,
    grid: &TimeGrid,
    rule: &FeedbackRule,
    seed: u64,
    index: u64,
    substeps: usize,
) -> Result<ScenarioPath> {
    let n = grid.n_steps;
    let d = band.dim();
    let m = substeps.max(1);
    let norm = 1.0 / (m as f64).sqrt();
    let dt = grid.dt();
    let mut stream = NormalStream::new(seed, index);
    let mut db = Vec::with_capacity(n * d);
    let mut qv_inc = Vec::with_capacity(n * d * d);
    let mut gammas = Vec::with_capacity(n);
    let mut b_now = vec![0.0; d];
    let mut xi = vec![0.0; d];
    for k in 0..n {
        let gamma = gcore::project_to_band(&rule(grid.t(k), &b_now), band)?;
        xi.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..m {
            for v in xi.iter_mut() {
                *v += stream.next_normal();
            }
        }
        push_increments(&gamma, &xi, norm * dt.sqrt(), dt, &mut db, &mut qv_inc);
        for j in 0..d {
            b_now[j] += db[k * d + j];
        }
        gammas.push(gamma);
    }
    let control = Arc::new(ControlPath::new(*grid, gammas, band)?);
    Ok(assemble(*grid, control, d, db, qv_inc, seed, index))
}

pub type VectorField = Arc<dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// Coefficients `b`, `hᵢⱼ = hⱼᵢ`, `σ` of the G-SDE.
#[derive(Clone)]
pub struct CoefficientSet {
    dim: usize,
    pub b: VectorField,
    /// `h[i*d + j]`.
    pub h: Vec<VectorField>,
    pub sigma: MatrixField,
    /// Lipschitz constant `K` (metadata, spot-checked by
    /// [`CoefficientSet::check_lipschitz`]).
    pub lipschitz_k: f64,
}

impl CoefficientSet {
    pub fn new(dim: usize, b: VectorField, h: Vec<VectorField>, sigma: MatrixField, lipschitz_k: f64) -> Result<Self> {
        if dim == 0 || h.len() != dim * dim {
            return Err(Error::Dimension(format!("need d*d = {} h-fields, got {}", dim * dim, h.len())));
        }
        if !(lipschitz_k >= 0.0) {
            return Err(Error::InvalidInput(format!("lipschitz_k must be >= 0, got {lipschitz_k}")));
        }
        Ok(Self { dim, b, h, sigma, lipschitz_k })
    }

    /// One-dimensional coefficients from scalar functions of `(t, x)`.
    pub fn scalar(
        b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        lipschitz_k: f64,
    ) -> Self {
        Self {
            dim: 1,
            b: Arc::new(move |t, x| DVector::from_element(1, b(t, x[0]))),
            h: vec![Arc::new(move |t, x| DVector::from_element(1, h(t, x[0])))],
            sigma: Arc::new(move |t, x| DMatrix::from_element(1, 1, sigma(t, x[0]))),
            lipschitz_k,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h_ij(&self, i: usize, j: usize, t: f64, x: &[f64]) -> DVector<f64> {
        (self.h[i * self.dim + j])(t, x)
    }

    /// `Σᵢ hᵢᵢ(t, x)`.
    pub fn h_trace(&self, t: f64, x: &[f64]) -> DVector<f64> {
        (0..self.dim).fold(DVector::zeros(self.dim), |acc, i| acc + self.h_ij(i, i, t, x))
    }

    /// Spot-checks `hᵢⱼ = hⱼᵢ` at the given points.
    pub fn check_symmetry(&self, points: &[(f64, Vec<f64>)]) -> Result<()> {
        for (t, x) in points {
            for i in 0..self.dim {
                for j in (i + 1)..self.dim {
                    let diff = (self.h_ij(i, j, *t, x) - self.h_ij(j, i, *t, x)).norm();
                    if diff > 1e-12 {
                        return Err(Error::InvalidInput(format!("h[{i}][{j}] != h[{j}][{i}] at t={t}, x={x:?}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Spot-checks the Lipschitz bound on `n_pairs` random pairs drawn from
    /// `[−radius, radius]^d` with times in `[t0, t1]`.
    pub fn check_lipschitz(&self, t0: f64, t1: f64, radius: f64, n_pairs: usize, seed: u64) -> Result<()> {
        let d = self.dim;
        let mut rng = rng::seeded(seed, 0x11b5);
        for _ in 0..n_pairs {
            let t = t0 + (t1 - t0) * rng::uniform(&mut rng);
            let x: Vec<f64> = (0..d).map(|_| radius * (2.0 * rng::uniform(&mut rng) - 1.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| radius * (2.0 * rng::uniform(&mut rng) - 1.0)).collect();
            let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let mut lhs = ((self.b)(t, &x) - (self.b)(t, &y)).norm();
            for h in &self.h {
                lhs += (h(t, &x) - h(t, &y)).norm();
            }
            lhs += ((self.sigma)(t, &x) - (self.sigma)(t, &y)).norm();
            if lhs > self.lipschitz_k * dist * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "Lipschitz bound K = {} violated between {x:?} and {y:?} (ratio {})",
                    self.lipschitz_k,
                    lhs / dist
                )));
            }
        }
        Ok(())
    }
}

/// Integrates the G-SDE along `path` by Euler stepping with left-endpoint
/// coefficients, filling `X`.
pub fn euler_gsde(coeffs: &CoefficientSet, x0: &[f64], mut path: ScenarioPath) -> Result<ScenarioPath> {
    let d = path.dim;
    if coeffs.dim != d || x0.len() != d {
        return Err(Error::Dimension(format!("coefficients d = {}, x0 d = {}, path d = {d}", coeffs.dim, x0.len())));
    }
    let n = path.grid.n_steps;
    let dt = path.grid.dt();
    let mut x = vec![0.0; (n + 1) * d];
    x[..d].copy_from_slice(x0);
    for k in 0..n {
        let t = path.grid.t(k);
        let (head, tail) = x.split_at_mut((k + 1) * d);
        let xk = &head[k * d..];
        let next = &mut tail[..d];
        let drift = (coeffs.b)(t, xk);
        let diffusion = (coeffs.sigma)(t, xk);
        let db = path.db(k);
        let qv = path.qv_increment(k);
        for l in 0..d {
            next[l] = xk[l] + drift[l] * dt;
        }
        for i in 0..d {
            for j in 0..d {
                let w = qv[i * d + j];
                if w != 0.0 {
                    let hij = coeffs.h_ij(i, j, t, xk);
                    for l in 0..d {
                        next[l] += hij[l] * w;
                    }
                }
            }
        }
        for l in 0..d {
            for m in 0..d {
                next[l] += diffusion[(l, m)] * db[m];
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrajectoryBlowUp { step: k });
        }
    }
    path.x = Some(x);
    Ok(path)
}

pub type TerminalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type PathFn = Arc<dyn Fn(&ScenarioPath) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Payoff {
    /// Function of the terminal state: `X_T` when coefficients are given,
    /// otherwise `B_T`.
    Terminal(TerminalFn),
    Path(PathFn),
}

impl Payoff {
    pub fn terminal(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Payoff::Terminal(Arc::new(f))
    }

    fn eval(&self, path: &ScenarioPath) -> f64 {
        match self {
            Payoff::Terminal(f) => f(path.terminal_x().unwrap_or_else(|| path.terminal_b())),
            Payoff::Path(f) => f(path),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlEstimate {
    pub label: String,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UpperEstimate {
    /// Maximum Monte-Carlo mean over the control family (a lower bound for
    /// the upper expectation, up to sampling error).
    pub value: f64,
    pub argmax: usize,
    pub argmax_label: String,
    pub std_error: f64,
    pub per_control: Vec<ControlEstimate>,
}

/// A labelled member of a control family.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub label: String,
    pub control: Arc<ControlPath>,
}

/// The default family: constant `σ̲`, constant `σ̄`, then `n_controls − 2`
/// sampled controls cycling through constant-random, piecewise-random and
/// random bang-bang policies.
pub fn default_family(band: &VolatilityBand, grid: &TimeGrid, n_controls: usize, seed: u64) -> Result<Vec<FamilyMember>> {
    let mut out = vec![
        FamilyMember {
            label: "constant_lower".into(),
            control: Arc::new(sample_control(band, grid, &ControlPolicy::Fixed(band.lower().clone()), seed)?),
        },
        FamilyMember {
            label: "constant_upper".into(),
            control: Arc::new(sample_control(band, grid, &ControlPolicy::Fixed(band.upper().clone()), seed)?),
        },
    ];
    for c in 2..n_controls.max(2) {
        let control_seed = seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(c as u64));
        let (label, policy) = match (c - 2) % 3 {
            0 => ("constant_random", ControlPolicy::ConstantRandom),
            1 => ("piecewise_random", ControlPolicy::PiecewiseRandom),
            _ => {
                let mut rng = rng::seeded(control_seed, 0x5c4e);
                let schedule = (0..grid.n_steps).map(|_| if rng::uniform(&mut rng) < 0.5 { Sign::Plus } else { Sign::Minus }).collect();
                ("bang_bang_random", ControlPolicy::BangBang(schedule))
            }
        };
        out.push(FamilyMember { label: format!("{label}_{c}"), control: Arc::new(sample_control(band, grid, &policy, control_seed)?) });
    }
    Ok(out)
}

/// Monte-Carlo mean and standard error of `payoff` under each member of
/// `family`. Sample `j` uses scenario index `j` under every control.
pub fn estimate_over_family(
    payoff: &Payoff,
    coeffs: Option<&CoefficientSet>,
    x0: &[f64],
    family: &[FamilyMember],
    n_mc: usize,
    seed: u64,
) -> Result<UpperEstimate> {
    if family.is_empty() {
        return Err(Error::InvalidInput("empty control family".into()));
    }
    if n_mc < 2 {
        return Err(Error::InvalidInput("need at least two Monte-Carlo samples per control".into()));
    }
    let mut per_control = Vec::with_capacity(family.len());
    for member in family {
        let samples = par::map_indices(n_mc, |j| -> Result<f64> {
            let path = simulate_gbm(member.control.clone(), seed, j as u64);
            let path = match coeffs {
                Some(c) => euler_gsde(c, x0, path)?,
                None => path,
            };
            Ok(payoff.eval(&path))
        });
        let samples = samples.into_iter().collect::<Result<Vec<f64>>>()?;
        let (mean, std_error) = mean_and_se(&samples);
        per_control.push(ControlEstimate { label: member.label.clone(), mean, std_error });
    }
    let mut argmax = 0;
    for (c, est) in per_control.iter().enumerate() {
        if est.mean > per_control[argmax].mean {
            argmax = c;
        }
    }
    Ok(UpperEstimate {
        value: per_control[argmax].mean,
        argmax,
        argmax_label: per_control[argmax].label.clone(),
        std_error: per_control[argmax].std_error,
        per_control,
    })
}

/// `Ē[payoff] ≈ max over sampled controls of the Monte-Carlo mean`; the
/// family always contains the constant endpoint controls.
#[allow(clippy::too_many_arguments)]
pub fn estimate_upper_expectation(
    payoff: &Payoff,
    coeffs: Option<&CoefficientSet>,
    x0: &[f64],
    band: &VolatilityBand,
    grid: &TimeGrid,
    n_controls: usize,
    n_mc_per_control: usize,
    seed: u64,
) -> Result<UpperEstimate> {
    if n_controls < 1 {
        return Err(Error::InvalidInput("need at least one control".into()));
    }
    let family = default_family(band, grid, n_controls, seed)?;
    estimate_over_family(payoff, coeffs, x0, &family, n_mc_per_control, seed)
}

/// Sequential mean and standard error (sample standard deviation over `√n`).
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
