//! Volatility bands and the generating function
//! `G(A) = ½ sup { trace(A γ²) : σ̲ ≤ γ ≤ σ̄ }`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::rng;

/// Tolerance used by the eigenvalue tests on band membership.
pub const BAND_TOL: f64 = 1e-10;

/// The order interval `[σ̲, σ̄]` of symmetric volatility matrices.
///
/// `σ̲` must be positive definite and `σ̄ − σ̲` positive semidefinite. The
/// degenerate case `σ̲ = σ̄` is accepted and describes a single classical
/// Gaussian scenario (see [`VolatilityBand::is_singleton`]).
#[derive(Clone, Debug)]
pub struct VolatilityBand {
    lower: SymMatrix,
    upper: SymMatrix,
    lower_sq: SymMatrix,
    upper_sq: SymMatrix,
    commuting: bool,
    centre: SymMatrix,
    /// `W^{-1/2}` for the half-width `W = (σ̄ − σ̲)/2`, when `W` is definite.
    half_width_inv_sqrt: Option<SymMatrix>,
    /// `S = (σ̄ − σ̲)^{1/2}`: the band is `{σ̲ + S K S : 0 ≤ K ≤ I}`.
    width_sqrt: SymMatrix,
}

impl VolatilityBand {
    pub fn new(sigma_lower: SymMatrix, sigma_upper: SymMatrix) -> Result<Self> {
        if sigma_lower.dim() != sigma_upper.dim() {
            return Err(Error::Dimension(format!(
                "sigma_lower is {}x{}, sigma_upper is {}x{}",
                sigma_lower.dim(),
                sigma_lower.dim(),
                sigma_upper.dim(),
                sigma_upper.dim()
            )));
        }
        let all_finite = sigma_lower.as_matrix().iter().all(|v| v.is_finite()) && sigma_upper.as_matrix().iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidBand("non-finite entries".into()));
        }
        let lo = sigma_lower.min_eigenvalue();
        if lo <= 0.0 {
            return Err(Error::InvalidBand(format!("sigma_lower must be positive definite (smallest eigenvalue {lo})")));
        }
        let gap = (&sigma_upper - &sigma_lower).min_eigenvalue();
        if gap < -BAND_TOL {
            return Err(Error::InvalidBand(format!("sigma_upper - sigma_lower must be positive semidefinite (smallest eigenvalue {gap})")));
        }
        let scale = sigma_lower.hs_norm() * sigma_upper.hs_norm();
        let commuting = sigma_lower.commutator_norm(&sigma_upper) <= 1e-10 * scale.max(1.0);
        let centre = (&sigma_lower + &sigma_upper).scale(0.5);
        let half_width = (&sigma_upper - &sigma_lower).scale(0.5);
        let half_width_inv_sqrt = (half_width.min_eigenvalue() > 1e-12 * half_width.max_eigenvalue().max(1e-300))
            .then(|| half_width.map_spectrum(|v| 1.0 / v.sqrt()));
        let width_sqrt = (&sigma_upper - &sigma_lower).map_spectrum(|v| v.max(0.0).sqrt());
        Ok(Self {
            width_sqrt,
            centre,
            half_width_inv_sqrt,
            lower_sq: sigma_lower.square(),
            upper_sq: sigma_upper.square(),
            lower: sigma_lower,
            upper: sigma_upper,
            commuting,
        })
    }

    pub fn scalar(sigma_lower: f64, sigma_upper: f64) -> Result<Self> {
        Self::new(SymMatrix::scalar(sigma_lower), SymMatrix::scalar(sigma_upper))
    }

    /// `σ̲ = a·I`, `σ̄ = b·I`.
    pub fn isotropic(d: usize, sigma_lower: f64, sigma_upper: f64) -> Result<Self> {
        Self::new(SymMatrix::identity(d).scale(sigma_lower), SymMatrix::identity(d).scale(sigma_upper))
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn lower(&self) -> &SymMatrix {
        &self.lower
    }

    pub fn upper(&self) -> &SymMatrix {
        &self.upper
    }

    pub fn lower_sq(&self) -> &SymMatrix {
        &self.lower_sq
    }

    pub fn upper_sq(&self) -> &SymMatrix {
        &self.upper_sq
    }

    pub fn is_singleton(&self) -> bool {
        (&self.upper - &self.lower).hs_norm() == 0.0
    }

    /// `σ̲ ≤ γ ≤ σ̄` up to `tol` on the eigenvalues of both gaps.
    pub fn contains(&self, gamma: &SymMatrix, tol: f64) -> bool {
        gamma.dim() == self.dim() && (gamma - &self.lower).is_psd(tol) && (&self.upper - gamma).is_psd(tol)
    }

    fn scalar_bounds(&self) -> Result<(f64, f64)> {
        if self.dim() != 1 {
            return Err(Error::BandNotScalar);
        }
        Ok((self.lower.get(0, 0), self.upper.get(0, 0)))
    }
}

/// `G(a) = (σ̄² a⁺ − σ̲² a⁻) / 2` for a scalar band.
pub fn eval_g_1d(a: f64, band: &VolatilityBand) -> Result<f64> {
    let (lo, hi) = band.scalar_bounds()?;
    Ok(g_scalar(a, lo, hi))
}

#[inline]
pub(crate) fn g_scalar(a: f64, lo: f64, hi: f64) -> f64 {
    if a >= 0.0 {
        0.5 * hi * hi * a
    } else {
        0.5 * lo * lo * a
    }
}

/// Unique inverse of [`eval_g_1d`]: `2y/σ̄²` for `y ≥ 0`, `2y/σ̲²` otherwise.
pub fn eval_g_inverse_1d(y: f64, band: &VolatilityBand) -> Result<f64> {
    let (lo, hi) = band.scalar_bounds()?;
    Ok(if y >= 0.0 { 2.0 * y / (hi * hi) } else { 2.0 * y / (lo * lo) })
}

/// Settings of the projected multi-start ascent used when `G(A)` has no
/// closed form.
#[derive(Clone, Debug)]
pub struct AscentOptions {
    /// Step is `step_scale / (‖A‖_HS ‖σ̄ − σ̲‖²)` in the band coordinates `K`.
    pub step_scale: f64,
    pub max_iterations: usize,
    /// Random feasible starts, in addition to the two endpoints and the two
    /// spectral starts.
    pub random_starts: usize,
    pub seed: u64,
    /// Stop a start once successive iterates move less than this
    /// (relative to `1 + ‖K‖_HS`).
    pub tolerance: f64,
    /// Skip the commuting closed form even when it applies.
    pub force_ascent: bool,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self { step_scale: 0.5, max_iterations: 500, random_starts: 8, seed: 0x6a09_e667_f3bc_c908, tolerance: 1e-12, force_ascent: false }
    }
}

/// Result of evaluating `G(A)`.
#[derive(Clone, Debug, Serialize)]
pub struct GValue {
    pub value: f64,
    /// Closed form (scalar band or commuting inputs).
    pub exact: bool,
    /// Ascent hit the iteration cap; `value` is a certified lower bound only.
    pub lower_bound_only: bool,
}

/// Evaluates `G(A) = ½ sup_{σ̲ ≤ γ ≤ σ̄} trace(A γ²)`.
///
/// Scalar bands use the closed form of [`eval_g_1d`] bit-for-bit. When `σ̲`,
/// `σ̄` and `A` commute the supremum is computed exactly in the common
/// eigenbasis. Otherwise a projected gradient ascent with multiple starts is
/// run and the best feasible value is returned.
pub fn eval_g_matrix(a: &SymMatrix, band: &VolatilityBand, opts: &AscentOptions) -> Result<GValue> {
    if a.dim() != band.dim() {
        return Err(Error::Dimension(format!("matrix is {}x{}, band is {}x{}", a.dim(), a.dim(), band.dim(), band.dim())));
    }
    if band.dim() == 1 {
        return Ok(GValue {
            value: g_scalar(a.get(0, 0), band.lower.get(0, 0), band.upper.get(0, 0)),
            exact: true,
            lower_bound_only: false,
        });
    }
    if !opts.force_ascent && commutes_with_band(a, band) {
        return Ok(GValue { value: g_commuting(a, band), exact: true, lower_bound_only: false });
    }
    Ok(g_ascent(a, band, opts))
}

fn commutes_with_band(a: &SymMatrix, band: &VolatilityBand) -> bool {
    if !band.commuting {
        return false;
    }
    let an = a.hs_norm();
    if an == 0.0 {
        return true;
    }
    band.lower_sq.commutator_norm(a) <= 1e-10 * an * band.lower_sq.hs_norm().max(1.0)
        && band.upper_sq.commutator_norm(a) <= 1e-10 * an * band.upper_sq.hs_norm().max(1.0)
}

/// Closed form in the common eigenbasis of pairwise commuting `σ̲², σ̄², A`.
pub(crate) fn g_commuting(a: &SymMatrix, band: &VolatilityBand) -> f64 {
    // A generic combination of commuting symmetric matrices has the common
    // eigenvectors as its own.
    let mix = a.as_matrix() + band.lower_sq.as_matrix() * 0.577_215_664_901_532_9 + band.upper_sq.as_matrix() * 1.324_717_957_244_746;
    let basis = SymMatrix::from_nearly_symmetric(mix).eigen().eigenvectors;
    let mut total = 0.0;
    for col in basis.column_iter() {
        let quad = |m: &DMatrix<f64>| col.dot(&(m * col));
        let ai = quad(a.as_matrix());
        let lo2 = quad(band.lower_sq.as_matrix());
        let hi2 = quad(band.upper_sq.as_matrix());
        total += if ai >= 0.0 { hi2 * ai } else { lo2 * ai };
    }
    0.5 * total
}

fn objective(a: &SymMatrix, gamma: &SymMatrix) -> f64 {
    0.5 * a.hs_inner(&gamma.square())
}

/// Multi-start projected gradient ascent.
///
/// The iteration runs in the coordinates `γ = σ̲ + S K S`, `S = (σ̄ − σ̲)^{1/2}`,
/// where the band is the matrix unit interval `0 ≤ K ≤ I` and the projection
/// is an exact spectral clip to `[0, 1]`. Starts: both endpoints, the
/// spectral projectors of the gradient at each endpoint (the maximizers of
/// a convex objective sit on projectors), and `random_starts` random points.
fn g_ascent(a: &SymMatrix, band: &VolatilityBand, opts: &AscentOptions) -> GValue {
    let norm = a.hs_norm();
    let width = band.width_sqrt.max_eigenvalue().powi(2);
    if norm == 0.0 || width == 0.0 {
        let value = objective(a, &band.lower);
        return GValue { value, exact: true, lower_bound_only: false };
    }
    // The gradient in K is Lipschitz with constant at most ‖A‖_HS·‖σ̄ − σ̲‖²,
    // so any step_scale ≤ 1 is a safe fraction of the inverse.
    let step = opts.step_scale / (norm * width * width);
    let d = band.dim();
    let mut starts = vec![SymMatrix::zeros(d), SymMatrix::identity(d)];
    for end in [&band.lower, &band.upper] {
        let grad = band_gradient(a, band, end);
        starts.push(grad.map_spectrum(|v| if v > 0.0 { 1.0 } else { 0.0 }));
    }
    let mut rng = rng::seeded(opts.seed, d as u64);
    for _ in 0..opts.random_starts {
        starts.push(random_unit_interval(d, &mut rng));
    }

    let mut best = f64::NEG_INFINITY;
    let mut best_converged = false;
    for start in starts {
        let (value, converged) = ascend(a, band, opts, start, step);
        if value > best {
            best = value;
            best_converged = converged;
        } else if value == best {
            best_converged |= converged;
        }
    }
    GValue { value: best, exact: false, lower_bound_only: !best_converged }
}

fn gamma_of(band: &VolatilityBand, k: &SymMatrix) -> SymMatrix {
    let s = band.width_sqrt.as_matrix();
    SymMatrix::from_nearly_symmetric(band.lower.as_matrix() + s * k.as_matrix() * s)
}

/// Gradient of `½ trace(A γ²)` with respect to `K` at `γ`: `S ½(Aγ + γA) S`.
fn band_gradient(a: &SymMatrix, band: &VolatilityBand, gamma: &SymMatrix) -> SymMatrix {
    let ag = a.as_matrix() * gamma.as_matrix();
    let s = band.width_sqrt.as_matrix();
    SymMatrix::from_nearly_symmetric(s * ((&ag + ag.transpose()) * 0.5) * s)
}

/// Number of iterations without improvement after which a start counts as
/// settled.
const PLATEAU_ITERATIONS: usize = 20;

/// Accelerated (Nesterov, with restart on decrease) projected ascent from
/// `start` in `K` coordinates; returns the best value seen and whether the
/// iterates settled (stopped moving, or the best value stalled for
/// [`PLATEAU_ITERATIONS`] iterations).
fn ascend(a: &SymMatrix, band: &VolatilityBand, opts: &AscentOptions, start: SymMatrix, step: f64) -> (f64, bool) {
    let clip = |m: &SymMatrix| m.map_spectrum(|v| v.clamp(0.0, 1.0));
    let mut k = start;
    let mut prev = k.clone();
    let mut value = objective(a, &gamma_of(band, &k));
    let mut current = value;
    let mut momentum_age = 0usize;
    let mut stalled = 0;
    for _ in 0..opts.max_iterations {
        let beta = momentum_age as f64 / (momentum_age as f64 + 3.0);
        let y = &k + &(&k - &prev).scale(beta);
        let grad = band_gradient(a, band, &gamma_of(band, &y));
        let next = clip(&(&y + &grad.scale(step)));
        let next_value = objective(a, &gamma_of(band, &next));
        if next_value < current {
            // Restart: drop the momentum and retry from the current point.
            if momentum_age == 0 {
                stalled += 1;
                if stalled >= PLATEAU_ITERATIONS {
                    return (value, true);
                }
            }
            momentum_age = 0;
            prev = k.clone();
            continue;
        }
        let shift = (&next - &k).hs_norm();
        prev = std::mem::replace(&mut k, next);
        current = next_value;
        momentum_age += 1;
        if next_value > value + 1e-14 * (1.0 + value.abs()) {
            stalled = 0;
        } else {
            stalled += 1;
        }
        value = value.max(next_value);
        if shift <= opts.tolerance * (1.0 + k.hs_norm()) || stalled >= PLATEAU_ITERATIONS {
            return (value, true);
        }
    }
    (value, false)
}

/// `Uᵀ diag(u) U` with Haar-random orthogonal `U` and uniform `uᵢ ∈ [0, 1)`.
fn random_unit_interval(d: usize, rng: &mut impl rand::RngCore) -> SymMatrix {
    if d == 1 {
        return SymMatrix::scalar(rng::uniform(rng));
    }
    let u = haar_orthogonal(d, rng);
    let diag: Vec<f64> = (0..d).map(|_| rng::uniform(rng)).collect();
    SymMatrix::from_nearly_symmetric(u.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) * &u)
}

/// A random admissible volatility `σ̲ + S K S` with `K` drawn by
/// [`random_unit_interval`]; feasible by construction.
pub(crate) fn random_feasible(band: &VolatilityBand, rng: &mut impl rand::RngCore) -> SymMatrix {
    gamma_of(band, &random_unit_interval(band.dim(), rng))
}

pub(crate) fn haar_orthogonal(d: usize, rng: &mut impl rand::RngCore) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng::normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Smallest eigenvalue of `σ̲²`, the non-degeneracy constant of `G`.
pub fn nondegeneracy_delta(band: &VolatilityBand) -> f64 {
    band.lower_sq.min_eigenvalue()
}

/// Pulls a symmetric matrix into `[σ̲, σ̄]` by two-sided alternating
/// eigenvalue clipping (10 rounds). For non-commuting bands the rounds may
/// stop short of the band; the remainder is removed by moving radially
/// towards the band centre, which is exact and leaves feasible inputs
/// untouched. Scalar bands clamp exactly.
pub fn project_to_band(m: &SymMatrix, band: &VolatilityBand) -> Result<SymMatrix> {
    if m.dim() != band.dim() {
        return Err(Error::Dimension(format!("matrix is {}x{}, band is {}x{}", m.dim(), m.dim(), band.dim(), band.dim())));
    }
    Ok(project_rounds(m, band, 10))
}

pub(crate) fn project_rounds(m: &SymMatrix, band: &VolatilityBand, rounds: usize) -> SymMatrix {
    if band.dim() == 1 {
        let (lo, hi) = (band.lower.get(0, 0), band.upper.get(0, 0));
        return SymMatrix::scalar(m.get(0, 0).clamp(lo, hi));
    }
    let mut g = m.clone();
    for _ in 0..rounds {
        let mut changed = false;
        if let Some(clipped) = (&g - &band.lower).positive_part_if_needed() {
            g = &band.lower + &clipped;
            changed = true;
        }
        if let Some(clipped) = (&band.upper - &g).positive_part_if_needed() {
            g = &band.upper - &clipped;
            changed = true;
        }
        if !changed {
            return g;
        }
    }
    radial_pull(g, band)
}

/// Largest `θ ∈ [0, 1]` with `C + θ(g − C)` in the band, `C` the centre.
fn radial_pull(g: SymMatrix, band: &VolatilityBand) -> SymMatrix {
    if band.contains(&g, 0.0) {
        return g;
    }
    let dev = &g - &band.centre;
    let theta = match &band.half_width_inv_sqrt {
        Some(w) => {
            let scaled = SymMatrix::from_nearly_symmetric(w.as_matrix() * dev.as_matrix() * w.as_matrix());
            let rho = scaled.eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rho <= 1.0 {
                return g;
            }
            // Shave a few ulps so rounding cannot push the result outside.
            (1.0 / rho) * (1.0 - 4.0 * f64::EPSILON)
        }
        None => {
            // Degenerate width: bisect on membership.
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if band.contains(&(&band.centre + &dev.scale(mid)), 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    };
    &band.centre + &dev.scale(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band12() -> VolatilityBand {
        VolatilityBand::scalar(1.0, 2.0).unwrap()
    }

    #[test]
    fn g_1d_examples() {
        let b = band12();
        assert_eq!(eval_g_1d(2.0, &b).unwrap(), 4.0);
        assert_eq!(eval_g_1d(0.0, &b).unwrap(), 0.0);
        assert_eq!(eval_g_1d(-2.0, &b).unwrap(), -1.0);
    }

    #[test]
    fn g_inverse_examples() {
        let b = band12();
        assert_eq!(eval_g_inverse_1d(4.0, &b).unwrap(), 2.0);
        assert_eq!(eval_g_inverse_1d(0.0, &b).unwrap(), 0.0);
        assert_eq!(eval_g_inverse_1d(-1.0, &b).unwrap(), -2.0);
    }

    #[test]
    fn scalar_ops_reject_matrix_band() {
        let b = VolatilityBand::isotropic(2, 1.0, 2.0).unwrap();
        assert!(matches!(eval_g_1d(1.0, &b), Err(Error::BandNotScalar)));
        assert!(matches!(eval_g_inverse_1d(1.0, &b), Err(Error::BandNotScalar)));
    }

    #[test]
    fn band_validation() {
        assert!(VolatilityBand::scalar(0.0, 1.0).is_err());
        assert!(VolatilityBand::scalar(2.0, 1.0).is_err());
        assert!(VolatilityBand::scalar(1.0, 1.0).unwrap().is_singleton());
        let lower = SymMatrix::identity(2);
        let upper = SymMatrix::identity(3);
        assert!(VolatilityBand::new(lower, upper).is_err());
    }

    /// Exhaustive search over diagonal γ = diag(g₁, g₂), gᵢ ∈ {1.00, …, 2.00}.
    fn diagonal_grid_oracle(a: &[f64; 2]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..=100 {
            for j in 0..=100 {
                let g1 = 1.0 + i as f64 / 100.0;
                let g2 = 1.0 + j as f64 / 100.0;
                best = best.max(0.5 * (a[0] * g1 * g1 + a[1] * g2 * g2));
            }
        }
        best
    }

    #[test]
    fn g_matrix_examples() {
        let b = VolatilityBand::isotropic(2, 1.0, 2.0).unwrap();
        let opts = AscentOptions::default();
        let oracle = diagonal_grid_oracle(&[1.0, -1.0]);
        assert!((oracle - 1.5).abs() < 1e-12);
        let a = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let v = eval_g_matrix(&a, &b, &opts).unwrap();
        assert!(v.exact);
        assert!((v.value - oracle).abs() < 1e-12);
        let v = eval_g_matrix(&SymMatrix::identity(2), &b, &opts).unwrap();
        assert!((v.value - 4.0).abs() < 1e-12);
        let v = eval_g_matrix(&SymMatrix::identity(2).scale(-1.0), &b, &opts).unwrap();
        assert!((v.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_ascent_reaches_closed_form() {
        let b = VolatilityBand::isotropic(2, 1.0, 2.0).unwrap();
        let opts = AscentOptions { force_ascent: true, ..Default::default() };
        let v = eval_g_matrix(&SymMatrix::from_diagonal(&[1.0, -1.0]), &b, &opts).unwrap();
        assert!(!v.exact);
        assert!((v.value - 1.5).abs() < 1e-6, "{}", v.value);
    }

    #[test]
    fn g_matrix_on_scalar_band_is_g_1d() {
        let b = band12();
        for &a in &[-3.5, -1e-9, 0.0, 0.7, 12.0] {
            let m = eval_g_matrix(&SymMatrix::scalar(a), &b, &AscentOptions::default()).unwrap();
            assert_eq!(m.value.to_bits(), eval_g_1d(a, &b).unwrap().to_bits());
        }
    }

    #[test]
    fn delta_examples() {
        let b = VolatilityBand::new(SymMatrix::from_diagonal(&[1.0, 0.5]), SymMatrix::from_diagonal(&[2.0, 2.0])).unwrap();
        assert!((nondegeneracy_delta(&b) - 0.25).abs() < 1e-15);
        assert_eq!(nondegeneracy_delta(&VolatilityBand::scalar(1.0, 2.0).unwrap()), 1.0);
        // σ̲² = [[2,1],[1,2]] has eigenvalues {1, 3}.
        let lower_sq = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let lower = lower_sq.map_spectrum(f64::sqrt);
        let b = VolatilityBand::new(lower, SymMatrix::identity(2).scale(3.0)).unwrap();
        assert!((nondegeneracy_delta(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let b = band12();
        assert_eq!(project_to_band(&SymMatrix::scalar(3.0), &b).unwrap().get(0, 0), 2.0);
        assert_eq!(project_to_band(&SymMatrix::scalar(0.2), &b).unwrap().get(0, 0), 1.0);
        let b2 = VolatilityBand::isotropic(2, 1.0, 2.0).unwrap();
        let inside = SymMatrix::from_rows(&[vec![1.5, 0.1], vec![0.1, 1.4]]).unwrap();
        assert_eq!(project_to_band(&inside, &b2).unwrap(), inside);
        let p = project_to_band(&SymMatrix::zeros(2), &b2).unwrap();
        assert!((&p - &SymMatrix::identity(2)).hs_norm() < 1e-14);
    }

    #[test]
    fn projection_lands_in_band() {
        let lower = SymMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.8]]).unwrap();
        let upper = SymMatrix::from_rows(&[vec![2.5, -0.3], vec![-0.3, 2.0]]).unwrap();
        let b = VolatilityBand::new(lower, upper).unwrap();
        let mut rng = rng::seeded(5, 0);
        for _ in 0..50 {
            let m =
                SymMatrix::from_rows(&[vec![4.0 * rng::normal(&mut rng), rng::normal(&mut rng)], vec![0.0, 4.0 * rng::normal(&mut rng)]])
                    .unwrap();
            let p = project_to_band(&m, &b).unwrap();
            assert!(b.contains(&p, 1e-8), "{p:?}");
        }
    }
}
