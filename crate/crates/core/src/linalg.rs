//! Small dense symmetric-matrix helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// A real symmetric `d×d` matrix. Symmetry is enforced at construction by
/// averaging with the transpose, so `m[(i, j)] == m[(j, i)]` holds bit-exactly.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        Ok(Self::symmetrize(m))
    }

    /// Row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("matrix rows must all have length d".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn scalar(v: f64) -> Self {
        Self(DMatrix::from_element(1, 1, v))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    fn symmetrize(m: DMatrix<f64>) -> Self {
        let d = m.nrows();
        let mut out = m;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self(out)
    }

    /// Symmetrizes the product or sum of symmetric matrices that may carry
    /// round-off asymmetry.
    pub(crate) fn from_nearly_symmetric(m: DMatrix<f64>) -> Self {
        Self::symmetrize(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Hilbert–Schmidt inner product `trace(self · other)`.
    pub fn hs_inner(&self, other: &SymMatrix) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn square(&self) -> SymMatrix {
        Self::symmetrize(&self.0 * &self.0)
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        Self(&self.0 * s)
    }

    pub fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.0.clone())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 1 {
            return vec![self.0[(0, 0)]];
        }
        self.eigen().eigenvalues.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `f` to the spectrum: `Q diag(f(λ)) Qᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        if self.dim() == 1 {
            return Self::scalar(f(self.0[(0, 0)]));
        }
        let eig = self.eigen();
        let mapped = eig.eigenvalues.map(f);
        let q = &eig.eigenvectors;
        Self::symmetrize(q * DMatrix::from_diagonal(&mapped) * q.transpose())
    }

    /// The positive part `Q max(Λ, 0) Qᵀ`, or `None` when already PSD. One
    /// eigendecomposition serves both the test and the clip.
    pub fn positive_part_if_needed(&self) -> Option<SymMatrix> {
        if self.dim() == 1 {
            let v = self.0[(0, 0)];
            return (v < 0.0).then(|| Self::scalar(0.0));
        }
        let eig = self.eigen();
        if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
            return None;
        }
        let mapped = eig.eigenvalues.map(|v| v.max(0.0));
        let q = &eig.eigenvectors;
        Some(Self::symmetrize(q * DMatrix::from_diagonal(&mapped) * q.transpose()))
    }

    /// Positive semidefinite within `tol` on the smallest eigenvalue.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// `‖AB − BA‖_HS`.
    pub fn commutator_norm(&self, other: &SymMatrix) -> f64 {
        (&self.0 * &other.0 - &other.0 * &self.0).norm()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect()).collect()
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{:?}", self.to_rows())
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}
