//! Lie-algebra values as real skew-symmetric matrices.
//!
//! The inner product throughout is `<A, B> = Tr(A B^t)`, which is positive
//! definite on real matrices. `su(2)` is materialized by the left
//! quaternion-multiplication matrices on `R^4`; those have norm 2 under the
//! trace inner product, so the canonical orthonormal triple returned by
//! [`su2_basis`] is half of them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LieError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not skew-symmetric (max |A + A^t| = {defect})")]
    NotSkew { defect: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Tolerance on skew-symmetry at construction.
pub const SKEW_TOL: f64 = 1e-12;

/// A real skew-symmetric matrix with inner product `Tr(A B^t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LieMatrix {
    m: DMatrix<f64>,
}

impl LieMatrix {
    /// Wraps a matrix, checking squareness and skew-symmetry within [`SKEW_TOL`].
    pub fn new(m: DMatrix<f64>) -> Result<Self, LieError> {
        if m.nrows() != m.ncols() {
            return Err(LieError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let defect = (&m + m.transpose()).abs().max();
        if defect > SKEW_TOL {
            return Err(LieError::NotSkew {
                defect: format!("{defect:e}"),
            });
        }
        Ok(Self { m })
    }

    /// Wraps a matrix after forcing exact skew-symmetry, `(A - A^t)/2`.
    pub fn skew_part(m: DMatrix<f64>) -> Self {
        let s = (&m - m.transpose()) * 0.5;
        Self { m: s }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// `Tr(A B^t)`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "Lie inner product dim mismatch");
        self.m.iter().zip(other.m.iter()).map(|(a, b)| a * b).sum()
    }

    /// Norm induced by the trace inner product (= Frobenius norm).
    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.m.amax() <= tol
    }

    /// Commutator `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        Self {
            m: &self.m * &other.m - &other.m * &self.m,
        }
    }

    /// Matrix exponential by scaling and squaring with a Taylor kernel.
    ///
    /// For skew input the result is orthogonal to machine precision.
    pub fn exp(&self) -> DMatrix<f64> {
        exp_matrix(&self.m)
    }

    /// Conjugation `s A s^t` by an orthogonal matrix; stays skew.
    pub fn conjugate(&self, s: &DMatrix<f64>) -> Self {
        Self {
            m: s * &self.m * s.transpose(),
        }
    }

    /// Row-major flattening used by the JSON schemas.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.m.nrows())
            .map(|i| (0..self.m.ncols()).map(|j| self.m[(i, j)]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LieError> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(LieError::NotSquare {
                    rows: n,
                    cols: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl std::ops::Add for &LieMatrix {
    type Output = LieMatrix;
    fn add(self, rhs: &LieMatrix) -> LieMatrix {
        LieMatrix {
            m: &self.m + &rhs.m,
        }
    }
}

impl std::ops::Add for LieMatrix {
    type Output = LieMatrix;
    fn add(self, rhs: LieMatrix) -> LieMatrix {
        LieMatrix { m: self.m + rhs.m }
    }
}

impl std::ops::Sub for LieMatrix {
    type Output = LieMatrix;
    fn sub(self, rhs: LieMatrix) -> LieMatrix {
        LieMatrix { m: self.m - rhs.m }
    }
}

impl std::ops::Mul<f64> for LieMatrix {
    type Output = LieMatrix;
    fn mul(self, rhs: f64) -> LieMatrix {
        LieMatrix { m: self.m * rhs }
    }
}

impl std::ops::Sub for &LieMatrix {
    type Output = LieMatrix;
    fn sub(self, rhs: &LieMatrix) -> LieMatrix {
        LieMatrix {
            m: &self.m - &rhs.m,
        }
    }
}

impl std::ops::Mul<f64> for &LieMatrix {
    type Output = LieMatrix;
    fn mul(self, rhs: f64) -> LieMatrix {
        LieMatrix { m: &self.m * rhs }
    }
}

impl std::ops::Neg for &LieMatrix {
    type Output = LieMatrix;
    fn neg(self) -> LieMatrix {
        LieMatrix { m: -&self.m }
    }
}

/// Matrix exponential, scaling and squaring with an order-16 Taylor kernel.
pub fn exp_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.amax() * n as f64;
    let k = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(k as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n);
    for order in 1..=16 {
        term = &term * &scaled / order as f64;
        sum += &term;
    }
    for _ in 0..k {
        sum = &sum * &sum;
    }
    sum
}

/// Left multiplication by the quaternion unit `i` on `R^4 = H` (basis `1,i,j,k`).
pub fn quat_i() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0., -1., 0., 0., //
            1., 0., 0., 0., //
            0., 0., 0., -1., //
            0., 0., 1., 0.,
        ],
    )
}

/// Left multiplication by `j`.
pub fn quat_j() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0., 0., -1., 0., //
            0., 0., 0., 1., //
            1., 0., 0., 0., //
            0., -1., 0., 0.,
        ],
    )
}

/// Left multiplication by `k`.
pub fn quat_k() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0., 0., 0., -1., //
            0., 0., -1., 0., //
            0., 1., 0., 0., //
            1., 0., 0., 0.,
        ],
    )
}

/// The canonical orthonormal basis `(i^, j^, k^)` of `su(2)`.
///
/// Each element is half a quaternion unit, so `<e_a, e_b> = delta_ab` and
/// `[i^, j^] = k^` cyclically.
pub fn su2_basis() -> [LieMatrix; 3] {
    [
        LieMatrix::new(quat_i() * 0.5).unwrap(),
        LieMatrix::new(quat_j() * 0.5).unwrap(),
        LieMatrix::new(quat_k() * 0.5).unwrap(),
    ]
}
