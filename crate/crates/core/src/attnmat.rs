//! Attention-matrix validation and the algebra that turns a masked attention
//! matrix into a uni-triangular effect matrix, a covariance and a correlation.
//!
//! The chain is `A -> D⁻¹A -> (D⁻¹A)(D⁻¹A)ᵀ -> diag(C)^-½ C diag(C)^-½`, where
//! `D = diag(A)`. Each stage is a newtype that can only be built from a value
//! satisfying its invariants.

use nalgebra::SymmetricEigen;
use serde::Serialize;
use thiserror::Error;

use crate::matrix::Matrix;

/// Tolerance on attention row sums (exported float32 tensors accumulate rounding).
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;
/// Tolerance on covariance symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Smallest eigenvalue a covariance may have before it is rejected as indefinite.
pub const PSD_TOLERANCE: f64 = -1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NotFinite { row: usize, col: usize },
    #[error("nonzero entry above the diagonal at ({row}, {col})")]
    NotLowerTriangular { row: usize, col: usize },
    #[error("negative entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },
    #[error("zero diagonal entry at row {row}")]
    ZeroDiagonal { row: usize },
    #[error("row {row} sums to {sum}, off by more than 1e-9")]
    RowSumOffByMoreThan1e9 { row: usize, sum: f64 },
    #[error("diagonal entry at row {row} is not exactly 1")]
    NotUniTriangular { row: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("zero variance at index {0}")]
    ZeroVariance(usize),
}

fn check_square(m: &Matrix) -> Result<usize, MatrixError> {
    if !m.is_square() {
        return Err(MatrixError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if m.rows() == 0 {
        return Err(MatrixError::Empty);
    }
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if !m.get(i, j).is_finite() {
                return Err(MatrixError::NotFinite { row: i, col: j });
            }
        }
    }
    Ok(m.rows())
}

/// Lower-triangular row-stochastic matrix from one causal attention head.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttentionMatrix(Matrix);

impl AttentionMatrix {
    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    /// Leading `m×m` block, rows re-normalized to sum to one.
    pub fn leading_block(&self, m: usize) -> Result<AttentionMatrix, MatrixError> {
        let idx: Vec<usize> = (0..m.min(self.n())).collect();
        let mut sub = self.0.principal_submatrix(&idx);
        for i in 0..sub.rows() {
            let s: f64 = sub.row(i).iter().sum();
            for j in 0..=i {
                sub.set(i, j, sub.get(i, j) / s);
            }
        }
        validate_attention(sub)
    }
}

/// Checks the masked-softmax constraints. Errors name the first offending index
/// in row-major order.
pub fn validate_attention(raw: Matrix) -> Result<AttentionMatrix, MatrixError> {
    let n = check_square(&raw)?;
    for i in 0..n {
        for j in 0..n {
            let v = raw.get(i, j);
            if j > i && v != 0.0 {
                return Err(MatrixError::NotLowerTriangular { row: i, col: j });
            }
            if v < 0.0 {
                return Err(MatrixError::NegativeEntry { row: i, col: j });
            }
        }
        if raw.get(i, i) <= 0.0 {
            return Err(MatrixError::ZeroDiagonal { row: i });
        }
        let sum: f64 = raw.row(i).iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(MatrixError::RowSumOffByMoreThan1e9 { row: i, sum });
        }
    }
    Ok(AttentionMatrix(raw))
}

/// Lower uni-triangular matrix of cumulative effects.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffectMatrix(Matrix);

impl EffectMatrix {
    pub fn new(m: Matrix) -> Result<Self, MatrixError> {
        let n = check_square(&m)?;
        for i in 0..n {
            if m.get(i, i) != 1.0 {
                return Err(MatrixError::NotUniTriangular { row: i });
            }
            for j in i + 1..n {
                if m.get(i, j) != 0.0 {
                    return Err(MatrixError::NotLowerTriangular { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }

    pub(crate) fn from_unchecked(m: Matrix) -> Self {
        Self(m)
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceMatrix(Matrix);

impl CovarianceMatrix {
    /// Checked constructor: symmetric within 1e-12 and PSD within 1e-9.
    pub fn new(m: Matrix) -> Result<Self, MatrixError> {
        let n = check_square(&m)?;
        for i in 0..n {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > SYMMETRY_TOLERANCE {
                    return Err(MatrixError::NotSymmetric { row: i, col: j });
                }
            }
        }
        let min_eigenvalue = min_eigenvalue(&m);
        if min_eigenvalue < PSD_TOLERANCE {
            return Err(MatrixError::NotPsd { min_eigenvalue });
        }
        Ok(Self(m))
    }

    /// For products `M·Mᵀ`, which are symmetric PSD by construction.
    pub(crate) fn from_gram(m: Matrix) -> Self {
        Self(m)
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    /// Covariance over the kept indices.
    pub fn restrict(&self, keep: &[usize]) -> CovarianceMatrix {
        Self(self.0.principal_submatrix(keep))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationMatrix(Matrix);

impl CorrelationMatrix {
    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

pub(crate) fn min_eigenvalue(m: &Matrix) -> f64 {
    SymmetricEigen::new(m.to_dmatrix())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `D⁻¹A`: every row divided by its diagonal entry.
pub fn to_uni_triangular(a: &AttentionMatrix) -> EffectMatrix {
    let n = a.n();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        let d = a.get(i, i);
        for j in 0..i {
            m.set(i, j, a.get(i, j) / d);
        }
        m.set(i, i, 1.0);
    }
    EffectMatrix(m)
}

/// `C = M·Mᵀ`.
pub fn covariance(m: &EffectMatrix) -> CovarianceMatrix {
    CovarianceMatrix(m.0.gram())
}

/// `R = diag(C)^-½ · C · diag(C)^-½`.
pub fn correlation(c: &CovarianceMatrix) -> Result<CorrelationMatrix, MatrixError> {
    let n = c.n();
    let mut sd = Vec::with_capacity(n);
    for i in 0..n {
        let v = c.get(i, i);
        if v <= 0.0 {
            return Err(MatrixError::ZeroVariance(i));
        }
        sd.push(v.sqrt());
    }
    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        r.set(i, i, 1.0);
        for j in 0..i {
            let v = (c.get(i, j) / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            r.set(i, j, v);
            r.set(j, i, v);
        }
    }
    Ok(CorrelationMatrix(r))
}

/// Row-normalizes a nonnegative effect matrix back into attention form.
/// Inverse of [`to_uni_triangular`].
pub fn synthesize_attention(m: &EffectMatrix) -> Result<AttentionMatrix, MatrixError> {
    let n = m.n();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            if m.get(i, j) < 0.0 {
                return Err(MatrixError::NegativeEntry { row: i, col: j });
            }
        }
        let s: f64 = m.0.row(i).iter().sum();
        for j in 0..=i {
            a.set(i, j, m.get(i, j) / s);
        }
    }
    Ok(AttentionMatrix(a))
}
