//! Self-contained complex linear algebra used throughout the crate.

mod eigen;
mod matrix;
mod solve;
mod toeplitz;

pub use eigen::{general_eigenvalues, hermitian_eig, psd_project, psd_project_with_eigs, HermitianEigen, HERMITIAN_TOL};
pub use matrix::ComplexMatrix;
pub use solve::{least_squares, solve_square, LeastSquares, Lu, RANK_TOL};
pub use toeplitz::HermitianToeplitz;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("matrix of shape {shape:?} is not square")]
    NotSquare { shape: (usize, usize) },
    #[error("matrix is not Hermitian (relative deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("least squares needs rows >= cols, got {rows}x{cols}")]
    Underdetermined { rows: usize, cols: usize },
    #[error("iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("system is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },
}
