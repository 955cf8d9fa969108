//! Explicit ground states of the critical nonlinear Dirac equation
//!
//! ```text
//! D ψ = |ψ|^{2/(n-1)} ψ   on R^n,   D = Σ_j γ_j ∂_j,   γ_jγ_k + γ_kγ_j = -2δ_jk
//! ```
//!
//! together with the operators, functionals and Green-kernel machinery needed
//! to certify their properties numerically: Clifford representations,
//! stereographic geometry, finite-difference Dirac and Penrose operators,
//! action and Sobolev quotients, the Yamabe and Liouville couplings of the
//! length function, and Gegenbauer expansions of the Dirac Green kernel.

pub mod calculus;
pub mod clifford;
pub mod fields;
pub mod functionals;
pub mod geometry;
pub mod greenkernel;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use clifford::{build_rep, CliffordRep};
pub use fields::{Bubble, BubbleParams, DifferentiableField, SpinorField};
pub use geometry::{Grid, SphereQuadrature};

/// Complex `N`-component spinor value.
pub type Spinor = DVector<Complex64>;
/// Complex `N × N` matrix acting on spinors.
pub type SpinMatrix = DMatrix<Complex64>;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension {dim} outside the supported range {min}..={max}")]
    DimensionOutOfRange { dim: usize, min: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("the north pole has no finite stereographic image")]
    NorthPole,
    #[error("grid with {points} points per axis is too small for a stencil of half-width {half_width}")]
    GridTooSmall { points: usize, half_width: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("integral did not converge: {0}")]
    NonConvergent(String),
    #[error("kernel evaluated at its singular point")]
    Singular,
    #[error("series expansion requires |x| < |y| (got |x|/|y| = {ratio})")]
    OutsideConvergence { ratio: f64 },
    #[error("point must lie strictly inside the unit ball (|x| = {norm})")]
    OutsideBall { norm: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum()
}
