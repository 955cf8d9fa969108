//! Complex irreducible representations of the Clifford algebra of `R^n`.
//!
//! Generators satisfy the negative-definite relation
//! `γ_j γ_k + γ_k γ_j = -2 δ_jk I` and are skew-Hermitian. They are built by
//! iterated tensor products of Pauli matrices: Hermitian generators
//! `E_j` with `E_j² = I` are produced first, then `γ_j = i E_j`.
//!
//! For `k = ⌊n/2⌋` tensor factors the Hermitian generators are
//!
//! ```text
//! E_{2a-1} = Z ⊗ … ⊗ Z ⊗ X ⊗ I ⊗ … ⊗ I     (a-1 leading Z's)
//! E_{2a}   = Z ⊗ … ⊗ Z ⊗ Y ⊗ I ⊗ … ⊗ I
//! E_n      = Z ⊗ … ⊗ Z                      (n odd only)
//! ```
//!
//! so the spinor rank is `N = 2^⌊n/2⌋`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result, SpinMatrix, Spinor};

/// Largest dimension accepted by [`build_rep`] (rank 16).
pub const MAX_DIM: usize = 8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct CliffordRep {
    dim: usize,
    rank: usize,
    gammas: Vec<SpinMatrix>,
}

/// Spinor rank `2^⌊n/2⌋`.
pub fn spinor_rank(n: usize) -> usize {
    1 << (n / 2)
}

fn pauli_x() -> SpinMatrix {
    DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

fn pauli_y() -> SpinMatrix {
    DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

fn pauli_z() -> SpinMatrix {
    DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

fn tensor_chain(factors: &[SpinMatrix]) -> SpinMatrix {
    factors
        .iter()
        .fold(DMatrix::from_element(1, 1, ONE), |acc, f| acc.kronecker(f))
}

/// Builds the standard representation for `R^n`, `1 <= n <= 8`.
pub fn build_rep(n: usize) -> Result<CliffordRep> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::DimensionOutOfRange {
            dim: n,
            min: 1,
            max: MAX_DIM,
        });
    }
    let k = n / 2;
    let id = SpinMatrix::identity(2, 2);
    let mut hermitian = Vec::with_capacity(n);
    for a in 0..k {
        for middle in [pauli_x(), pauli_y()] {
            let mut factors = vec![pauli_z(); a];
            factors.push(middle);
            factors.extend(std::iter::repeat_n(id.clone(), k - a - 1));
            hermitian.push(tensor_chain(&factors));
        }
    }
    if n % 2 == 1 {
        hermitian.push(tensor_chain(&vec![pauli_z(); k]));
    }
    let gammas = hermitian.into_iter().map(|e| e * I).collect();
    Ok(CliffordRep {
        dim: n,
        rank: spinor_rank(n),
        gammas,
    })
}

impl CliffordRep {
    /// Wraps an arbitrary list of square matrices without checking the
    /// Clifford relation; [`CliffordRep::relation_defect`] measures it.
    pub fn from_gammas(gammas: Vec<SpinMatrix>) -> Result<Self> {
        let dim = gammas.len();
        let rank = gammas.first().map(|g| g.nrows()).unwrap_or(0);
        if dim == 0 || rank == 0 {
            return Err(Error::InvalidParameter("empty generator list".into()));
        }
        for g in &gammas {
            if g.nrows() != rank || g.ncols() != rank {
                return Err(Error::DimensionMismatch {
                    expected: rank,
                    found: g.nrows().max(g.ncols()),
                });
            }
        }
        Ok(Self { dim, rank, gammas })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn gamma(&self, j: usize) -> &SpinMatrix {
        &self.gammas[j]
    }

    pub fn gammas(&self) -> &[SpinMatrix] {
        &self.gammas
    }

    pub fn into_gammas(self) -> Vec<SpinMatrix> {
        self.gammas
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    fn check_spinor(&self, s: &Spinor) -> Result<()> {
        if s.len() != self.rank {
            return Err(Error::DimensionMismatch {
                expected: self.rank,
                found: s.len(),
            });
        }
        Ok(())
    }

    /// The matrix `γ(v) = Σ_j v^j γ_j`.
    pub fn clifford_matrix(&self, v: &[f64]) -> Result<SpinMatrix> {
        self.check_vector(v)?;
        Ok(self.clifford_matrix_unchecked(v))
    }

    pub(crate) fn clifford_matrix_unchecked(&self, v: &[f64]) -> SpinMatrix {
        let mut out = SpinMatrix::zeros(self.rank, self.rank);
        for (g, &c) in self.gammas.iter().zip(v) {
            if c != 0.0 {
                out += g * Complex64::new(c, 0.0);
            }
        }
        out
    }

    /// Clifford multiplication `γ(v) s`.
    pub fn clifford_mul(&self, v: &[f64], s: &Spinor) -> Result<Spinor> {
        self.check_vector(v)?;
        self.check_spinor(s)?;
        Ok(self.clifford_mul_unchecked(v, s))
    }

    pub(crate) fn clifford_mul_unchecked(&self, v: &[f64], s: &Spinor) -> Spinor {
        let mut out = DVector::zeros(self.rank);
        for (g, &c) in self.gammas.iter().zip(v) {
            if c != 0.0 {
                out.gemv(Complex64::new(c, 0.0), g, s, ONE);
            }
        }
        out
    }

    /// Largest operator-norm defect `‖γ_jγ_k + γ_kγ_j + 2δ_jk I‖₂` over all pairs.
    pub fn relation_defect(&self) -> f64 {
        let id = SpinMatrix::identity(self.rank, self.rank);
        let mut worst = 0.0_f64;
        for j in 0..self.dim {
            for k in j..self.dim {
                let mut m = &self.gammas[j] * &self.gammas[k] + &self.gammas[k] * &self.gammas[j];
                if j == k {
                    m += &id * Complex64::new(2.0, 0.0);
                }
                worst = worst.max(operator_norm(&m));
            }
        }
        worst
    }

    /// Largest entry of `γ_j* + γ_j` over all generators.
    pub fn skew_hermitian_defect(&self) -> f64 {
        self.gammas
            .iter()
            .map(|g| (g.adjoint() + g).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

/// Spectral norm of a small complex matrix.
pub fn operator_norm(m: &SpinMatrix) -> f64 {
    if m.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}
