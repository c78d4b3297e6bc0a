//! Exact diagonalization in a fixed `(Nα, Nβ)` sector.
//!
//! Determinants are `|Iα Iβ⟩ = Π_{p∈Iα} a†_{pα} Π_{q∈Iβ} a†_{qβ} |0⟩` with both
//! products in ascending orbital order and every alpha operator to the left
//! of every beta operator.

mod cache;
mod hamiltonian;
mod rdms;
mod rotate;
mod sample;
mod strings;

use num_complex::Complex64;
use thiserror::Error;

pub use cache::{read_cached_state, write_cached_state, CacheError};
pub use hamiltonian::{ground_state, ground_state_with, hamiltonian_diagonal, sigma, FciOptions};
pub use rdms::{compute_rdms, compute_rdms_complex};
pub use rotate::{rotate_state, rotation_transfer_matrix};
pub use sample::{sample_bitstring, BornSampler, Occupation};
pub use strings::StringSet;

#[derive(Debug, Error, PartialEq)]
pub enum FciError {
    #[error("{n_elec} electrons do not fit into {n_orb} orbitals")]
    TooManyElectrons { n_orb: usize, n_elec: usize },
    #[error("sector dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("state is not normalized (norm² = {0})")]
    Unnormalized(f64),
    #[error("rotation is not unitary (defect {0:e})")]
    NonUnitary(f64),
    #[error("rotation has dimension {got}, expected {expected}")]
    RotationShape { got: usize, expected: usize },
}

/// Ordered alpha and beta occupation strings of one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantSpace {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub alpha: StringSet,
    pub beta: StringSet,
}

impl DeterminantSpace {
    pub fn dim(&self) -> usize {
        self.alpha.len() * self.beta.len()
    }

    pub fn eta(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    /// Flat index of the determinant `(ia, ib)`.
    #[inline]
    pub fn index(&self, ia: usize, ib: usize) -> usize {
        ia * self.beta.len() + ib
    }

    /// Inverse of [`DeterminantSpace::index`].
    #[inline]
    pub fn split(&self, k: usize) -> (usize, usize) {
        (k / self.beta.len(), k % self.beta.len())
    }
}

/// Builds the ordered determinant space of a sector.
pub fn enumerate_space(n_orb: usize, n_alpha: usize, n_beta: usize) -> Result<DeterminantSpace, FciError> {
    for n_elec in [n_alpha, n_beta] {
        if n_elec > n_orb {
            return Err(FciError::TooManyElectrons { n_orb, n_elec });
        }
    }
    Ok(DeterminantSpace {
        n_orb,
        n_alpha,
        n_beta,
        alpha: StringSet::new(n_orb, n_alpha),
        beta: StringSet::new(n_orb, n_beta),
    })
}

/// A normalized sector state with complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct FciVector {
    pub space: DeterminantSpace,
    pub amplitudes: Vec<Complex64>,
    pub energy: Option<f64>,
}

impl FciVector {
    /// Wraps amplitudes, rejecting vectors whose norm deviates from one by more than 1e−12.
    pub fn new(space: DeterminantSpace, amplitudes: Vec<Complex64>, energy: Option<f64>) -> Result<Self, FciError> {
        let v = Self { space, amplitudes, energy };
        v.check_normalized(1e-12)?;
        Ok(v)
    }

    /// The single determinant `|Iα Iβ⟩`.
    pub fn determinant(space: DeterminantSpace, alpha: u64, beta: u64) -> Option<Self> {
        let ia = space.alpha.position(alpha)?;
        let ib = space.beta.position(beta)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); space.dim()];
        amplitudes[space.index(ia, ib)] = Complex64::new(1.0, 0.0);
        Some(Self { space, amplitudes, energy: None })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub(crate) fn check_normalized(&self, tol: f64) -> Result<(), FciError> {
        let n2 = self.norm_sqr();
        if (n2 - 1.0).abs() > tol {
            return Err(FciError::Unnormalized(n2));
        }
        Ok(())
    }

    pub fn amplitude(&self, alpha: u64, beta: u64) -> Complex64 {
        match (self.space.alpha.position(alpha), self.space.beta.position(beta)) {
            (Some(ia), Some(ib)) => self.amplitudes[self.space.index(ia, ib)],
            _ => Complex64::new(0.0, 0.0),
        }
    }
}
