//! Fermionic classical shadows with spin-blocked orbital rotations.
//!
//! A shot rotates the state by `U(u)` (see [`crate::fci::rotate_state`]),
//! measures occupations `b`, and inverts the measurement channel on the
//! one- and two-particle sectors of each spin.

mod archive;
mod diagonal;
mod estimator;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::fci::{FciError, Occupation};
use crate::linalg::{binom, haar_unitary, unitarity_defect};
use crate::rdm::PairBasis;

pub use archive::{read_shot_archive, write_shot_archive, ArchiveError};
pub use diagonal::{
    basis_count_from_variance, diagonal_measurements, match_basis_count, mean_pair_variance, rotated_diagonal,
    DiagonalSample, DiagonalSet,
};
pub use estimator::{gaussian_surrogate, record_shots, sample_shots, single_shot_estimate, ShadowAccumulator};

#[derive(Debug, Error, PartialEq)]
pub enum ShadowError {
    #[error("rotation is not unitary (defect {0:e})")]
    NonUnitary(f64),
    #[error("outcome has ({got_alpha}, {got_beta}) electrons, expected ({n_alpha}, {n_beta})")]
    Popcount { got_alpha: u32, got_beta: u32, n_alpha: usize, n_beta: usize },
    #[error("arguments out of range: {0}")]
    Range(String),
    #[error("no measurement bases given")]
    NoBases,
    #[error("the basis-count fallback needs a state")]
    FallbackWithoutState,
    #[error(transparent)]
    Fci(#[from] FciError),
}

/// Independent rotations of the alpha and beta orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalRotation {
    pub u_alpha: DMatrix<Complex64>,
    pub u_beta: DMatrix<Complex64>,
}

impl OrbitalRotation {
    pub fn identity(n_orb: usize) -> Self {
        Self { u_alpha: DMatrix::identity(n_orb, n_orb), u_beta: DMatrix::identity(n_orb, n_orb) }
    }

    pub fn n_orb(&self) -> usize {
        self.u_alpha.nrows()
    }

    pub fn check_unitary(&self, tol: f64) -> Result<(), ShadowError> {
        let d = unitarity_defect(&self.u_alpha).max(unitarity_defect(&self.u_beta));
        if d > tol {
            return Err(ShadowError::NonUnitary(d));
        }
        Ok(())
    }
}

/// One measurement: the basis rotation and the observed occupations.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowShot {
    pub rotation: OrbitalRotation,
    pub outcome: Occupation,
}

/// Shot-noise bookkeeping for one budget.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceBudget {
    pub eta: usize,
    pub n_spin_orbitals: usize,
    pub bound: f64,
    pub shots: u64,
    pub z: f64,
    pub epsilon1: f64,
    pub m_bases: usize,
}

impl VarianceBudget {
    pub fn new(eta: usize, n_spin_orbitals: usize, shots: u64, z: f64, m_bases: usize) -> Result<Self, ShadowError> {
        if shots == 0 {
            return Err(ShadowError::Range("shots must be positive".into()));
        }
        let bound = variance_bound(eta, n_spin_orbitals)?;
        Ok(Self {
            eta,
            n_spin_orbitals,
            bound,
            shots,
            z,
            epsilon1: z * (bound / shots as f64).sqrt(),
            m_bases,
        })
    }

    /// Per-element standard deviation of the averaged estimator.
    pub fn sigma(&self) -> f64 {
        (self.bound / self.shots as f64).sqrt()
    }
}

/// Draws a Haar rotation per spin; with `spin_blocked == false` both spins share one draw.
pub fn sample_haar_rotation<R: Rng + ?Sized>(n_orb: usize, rng: &mut R, spin_blocked: bool) -> OrbitalRotation {
    let u_alpha = haar_unitary(n_orb, rng);
    let u_beta = if spin_blocked { haar_unitary(n_orb, rng) } else { u_alpha.clone() };
    OrbitalRotation { u_alpha, u_beta }
}

/// Second compound matrix: `C[(r,s),(p,q)] = u_rp u_sq − u_rq u_sp` over ordered pairs.
pub fn compound_matrix_k2(u: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, ShadowError> {
    let d = unitarity_defect(u);
    if d > 1e-10 {
        return Err(ShadowError::NonUnitary(d));
    }
    Ok(compound_unchecked(u))
}

pub(crate) fn compound_unchecked(u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let pb = PairBasis::new(u.nrows());
    let pairs = pb.pairs();
    DMatrix::from_fn(pairs.len(), pairs.len(), |x, y| {
        let (r, s) = pairs[x];
        let (p, q) = pairs[y];
        u[(r, p)] * u[(s, q)] - u[(r, q)] * u[(s, p)]
    })
}

/// Cross-spin pair rotation `C[(r,s),(p,q)] = uα_rp · uβ_sq` on the full `n²` grid.
pub fn compound_matrix_ab(u_alpha: &DMatrix<Complex64>, u_beta: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    u_alpha.kronecker(u_beta)
}

/// Eigenvalue of the inverse-channel operator on the `k`-particle sector for
/// a pair that shares `s_prime` modes with the measured occupations.
pub fn e_operator_eigenvalue_k(eta: usize, n: usize, k: usize, s_prime: usize) -> Result<f64, ShadowError> {
    if s_prime > k || k > eta || eta > n || k == 0 {
        return Err(ShadowError::Range(format!("eta={eta}, N={n}, k={k}, s'={s_prime}")));
    }
    let (eta, n, k, s) = (eta as i64, n as i64, k as i64, s_prime as i64);
    let sign = if (k + s) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(binom(eta - s, k - s) * binom(n - eta + s, s) / (sign * binom(k, s)))
}

/// The `k = 2` eigenvalue; requires `2 ≤ eta ≤ N`.
pub fn e_operator_eigenvalue(eta: usize, n: usize, s_prime: usize) -> Result<f64, ShadowError> {
    if eta < 2 {
        return Err(ShadowError::Range(format!("eta={eta} < 2")));
    }
    e_operator_eigenvalue_k(eta, n, 2, s_prime)
}

/// Average single-shot variance bound `C(η,2) (1 − (η−2)/N)² (1+N)/(N−1)`.
pub fn variance_bound(eta: usize, n: usize) -> Result<f64, ShadowError> {
    if eta < 2 || eta > n {
        return Err(ShadowError::Range(format!("eta={eta}, N={n}")));
    }
    let (e, nf) = (eta as f64, n as f64);
    Ok(binom(eta as i64, 2) * (1.0 - (e - 2.0) / nf).powi(2) * (1.0 + nf) / (nf - 1.0))
}
