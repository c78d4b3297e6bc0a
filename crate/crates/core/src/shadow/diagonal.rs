use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::{sample_haar_rotation, variance_bound, OrbitalRotation, ShadowError};
use crate::fci::{compute_rdms_complex, rotate_state, FciVector};

/// Measured pair occupations `S^{pq}` in one rotated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSample {
    pub rotation: OrbitalRotation,
    /// Same-spin pairs `p < q`, in pair-basis order.
    pub s_aa: Vec<f64>,
    pub s_bb: Vec<f64>,
    /// Alpha-beta pairs on the `p * n + q` grid.
    pub s_ab: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSet {
    pub samples: Vec<DiagonalSample>,
    pub epsilon2: f64,
    /// `None` for infinite-shot (exact) diagonals.
    pub shots_per_basis: Option<u64>,
}

/// Exact rotated pair occupations `X^{pq}` (diagonal of the rotated 2-RDM blocks).
pub fn rotated_diagonal(state: &FciVector, rotation: &OrbitalRotation) -> Result<[Vec<f64>; 3], ShadowError> {
    let rotated = rotate_state(state, &rotation.u_alpha, &rotation.u_beta)?;
    let r = compute_rdms_complex(&rotated)?;
    let diag = |m: &nalgebra::DMatrix<num_complex::Complex64>| (0..m.nrows()).map(|i| m[(i, i)].re).collect();
    Ok([diag(&r.d2_aa), diag(&r.d2_bb), diag(&r.d2_ab)])
}

/// Simulates pair-occupation measurements in each basis.
///
/// Each entry becomes `count / shots` with `count ~ Binomial(shots, X)`;
/// `ε₂ = z · max sqrt(X(1−X)/shots)`. With `shots_per_basis = None` the exact
/// diagonals are returned and `ε₂ = 0`.
pub fn diagonal_measurements<R: Rng + ?Sized>(
    state: &FciVector,
    rotations: &[OrbitalRotation],
    shots_per_basis: Option<u64>,
    rng: &mut R,
    z: f64,
) -> Result<DiagonalSet, ShadowError> {
    if rotations.is_empty() {
        return Err(ShadowError::NoBases);
    }
    if shots_per_basis == Some(0) {
        return Err(ShadowError::Range("shots per basis must be positive".into()));
    }
    let mut worst: f64 = 0.0;
    let mut samples = Vec::with_capacity(rotations.len());
    for rot in rotations {
        let mut blocks = rotated_diagonal(state, rot)?;
        if let Some(shots) = shots_per_basis {
            for x in blocks.iter_mut().flatten() {
                let p = x.clamp(0.0, 1.0);
                worst = worst.max((p * (1.0 - p) / shots as f64).sqrt());
                let count = Binomial::new(shots, p).map_err(|e| ShadowError::Range(e.to_string()))?.sample(rng);
                *x = count as f64 / shots as f64;
            }
        }
        let [s_aa, s_bb, s_ab] = blocks;
        samples.push(DiagonalSample { rotation: rot.clone(), s_aa, s_bb, s_ab });
    }
    Ok(DiagonalSet { samples, epsilon2: z * worst, shots_per_basis })
}

/// `ceil(bound / var)`.
pub fn basis_count_from_variance(bound: f64, var: f64) -> usize {
    (bound / var - 1e-12).ceil().max(1.0) as usize
}

/// Number of bases whose pair-occupation variance matches the shadow variance bound.
///
/// Uses `E[S] = (NαNβ)²/η²`, `Var[S] = 1 − E[S]²` when that lies in `(0, 1]`;
/// otherwise averages `X(1−X)` over 32 random bases of `state`.
pub fn match_basis_count<R: Rng + ?Sized>(
    eta: usize,
    n_alpha: usize,
    n_beta: usize,
    n_spin_orbitals: usize,
    state: Option<&FciVector>,
    rng: &mut R,
) -> Result<usize, ShadowError> {
    if n_alpha + n_beta != eta {
        return Err(ShadowError::Range(format!("Nα + Nβ = {} ≠ η = {eta}", n_alpha + n_beta)));
    }
    let bound = variance_bound(eta, n_spin_orbitals)?;
    let es = ((n_alpha * n_beta) as f64).powi(2) / (eta as f64).powi(2);
    let var = 1.0 - es * es;
    if var > 0.0 && var <= 1.0 {
        return Ok(basis_count_from_variance(bound, var));
    }
    let state = state.ok_or(ShadowError::FallbackWithoutState)?;
    let var = mean_pair_variance(state, 32, rng)?;
    if var <= 0.0 {
        return Err(ShadowError::Range("pair occupations have zero variance".into()));
    }
    Ok(basis_count_from_variance(bound, var))
}

/// Mean of `X(1−X)` over all pair occupations of `bases` random rotations.
pub fn mean_pair_variance<R: Rng + ?Sized>(state: &FciVector, bases: usize, rng: &mut R) -> Result<f64, ShadowError> {
    let mut acc = 0.0;
    let mut count = 0usize;
    for _ in 0..bases {
        let rot = sample_haar_rotation(state.space.n_orb, rng, true);
        for x in rotated_diagonal(state, &rot)?.iter().flatten() {
            let p = x.clamp(0.0, 1.0);
            acc += p * (1.0 - p);
            count += 1;
        }
    }
    Ok(acc / count.max(1) as f64)
}
