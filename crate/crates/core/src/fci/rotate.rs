use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{FciError, FciVector, StringSet};
use crate::linalg::{minor, occupied, unitarity_defect};

/// `M[I′, I] = det u[I′, I]` over the ordered strings of one spin sector.
pub fn rotation_transfer_matrix(u: &DMatrix<Complex64>, strings: &StringSet) -> DMatrix<Complex64> {
    let occ: Vec<Vec<usize>> = strings.strings().iter().map(|&s| occupied(s)).collect();
    let m = occ.len();
    DMatrix::from_fn(m, m, |i, j| minor(u, &occ[i], &occ[j]))
}

/// Applies the orbital rotation `U(u)` with `U a†_q U† = Σ_p u_pq a†_p` in each spin sector.
///
/// Under this convention the rotated 1-RDM is `ū ¹D uᵀ`.
pub fn rotate_state(
    state: &FciVector,
    u_alpha: &DMatrix<Complex64>,
    u_beta: &DMatrix<Complex64>,
) -> Result<FciVector, FciError> {
    let n = state.space.n_orb;
    for u in [u_alpha, u_beta] {
        if u.nrows() != n || u.ncols() != n {
            return Err(FciError::RotationShape { got: u.nrows().max(u.ncols()), expected: n });
        }
        let d = unitarity_defect(u);
        if d > 1e-10 {
            return Err(FciError::NonUnitary(d));
        }
    }
    let sp = &state.space;
    let ma = rotation_transfer_matrix(u_alpha, &sp.alpha);
    let mb = rotation_transfer_matrix(u_beta, &sp.beta);
    // amplitudes are stored row-major as C[ia, ib]
    let c = DMatrix::from_row_slice(sp.alpha.len(), sp.beta.len(), &state.amplitudes);
    let rotated = ma * c * mb.transpose();
    let amplitudes = rotated.transpose().as_slice().to_vec();
    Ok(FciVector { space: sp.clone(), amplitudes, energy: state.energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fci::enumerate_space;

    #[test]
    fn identity_is_noop() {
        let ints = crate::fixtures::load("h2").unwrap();
        let gs = crate::fci::ground_state(&ints).unwrap();
        let id = DMatrix::identity(2, 2);
        let r = rotate_state(&gs, &id, &id).unwrap();
        for (a, b) in r.amplitudes.iter().zip(&gs.amplitudes) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn permutation_moves_determinant() {
        // swap orbitals 0 and 2 in the alpha sector: |{0,1}⟩ → a†_2 a†_1 |0⟩ = −|{1,2}⟩
        let sp = enumerate_space(3, 2, 0).unwrap();
        let st = FciVector::determinant(sp, 0b011, 0).unwrap();
        let mut p = DMatrix::<Complex64>::zeros(3, 3);
        p[(2, 0)] = Complex64::new(1.0, 0.0);
        p[(1, 1)] = Complex64::new(1.0, 0.0);
        p[(0, 2)] = Complex64::new(1.0, 0.0);
        let id = DMatrix::identity(3, 3);
        let r = rotate_state(&st, &p, &id).unwrap();
        assert!((r.amplitude(0b110, 0) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_non_unitary() {
        let sp = enumerate_space(2, 1, 1).unwrap();
        let st = FciVector::determinant(sp, 1, 1).unwrap();
        let bad = DMatrix::identity(2, 2) * Complex64::new(2.0, 0.0);
        let id = DMatrix::identity(2, 2);
        assert!(matches!(rotate_state(&st, &bad, &id), Err(FciError::NonUnitary(_))));
        let wrong = DMatrix::identity(3, 3);
        assert!(matches!(rotate_state(&st, &id, &wrong), Err(FciError::RotationShape { .. })));
    }
}
