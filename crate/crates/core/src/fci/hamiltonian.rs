use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{enumerate_space, DeterminantSpace, FciError, FciVector};
use crate::integrals::MolecularIntegrals;

#[derive(Debug, Clone)]
pub struct FciOptions {
    /// Largest sector dimension accepted.
    pub dim_cap: usize,
    /// Dimension at or below which the dense eigensolver is used.
    pub dense_below: usize,
    pub max_iter: usize,
    /// Residual norm `‖Hv − Ev‖` at convergence.
    pub tol: f64,
}

impl Default for FciOptions {
    fn default() -> Self {
        Self { dim_cap: 100_000, dense_below: 500, max_iter: 500, tol: 1e-10 }
    }
}

/// `H = Σ k_pq E_pq + ½ Σ (pq|rs) E_pq E_rs` with `k_pq = h_pq − ½ Σ_r (pr|rq)`.
struct SectorHamiltonian<'a> {
    ints: &'a MolecularIntegrals,
    space: DeterminantSpace,
    alpha_reps: Vec<Vec<(usize, usize, usize, f64)>>,
    beta_reps: Vec<Vec<(usize, usize, usize, f64)>>,
    k: DMatrix<f64>,
    // half_eri[(rs, pq)] = ½ (pq|rs)
    half_eri: DMatrix<f64>,
}

impl<'a> SectorHamiltonian<'a> {
    fn new(ints: &'a MolecularIntegrals, space: DeterminantSpace) -> Self {
        let n = ints.n_orb;
        let k = DMatrix::from_fn(n, n, |p, q| {
            ints.h1[(p, q)] - 0.5 * (0..n).map(|r| ints.eri(p, r, r, q)).sum::<f64>()
        });
        let half_eri =
            DMatrix::from_fn(n * n, n * n, |rs, pq| 0.5 * ints.eri(pq / n, pq % n, rs / n, rs % n));
        Self {
            ints,
            alpha_reps: space.alpha.single_replacements(),
            beta_reps: space.beta.single_replacements(),
            space,
            k,
            half_eri,
        }
    }

    /// `out[K, pq] = ⟨K|E_pq|c⟩`.
    fn apply_excitations(&self, c: &[f64]) -> DMatrix<f64> {
        let n = self.ints.n_orb;
        let nb = self.space.beta.len();
        let mut d = DMatrix::zeros(c.len(), n * n);
        for (ia, reps_a) in self.alpha_reps.iter().enumerate() {
            for ib in 0..nb {
                let cl = c[ia * nb + ib];
                if cl == 0.0 {
                    continue;
                }
                for &(p, q, ja, s) in reps_a {
                    d[(ja * nb + ib, p * n + q)] += s * cl;
                }
                for &(p, q, jb, s) in &self.beta_reps[ib] {
                    d[(ia * nb + jb, p * n + q)] += s * cl;
                }
            }
        }
        d
    }

    fn sigma(&self, c: &[f64]) -> Vec<f64> {
        let n = self.ints.n_orb;
        let nb = self.space.beta.len();
        let d = self.apply_excitations(c);
        let g = d * &self.half_eri;
        let mut out = vec![self.ints.e_core; c.len()];
        for (o, ci) in out.iter_mut().zip(c) {
            *o *= ci;
        }
        for (ia, reps_a) in self.alpha_reps.iter().enumerate() {
            for ib in 0..nb {
                let kk = ia * nb + ib;
                let ck = c[kk];
                for &(p, q, ja, s) in reps_a {
                    out[ja * nb + ib] += s * (g[(kk, p * n + q)] + self.k[(p, q)] * ck);
                }
                for &(p, q, jb, s) in &self.beta_reps[ib] {
                    out[ia * nb + jb] += s * (g[(kk, p * n + q)] + self.k[(p, q)] * ck);
                }
            }
        }
        out
    }

    fn diagonal(&self) -> Vec<f64> {
        let ints = self.ints;
        let occ = |bits: u64| crate::linalg::occupied(bits);
        let mut out = Vec::with_capacity(self.space.dim());
        for &sa in self.space.alpha.strings() {
            let oa = occ(sa);
            for &sb in self.space.beta.strings() {
                let ob = occ(sb);
                let mut e = ints.e_core;
                for &i in oa.iter().chain(&ob) {
                    e += ints.h1[(i, i)];
                }
                for (same, other) in [(&oa, &ob), (&ob, &oa)] {
                    for &i in same.iter() {
                        for &j in same.iter() {
                            e += 0.5 * (ints.eri(i, i, j, j) - ints.eri(i, j, j, i));
                        }
                        for &j in other.iter() {
                            e += 0.5 * ints.eri(i, i, j, j);
                        }
                    }
                }
                out.push(e);
            }
        }
        out
    }
}

/// Applies the sector Hamiltonian to a real vector.
pub fn sigma(ints: &MolecularIntegrals, c: &[f64]) -> Result<Vec<f64>, FciError> {
    let space = enumerate_space(ints.n_orb, ints.n_alpha, ints.n_beta)?;
    assert_eq!(c.len(), space.dim(), "vector does not match the sector dimension");
    Ok(SectorHamiltonian::new(ints, space).sigma(c))
}

/// Slater–Condon diagonal `⟨D|H|D⟩` of every determinant.
pub fn hamiltonian_diagonal(ints: &MolecularIntegrals) -> Result<Vec<f64>, FciError> {
    let space = enumerate_space(ints.n_orb, ints.n_alpha, ints.n_beta)?;
    Ok(SectorHamiltonian::new(ints, space).diagonal())
}

/// Lowest eigenpair of the sector Hamiltonian with default options.
pub fn ground_state(ints: &MolecularIntegrals) -> Result<FciVector, FciError> {
    ground_state_with(ints, &FciOptions::default())
}

pub fn ground_state_with(ints: &MolecularIntegrals, opts: &FciOptions) -> Result<FciVector, FciError> {
    let space = enumerate_space(ints.n_orb, ints.n_alpha, ints.n_beta)?;
    let dim = space.dim();
    if dim > opts.dim_cap {
        return Err(FciError::DimensionCap { dim, cap: opts.dim_cap });
    }
    let ham = SectorHamiltonian::new(ints, space.clone());
    let (energy, v) = if dim <= opts.dense_below {
        dense_lowest(&ham, dim)
    } else {
        davidson_lowest(&ham, dim, opts)?
    };
    // fix the global phase so the largest amplitude is positive
    let imax = v.iamax();
    let sign = v[imax].signum();
    let amplitudes = v.iter().map(|x| Complex64::new(sign * x, 0.0)).collect();
    let mut state = FciVector { space, amplitudes, energy: Some(energy) };
    let norm = state.norm_sqr().sqrt();
    for a in &mut state.amplitudes {
        *a /= norm;
    }
    Ok(state)
}

fn dense_lowest(ham: &SectorHamiltonian, dim: usize) -> (f64, DVector<f64>) {
    let mut h = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        let col = ham.sigma(&e);
        h.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    let h = (&h + h.transpose()) * 0.5;
    let eig = h.symmetric_eigen();
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty sector");
    (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

/// Davidson iteration with diagonal preconditioning and thick restart.
fn davidson_lowest(ham: &SectorHamiltonian, dim: usize, opts: &FciOptions) -> Result<(f64, DVector<f64>), FciError> {
    let diag = DVector::from_vec(ham.diagonal());
    let max_sub = 40.min(dim);
    let start = diag.argmin().0;
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_fn(dim, |i, _| if i == start { 1.0 } else { 0.0 })];
    let mut images: Vec<DVector<f64>> = vec![DVector::from_vec(ham.sigma(basis[0].as_slice()))];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let m = basis.len();
        let sub = DMatrix::from_fn(m, m, |i, j| basis[i].dot(&images[j]));
        let sub = (&sub + sub.transpose()) * 0.5;
        let eig = sub.symmetric_eigen();
        let k = eig.eigenvalues.argmin().0;
        let theta = eig.eigenvalues[k];
        let coef = eig.eigenvectors.column(k);
        let mut x = DVector::zeros(dim);
        let mut hx = DVector::zeros(dim);
        for i in 0..m {
            x.axpy(coef[i], &basis[i], 1.0);
            hx.axpy(coef[i], &images[i], 1.0);
        }
        let r = &hx - &x * theta;
        residual = r.norm();
        if residual < opts.tol {
            return Ok((theta, x));
        }
        let mut t = DVector::from_fn(dim, |i, _| {
            let den = diag[i] - theta;
            r[i] / if den.abs() < 1e-8 { 1e-8f64.copysign(den) } else { den }
        });
        if m >= max_sub {
            basis = vec![x.clone() / x.norm()];
            images = vec![hx / x.norm()];
        }
        for _ in 0..2 {
            for b in &basis {
                let o = b.dot(&t);
                t.axpy(-o, b, 1.0);
            }
        }
        let tn = t.norm();
        if tn < 1e-14 {
            // subspace stagnated; fall back to the raw residual direction
            t = r.clone();
            for b in &basis {
                let o = b.dot(&t);
                t.axpy(-o, b, 1.0);
            }
            if t.norm() < 1e-14 {
                return Ok((theta, x));
            }
        }
        let t = &t / t.norm();
        images.push(DVector::from_vec(ham.sigma(t.as_slice())));
        basis.push(t);
    }
    Err(FciError::NotConverged { iterations: opts.max_iter, residual })
}
