use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{compound_unchecked, e_operator_eigenvalue_k, sample_haar_rotation, variance_bound, ShadowError, ShadowShot};
use crate::fci::{rotate_state, BornSampler, FciVector};
use crate::linalg::binom;
use crate::rdm::{PairBasis, SpinBlockedRdms};

/// Inverse channel on one spin sector's one-body part: `uᵀ diag(e) ū`.
fn one_body(u: &DMatrix<Complex64>, occ: u64, n_elec: usize) -> Result<DMatrix<Complex64>, ShadowError> {
    let n = u.nrows();
    if n_elec == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let e_occ = e_operator_eigenvalue_k(n_elec, n, 1, 1)?;
    let e_vir = e_operator_eigenvalue_k(n_elec, n, 1, 0)?;
    let mut scaled = u.conjugate();
    for k in 0..n {
        let e = if occ >> k & 1 == 1 { e_occ } else { e_vir };
        scaled.row_mut(k).scale_mut(e);
    }
    Ok(u.transpose() * scaled)
}

/// Inverse channel on one spin sector's same-spin pairs: `Cᵀ diag(e) C̄` with `C` the compound matrix.
fn same_spin_pairs(u: &DMatrix<Complex64>, occ: u64, n_elec: usize) -> Result<DMatrix<f64>, ShadowError> {
    let n = u.nrows();
    let pb = PairBasis::new(n);
    if n_elec < 2 {
        return Ok(DMatrix::zeros(pb.len(), pb.len()));
    }
    let e: Vec<f64> = (0..=2).map(|s| e_operator_eigenvalue_k(n_elec, n, 2, s)).collect::<Result<_, _>>()?;
    let c = compound_unchecked(u);
    let mut scaled = c.conjugate();
    for (x, &(k, l)) in pb.pairs().iter().enumerate() {
        let s = (occ >> k & 1) + (occ >> l & 1);
        scaled.row_mut(x).scale_mut(e[s as usize]);
    }
    Ok((c.transpose() * scaled).map(|z| z.re))
}

/// One additive sample of the spin-blocked RDMs from a single shot.
///
/// Each spin sector is inverted with its own particle number and mode count;
/// the alpha-beta block is the product of the two one-body inverses.
pub fn single_shot_estimate(shot: &ShadowShot, n_alpha: usize, n_beta: usize) -> Result<SpinBlockedRdms, ShadowError> {
    let (ga, gb) = (shot.outcome.alpha.count_ones(), shot.outcome.beta.count_ones());
    if ga as usize != n_alpha || gb as usize != n_beta {
        return Err(ShadowError::Popcount { got_alpha: ga, got_beta: gb, n_alpha, n_beta });
    }
    let r = &shot.rotation;
    let n = r.n_orb();
    let e1a = one_body(&r.u_alpha, shot.outcome.alpha, n_alpha)?;
    let e1b = one_body(&r.u_beta, shot.outcome.beta, n_beta)?;
    Ok(SpinBlockedRdms {
        n_orb: n,
        n_alpha,
        n_beta,
        d2_ab: e1a.kronecker(&e1b).map(|z| z.re),
        d1_aa: e1a.map(|z| z.re),
        d1_bb: e1b.map(|z| z.re),
        d2_aa: same_spin_pairs(&r.u_alpha, shot.outcome.alpha, n_alpha)?,
        d2_bb: same_spin_pairs(&r.u_beta, shot.outcome.beta, n_beta)?,
    })
}

/// Running sums of single-shot estimates and their squares.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowAccumulator {
    pub shots: u64,
    sum: SpinBlockedRdms,
    sum_sq: SpinBlockedRdms,
}

impl ShadowAccumulator {
    pub fn new(n_orb: usize, n_alpha: usize, n_beta: usize) -> Self {
        let z = SpinBlockedRdms::zeros(n_orb, n_alpha, n_beta);
        Self { shots: 0, sum: z.clone(), sum_sq: z }
    }

    pub fn add(&mut self, est: &SpinBlockedRdms) {
        self.shots += 1;
        for (s, (q, e)) in blocks_mut(&mut self.sum).into_iter().zip(blocks_mut(&mut self.sum_sq).into_iter().zip(est.blocks())) {
            *s += e;
            *q += e.component_mul(e);
        }
    }

    pub fn merge(&mut self, other: &ShadowAccumulator) {
        self.shots += other.shots;
        for (s, o) in blocks_mut(&mut self.sum).into_iter().zip(other.sum.blocks()) {
            *s += o;
        }
        for (s, o) in blocks_mut(&mut self.sum_sq).into_iter().zip(other.sum_sq.blocks()) {
            *s += o;
        }
    }

    /// Sample mean, symmetrized.
    pub fn mean(&self) -> SpinBlockedRdms {
        let mut m = self.sum.clone();
        let k = 1.0 / self.shots.max(1) as f64;
        for b in blocks_mut(&mut m) {
            *b *= k;
        }
        m.hermitize();
        m
    }

    /// Unbiased per-element sample variance of a single shot.
    pub fn variances(&self) -> SpinBlockedRdms {
        let n = self.shots as f64;
        let mut v = self.sum_sq.clone();
        for (vb, sb) in blocks_mut(&mut v).into_iter().zip(self.sum.blocks()) {
            let mean = sb / n;
            *vb = (&*vb - sb.component_mul(&mean)) / (n - 1.0);
        }
        v
    }

    /// Standard errors of the mean.
    pub fn standard_errors(&self) -> SpinBlockedRdms {
        let mut v = self.variances();
        let n = self.shots as f64;
        for b in blocks_mut(&mut v) {
            b.apply(|x| *x = (x.max(0.0) / n).sqrt());
        }
        v
    }

    /// Single-shot variance averaged over all `C(N,2)²` spin-orbital pair elements.
    pub fn average_variance(&self) -> f64 {
        let v = self.variances();
        let n2 = 2 * v.n_orb;
        let total = v.d2_aa.sum() + v.d2_bb.sum() + v.d2_ab.sum();
        total / binom(n2 as i64, 2).powi(2)
    }
}

fn blocks_mut(r: &mut SpinBlockedRdms) -> [&mut DMatrix<f64>; 5] {
    [&mut r.d1_aa, &mut r.d1_bb, &mut r.d2_aa, &mut r.d2_bb, &mut r.d2_ab]
}

/// Stream of shots for batch `batch` of a master seed.
fn batch_rng(master_seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(batch);
    rng
}

fn draw_shot<R: Rng + ?Sized>(state: &FciVector, rng: &mut R) -> Result<ShadowShot, ShadowError> {
    let rotation = sample_haar_rotation(state.space.n_orb, rng, true);
    let rotated = rotate_state(state, &rotation.u_alpha, &rotation.u_beta)?;
    let outcome = BornSampler::new(&rotated).sample(rng);
    Ok(ShadowShot { rotation, outcome })
}

/// Simulates `shots` matchgate measurements of `state` and accumulates the estimates.
///
/// Shots are split into batches of `batch_size`, each with its own RNG stream;
/// partial sums are merged in batch order so the result does not depend on
/// the thread count.
pub fn sample_shots(
    state: &FciVector,
    shots: u64,
    master_seed: u64,
    batch_size: u64,
) -> Result<ShadowAccumulator, ShadowError> {
    let sp = &state.space;
    let batch_size = batch_size.max(1);
    let batches = shots.div_ceil(batch_size);
    let partial: Vec<Result<ShadowAccumulator, ShadowError>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(master_seed, b);
            let mut acc = ShadowAccumulator::new(sp.n_orb, sp.n_alpha, sp.n_beta);
            let count = batch_size.min(shots - b * batch_size);
            for _ in 0..count {
                let shot = draw_shot(state, &mut rng)?;
                acc.add(&single_shot_estimate(&shot, sp.n_alpha, sp.n_beta)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = ShadowAccumulator::new(sp.n_orb, sp.n_alpha, sp.n_beta);
    for p in partial {
        total.merge(&p?);
    }
    Ok(total)
}

/// Draws raw shots from one RNG stream, e.g. for archiving.
pub fn record_shots(state: &FciVector, shots: usize, seed: u64) -> Result<Vec<ShadowShot>, ShadowError> {
    let mut rng = batch_rng(seed, 0);
    (0..shots).map(|_| draw_shot(state, &mut rng)).collect()
}

/// Gaussian stand-in for a shadow estimate at a given budget.
///
/// Adds `N(0, σ²)` with `σ = sqrt(bound/shots)` to the upper triangle of every
/// 2-RDM block, mirrors it, and rebuilds the 1-RDMs by contraction. Returns
/// the noisy RDMs and `ε₁ = z·σ`.
pub fn gaussian_surrogate<R: Rng + ?Sized>(
    truth: &SpinBlockedRdms,
    shots: u64,
    rng: &mut R,
    z: f64,
) -> Result<(SpinBlockedRdms, f64), ShadowError> {
    if shots == 0 {
        return Err(ShadowError::Range("shots must be positive".into()));
    }
    let sigma = (variance_bound(truth.eta(), 2 * truth.n_orb)? / shots as f64).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| ShadowError::Range(e.to_string()))?;
    let mut out = truth.clone();
    for m in [&mut out.d2_aa, &mut out.d2_bb, &mut out.d2_ab] {
        let d = m.nrows();
        for j in 0..d {
            for i in 0..=j {
                let v = m[(i, j)] + normal.sample(rng);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }
    out.contract_to_d1();
    Ok((out, z * sigma))
}

#[cfg(test)]
mod tests {
    use super::super::OrbitalRotation;
    use super::*;
    use crate::fci::{enumerate_space, Occupation};

    #[test]
    fn two_mode_estimate_is_exact() {
        let shot = ShadowShot { rotation: OrbitalRotation::identity(1), outcome: Occupation { alpha: 1, beta: 1 } };
        let est = single_shot_estimate(&shot, 1, 1).unwrap();
        assert!((est.d2_ab[(0, 0)] - 1.0).abs() < 1e-15);

        let sp = enumerate_space(1, 1, 1).unwrap();
        let st = FciVector::determinant(sp, 1, 1).unwrap();
        let acc = sample_shots(&st, 50, 3, 16).unwrap();
        assert!((acc.mean().d2_ab[(0, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(acc.shots, 50);
    }

    #[test]
    fn popcount_checked() {
        let shot = ShadowShot { rotation: OrbitalRotation::identity(2), outcome: Occupation { alpha: 3, beta: 1 } };
        assert!(matches!(single_shot_estimate(&shot, 1, 1), Err(ShadowError::Popcount { .. })));
    }

    #[test]
    fn batching_is_deterministic() {
        let ints = crate::fixtures::load("h2").unwrap();
        let gs = crate::fci::ground_state(&ints).unwrap();
        let a = sample_shots(&gs, 300, 8, 64).unwrap();
        let b = sample_shots(&gs, 300, 8, 64).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn surrogate_limits() {
        let ints = crate::fixtures::load("h4").unwrap();
        let truth = crate::fci::compute_rdms(&crate::fci::ground_state(&ints).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (noisy, eps) = gaussian_surrogate(&truth, u64::MAX, &mut rng, 1.0).unwrap();
        assert!(noisy.d2_frobenius_distance(&truth) < 1e-7);
        assert!(eps < 1e-9);
        let (noisy, _) = gaussian_surrogate(&truth, 100, &mut rng, 1.0).unwrap();
        assert_eq!(noisy.max_hermiticity_defect(), 0.0);
    }
}
