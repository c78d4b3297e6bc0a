use rand::Rng;

use super::FciVector;

/// Measured occupation of `2·n_orb` spin orbitals, one bitmask per spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Occupation {
    pub alpha: u64,
    pub beta: u64,
}

impl Occupation {
    /// Bitstring over spin orbitals with alpha modes first, as in the assembled RDM layout.
    pub fn spin_orbital_bits(&self, n_orb: usize) -> u128 {
        self.alpha as u128 | (self.beta as u128) << n_orb
    }
}

/// Born-rule sampler over the determinants of a state.
#[derive(Debug, Clone)]
pub struct BornSampler {
    cdf: Vec<f64>,
    alpha: Vec<u64>,
    beta: Vec<u64>,
}

impl BornSampler {
    pub fn new(state: &FciVector) -> Self {
        let mut acc = 0.0;
        let cdf: Vec<f64> = state
            .amplitudes
            .iter()
            .map(|z| {
                acc += z.norm_sqr();
                acc
            })
            .collect();
        Self { cdf, alpha: state.space.alpha.strings().to_vec(), beta: state.space.beta.strings().to_vec() }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Occupation {
        let total = *self.cdf.last().expect("non-empty space");
        let x = rng.random::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c <= x).min(self.cdf.len() - 1);
        let nb = self.beta.len();
        Occupation { alpha: self.alpha[k / nb], beta: self.beta[k % nb] }
    }
}

/// Draws one determinant with probability `|amplitude|²`.
pub fn sample_bitstring<R: Rng + ?Sized>(state: &FciVector, rng: &mut R) -> Occupation {
    BornSampler::new(state).sample(rng)
}
