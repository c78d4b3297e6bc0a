//! Shot archive in CSV form.
//!
//! One row per shot: `seed, shot, n_orb, alpha, beta`, followed by the real
//! and imaginary parts of `u_alpha` and then `u_beta`, each row-major and
//! interleaved (`re, im, re, im, ...`). Occupations are decimal bitmasks.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{OrbitalRotation, ShadowShot};
use crate::fci::Occupation;

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
}

pub fn write_shot_archive<W: Write>(w: W, seed: u64, shots: &[ShadowShot]) -> Result<(), ArchiveError> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    out.write_record(["seed", "shot", "n_orb", "alpha", "beta", "u_alpha_u_beta"])?;
    for (k, s) in shots.iter().enumerate() {
        let n = s.rotation.n_orb();
        let mut rec = vec![seed.to_string(), k.to_string(), n.to_string(), s.outcome.alpha.to_string(), s.outcome.beta.to_string()];
        for u in [&s.rotation.u_alpha, &s.rotation.u_beta] {
            for i in 0..n {
                for j in 0..n {
                    rec.push(u[(i, j)].re.to_string());
                    rec.push(u[(i, j)].im.to_string());
                }
            }
        }
        out.write_record(&rec)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads `(seed, shot)` pairs written by [`write_shot_archive`].
pub fn read_shot_archive<R: Read>(r: R) -> Result<Vec<(u64, ShadowShot)>, ArchiveError> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let mut out = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |msg: &str| ArchiveError::Row { row: row + 1, msg: msg.to_string() };
        let int = |i: usize| -> Result<u64, ArchiveError> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad integer field"))
        };
        let seed = int(0)?;
        let n = int(2)? as usize;
        if rec.len() != 5 + 4 * n * n {
            return Err(bad("wrong number of fields"));
        }
        let vals: Vec<f64> = rec
            .iter()
            .skip(5)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad float field"))?;
        let mat = |off: usize| {
            DMatrix::from_fn(n, n, |i, j| {
                let k = off + 2 * (i * n + j);
                Complex64::new(vals[k], vals[k + 1])
            })
        };
        let rotation = OrbitalRotation { u_alpha: mat(0), u_beta: mat(2 * n * n) };
        out.push((seed, ShadowShot { rotation, outcome: Occupation { alpha: int(3)?, beta: int(4)? } }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shadow::sample_haar_rotation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let shots: Vec<ShadowShot> = (0..3)
            .map(|k| ShadowShot {
                rotation: sample_haar_rotation(3, &mut rng, true),
                outcome: Occupation { alpha: 0b011 + k, beta: 0b100 },
            })
            .collect();
        let mut buf = Vec::new();
        write_shot_archive(&mut buf, 42, &shots).unwrap();
        let back = read_shot_archive(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        for ((seed, s), orig) in back.iter().zip(&shots) {
            assert_eq!(*seed, 42);
            assert_eq!(s, orig);
        }
    }
}
