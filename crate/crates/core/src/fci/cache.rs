//! Binary state cache.
//!
//! Layout, all little-endian: magic `RDMSFCI1`, 32-byte SHA-256 of the
//! FCIDUMP text, `n_orb`, `n_alpha`, `n_beta` as u32, energy as f64 (NaN when
//! absent), dimension as u64, then `dim` pairs of (re, im) f64.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{enumerate_space, FciError, FciVector};

const MAGIC: &[u8; 8] = b"RDMSFCI1";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a state cache file")]
    BadMagic,
    #[error("cache does not match the requested dimensions")]
    Shape,
    #[error(transparent)]
    Fci(#[from] FciError),
}

fn key(fcidump: &str) -> [u8; 32] {
    Sha256::digest(fcidump.as_bytes()).into()
}

pub fn write_cached_state(path: &Path, fcidump: &str, state: &FciVector) -> Result<(), CacheError> {
    let sp = &state.space;
    let mut buf = Vec::with_capacity(64 + 16 * state.amplitudes.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&key(fcidump));
    for v in [sp.n_orb, sp.n_alpha, sp.n_beta] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&state.energy.unwrap_or(f64::NAN).to_le_bytes());
    buf.extend_from_slice(&(state.amplitudes.len() as u64).to_le_bytes());
    for z in &state.amplitudes {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Returns `Ok(None)` when the file is missing or was written for different integrals.
pub fn read_cached_state(path: &Path, fcidump: &str) -> Result<Option<FciVector>, CacheError> {
    let mut buf = Vec::new();
    match std::fs::File::open(path) {
        Ok(mut f) => f.read_to_end(&mut buf)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if buf.len() < 68 || &buf[..8] != MAGIC {
        return Err(CacheError::BadMagic);
    }
    if buf[8..40] != key(fcidump) {
        return Ok(None);
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let (n_orb, na, nb) = (u32_at(40), u32_at(44), u32_at(48));
    let energy = f64_at(52);
    let dim = u64::from_le_bytes(buf[60..68].try_into().unwrap()) as usize;
    let space = enumerate_space(n_orb, na, nb)?;
    if space.dim() != dim || buf.len() != 68 + 16 * dim {
        return Err(CacheError::Shape);
    }
    let amplitudes = (0..dim)
        .map(|k| Complex64::new(f64_at(68 + 16 * k), f64_at(76 + 16 * k)))
        .collect();
    let energy = if energy.is_nan() { None } else { Some(energy) };
    Ok(Some(FciVector::new(space, amplitudes, energy)?))
}
