//! FCIDUMP parsing and RDM energy evaluation.
//!
//! Integrals are stored 0-based internally. Two-electron integrals use
//! chemists' notation `(ij|kl)` in a dense table that is filled for all eight
//! symmetry-equivalent index orders.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::rdm::{PairBasis, SpinBlockedRdms};

#[derive(Debug, Error, PartialEq)]
pub enum IntegralsError {
    #[error("line {line}: malformed header: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: expected `value i j k l`: {msg}")]
    Record { line: usize, msg: String },
    #[error("line {line}: orbital index {index} out of range 0..={n_orb}")]
    IndexOutOfRange { line: usize, index: i64, n_orb: usize },
    #[error("line {line}: NELEC={nelec} and MS2={ms2} give a fractional spin count")]
    OddSpin { line: usize, nelec: i64, ms2: i64 },
    #[error("RDMs are dimensioned for ({0}, {1}, {2}) but integrals for ({3}, {4}, {5})")]
    DimensionMismatch(usize, usize, usize, usize, usize, usize),
}

/// Core energy plus one- and two-electron integrals of an active space.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularIntegrals {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub e_core: f64,
    pub h1: DMatrix<f64>,
    eri: Vec<f64>,
}

impl MolecularIntegrals {
    /// All-zero integrals for the given sector.
    pub fn zeros(n_orb: usize, n_alpha: usize, n_beta: usize) -> Self {
        Self {
            n_orb,
            n_alpha,
            n_beta,
            e_core: 0.0,
            h1: DMatrix::zeros(n_orb, n_orb),
            eri: vec![0.0; n_orb.pow(4)],
        }
    }

    pub fn eta(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    #[inline]
    fn slot(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let n = self.n_orb;
        ((i * n + j) * n + k) * n + l
    }

    /// `(ij|kl)` in chemists' notation, 0-based.
    #[inline]
    pub fn eri(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.eri[self.slot(i, j, k, l)]
    }

    /// Sets `(ij|kl)` and every symmetry-equivalent entry.
    pub fn set_eri(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        for (a, b, c, d) in [
            (i, j, k, l),
            (j, i, k, l),
            (i, j, l, k),
            (j, i, l, k),
            (k, l, i, j),
            (l, k, i, j),
            (k, l, j, i),
            (l, k, j, i),
        ] {
            let s = self.slot(a, b, c, d);
            self.eri[s] = v;
        }
    }

    pub fn set_h1(&mut self, i: usize, j: usize, v: f64) {
        self.h1[(i, j)] = v;
        self.h1[(j, i)] = v;
    }

    /// Serializes back to FCIDUMP text (unique integrals only, zeros skipped).
    pub fn to_fcidump(&self) -> String {
        let n = self.n_orb;
        let mut out = String::new();
        let ms2 = self.n_alpha as i64 - self.n_beta as i64;
        let _ = writeln!(
            out,
            "&FCI NORB={},NELEC={},MS2={},\n ORBSYM={}\n ISYM=1,\n&END",
            n,
            self.eta(),
            ms2,
            "1,".repeat(n)
        );
        for i in 0..n {
            for j in 0..=i {
                for k in 0..n {
                    for l in 0..=k {
                        if i * (i + 1) / 2 + j < k * (k + 1) / 2 + l {
                            continue;
                        }
                        let v = self.eri(i, j, k, l);
                        if v != 0.0 {
                            let _ = writeln!(out, "{:e} {} {} {} {}", v, i + 1, j + 1, k + 1, l + 1);
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..=i {
                let v = self.h1[(i, j)];
                if v != 0.0 {
                    let _ = writeln!(out, "{:e} {} {} 0 0", v, i + 1, j + 1);
                }
            }
        }
        let _ = writeln!(out, "{:e} 0 0 0 0", self.e_core);
        out
    }
}

/// Parses an FCIDUMP file.
///
/// The namelist header may span several lines and ends at `&END` or `/`.
/// `ORBSYM` and `ISYM` are accepted and ignored.
pub fn parse_fcidump(text: &str) -> Result<MolecularIntegrals, IntegralsError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut header = String::new();
    let mut header_start = None;
    let mut closed = false;
    for (no, line) in lines.by_ref() {
        if header_start.is_none() {
            if line.trim().is_empty() {
                continue;
            }
            header_start = Some(no);
        }
        let upper = line.to_ascii_uppercase();
        let terminator = upper.find("&END").or_else(|| upper.trim_end().strip_suffix('/').map(str::len));
        if let Some(pos) = terminator {
            header.push_str(&upper[..pos]);
            closed = true;
            break;
        }
        header.push_str(&upper);
        header.push(' ');
    }
    let start = header_start.unwrap_or(1);
    if !closed {
        return Err(IntegralsError::Header { line: start, msg: "missing &END or / terminator".into() });
    }
    let header = header.trim_start();
    let body = header
        .strip_prefix("&FCI")
        .ok_or_else(|| IntegralsError::Header { line: start, msg: "expected &FCI".into() })?;

    let mut keys: Vec<(String, Vec<String>)> = Vec::new();
    for tok in body.replace(',', " ").split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            let mut vals = Vec::new();
            if !v.is_empty() {
                vals.push(v.to_string());
            }
            keys.push((k.to_string(), vals));
        } else if let Some(last) = keys.last_mut() {
            last.1.push(tok.to_string());
        } else {
            return Err(IntegralsError::Header { line: start, msg: format!("unexpected token `{tok}`") });
        }
    }
    let get = |name: &str| -> Result<Option<i64>, IntegralsError> {
        match keys.iter().find(|(k, _)| k == name) {
            None => Ok(None),
            Some((_, v)) if v.len() == 1 => v[0].parse::<i64>().map(Some).map_err(|_| IntegralsError::Header {
                line: start,
                msg: format!("{name} is not an integer"),
            }),
            Some(_) => Err(IntegralsError::Header { line: start, msg: format!("{name} needs one value") }),
        }
    };
    let norb = get("NORB")?.ok_or_else(|| IntegralsError::Header { line: start, msg: "NORB missing".into() })?;
    let nelec = get("NELEC")?.ok_or_else(|| IntegralsError::Header { line: start, msg: "NELEC missing".into() })?;
    let ms2 = get("MS2")?.unwrap_or(0);
    if norb < 0 || nelec < 0 {
        return Err(IntegralsError::Header { line: start, msg: "negative NORB or NELEC".into() });
    }
    if (nelec + ms2) % 2 != 0 || nelec + ms2 < 0 || nelec - ms2 < 0 {
        return Err(IntegralsError::OddSpin { line: start, nelec, ms2 });
    }
    let n = norb as usize;
    let n_alpha = ((nelec + ms2) / 2) as usize;
    let n_beta = ((nelec - ms2) / 2) as usize;
    if n_alpha > n || n_beta > n {
        return Err(IntegralsError::Header { line: start, msg: "more electrons than spin orbitals".into() });
    }
    let mut ints = MolecularIntegrals::zeros(n, n_alpha, n_beta);

    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(IntegralsError::Record { line: no, msg: format!("{} fields", fields.len()) });
        }
        let value: f64 = fields[0]
            .replace(['d', 'D'], "e")
            .parse()
            .map_err(|_| IntegralsError::Record { line: no, msg: format!("bad value `{}`", fields[0]) })?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            let v: i64 = f
                .parse()
                .map_err(|_| IntegralsError::Record { line: no, msg: format!("non-integer index `{f}`") })?;
            if v < 0 || v > norb {
                return Err(IntegralsError::IndexOutOfRange { line: no, index: v, n_orb: n });
            }
            *slot = v as usize;
        }
        match idx {
            [0, 0, 0, 0] => ints.e_core = value,
            [i, j, 0, 0] if i > 0 && j > 0 => ints.set_h1(i - 1, j - 1, value),
            // orbital energies
            [_, 0, 0, 0] => {}
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => ints.set_eri(i - 1, j - 1, k - 1, l - 1, value),
            _ => {
                return Err(IntegralsError::Record { line: no, msg: "unsupported index pattern".into() });
            }
        }
    }
    Ok(ints)
}

/// `E = e_core + Σ h·¹D + ½ Σ (pr|qs) ²D^{pq,rs}` evaluated on spin blocks.
pub fn energy_from_rdms(ints: &MolecularIntegrals, rdms: &SpinBlockedRdms) -> Result<f64, IntegralsError> {
    if (rdms.n_orb, rdms.n_alpha, rdms.n_beta) != (ints.n_orb, ints.n_alpha, ints.n_beta) {
        return Err(IntegralsError::DimensionMismatch(
            rdms.n_orb,
            rdms.n_alpha,
            rdms.n_beta,
            ints.n_orb,
            ints.n_alpha,
            ints.n_beta,
        ));
    }
    let n = ints.n_orb;
    let mut e = ints.e_core;
    e += ints.h1.component_mul(&(&rdms.d1_aa + &rdms.d1_bb)).sum();

    let pb = PairBasis::new(n);
    for (x, &(p, q)) in pb.pairs().iter().enumerate() {
        for (y, &(r, s)) in pb.pairs().iter().enumerate() {
            let k = same_spin_coefficient(ints, p, q, r, s);
            e += k * (rdms.d2_aa[(x, y)] + rdms.d2_bb[(x, y)]);
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    e += ints.eri(p, r, q, s) * rdms.d2_ab[(p * n + q, r * n + s)];
                }
            }
        }
    }
    Ok(e)
}

/// Antisymmetrized same-spin coefficient `(pr|qs) − (ps|qr)` of a geminal entry.
#[inline]
pub fn same_spin_coefficient(ints: &MolecularIntegrals, p: usize, q: usize, r: usize, s: usize) -> f64 {
    ints.eri(p, r, q, s) - ints.eri(p, s, q, r)
}
