//! Built-in integral files.
//!
//! Geometries and reference energies are listed in `fixtures/README.md`.

use crate::integrals::{parse_fcidump, IntegralsError, MolecularIntegrals};

/// `(id, FCIDUMP text, reference FCI energy)`.
const FIXTURES: &[(&str, &str, f64)] = &[
    ("h2", include_str!("../fixtures/h2.fcidump"), -1.1372838344885028),
    ("h4", include_str!("../fixtures/h4.fcidump"), -2.1663874486347625),
    ("n2", include_str!("../fixtures/n2_cas10_8.fcidump"), -109.03438034840215),
];

/// Ids of every built-in fixture.
pub fn ids() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|f| f.0)
}

fn lookup(id: &str) -> Option<&'static (&'static str, &'static str, f64)> {
    let id = if id == "n2_cas10_8" { "n2" } else { id };
    FIXTURES.iter().find(|f| f.0 == id)
}

/// Raw FCIDUMP text of a built-in fixture.
pub fn text(id: &str) -> Option<&'static str> {
    lookup(id).map(|f| f.1)
}

/// FCI energy of the fixture computed with an independent quantum-chemistry package.
pub fn reference_energy(id: &str) -> Option<f64> {
    lookup(id).map(|f| f.2)
}

/// Parses a built-in fixture; `None` for an unknown id.
pub fn load(id: &str) -> Option<MolecularIntegrals> {
    text(id).map(|t| parse_fcidump(t).expect("built-in fixtures parse"))
}

/// Resolves a fixture id or a path to an FCIDUMP file.
pub fn resolve(id_or_path: &str) -> Result<(String, MolecularIntegrals), ResolveError> {
    if let Some(t) = text(id_or_path) {
        return Ok((t.to_string(), parse_fcidump(t)?));
    }
    let t = std::fs::read_to_string(id_or_path)?;
    let ints = parse_fcidump(&t)?;
    Ok((t, ints))
}

#[derive(Debug, thiserror::Error)]
pub enum ResolveError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] IntegralsError),
}
