//! Two-particle reduced density matrices from simulated fermionic classical
//! shadows, refined by a variational N-representability semidefinite program.

pub mod fci;
pub mod fixtures;
pub mod harness;
pub mod integrals;
pub mod linalg;
pub mod rdm;
pub mod sdp;
pub mod shadow;
pub mod v2rdm;

pub use integrals::{energy_from_rdms, parse_fcidump, MolecularIntegrals};
pub use rdm::{ComplexRdms, PairBasis, SpinBlockedRdms};
