//! Sample-based quantum diagonalization (SQD) for supramolecular binding
//! energies.
//!
//! Pipeline: an LUCJ-form state ([`ansatz`]) is sampled on an emulated noisy
//! device ([`sampler`]); corrupted bitstrings are repaired by self-consistent
//! configuration recovery ([`recovery`]); each batch defines an
//! alpha-string x beta-string subspace diagonalized with Davidson
//! ([`solver`]); subspace energies may be extrapolated to zero variance
//! ([`extrapolate`]) and assembled into binding energies over a potential
//! energy surface ([`workflow`]). [`fock::build_dense`] provides the exact
//! diagonalization oracle on small sectors.

pub mod ansatz;
pub mod error;
pub mod extrapolate;
pub mod fock;
pub mod hamiltonian;
pub mod recovery;
pub mod sampler;
pub mod solver;
pub mod toy;
pub mod workflow;

pub use error::{Error, Result};
pub use fock::{CiVector, Determinant};
pub use hamiltonian::ActiveSpaceHamiltonian;

/// 1 hartree in kcal/mol.
pub const HARTREE_TO_KCAL_MOL: f64 = 627.509474;
