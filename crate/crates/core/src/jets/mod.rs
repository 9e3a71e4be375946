//! Jet arithmetic, the symmetric eigen kernel, grid boxes and seeded sampling.

mod domain;
mod jet;
mod rng;
mod sym;

pub use domain::Domain;
pub use jet::{jet_combine, Jet};
pub use rng::{sample_jet, JetSampler};
pub use sym::{SymEigen, SymMatrix};

use crate::error::Result;

/// Ascending eigenvalues and orthonormal eigenframe of `a`.
pub fn sym_eigen(a: &SymMatrix) -> Result<SymEigen> {
    a.eigen()
}
