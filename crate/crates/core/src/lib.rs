//! Computational general potential theory on 2-jet space.
//!
//! The crate represents constraint sets ("subequations") in
//! `R x R^n x S(n)`, computes their Dirichlet duals, probes the structural
//! axioms by seeded sampling, checks viscosity sub/superharmonicity of grid
//! functions through discrete contact jets, and solves Dirichlet problems
//! for the model operators with monotone finite-difference schemes.

pub mod cones;
pub mod dirichlet;
pub mod error;
pub mod expr;
pub mod jets;
pub mod problem;
pub mod subequations;
pub mod tolerances;
pub mod verifier;
pub mod viscosity;

pub use error::{Error, Result};
pub use jets::{jet_combine, sample_jet, sym_eigen, Domain, Jet, JetSampler, SymMatrix};
pub use tolerances::Tolerances;
