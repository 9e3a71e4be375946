//! Seeded probing of the structural hypotheses. Every check returns a
//! report whose counterexamples re-evaluate to violations.

mod checks;
mod modulus;
mod report;

pub use checks::{
    check_agreement, check_biduality, check_compatibility, check_directionality, check_monotonicity, check_n,
    check_p, check_t,
};
pub use modulus::{fiber_modulus, Delta, DirectionalRow, FiberSubject, ModulusReport, ModulusRow};
pub use report::{CheckConfig, CheckReport, CheckVerdict, Counterexample, SCHEMA_VERSION};
pub(crate) use report::{Outcome, Tally};
