//! One record holding every numerical tolerance the checks use.
//!
//! Reports echo this record verbatim so a run can be reproduced from its
//! output alone.

use serde::{Deserialize, Serialize};

use crate::jets::Jet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative width of the boundary shell used by tri-state membership:
    /// `eps_int = interior_rel * (1 + |J|)`.
    pub interior_rel: f64,
    /// Absolute shell outside of which set-equality claims are asserted.
    pub shell: f64,
    /// Relative step `t` for probing `J - t*J0` / `J + t*J0`.
    pub probe_rel: f64,
    /// Relative tolerance for axiom-check violations; a counterexample must
    /// violate by more than twice this.
    pub check_rel: f64,
    /// Relative tolerance on operator values in compatibility checks.
    pub compat_rel: f64,
    /// Spread of sampled jets.
    pub sample_scale: f64,
    /// Radius of the jet ball used to bound ray searches.
    pub jet_ball: f64,
    /// Constant `c` in the contact slack `c*h^2` and verdict tolerance `c*h`.
    pub contact_c: f64,
    /// Bisection steps for boundary searches.
    pub bisection_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            interior_rel: 1e-9,
            shell: 1e-8,
            probe_rel: 1e-10,
            check_rel: 1e-9,
            compat_rel: 1e-7,
            sample_scale: 1.0,
            jet_ball: 10.0,
            contact_c: 4.0,
            bisection_steps: 60,
        }
    }
}

impl Tolerances {
    pub fn eps_int(&self, j: &Jet) -> f64 {
        self.interior_rel * (1.0 + j.norm())
    }

    pub fn probe_step(&self, j: &Jet) -> f64 {
        self.probe_rel * (1.0 + j.norm())
    }

    pub fn check_tol(&self, j: &Jet) -> f64 {
        self.check_rel * (1.0 + j.norm())
    }

    pub fn compat_tol(&self, j: &Jet) -> f64 {
        self.compat_rel * (1.0 + j.norm())
    }

    /// Verdict tolerance `tau(h) = c*h`.
    pub fn tau(&self, h: f64) -> f64 {
        self.contact_c * h
    }

    /// Contact slack `c*h^2`.
    pub fn contact_slack(&self, h: f64) -> f64 {
        self.contact_c * h * h
    }
}
