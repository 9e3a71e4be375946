//! Empirical fiberegularity moduli `eta -> delta(eta)`.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::report::{Counterexample, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::jets::{Domain, Jet, JetSampler};
use crate::subequations::{induce, ProperEllipticPair, Subequation};
use crate::tolerances::Tolerances;

const MODULUS_STREAM: u64 = 13 << 32;
const KEPT_FAILURES: usize = 4;

/// A modulus value; constant-coefficient subjects are `Unbounded`,
/// serialized as the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Delta {
    Finite(f64),
    Unbounded,
}

impl Delta {
    pub fn value(self) -> f64 {
        match self {
            Delta::Finite(d) => d,
            Delta::Unbounded => f64::INFINITY,
        }
    }
}

impl Serialize for Delta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Delta::Finite(d) => s.serialize_f64(*d),
            Delta::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Delta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Delta::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(Delta::Unbounded),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad delta {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub eta: f64,
    pub delta: Delta,
    /// Tuples failing just beyond `delta`.
    pub failures: Vec<Counterexample>,
}

/// `g(p + eta*qbar) - g(p) - omega(eta)` minimised over sampled `p in D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalRow {
    pub eta: f64,
    pub omega: f64,
    pub min_excess: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub schema_version: String,
    pub subject: String,
    pub form: String,
    pub samples: usize,
    pub seed: u64,
    pub domain: Domain,
    pub probe: Jet,
    pub rows: Vec<ModulusRow>,
    pub directional: Option<Vec<DirectionalRow>>,
    pub tolerances: Tolerances,
}

impl ModulusReport {
    /// Positive everywhere and nondecreasing in `eta`.
    pub fn is_regular(&self) -> bool {
        let vals: Vec<f64> = self.rows.iter().map(|r| r.delta.value()).collect();
        vals.iter().all(|d| *d > 0.0)
            && vals.windows(2).all(|w| w[0] <= w[1])
            && self
                .directional
                .as_ref()
                .is_none_or(|d| d.iter().all(|r| r.holds))
    }
}

/// What the modulus is measured for: the fibers of a set (inclusion form)
/// or a pair (operator form on `G` plus the inclusion for its induced set).
#[derive(Clone, Copy)]
pub enum FiberSubject<'a> {
    Set(&'a Subequation),
    Pair(&'a ProperEllipticPair),
}

struct Tuple {
    x: Vec<f64>,
    u: Vec<f64>,
    s: f64,
    j: Jet,
    fx: f64,
}

/// For each `eta`, bisects the largest `delta` such that over a fixed sample
/// of `x in Omega`, unit `u`, `s in [0, 1)` and `J in Theta(x)` the shifted jet
/// `J + eta J0` is admissible at `y = x + delta*s*u`. Admissibility only
/// improves with `eta`, so the bisection yields a nondecreasing `delta`.
pub fn fiber_modulus(
    subject: FiberSubject<'_>,
    omega: &Domain,
    etas: &[f64],
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<ModulusReport> {
    omega.validate()?;
    if etas.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput("eta values must be finite and nonnegative".into()));
    }
    let (set, pair) = match subject {
        FiberSubject::Set(f) => (f.clone(), None),
        FiberSubject::Pair(p) => (induce(p), Some(p)),
    };
    if set.dim != omega.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim,
            found: omega.dim(),
        });
    }
    if set.cone.interior_probe().is_none() {
        return Err(Error::Unsupported("fiber modulus needs a probe jet in Int M".into()));
    }
    let set = set.with_base(Some(omega.clone())).with_tolerances(tol.clone());
    let probe = set.probe.clone();
    let form = if pair.is_some() { "operator+set" } else { "set" };
    let directional = pair.and_then(|p| directional_rows(p, etas, samples, seed, tol));

    let mut report = ModulusReport {
        schema_version: SCHEMA_VERSION.into(),
        subject: set.name.clone(),
        form: form.into(),
        samples,
        seed,
        domain: omega.clone(),
        probe: probe.clone(),
        rows: Vec::new(),
        directional,
        tolerances: tol.clone(),
    };
    let constant = pair.map_or(set.constant_coefficients, |p| p.constant_coefficients());
    if constant {
        report.rows = etas
            .iter()
            .map(|&eta| ModulusRow {
                eta,
                delta: Delta::Unbounded,
                failures: Vec::new(),
            })
            .collect();
        return Ok(report);
    }

    let mut rng = JetSampler::new(seed, MODULUS_STREAM);
    let mut tuples = Vec::with_capacity(samples);
    let mut attempts = 0;
    while tuples.len() < samples && attempts < 16 * samples.max(1) {
        attempts += 1;
        let x = rng.point_in(&omega.lo, &omega.hi);
        let u = rng.unit_vec(omega.dim());
        let s = rng.uniform(0.0, 1.0);
        let Some(j) = set.sample_member(&x, &mut rng, tol.sample_scale) else {
            continue;
        };
        if j.norm() > tol.jet_ball {
            continue;
        }
        let fx = pair.map_or(0.0, |p| p.f(&x, &j));
        tuples.push(Tuple { x, u, s, j, fx });
    }
    if tuples.is_empty() {
        return Err(Error::Precondition("no fiber samples inside the jet ball".into()));
    }

    let diam = omega.diameter();
    let y_of = |t: &Tuple, delta: f64| -> Vec<f64> {
        t.x.iter()
            .zip(&t.u)
            .enumerate()
            .map(|(k, (xi, ui))| (xi + delta * t.s * ui).clamp(omega.lo[k], omega.hi[k]))
            .collect()
    };
    // smallest margin among the forms; negative means failure
    let margin = |t: &Tuple, eta: f64, delta: f64| -> f64 {
        let y = y_of(t, delta);
        let shifted = t.j.shifted(eta, &probe);
        let mut m = set.raw_margin(&y, &shifted);
        if let Some(p) = pair {
            m = m.min(p.g_margin(&y, &shifted));
            let slack = tol.check_tol(&t.j);
            m = m.min(p.f(&y, &shifted) - t.fx + slack);
        }
        m
    };
    let holds = |eta: f64, delta: f64| tuples.par_iter().all(|t| margin(t, eta, delta) >= 0.0);

    for &eta in etas {
        let (mut lo, mut hi) = (0.0, diam);
        if holds(eta, diam) {
            lo = diam;
        } else {
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if holds(eta, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let beyond = (lo * (1.0 + 1e-6)).max(hi).min(diam);
        let failures = tuples
            .iter()
            .filter_map(|t| {
                let m = margin(t, eta, beyond);
                (m < 0.0).then(|| {
                    Counterexample::new(&t.x, &t.j, m, 0.0, "J + eta J0 not admissible at y")
                        .with_value("eta", eta)
                        .with_value("delta", beyond)
                        .with_value("s", t.s)
                })
            })
            .take(KEPT_FAILURES)
            .collect();
        report.rows.push(ModulusRow {
            eta,
            delta: Delta::Finite(lo),
            failures,
        });
    }
    Ok(report)
}

fn directional_rows(
    pair: &ProperEllipticPair,
    etas: &[f64],
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Option<Vec<DirectionalRow>> {
    let gf = pair.gradient_factor.as_ref()?;
    let cone = crate::cones::MonotonicityCone::Directional(gf.cone.clone());
    let mut rng = JetSampler::new(seed, MODULUS_STREAM + 1);
    let ps: Vec<Vec<f64>> = (0..samples).map(|_| cone.sample_member(&mut rng, tol.sample_scale).p).collect();
    Some(
        etas.iter()
            .map(|&eta| {
                let w = gf.omega_at(eta);
                let min_excess = ps
                    .iter()
                    .map(|p| {
                        let q: Vec<f64> = p.iter().zip(&gf.qbar).map(|(a, b)| a + eta * b).collect();
                        gf.g_at(&q) - gf.g_at(p) - w
                    })
                    .fold(f64::INFINITY, f64::min);
                DirectionalRow {
                    eta,
                    omega: w,
                    min_excess,
                    holds: min_excess >= -tol.check_rel * (1.0 + w.abs()),
                }
            })
            .collect(),
    )
}
