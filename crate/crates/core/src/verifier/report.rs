use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::jets::{Jet, JetSampler};
use crate::tolerances::Tolerances;

pub const SCHEMA_VERSION: &str = "1";
const KEPT_COUNTEREXAMPLES: usize = 8;
const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckVerdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

/// A concrete violation. `margin < -2 * tolerance` always holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub x: Vec<f64>,
    pub jet: Jet,
    /// Second jet involved (the added `P`, cone jet, dual jet, ...).
    pub witness: Option<Jet>,
    pub margin: f64,
    pub tolerance: f64,
    pub values: BTreeMap<String, f64>,
    pub note: String,
}

impl Counterexample {
    pub fn new(x: &[f64], jet: &Jet, margin: f64, tolerance: f64, note: &str) -> Self {
        Self {
            x: x.to_vec(),
            jet: jet.clone(),
            witness: None,
            margin,
            tolerance,
            values: BTreeMap::new(),
            note: note.into(),
        }
    }

    pub fn with_witness(mut self, w: &Jet) -> Self {
        self.witness = Some(w.clone());
        self
    }

    pub fn with_value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }

    pub fn is_violation(&self) -> bool {
        self.margin < -2.0 * self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema_version: String,
    pub check: String,
    pub subject: String,
    pub samples: usize,
    pub seed: u64,
    pub verdict: CheckVerdict,
    pub tested: usize,
    pub skipped: usize,
    pub violations: usize,
    pub counterexamples: Vec<Counterexample>,
    pub details: serde_json::Value,
    pub tolerances: Tolerances,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == CheckVerdict::Pass
    }

    pub(crate) fn from_tally(
        check: &str,
        subject: &str,
        cfg: &CheckConfig,
        tally: Tally,
        details: serde_json::Value,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            check: check.into(),
            subject: subject.into(),
            samples: cfg.samples,
            seed: cfg.seed,
            verdict: if tally.violations == 0 {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            tested: tally.tested,
            skipped: tally.skipped,
            violations: tally.violations,
            counterexamples: tally.kept,
            details,
            tolerances: cfg.tol.clone(),
        }
    }
}

/// Settings shared by the sampling checks.
#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub samples: usize,
    pub seed: u64,
    pub tol: Tolerances,
    /// Caller-supplied member jets probed in addition to the samples, for
    /// features sampling cannot hit (lower-dimensional pieces).
    pub extra_jets: Vec<(Vec<f64>, Jet)>,
}

impl CheckConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            tol: Tolerances::default(),
            extra_jets: Vec::new(),
        }
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_extra(mut self, extra: Vec<(Vec<f64>, Jet)>) -> Self {
        self.extra_jets = extra;
        self
    }
}

pub(crate) enum Outcome {
    Ok,
    Skipped,
    Violation(Box<Counterexample>),
}

impl Outcome {
    pub(crate) fn judge(c: Counterexample) -> Self {
        if c.is_violation() {
            Outcome::Violation(Box::new(c))
        } else {
            Outcome::Ok
        }
    }
}

#[derive(Default)]
pub(crate) struct Tally {
    pub tested: usize,
    pub skipped: usize,
    pub violations: usize,
    pub kept: Vec<Counterexample>,
}

impl Tally {
    pub(crate) fn push(&mut self, o: Outcome) {
        match o {
            Outcome::Ok => self.tested += 1,
            Outcome::Skipped => self.skipped += 1,
            Outcome::Violation(c) => {
                self.tested += 1;
                self.violations += 1;
                if self.kept.len() < KEPT_COUNTEREXAMPLES {
                    self.kept.push(*c);
                }
            }
        }
    }

    pub(crate) fn merge(&mut self, other: Tally) {
        self.tested += other.tested;
        self.skipped += other.skipped;
        self.violations += other.violations;
        for c in other.kept {
            if self.kept.len() < KEPT_COUNTEREXAMPLES {
                self.kept.push(c);
            }
        }
    }

    pub(crate) fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "tested": self.tested,
            "skipped": self.skipped,
            "violations": self.violations,
        })
    }
}

/// Runs `body` once per sample index on independent seeded streams.
/// Chunk `c` of stream family `family` uses stream `family * 2^32 + c`, and
/// results are merged in chunk order, so the tally does not depend on the
/// thread count.
pub(crate) fn run_sampled<F>(samples: usize, seed: u64, family: u64, body: F) -> Tally
where
    F: Fn(&mut JetSampler) -> Outcome + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = JetSampler::new(seed, (family << 32) + c as u64);
            let mut t = Tally::default();
            let count = CHUNK.min(samples - c * CHUNK);
            for _ in 0..count {
                t.push(body(&mut rng));
            }
            t
        })
        .collect();
    let mut total = Tally::default();
    for p in parts {
        total.merge(p);
    }
    total
}
