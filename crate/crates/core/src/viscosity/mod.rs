//! Viscosity verdicts on grid functions: `F`-subharmonicity, superharmonicity
//! through the dual, `G`-admissible sub/supersolutions and the node-by-node
//! correspondence between them.
//!
//! Every test runs on the upper (or lower) contact jets at interior nodes
//! and inflates sets by `tau(h) = c*h` in jet distance, to first order per
//! defining piece (see [`Subequation::tolerant_member`]). On the
//! supersolution side membership in `G` is exact, as in the definition:
//! a lower jet is only charged when it lies in `G`.

mod contact;
mod grid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use contact::visit_contact_jets;
pub use contact::{contact_jets, ContactJetSet, Side};
pub use grid::GridFunction;

use crate::cones::{MonotonicityCone, cone_dual};
use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::subequations::{induce, piece_test, ProperEllipticPair, Subequation};
use crate::tolerances::Tolerances;
use crate::verifier::{check_compatibility, CheckConfig, CheckReport, Counterexample, Outcome, Tally};

const STENCIL_RADIUS: usize = 1;
const HYPOTHESIS_SAMPLES: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Overall {
    #[serde(rename = "HOLDS")]
    Holds,
    #[serde(rename = "FAILS")]
    Fails,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeStatus {
    Holds,
    Fails,
    /// No contact jets (sentinel value or nothing touches).
    Vacuous,
    Boundary,
}

impl NodeStatus {
    fn fails(self) -> bool {
        self == NodeStatus::Fails
    }
}

/// First violating jet at a node. `excess < 0` is how far the deciding
/// value lies beyond its allowance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeViolation {
    pub node: usize,
    pub x: Vec<f64>,
    pub jet: Jet,
    pub value: f64,
    pub allowance: f64,
    pub excess: f64,
    pub rule: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub subject: String,
    pub h: f64,
    pub tau: f64,
    pub slack: f64,
    pub overall: Overall,
    pub nodes: Vec<NodeStatus>,
    pub violations: Vec<NodeViolation>,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.overall == Overall::Holds
    }

    pub fn violation_at(&self, node: usize) -> Option<&NodeViolation> {
        self.violations.iter().find(|v| v.node == node)
    }
}

struct JetFailure {
    value: f64,
    allowance: f64,
    excess: f64,
    rule: &'static str,
}

fn judge_nodes(
    u: &GridFunction,
    side: Side,
    tol: &Tolerances,
    subject: &str,
    test: impl Fn(&[f64], &Jet) -> Option<JetFailure> + Sync,
) -> Verdict {
    let d = &u.domain;
    let h = d.h;
    let slack = tol.contact_slack(h);
    let per_node: Vec<(NodeStatus, Option<NodeViolation>)> = (0..u.len())
        .into_par_iter()
        .map(|node| {
            if !d.is_interior_at_depth(node, STENCIL_RADIUS) {
                return (NodeStatus::Boundary, None);
            }
            let x = d.point(node);
            let mut seen = false;
            let mut found = None;
            visit_contact_jets(u, node, side, STENCIL_RADIUS, slack, |j| {
                seen = true;
                found = test(&x, j).map(|f| NodeViolation {
                    node,
                    x: x.clone(),
                    jet: j.clone(),
                    value: f.value,
                    allowance: f.allowance,
                    excess: f.excess,
                    rule: f.rule.into(),
                });
                found.is_none()
            });
            if found.is_some() {
                return (NodeStatus::Fails, found);
            }
            if !seen {
                return (NodeStatus::Vacuous, None);
            }
            (NodeStatus::Holds, None)
        })
        .collect();
    let (nodes, found): (Vec<_>, Vec<_>) = per_node.into_iter().unzip();
    let violations: Vec<NodeViolation> = found.into_iter().flatten().collect();
    Verdict {
        subject: subject.into(),
        h,
        tau: tol.tau(h),
        slack,
        overall: if violations.is_empty() {
            Overall::Holds
        } else {
            Overall::Fails
        },
        nodes,
        violations,
    }
}

/// Every upper contact jet lies in the `tau`-inflated fiber `F_x`.
pub fn is_subharmonic(f: &Subequation, u: &GridFunction, tol: &Tolerances) -> Verdict {
    let tau = tol.tau(u.domain.h);
    judge_nodes(u, Side::Upper, tol, &f.name, |x, j| {
        let t = f.tolerant_member(x, j, tau);
        (!t.pass).then(|| JetFailure {
            value: t.margin,
            allowance: t.allowance,
            excess: t.margin + t.allowance,
            rule: "upper jet outside F",
        })
    })
}

/// `w` is `F`-superharmonic iff `-w` is `F~`-subharmonic.
pub fn is_superharmonic(f: &Subequation, w: &GridFunction, tol: &Tolerances) -> Verdict {
    is_subharmonic(&f.dual(), &w.neg(), tol)
}

/// Upper jets satisfy `J in G_x` and `F(x, J) >= 0`, both up to `tau`.
pub fn admissible_subsolution(pair: &ProperEllipticPair, u: &GridFunction, tol: &Tolerances) -> Verdict {
    let tau = tol.tau(u.domain.h);
    judge_nodes(u, Side::Upper, tol, pair.name(), |x, j| {
        if let Some(g) = &pair.constraint {
            let t = g.tolerant_member(x, j, tau);
            if !t.pass {
                return Some(JetFailure {
                    value: t.margin,
                    allowance: t.allowance,
                    excess: t.margin + t.allowance,
                    rule: "upper jet outside G",
                });
            }
        }
        let t = piece_test(|jj| pair.f(x, jj), j, tau);
        (!t.pass).then(|| JetFailure {
            value: t.margin,
            allowance: t.allowance,
            excess: t.margin + t.allowance,
            rule: "F < 0 on an upper jet in G",
        })
    })
}

/// Lower jets satisfy either `J not in G_x`, or `J in G_x` and
/// `F(x, J) <= 0` up to `tau`.
///
/// A lower jet is tested when it lies on `bd G_x` to within the shell, or
/// in `G_x` beyond the `tau` band. Jets inside `G_x` but within the band
/// are skipped: they are within discretization error of `bd G_x`, where
/// membership is undecidable at this resolution.
pub fn admissible_supersolution(pair: &ProperEllipticPair, u: &GridFunction, tol: &Tolerances) -> Verdict {
    let tau = tol.tau(u.domain.h);
    let g_dual = pair.constraint.as_ref().map(Subequation::dual);
    judge_nodes(u, Side::Lower, tol, pair.name(), |x, j| {
        if pair.f(x, j) <= 0.0 {
            return None;
        }
        let gm = pair.g_margin(x, j);
        let on_boundary = gm.abs() <= tol.shell.max(tol.eps_int(j));
        if gm < 0.0 && !on_boundary {
            return None;
        }
        let t = piece_test(|jj| -pair.f(x, jj), j, tau);
        if t.pass {
            return None;
        }
        if let Some(gd) = g_dual.as_ref().filter(|_| !on_boundary) {
            if gd.tolerant_member(x, &j.neg(), tau).pass {
                return None;
            }
        }
        Some(JetFailure {
            value: -t.margin,
            allowance: t.allowance,
            excess: t.margin + t.allowance,
            rule: "F > 0 on a lower jet in G",
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrespondenceSide {
    Sub,
    Super,
}

/// Node-by-node comparison of the set verdict for the induced set with the
/// admissible solution verdict of the pair. The report flags
/// `UNVERIFIED-HYPOTHESES` when the pair fails a compatibility probe.
pub fn check_correspondence(
    pair: &ProperEllipticPair,
    u: &GridFunction,
    side: CorrespondenceSide,
    tol: &Tolerances,
    seed: u64,
) -> CheckReport {
    let induced = induce(pair).with_tolerances(tol.clone());
    let (set_verdict, pair_verdict) = match side {
        CorrespondenceSide::Sub => (is_subharmonic(&induced, u, tol), admissible_subsolution(pair, u, tol)),
        CorrespondenceSide::Super => (is_superharmonic(&induced, u, tol), admissible_supersolution(pair, u, tol)),
    };
    let cfg = CheckConfig::new(HYPOTHESIS_SAMPLES, seed).with_tolerances(tol.clone());
    let (compat, _) = check_compatibility(pair, &cfg);
    let hypotheses = if compat.passed() {
        "verified"
    } else {
        "UNVERIFIED-HYPOTHESES"
    };

    let mut tally = Tally::default();
    for node in 0..u.len() {
        let (a, b) = (set_verdict.nodes[node], pair_verdict.nodes[node]);
        if a == NodeStatus::Boundary {
            tally.push(Outcome::Skipped);
        } else if a.fails() == b.fails() {
            tally.push(Outcome::Ok);
        } else {
            let (which, v) = match set_verdict.violation_at(node) {
                Some(v) => ("set verdict fails, pair verdict holds", v),
                None => ("pair verdict fails, set verdict holds", pair_verdict.violation_at(node).expect("failing node")),
            };
            let c = Counterexample::new(&v.x, &v.jet, v.excess, 0.0, which)
                .with_value("value", v.value)
                .with_value("allowance", v.allowance)
                .with_value("G_margin", pair.g_margin(&v.x, &v.jet))
                .with_value("F", pair.f(&v.x, &v.jet));
            tally.push(Outcome::Violation(Box::new(c)));
        }
    }
    let details = json!({
        "side": side,
        "hypotheses": hypotheses,
        "h": u.domain.h,
        "tau": tol.tau(u.domain.h),
        "set_verdict": set_verdict.overall,
        "pair_verdict": pair_verdict.overall,
    });
    CheckReport::from_tally("check_correspondence", pair.name(), &cfg, tally, details)
}

/// Subharmonic addition: `u` `F`-subharmonic and `v` `F~`-subharmonic give
/// `u + v` subharmonic for the dual cone `M~`.
pub fn check_subharmonic_addition(
    f: &Subequation,
    u: &GridFunction,
    v: &GridFunction,
    m: &MonotonicityCone,
    tol: &Tolerances,
) -> Result<CheckReport> {
    if !is_subharmonic(f, u, tol).holds() {
        return Err(Error::Precondition("u is not F-subharmonic".into()));
    }
    if !is_subharmonic(&f.dual(), v, tol).holds() {
        return Err(Error::Precondition("v is not subharmonic for the dual of F".into()));
    }
    let sum = u.add(v)?;
    let mdual = Subequation::from_cone(m).dual().with_tolerances(tol.clone());
    let verdict = is_subharmonic(&mdual, &sum, tol);
    let mut tally = Tally::default();
    for (node, st) in verdict.nodes.iter().enumerate() {
        match st {
            NodeStatus::Fails => {
                let v = verdict.violation_at(node).expect("failing node");
                tally.push(Outcome::Violation(Box::new(
                    Counterexample::new(&v.x, &v.jet, v.excess, 0.0, "u + v not dual-cone subharmonic")
                        .with_value("value", v.value)
                        .with_value("allowance", v.allowance),
                )));
            }
            NodeStatus::Boundary => tally.push(Outcome::Skipped),
            _ => tally.push(Outcome::Ok),
        }
    }
    let cfg = CheckConfig::new(0, 0).with_tolerances(tol.clone());
    let details = json!({ "cone": cone_dual(m).label(), "h": u.domain.h, "tau": verdict.tau });
    Ok(CheckReport::from_tally("check_subharmonic_addition", &f.name, &cfg, tally, details))
}

fn sphere_directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 64.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci points on S^2, zero in the remaining coordinates
            let m = 128;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let rad = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    let mut v = vec![0.0; n];
                    v[0] = rad * t.cos();
                    v[1] = rad * t.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

/// Sub-mean-value inequality `u(x) <= avg over the sphere S(x, rho)`, for
/// `rho` in `{2h, 4h}`, up to `c*h^2`, using the multilinear interpolant.
pub fn mean_value_check(u: &GridFunction, tol: &Tolerances) -> Result<CheckReport> {
    if u.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("mean value check needs finite values".into()));
    }
    let d = &u.domain;
    let h = d.h;
    let slack = tol.contact_slack(h);
    let dirs = sphere_directions(d.dim());
    let mut tally = Tally::default();
    for node in 0..u.len() {
        for steps in [2usize, 4] {
            if !d.is_interior_at_depth(node, steps) {
                tally.push(Outcome::Skipped);
                continue;
            }
            let x = d.point(node);
            let rho = steps as f64 * h;
            let avg = dirs
                .iter()
                .map(|e| {
                    let y: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + rho * b).collect();
                    u.interpolate(&y)
                })
                .sum::<f64>()
                / dirs.len() as f64;
            let jet = Jet::zero(d.dim()).with_r(u.values[node]);
            tally.push(Outcome::judge(
                Counterexample::new(&x, &jet, avg - u.values[node] + slack, 0.0, "u(x) above its sphere average")
                    .with_value("average", avg)
                    .with_value("rho", rho),
            ));
        }
    }
    let cfg = CheckConfig::new(0, 0).with_tolerances(tol.clone());
    let details = json!({ "radii": [2.0 * h, 4.0 * h], "slack": slack, "directions": dirs.len() });
    Ok(CheckReport::from_tally("mean_value_check", "u", &cfg, tally, details))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Domain;
    use crate::subequations::{builtin, convexity_subequation, laplacian_subequation};
    use serde_json::json;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn square(h: f64) -> Domain {
        Domain::cube(2, -1.0, 1.0, h).unwrap()
    }

    fn line() -> Domain {
        Domain::cube(1, -1.0, 1.0, 1.0 / 64.0).unwrap()
    }

    #[test]
    fn laplacian_classification_in_one_dimension() {
        let h = laplacian_subequation(1);
        let v = GridFunction::from_fn(&line(), |x| x[0].abs());
        let w = v.neg();
        assert!(is_subharmonic(&h, &v, &tol()).holds());
        assert!(!is_superharmonic(&h, &v, &tol()).holds());
        assert!(is_superharmonic(&h, &w, &tol()).holds());
        let sub = is_subharmonic(&h, &w, &tol());
        assert!(!sub.holds());
        let viol = &sub.violations[0];
        assert!(viol.x[0].abs() < 1e-12 && viol.jet.a.get(0, 0) < 0.0);
    }

    #[test]
    fn quadratic_verdicts() {
        let h = laplacian_subequation(2);
        let q = GridFunction::from_fn(&square(0.125), |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        assert!(is_subharmonic(&h, &q, &tol()).holds());
        assert!(!is_superharmonic(&h, &q, &tol()).holds());
        let affine = GridFunction::from_fn(&square(0.125), |x| 2.0 * x[0] - x[1] + 0.5);
        assert!(is_superharmonic(&h, &affine, &tol()).holds());
        assert!(is_subharmonic(&h, &affine, &tol()).holds());
    }

    #[test]
    fn superharmonic_is_literally_dual_subharmonic() {
        let h = convexity_subequation(2);
        let w = GridFunction::from_fn(&square(0.125), |x| x[0] * x[0] - x[1].abs());
        assert_eq!(is_superharmonic(&h, &w, &tol()), is_subharmonic(&h.dual(), &w.neg(), &tol()));
    }

    #[test]
    fn monge_ampere_admissibility() {
        let d = square(0.125);
        let pair = builtin("monge_ampere", 2, &json!({}), Some(&d)).unwrap();
        let q = GridFunction::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        assert!(admissible_subsolution(&pair, &q, &tol()).holds());
        assert!(admissible_supersolution(&pair, &q, &tol()).holds());
        let v = admissible_subsolution(&pair, &q.neg(), &tol());
        assert!(!v.holds());
        assert_eq!(v.violations[0].rule, "upper jet outside G");
    }

    #[test]
    fn laplace_supersolutions() {
        let d = square(0.125);
        let pair = builtin("laplace", 2, &json!({}), None).unwrap();
        let cone = GridFunction::from_fn(&d, |x| -(x[0] * x[0] + x[1] * x[1]).sqrt());
        assert!(admissible_supersolution(&pair, &cone, &tol()).holds());
        let q = GridFunction::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        assert!(!admissible_supersolution(&pair, &q, &tol()).holds());
    }

    #[test]
    fn det_minus_r_pathology() {
        let d = Domain::cube(2, -1.0, 1.0, 1.0 / 16.0).unwrap();
        let pair = builtin("det_minus_r", 2, &json!({ "constraint": "G2" }), None).unwrap();
        let u = GridFunction::constant(&d, -1.0);
        assert!(admissible_subsolution(&pair, &u, &tol()).holds());
        let r = check_correspondence(&pair, &u, CorrespondenceSide::Super, &tol(), 1);
        assert!(!r.passed());
        assert_eq!(r.details["hypotheses"], "UNVERIFIED-HYPOTHESES");
        let c = &r.counterexamples[0];
        assert_eq!(c.note, "pair verdict fails, set verdict holds");
        assert!(c.values["F"] > 0.0 && c.values["G_margin"] >= 0.0);
    }

    #[test]
    fn correspondence_for_laplace() {
        let d = square(1.0 / 16.0);
        let pair = builtin("laplace", 2, &json!({}), None).unwrap();
        let q = GridFunction::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        for side in [CorrespondenceSide::Sub, CorrespondenceSide::Super] {
            let r = check_correspondence(&pair, &q, side, &tol(), 1);
            assert!(r.passed(), "{side:?}");
            assert_eq!(r.details["hypotheses"], "verified");
        }
    }

    #[test]
    fn min_eigenvalue_kink() {
        let d = square(1.0 / 16.0);
        let pair = builtin("min_eigenvalue", 2, &json!({}), None).unwrap();
        let u = GridFunction::from_fn(&d, |x| x[0].abs());
        let r = check_correspondence(&pair, &u, CorrespondenceSide::Sub, &tol(), 1);
        assert!(r.passed());
        assert_eq!(r.details["set_verdict"], "HOLDS");
    }

    #[test]
    fn subharmonic_addition_examples() {
        let d = square(0.125);
        let h = laplacian_subequation(2);
        let u = GridFunction::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        // -|x|^2/2 + affine is not subharmonic for the dual of H = H
        let concave = GridFunction::from_fn(&d, |x| -0.5 * (x[0] * x[0] + x[1] * x[1]) + x[0] - 0.3);
        assert!(matches!(
            check_subharmonic_addition(&h, &u, &concave, &MonotonicityCone::Convexity { dim: 2 }, &tol()),
            Err(Error::Precondition(_))
        ));
        let v = GridFunction::from_fn(&d, |x| -0.5 * x[0] * x[0] + 0.5 * x[1] * x[1] + x[0] - 0.3);
        let r = check_subharmonic_addition(&h, &u, &v, &MonotonicityCone::Convexity { dim: 2 }, &tol()).unwrap();
        assert!(r.passed());
        let bad = GridFunction::from_fn(&d, |x| -(x[0] * x[0] + x[1] * x[1]));
        assert!(matches!(
            check_subharmonic_addition(&h, &bad, &v, &MonotonicityCone::Convexity { dim: 2 }, &tol()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn mean_value_examples() {
        let d = square(1.0 / 16.0);
        let q = GridFunction::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        assert!(mean_value_check(&q, &tol()).unwrap().passed());
        let harmonic = GridFunction::from_fn(&d, |x| x[0] * x[0] - x[1] * x[1]);
        assert!(mean_value_check(&harmonic, &tol()).unwrap().passed());
        assert!(mean_value_check(&harmonic.neg(), &tol()).unwrap().passed());
        let bad = GridFunction::from_fn(&d, |x| -(x[0] * x[0] + x[1] * x[1]));
        assert!(!mean_value_check(&bad, &tol()).unwrap().passed());
    }

    #[test]
    fn c2_coherence_for_smooth_functions() {
        // classical test J^2 u in F at nodes with margin beyond c*h
        let d = square(1.0 / 16.0);
        let h = laplacian_subequation(2);
        let f = |x: &[f64]| x[0].powi(3) - x[1] * x[1] + 0.5 * x[0] * x[1];
        let u = GridFunction::from_fn(&d, f);
        let verdict = is_subharmonic(&h, &u, &tol());
        for node in 0..u.len() {
            if verdict.nodes[node] == NodeStatus::Boundary {
                continue;
            }
            let x = d.point(node);
            let classical = 6.0 * x[0] - 2.0;
            if classical.abs() > tol().tau(d.h) {
                assert_eq!(verdict.nodes[node] == NodeStatus::Holds, classical > 0.0, "x={x:?}");
            }
        }
    }
}
