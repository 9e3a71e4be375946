use serde_json::json;

use super::report::{run_sampled, CheckConfig, CheckReport, Counterexample, Outcome, Tally};
use crate::cones::{cone_dual, MonotonicityCone};
use crate::error::{Error, Result};
use crate::jets::{Jet, JetSampler, SymMatrix};
use crate::subequations::{induce, EquationBoundary, ProperEllipticPair, Subequation};

const GAMMA_KEEP: usize = 64;
const FLAT_POINTS: usize = 8;

/// Draws a base point and a member jet, or `None` when sampling fails.
fn member_sample(f: &Subequation, rng: &mut JetSampler, scale: f64) -> Option<(Vec<f64>, Jet)> {
    let x = f.sample_point(rng);
    let j = f.sample_member(&x, rng, scale)?;
    Some((x, j))
}

fn extra_tally(cfg: &CheckConfig, mut body: impl FnMut(&[f64], &Jet) -> Outcome) -> Tally {
    let mut t = Tally::default();
    for (x, j) in &cfg.extra_jets {
        t.push(body(x, j));
    }
    t
}

/// Positivity: `(r, p, A + P)` stays in `F_x` for `P >= 0`.
pub fn check_p(f: &Subequation, cfg: &CheckConfig) -> CheckReport {
    let scale = cfg.tol.sample_scale;
    let probe = |x: &[f64], j: &Jet, p: &SymMatrix| -> Option<Counterexample> {
        let moved = j.with_a(j.a.add(p));
        let m = f.raw_margin(x, &moved);
        let c = Counterexample::new(x, j, m, cfg.tol.check_tol(&moved), "J + (0, 0, P) left the fiber")
            .with_witness(&Jet::hessian(p.clone()));
        c.is_violation().then_some(c)
    };
    let body = |x: &[f64], j: &Jet, rng: &mut JetSampler| -> Outcome {
        let n = j.dim();
        let random = rng.psd(n, scale);
        for p in [SymMatrix::identity(n), random] {
            if let Some(c) = probe(x, j, &p) {
                return Outcome::Violation(Box::new(c));
            }
        }
        Outcome::Ok
    };
    let mut tally = run_sampled(cfg.samples, cfg.seed, 1, |rng| match member_sample(f, rng, scale) {
        Some((x, j)) => body(&x, &j, rng),
        None => Outcome::Skipped,
    });
    let mut rng = JetSampler::new(cfg.seed, u64::MAX);
    tally.merge(extra_tally(cfg, |x, j| body(x, j, &mut rng)));
    let details = json!({ "sampled": tally.summary() });
    CheckReport::from_tally("check_P", &f.name, cfg, tally, details)
}

/// Negativity: `(r + s, p, A)` stays in `F_x` for `s <= 0`.
pub fn check_n(f: &Subequation, cfg: &CheckConfig) -> CheckReport {
    let scale = cfg.tol.sample_scale;
    let body = |x: &[f64], j: &Jet, rng: &mut JetSampler| -> Outcome {
        let random = -scale * rng.normal().abs();
        for s in [-1.0, random] {
            let moved = j.with_r(j.r + s);
            let m = f.raw_margin(x, &moved);
            let c = Counterexample::new(x, j, m, cfg.tol.check_tol(&moved), "J + (s, 0, 0) left the fiber")
                .with_value("s", s);
            if c.is_violation() {
                return Outcome::Violation(Box::new(c));
            }
        }
        Outcome::Ok
    };
    let mut tally = run_sampled(cfg.samples, cfg.seed, 2, |rng| match member_sample(f, rng, scale) {
        Some((x, j)) => body(&x, &j, rng),
        None => Outcome::Skipped,
    });
    let mut rng = JetSampler::new(cfg.seed, u64::MAX - 1);
    tally.merge(extra_tally(cfg, |x, j| body(x, j, &mut rng)));
    let details = json!({ "sampled": tally.summary() });
    CheckReport::from_tally("check_N", &f.name, cfg, tally, details)
}

fn small_steps(j: &Jet) -> [f64; 3] {
    let s = 1.0 + j.norm();
    [1e-6 * s, 1e-4 * s, 1e-2 * s]
}

/// `J` is approached by interior jets `J + t J0` for small `t`.
fn approachable(f: &Subequation, x: &[f64], j: &Jet, tol: f64, note: &str) -> Outcome {
    let steps = small_steps(j);
    if steps.iter().any(|t| f.interior(x, &j.shifted(*t, &f.probe))) {
        return Outcome::Ok;
    }
    let last = j.shifted(steps[2], &f.probe);
    let m = f.raw_margin(x, &last);
    // a failing jet sits on the boundary; measure how far the last probe is
    // from the interior
    let c = Counterexample::new(x, j, m.min(0.0) - steps[2], tol, note)
        .with_value("probe_margin", m)
        .with_value("t", steps[2]);
    Outcome::judge(c)
}

/// Topological stability through three surrogates: member jets are limits of
/// interior jets along `J0`; interior verdicts survive small joint
/// perturbations of `(x, J)`; boundary jets are approached by interior jets.
pub fn check_t(f: &Subequation, cfg: &CheckConfig) -> Result<CheckReport> {
    if f.cone.interior_probe().is_none() {
        return Err(Error::Unsupported(format!(
            "cone {} has empty interior, topological checks need a probe in Int M",
            f.cone.label()
        )));
    }
    let scale = cfg.tol.sample_scale;

    // (i) closure of the interior
    let mut closure = run_sampled(cfg.samples, cfg.seed, 3, |rng| match member_sample(f, rng, scale) {
        Some((x, j)) => approachable(f, &x, &j, cfg.tol.check_tol(&j), "not approached by interior jets"),
        None => Outcome::Skipped,
    });
    closure.merge(extra_tally(cfg, |x, j| {
        approachable(f, x, j, cfg.tol.check_tol(j), "not approached by interior jets")
    }));

    // (ii) stability of interior verdicts under joint perturbation
    let stability = run_sampled(cfg.samples, cfg.seed, 4, |rng| {
        let Some((x, j)) = member_sample(f, rng, scale) else {
            return Outcome::Skipped;
        };
        let j = j.shifted(1e-2 * (1.0 + j.norm()), &f.probe);
        if !f.interior(&x, &j) {
            return Outcome::Skipped;
        }
        let mut worst: Option<(Vec<f64>, Jet, f64)> = None;
        let mut rho = 1e-2 * (1.0 + j.norm());
        for _ in 0..7 {
            let mut all = true;
            for _ in 0..4 {
                let dj = rng.jet(f.dim, 1.0);
                let len = dj.euclidean_norm().max(1e-300);
                let jp = j.shifted(rho / len, &dj);
                let y = perturb_point(f, &x, rng, rho);
                if !f.contains(&y, &jp) {
                    all = false;
                    worst = Some((y, jp, rho));
                    break;
                }
            }
            if all {
                return Outcome::Ok;
            }
            rho *= 0.1;
        }
        let (y, jp, rho) = worst.expect("set when no level was stable");
        let m = f.raw_margin(&y, &jp);
        Outcome::judge(
            Counterexample::new(&x, &j, m, cfg.tol.check_tol(&j), "interior verdict unstable under perturbation")
                .with_witness(&jp)
                .with_value("rho", rho),
        )
    });

    // (iii) boundary jets have interior jets nearby along J0
    let boundary = run_sampled(cfg.samples, cfg.seed, 5, |rng| {
        let x = f.sample_point(rng);
        let (Some(a), Some(b)) = (f.sample_member(&x, rng, scale), f.sample_nonmember(&x, rng, scale)) else {
            return Outcome::Skipped;
        };
        match f.boundary_probe(&x, &a, &b) {
            Ok(jb) => approachable(f, &x, &jb, cfg.tol.check_tol(&jb), "boundary jet not approached"),
            Err(_) => Outcome::Skipped,
        }
    });

    let details = json!({
        "closure": closure.summary(),
        "stability": stability.summary(),
        "boundary": boundary.summary(),
        "probe": f.probe,
    });
    let mut tally = closure;
    tally.merge(stability);
    tally.merge(boundary);
    Ok(CheckReport::from_tally("check_T", &f.name, cfg, tally, details))
}

fn perturb_point(f: &Subequation, x: &[f64], rng: &mut JetSampler, rho: f64) -> Vec<f64> {
    let u = rng.unit_vec(x.len());
    let mut y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + rho * b).collect();
    if let Some(b) = &f.base {
        for k in 0..y.len() {
            y[k] = y[k].clamp(b.lo[k], b.hi[k]);
        }
    }
    y
}

/// `F_x + M ⊂ F_x` and the jet-addition form `F_x + F~_x ⊂ M~`.
pub fn check_monotonicity(f: &Subequation, m: &MonotonicityCone, cfg: &CheckConfig) -> Result<CheckReport> {
    if m.dim() != f.dim {
        return Err(Error::DimensionMismatch {
            expected: f.dim,
            found: m.dim(),
        });
    }
    let scale = cfg.tol.sample_scale;
    let direct = run_sampled(cfg.samples, cfg.seed, 6, |rng| {
        let Some((x, j)) = member_sample(f, rng, scale) else {
            return Outcome::Skipped;
        };
        let k = m.sample_member(rng, scale);
        let sum = crate::jets::jet_combine(1.0, &j, 1.0, &k).expect("same dimension");
        let c = Counterexample::new(&x, &j, f.raw_margin(&x, &sum), cfg.tol.check_tol(&sum), "direct: J + K left F_x")
            .with_witness(&k);
        Outcome::judge(c)
    });
    let dual = f.dual();
    let mdual = cone_dual(m);
    let jet_addition = run_sampled(cfg.samples, cfg.seed, 7, |rng| {
        let Some((x, j)) = member_sample(f, rng, scale) else {
            return Outcome::Skipped;
        };
        let Some(k) = dual.sample_member(&x, rng, scale) else {
            return Outcome::Skipped;
        };
        let sum = crate::jets::jet_combine(1.0, &j, 1.0, &k).expect("same dimension");
        let tol = cfg.tol.check_tol(&sum) + mdual.tolerance();
        let c = Counterexample::new(&x, &j, mdual.margin(&sum), tol, "dual: J + K left the dual cone")
            .with_witness(&k);
        Outcome::judge(c)
    });
    let details = json!({
        "cone": m.label(),
        "direct": direct.summary(),
        "dual": jet_addition.summary(),
    });
    let mut tally = direct;
    tally.merge(jet_addition);
    Ok(CheckReport::from_tally("check_monotonicity", &f.name, cfg, tally, details))
}

/// Compatibility `Int F = {J in G : F(x, J) > 0}` of a pair with its
/// induced set, checked from both sides. Boundary jets with `F` within
/// tolerance of zero are collected as samples of `Gamma(x)`.
pub fn check_compatibility(pair: &ProperEllipticPair, cfg: &CheckConfig) -> (CheckReport, EquationBoundary) {
    let scale = cfg.tol.sample_scale;
    let induced = induce(pair).with_tolerances(cfg.tol.clone());
    let g = pair.constraint_or_full();

    // (a) F > 0 on G must be interior
    let judge_positive = |x: &[f64], j: &Jet| -> Outcome {
        if !g.contains(x, j) {
            return Outcome::Skipped;
        }
        let fv = pair.f(x, j);
        if !(fv > cfg.tol.compat_tol(j)) {
            return Outcome::Skipped;
        }
        let tol = cfg.tol.check_tol(j);
        let inner = j.shifted(-4.0 * tol, &induced.probe);
        let m = induced.raw_margin(x, &inner);
        Outcome::judge(
            Counterexample::new(x, j, m, tol, "F > 0 on G but the jet is not interior to the induced set")
                .with_value("F", fv)
                .with_value("G_margin", pair.g_margin(x, j)),
        )
    };
    // flat jets (r, 0, 0) lie on the boundary of every cone built from P,
    // where sampling rarely lands
    let mut positive = Tally::default();
    {
        let n = pair.dim();
        let mut rng = JetSampler::new(cfg.seed, 10 << 32);
        for _ in 0..FLAT_POINTS {
            let x = g.sample_point(&mut rng);
            for r in [-1.0, 1.0] {
                let j = Jet {
                    r,
                    p: vec![0.0; n],
                    a: SymMatrix::zeros(n),
                };
                positive.push(judge_positive(&x, &j));
            }
        }
        for (x, j) in &cfg.extra_jets {
            positive.push(judge_positive(x, j));
        }
    }
    positive.merge(run_sampled(cfg.samples, cfg.seed, 8, |rng| {
        let x = g.sample_point(rng);
        match g.sample_member(&x, rng, scale) {
            Some(j) => judge_positive(&x, &j),
            None => Outcome::Skipped,
        }
    }));

    // (b) boundary jets of the induced set satisfy F = 0
    let boundary_jets: Vec<(Vec<f64>, Jet, f64)> = {
        let per = cfg.samples.div_ceil(4).max(1);
        let mut rng = JetSampler::new(cfg.seed, 9 << 32);
        let mut out = Vec::new();
        for _ in 0..per {
            let x = induced.sample_point(&mut rng);
            let (Some(a), Some(b)) = (
                induced.sample_member(&x, &mut rng, scale),
                induced.sample_nonmember(&x, &mut rng, scale),
            ) else {
                continue;
            };
            if let Ok(jb) = induced.boundary_probe(&x, &a, &b) {
                let fv = pair.f(&x, &jb);
                out.push((x, jb, fv));
            }
        }
        out
    };
    let mut level = Tally::default();
    let mut gamma = EquationBoundary {
        eps: cfg.tol.compat_rel,
        jets: Vec::new(),
    };
    for (x, jb, fv) in &boundary_jets {
        let tol = cfg.tol.compat_tol(jb);
        if fv.abs() <= tol && gamma.jets.len() < GAMMA_KEEP {
            gamma.jets.push((x.clone(), jb.clone()));
        }
        level.push(Outcome::judge(
            Counterexample::new(x, jb, -fv.abs(), tol, "boundary jet of the induced set with F != 0")
                .with_value("F", *fv)
                .with_value("G_margin", pair.g_margin(x, jb)),
        ));
    }
    let details = json!({
        "case": pair.case_tag(),
        "positive_side": positive.summary(),
        "boundary_side": level.summary(),
        "gamma_samples": gamma.jets.len(),
        "gamma_nonempty": !gamma.is_empty(),
    });
    let mut tally = positive;
    tally.merge(level);
    let report = CheckReport::from_tally("check_compatibility", pair.name(), cfg, tally, details);
    (report, gamma)
}

/// `F~~ = F` off the boundary shell, for the closed-form dual and for the
/// set-level oracle dual.
pub fn check_biduality(f: &Subequation, cfg: &CheckConfig) -> CheckReport {
    let closed = f.dual().dual();
    let oracle = f.dual_by_oracle().dual_by_oracle();
    let shell = cfg.tol.shell;
    let body = |x: &[f64], j: &Jet| -> Outcome {
        let m = f.raw_margin(x, j);
        if m.abs() <= shell {
            return Outcome::Skipped;
        }
        let inside = m >= 0.0;
        for (route, d) in [("closed", &closed), ("oracle", &oracle)] {
            if d.contains(x, j) != inside {
                return Outcome::Violation(Box::new(
                    Counterexample::new(x, j, -m.abs(), 0.5 * shell, &format!("{route} bidual disagrees"))
                        .with_value("margin", m),
                ));
            }
        }
        Outcome::Ok
    };
    let scale = cfg.tol.sample_scale;
    let tally = run_sampled(cfg.samples, cfg.seed, 10, |rng| {
        let x = f.sample_point(rng);
        let j = match rng.index(3) {
            0 => f.sample_member(&x, rng, scale),
            1 => f.sample_nonmember(&x, rng, scale),
            _ => Some(rng.jet(f.dim, scale)),
        };
        match j {
            Some(j) => body(&x, &j),
            None => Outcome::Skipped,
        }
    });
    let details = json!({ "shell": shell, "routes": ["closed", "oracle"] });
    CheckReport::from_tally("check_biduality", &f.name, cfg, tally, details)
}

/// Membership of `set` agrees with the sign of `reference` off the shell.
pub fn check_agreement(
    set: &Subequation,
    reference: &(dyn Fn(&[f64], &Jet) -> f64 + Sync),
    label: &str,
    cfg: &CheckConfig,
) -> CheckReport {
    let shell = cfg.tol.shell;
    let scale = cfg.tol.sample_scale;
    let tally = run_sampled(cfg.samples, cfg.seed, 11, |rng| {
        let x = set.sample_point(rng);
        let j = rng.jet(set.dim, scale);
        let m = reference(&x, &j);
        if m.abs() <= shell {
            return Outcome::Skipped;
        }
        if set.contains(&x, &j) != (m >= 0.0) {
            return Outcome::Violation(Box::new(
                Counterexample::new(&x, &j, -m.abs(), 0.5 * shell, "membership disagrees with the reference")
                    .with_value("reference", m)
                    .with_value("set_margin", set.raw_margin(&x, &j)),
            ));
        }
        Outcome::Ok
    });
    let details = json!({ "reference": label, "shell": shell });
    CheckReport::from_tally("check_agreement", &set.name, cfg, tally, details)
}

/// Directionality `g(p + q) >= g(p)` on `D` for the gradient factor of a
/// pair, together with its regularity `g(p + eta*qbar) >= g(p) + omega(eta)`.
pub fn check_directionality(pair: &ProperEllipticPair, etas: &[f64], cfg: &CheckConfig) -> Result<CheckReport> {
    let gf = pair
        .gradient_factor
        .as_ref()
        .ok_or_else(|| Error::Unsupported(format!("{} has no gradient factor", pair.name())))?;
    let dim = pair.dim();
    let cone = MonotonicityCone::Directional(gf.cone.clone());
    let scale = cfg.tol.sample_scale;
    let tally = run_sampled(cfg.samples, cfg.seed, 12, |rng| {
        let p = cone.sample_member(rng, scale).p;
        let q = cone.sample_member(rng, scale).p;
        let pq: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + b).collect();
        let gp = gf.g_at(&p);
        let mut jet = Jet::zero(dim);
        jet.p = p.clone();
        let tol = cfg.tol.check_rel * (1.0 + gp.abs());
        let c = Counterexample::new(&[], &jet, gf.g_at(&pq) - gp, tol, "g(p + q) < g(p)")
            .with_witness(&Jet { p: q.clone(), ..Jet::zero(dim) });
        if c.is_violation() {
            return Outcome::Violation(Box::new(c));
        }
        for &eta in etas {
            let shifted: Vec<f64> = p.iter().zip(&gf.qbar).map(|(a, b)| a + eta * b).collect();
            let v = gf.g_at(&shifted) - gp - gf.omega_at(eta);
            let c = Counterexample::new(&[], &jet, v, tol, "g(p + eta qbar) < g(p) + omega(eta)")
                .with_value("eta", eta);
            if c.is_violation() {
                return Outcome::Violation(Box::new(c));
            }
        }
        Outcome::Ok
    });
    let details = json!({ "g": gf.g.source(), "qbar": gf.qbar, "omega": gf.omega.source(), "etas": etas });
    Ok(CheckReport::from_tally("check_directionality", pair.name(), cfg, tally, details))
}
