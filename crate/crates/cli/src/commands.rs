//! One function per subcommand. Each returns an [`Outcome`]; writing files
//! and choosing the exit code is left to `main`.

use jetlab::dirichlet::{check_comparison, check_zmp, solve_convex_envelope, solve_laplace, solve_monge_ampere, SolveResult};
use jetlab::jets::Domain;
use jetlab::problem::Problem;
use jetlab::subequations::{induce, ProperEllipticPair};
use jetlab::verifier::{
    check_biduality, check_compatibility, check_monotonicity, check_n, check_p, check_t, fiber_modulus, CheckConfig,
    CheckReport, Delta, FiberSubject,
};
use jetlab::viscosity::{check_correspondence, CorrespondenceSide, GridFunction};
use jetlab::{Error, Result, Tolerances};
use serde_json::{json, Value};

pub const DEFAULT_ETAS: [f64; 3] = [0.05, 0.1, 0.2];

pub struct Context {
    pub problem: Problem,
    pub domain: Domain,
    pub pair: ProperEllipticPair,
    pub cfg: CheckConfig,
}

impl Context {
    pub fn tol(&self) -> &Tolerances {
        &self.cfg.tol
    }

    fn require_u(&self, what: &str) -> Result<GridFunction> {
        self.problem
            .u(&self.domain)?
            .ok_or_else(|| Error::InvalidInput(format!("{what} needs a `u` field in the problem file")))
    }
}

pub struct Outcome {
    pub passed: bool,
    pub result: Value,
    pub summary: Vec<String>,
    /// Tabular view written for `--format csv`.
    pub table: Table,
    /// A solved grid, written next to the report.
    pub solution: Option<SolveResult>,
}

#[derive(Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn verdict(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

fn check_line(r: &CheckReport) -> String {
    let mut s = format!(
        "{:<16} {:<28} {}  tested {} skipped {} violations {}",
        r.check,
        r.subject,
        verdict(r.passed()),
        r.tested,
        r.skipped,
        r.violations
    );
    if let Some(c) = r.counterexamples.first() {
        s.push_str(&format!(
            "\n    witness x = {:?}, r = {}, |p| = {:.3e}, |A| = {:.3e}, margin = {:.3e} ({})",
            c.x,
            c.jet.r,
            c.jet.p.iter().map(|v| v * v).sum::<f64>().sqrt(),
            c.jet.a.frobenius(),
            c.margin,
            c.note
        ));
    }
    s
}

fn check_table(reports: &[&CheckReport]) -> Table {
    Table {
        header: ["check", "subject", "verdict", "tested", "skipped", "violations"]
            .map(String::from)
            .to_vec(),
        rows: reports
            .iter()
            .map(|r| {
                vec![
                    r.check.clone(),
                    r.subject.clone(),
                    verdict(r.passed()).into(),
                    r.tested.to_string(),
                    r.skipped.to_string(),
                    r.violations.to_string(),
                ]
            })
            .collect(),
    }
}

fn checks_outcome(reports: Vec<CheckReport>, extra: Value) -> Outcome {
    let passed = reports.iter().all(CheckReport::passed);
    let refs: Vec<&CheckReport> = reports.iter().collect();
    let table = check_table(&refs);
    let summary = reports.iter().map(check_line).collect();
    let mut result = json!({ "checks": reports });
    if let (Value::Object(m), Value::Object(e)) = (&mut result, extra) {
        m.extend(e);
    }
    Outcome {
        passed,
        result,
        summary,
        table,
        solution: None,
    }
}

pub fn verify_axioms(ctx: &Context) -> Result<Outcome> {
    let f = induce(&ctx.pair).with_tolerances(ctx.tol().clone());
    let reports = vec![
        check_p(&f, &ctx.cfg),
        check_n(&f, &ctx.cfg),
        check_t(&f, &ctx.cfg)?,
        check_monotonicity(&f, &ctx.pair.cone, &ctx.cfg)?,
        check_compatibility(&ctx.pair, &ctx.cfg).0,
        check_biduality(&f, &ctx.cfg),
    ];
    Ok(checks_outcome(reports, json!({})))
}

pub fn dual_check(ctx: &Context) -> Result<Outcome> {
    let f = induce(&ctx.pair).with_tolerances(ctx.tol().clone());
    let mut reports = vec![check_biduality(&f, &ctx.cfg)];
    if let Some(g) = &ctx.pair.constraint {
        reports.push(check_biduality(&g.clone().with_tolerances(ctx.tol().clone()), &ctx.cfg));
    }
    Ok(checks_outcome(reports, json!({})))
}

pub fn check_compat(ctx: &Context) -> Result<Outcome> {
    let (report, boundary) = check_compatibility(&ctx.pair, &ctx.cfg);
    let n = boundary.jets.len();
    let mut out = checks_outcome(vec![report], json!({ "equation_boundary": boundary }));
    out.summary.push(format!("equation boundary: {n} sampled jets"));
    Ok(out)
}

pub fn modulus(ctx: &Context) -> Result<Outcome> {
    let etas = ctx.problem.spec.etas.clone().unwrap_or_else(|| DEFAULT_ETAS.to_vec());
    let report = fiber_modulus(
        FiberSubject::Pair(&ctx.pair),
        &ctx.domain,
        &etas,
        ctx.cfg.samples,
        ctx.cfg.seed,
        ctx.tol(),
    )?;
    let passed = report.is_regular();
    let show = |d: Delta| match d {
        Delta::Finite(v) => format!("{v:.6e}"),
        Delta::Unbounded => "inf".into(),
    };
    let mut summary: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("eta {:<8} delta {:<14} failures {}", r.eta, show(r.delta), r.failures.len()))
        .collect();
    if let Some(dir) = &report.directional {
        for r in dir {
            summary.push(format!(
                "eta {:<8} omega {:.6e} min excess {:.3e} {}",
                r.eta,
                r.omega,
                r.min_excess,
                verdict(r.holds)
            ));
        }
    }
    summary.push(format!("modulus {}", if passed { "positive and nondecreasing" } else { "irregular" }));
    let table = Table {
        header: ["eta", "delta", "failures"].map(String::from).to_vec(),
        rows: report
            .rows
            .iter()
            .map(|r| vec![r.eta.to_string(), show(r.delta), r.failures.len().to_string()])
            .collect(),
    };
    Ok(Outcome {
        passed,
        result: serde_json::to_value(&report)?,
        summary,
        table,
        solution: None,
    })
}

pub fn correspondence(ctx: &Context) -> Result<Outcome> {
    let u = ctx.require_u("check-correspondence")?;
    let reports: Vec<CheckReport> = [CorrespondenceSide::Sub, CorrespondenceSide::Super]
        .into_iter()
        .map(|side| check_correspondence(&ctx.pair, &u, side, ctx.tol(), ctx.cfg.seed))
        .collect();
    let mut out = checks_outcome(reports, json!({}));
    for (r, side) in out.result["checks"].as_array().into_iter().flatten().zip(["sub", "super"]) {
        let d = &r["details"];
        out.summary.push(format!(
            "{side}: set {} / pair {} ({})",
            d["set_verdict"].as_str().unwrap_or("?"),
            d["pair_verdict"].as_str().unwrap_or("?"),
            d["hypotheses"].as_str().unwrap_or("?")
        ));
    }
    Ok(out)
}

fn solve_with(ctx: &Context) -> Result<SolveResult> {
    let g = match ctx.problem.boundary(&ctx.domain)? {
        Some(g) => g,
        None => match ctx.problem.u(&ctx.domain)? {
            Some(u) => jetlab::dirichlet::BoundaryData::from_grid(&u)?,
            None => {
                return Err(Error::InvalidInput(
                    "solve needs `boundary` (or `u`) in the problem file".into(),
                ))
            }
        },
    };
    match ctx.problem.spec.operator.as_str() {
        "laplace" => solve_laplace(&g),
        "min_eigenvalue" => solve_convex_envelope(&g),
        "monge_ampere" | "perturbed_monge_ampere" => {
            let f = ctx.problem.f_field()?;
            let m = ctx.problem.m_field()?;
            solve_monge_ampere(&g, &f, m.as_ref())
        }
        other => Err(Error::Unsupported(format!("no Dirichlet solver for `{other}`"))),
    }
}

pub fn solve(ctx: &Context) -> Result<Outcome> {
    let r = solve_with(ctx)?;
    let passed = r.residual <= r.stop_tolerance;
    let mut result = json!({ "metadata": r.metadata() });
    let mut summary = vec![format!(
        "{}: {} nodes, {} iterations, residual {:.3e} (stop {:.3e})",
        r.scheme,
        r.solution.len(),
        r.iterations,
        r.residual,
        r.stop_tolerance
    )];
    if let Some(exact) = ctx.problem.w(&ctx.domain)? {
        let err = r.solution.max_abs_diff(&exact)?;
        result["max_error_vs_w"] = json!(err);
        summary.push(format!("max |u - w| = {err:.6e}"));
    }
    Ok(Outcome {
        passed,
        result,
        summary,
        table: Table::default(),
        solution: Some(r),
    })
}

pub fn compare(ctx: &Context) -> Result<Outcome> {
    let u = ctx.require_u("compare")?;
    let (w, source) = match ctx.problem.w(&ctx.domain)? {
        Some(w) => (w, "problem"),
        None => (solve_with(ctx)?.solution, "solver"),
    };
    let f = induce(&ctx.pair).with_tolerances(ctx.tol().clone());
    let report = check_comparison(&f, &u, &w, ctx.tol())?;
    let mut out = checks_outcome(vec![report], json!({ "w_source": source }));
    out.summary.push(format!("w from {source}"));
    Ok(out)
}

pub fn zmp(ctx: &Context) -> Result<Outcome> {
    let z = ctx.require_u("zmp")?;
    let m = ctx.problem.cone(&ctx.pair)?;
    let report = check_zmp(&m, &z, ctx.tol())?;
    Ok(checks_outcome(vec![report], json!({ "cone": m.label() })))
}
