//! Monotone finite-difference Dirichlet solvers for the model equations,
//! and the comparison and zero maximum principle harnesses built on the
//! viscosity verdicts.

mod schemes;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cones::{strict_approximator, MonotonicityCone};
use crate::error::{Error, Result};
use crate::expr::{Env, Expression};
use crate::jets::{Domain, Jet};
use crate::subequations::{MatrixField, ScalarField, Subequation};
use crate::tolerances::Tolerances;
use crate::verifier::{CheckConfig, CheckReport, Counterexample, Outcome, Tally};
use crate::viscosity::{is_subharmonic, is_superharmonic, GridFunction};

pub use schemes::{lattice_directions, orthogonal_pairs};

const LAPLACE_STOP: f64 = 1e-10;
const ENVELOPE_STOP: f64 = 1e-9;
const ITERATION_CAP: usize = 1_000_000;
const DIVERGENCE_WINDOW: usize = 1000;

/// Dirichlet data; only boundary nodes are read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub values: GridFunction,
    pub source: Option<String>,
}

impl BoundaryData {
    pub fn from_fn(domain: &Domain, g: impl Fn(&[f64]) -> f64) -> Self {
        Self {
            values: GridFunction::from_fn(domain, |x| if domain.contains(x) { g(x) } else { 0.0 }),
            source: None,
        }
    }

    pub fn from_expression(domain: &Domain, e: &Expression) -> Result<Self> {
        if e.uses(|v| !matches!(v, crate::expr::Var::X(_))) {
            return Err(Error::InvalidInput(format!("boundary data {:?} may only use x1..xn", e.source())));
        }
        let mut values = Vec::with_capacity(domain.node_count());
        for i in 0..domain.node_count() {
            if domain.is_boundary(i) {
                values.push(e.eval(&Env::at_point(&domain.point(i)))?);
            } else {
                values.push(0.0);
            }
        }
        Self::from_grid(&GridFunction::new(domain.clone(), values)?).map(|mut b| {
            b.source = Some(e.source().to_string());
            b
        })
    }

    /// Boundary values of `u`; non-finite boundary values are rejected.
    pub fn from_grid(u: &GridFunction) -> Result<Self> {
        let d = &u.domain;
        let mut values = u.values.clone();
        for (i, v) in values.iter_mut().enumerate() {
            if d.is_boundary(i) {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite boundary value at node {i}")));
                }
            } else {
                *v = 0.0;
            }
        }
        Ok(Self {
            values: GridFunction::new(d.clone(), values)?,
            source: None,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.values.domain
    }

    fn boundary_values(&self) -> impl Iterator<Item = f64> + '_ {
        let d = self.domain();
        (0..d.node_count())
            .filter(|i| d.is_boundary(*i))
            .map(|i| self.values.values[i])
    }

    fn max(&self) -> f64 {
        self.boundary_values().fold(f64::NEG_INFINITY, f64::max)
    }

    fn mean(&self) -> f64 {
        let (s, n) = self.boundary_values().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        s / n.max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub solution: GridFunction,
    pub iterations: usize,
    pub residual: f64,
    pub stop_tolerance: f64,
    pub scheme: String,
}

impl SolveResult {
    pub fn metadata(&self) -> serde_json::Value {
        json!({
            "schema_version": crate::verifier::SCHEMA_VERSION,
            "scheme": self.scheme,
            "iterations": self.iterations,
            "residual": self.residual,
            "stop_tolerance": self.stop_tolerance,
            "domain": self.solution.domain,
        })
    }

    /// Writes the grid as CSV and the metadata next to it with a `.json`
    /// extension; returns the sidecar path.
    pub fn save(&self, csv: &Path) -> Result<PathBuf> {
        self.solution.save(csv)?;
        let side = csv.with_extension("json");
        std::fs::write(&side, serde_json::to_string_pretty(&self.metadata())? + "\n")?;
        Ok(side)
    }
}

fn check_dims(d: &Domain, allowed: &[usize], what: &str) -> Result<()> {
    if allowed.contains(&d.dim()) {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("{what} is implemented for dimensions {allowed:?}, got {}", d.dim())))
    }
}

fn initial_state(g: &BoundaryData, interior: f64) -> Vec<f64> {
    let d = g.domain();
    (0..d.node_count())
        .map(|i| if d.is_boundary(i) { g.values.values[i] } else { interior })
        .collect()
}

/// Five/seven-point Laplacian, Gauss-Seidel in lexicographic order, until
/// the largest update falls to `1e-10`.
pub fn solve_laplace(g: &BoundaryData) -> Result<SolveResult> {
    let d = g.domain().clone();
    check_dims(&d, &[1, 2, 3], "solve_laplace")?;
    let nb = schemes::axis_neighbours(&d);
    let mut u = initial_state(g, g.mean());
    let mut residual = f64::INFINITY;
    let mut it = 0;
    while residual > LAPLACE_STOP {
        if it == ITERATION_CAP {
            return Err(Error::IterationCap {
                cap: ITERATION_CAP,
                residual,
            });
        }
        residual = 0.0;
        for (i, n) in nb.iter().enumerate() {
            if let Some(n) = n {
                let new = schemes::laplace_update(&u, n);
                residual = f64::max(residual, (new - u[i]).abs());
                u[i] = new;
            }
        }
        it += 1;
    }
    Ok(SolveResult {
        solution: GridFunction::new(d, u)?,
        iterations: it,
        residual,
        stop_tolerance: LAPLACE_STOP,
        scheme: "laplace-5/7-point-gauss-seidel".into(),
    })
}

/// Convex envelope of the boundary data: starting from the largest boundary
/// value, `u(x) <- min(u(x), min_e (u(x+he) + u(x-he))/2)` over lattice
/// directions of radius 3 that fit, in place, until no value moves by more
/// than `1e-9`.
pub fn solve_convex_envelope(g: &BoundaryData) -> Result<SolveResult> {
    let d = g.domain().clone();
    check_dims(&d, &[1, 2], "solve_convex_envelope")?;
    let dirs = schemes::direction_neighbours(&d, 3);
    let mut u = initial_state(g, g.max());
    let mut residual = f64::INFINITY;
    let mut it = 0;
    while residual > ENVELOPE_STOP {
        if it == ITERATION_CAP {
            return Err(Error::IterationCap {
                cap: ITERATION_CAP,
                residual,
            });
        }
        residual = 0.0;
        for (i, pairs) in dirs.iter().enumerate() {
            if d.is_boundary(i) {
                continue;
            }
            let new = schemes::envelope_update(&u, i, pairs);
            residual = f64::max(residual, u[i] - new);
            u[i] = new;
        }
        it += 1;
    }
    Ok(SolveResult {
        solution: GridFunction::new(d, u)?,
        iterations: it,
        residual,
        stop_tolerance: ENVELOPE_STOP,
        scheme: "convex-envelope-wide-stencil-r3".into(),
    })
}

/// Monge-Ampere `det(D^2 u + M(x)) = f(x)` in two dimensions.
///
/// Over the orthogonal lattice pairs `(e, e')` of radius 3 that fit at a
/// node, with `a = D_ee u + <M e, e>`, `b` likewise for `e'`:
/// `S(u) = min over pairs of a+ b+ + a- + b- - f`. Each term is
/// nondecreasing in the neighbour values; negative curvatures are clamped
/// out of the product and enter linearly, which keeps the iterate in the
/// admissible cone. The iteration `u <- u + dt S(u)` (Jacobi, `dt` the
/// reciprocal of the largest diagonal sensitivity, so `dt <= h^2/4`) starts
/// from the harmonic extension and stops once `max |S(u)| <= 1e-4 h^2`.
pub fn solve_monge_ampere(g: &BoundaryData, f: &ScalarField, m: Option<&MatrixField>) -> Result<SolveResult> {
    let d = g.domain().clone();
    check_dims(&d, &[2], "solve_monge_ampere")?;
    f.validate("f", 2, Some(&d), true)?;
    if let Some(m) = m {
        m.validate("M", Some(&d))?;
    }
    let stencil = schemes::ma_stencil(&d, 3, f, m);
    let mut u = solve_laplace(g)?.solution.values;
    let stop = 1e-4 * d.h * d.h;
    let mut s = vec![0.0; u.len()];
    let mut residual: f64;
    let mut best = f64::INFINITY;
    let mut best_at = 0;
    let mut it = 0;
    loop {
        let mut dmax: f64 = 0.0;
        residual = 0.0;
        for (i, st) in stencil.iter().enumerate() {
            if let Some(st) = st {
                let (val, diag) = schemes::ma_operator(&u, i, st);
                s[i] = val;
                dmax = dmax.max(diag);
                residual = residual.max(val.abs());
            }
        }
        if !residual.is_finite() {
            return Err(Error::NotAdmissibleData("Monge-Ampere residual is not finite".into()));
        }
        if residual <= stop {
            break;
        }
        if residual < best {
            best = residual;
            best_at = it;
        } else if it - best_at > DIVERGENCE_WINDOW && residual > 10.0 * best {
            return Err(Error::NotAdmissibleData(format!(
                "Monge-Ampere residual grew from {best:.3e} to {residual:.3e}"
            )));
        }
        if it == ITERATION_CAP {
            return Err(Error::IterationCap {
                cap: ITERATION_CAP,
                residual,
            });
        }
        let dt = 1.0 / dmax.max(4.0 / (d.h * d.h));
        for (i, st) in stencil.iter().enumerate() {
            if st.is_some() {
                u[i] += dt * s[i];
            }
        }
        it += 1;
    }
    Ok(SolveResult {
        solution: GridFunction::new(d, u)?,
        iterations: it,
        residual,
        stop_tolerance: stop,
        scheme: "monge-ampere-wide-stencil-r3-jacobi".into(),
    })
}

fn report_from_nodes(check: &str, subject: &str, tol: &Tolerances, tally: Tally, details: serde_json::Value) -> CheckReport {
    let cfg = CheckConfig::new(0, 0).with_tolerances(tol.clone());
    CheckReport::from_tally(check, subject, &cfg, tally, details)
}

/// Comparison `u <= w` on the boundary implies `u <= w` inside, for `u`
/// `F`-subharmonic and `w` `F`-superharmonic, up to `tau(h)`.
pub fn check_comparison(f: &Subequation, u: &GridFunction, w: &GridFunction, tol: &Tolerances) -> Result<CheckReport> {
    if u.domain != w.domain {
        return Err(Error::InvalidInput("u and w live on different grids".into()));
    }
    let d = &u.domain;
    let tau = tol.tau(d.h);
    if !is_subharmonic(f, u, tol).holds() {
        return Err(Error::Precondition("u is not F-subharmonic".into()));
    }
    if !is_superharmonic(f, w, tol).holds() {
        return Err(Error::Precondition("w is not F-superharmonic".into()));
    }
    if let Some(i) = (0..d.node_count()).find(|&i| d.is_boundary(i) && u.values[i] > w.values[i] + tau) {
        return Err(Error::Precondition(format!("u > w + tau at boundary node {i}")));
    }
    let mut worst: Option<(usize, f64)> = None;
    let mut tally = Tally::default();
    for i in 0..d.node_count() {
        if d.is_boundary(i) || u.values[i] == f64::NEG_INFINITY || w.values[i] == f64::INFINITY {
            tally.push(Outcome::Skipped);
            continue;
        }
        let gap = u.values[i] - w.values[i];
        if gap > tau && worst.is_none_or(|(_, g)| gap > g) {
            worst = Some((i, gap));
        }
        tally.push(if gap > tau { Outcome::Skipped } else { Outcome::Ok });
    }
    if let Some((i, gap)) = worst {
        let x = d.point(i);
        let jet = Jet::zero(d.dim()).with_r(u.values[i]);
        // the excess over tau is the violation; reported as a negative margin
        tally.push(Outcome::Violation(Box::new(
            Counterexample::new(&x, &jet, tau - gap, 0.0, "u > w + tau at an interior node")
                .with_value("u", u.values[i])
                .with_value("w", w.values[i]),
        )));
    }
    let details = json!({ "tau": tau, "h": d.h, "max_gap": worst.map(|(_, g)| g) });
    Ok(report_from_nodes("check_comparison", &f.name, tol, tally, details))
}

/// Zero maximum principle for `M~`-subharmonics: `z <= tau` on the boundary
/// gives `z <= tau` inside. Requires a strict approximator for `M` on the
/// grid box.
pub fn check_zmp(m: &MonotonicityCone, z: &GridFunction, tol: &Tolerances) -> Result<CheckReport> {
    let d = &z.domain;
    let psi = strict_approximator(m, d).ok_or_else(|| {
        Error::Unsupported(format!("no strictly {}-subharmonic quadratic on the domain", m.label()))
    })?;
    let tau = tol.tau(d.h);
    let dual = Subequation::from_cone(m).dual().with_tolerances(tol.clone());
    if !is_subharmonic(&dual, z, tol).holds() {
        return Err(Error::Precondition("z is not subharmonic for the dual cone".into()));
    }
    if let Some(i) = (0..d.node_count()).find(|&i| d.is_boundary(i) && z.values[i] > tau) {
        return Err(Error::Precondition(format!("z > tau at boundary node {i}")));
    }
    let mut tally = Tally::default();
    for i in 0..d.node_count() {
        if d.is_boundary(i) {
            tally.push(Outcome::Skipped);
            continue;
        }
        let x = d.point(i);
        let jet = Jet::zero(d.dim()).with_r(z.values[i]);
        tally.push(Outcome::judge(Counterexample::new(
            &x,
            &jet,
            tau - z.values[i],
            0.0,
            "z > tau at an interior node",
        )));
    }
    let details = json!({ "cone": m.label(), "tau": tau, "approximator": psi });
    Ok(report_from_nodes("check_zmp", &dual.name, tol, tally, details))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::subequations::{builtin, induce, laplacian_subequation};

    fn square(lo: f64, hi: f64, h: f64) -> Domain {
        Domain::cube(2, lo, hi, h).unwrap()
    }

    fn sup_err(u: &GridFunction, exact: impl Fn(&[f64]) -> f64) -> f64 {
        (0..u.len())
            .map(|i| (u.values[i] - exact(&u.domain.point(i))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn laplace_exact_cases() {
        let d = square(-1.0, 1.0, 0.125);
        let one = solve_laplace(&BoundaryData::from_fn(&d, |_| 1.0)).unwrap();
        assert!(sup_err(&one.solution, |_| 1.0) < 1e-9);
        assert!(one.residual <= LAPLACE_STOP);
        let aff = |x: &[f64]| 2.0 * x[0] - 3.0 * x[1] + 0.5;
        let r = solve_laplace(&BoundaryData::from_fn(&d, aff)).unwrap();
        assert!(sup_err(&r.solution, aff) < 1e-8);
        let e = parse_expression("x1^2 - x2^2").unwrap();
        let r = solve_laplace(&BoundaryData::from_expression(&d, &e).unwrap()).unwrap();
        assert!(sup_err(&r.solution, |x| x[0] * x[0] - x[1] * x[1]) <= d.h * d.h);
    }

    #[test]
    fn laplace_second_order() {
        let exact = |x: &[f64]| x[0].exp() * x[1].sin();
        let errs: Vec<f64> = [0.125, 0.0625, 0.03125]
            .iter()
            .map(|&h| {
                let d = square(0.0, 1.0, h);
                sup_err(&solve_laplace(&BoundaryData::from_fn(&d, exact)).unwrap().solution, exact)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.25, "{errs:?}");
        }
    }

    #[test]
    fn laplace_discrete_comparison() {
        let d = square(-1.0, 1.0, 0.125);
        let lo = solve_laplace(&BoundaryData::from_fn(&d, |x| x[0].sin())).unwrap().solution;
        let hi = solve_laplace(&BoundaryData::from_fn(&d, |x| x[0].sin() + 0.1 * x[1] * x[1])).unwrap().solution;
        assert!(lo.values.iter().zip(&hi.values).all(|(a, b)| a <= b));
    }

    #[test]
    fn envelope_cases() {
        let d = square(-1.0, 1.0, 0.0625);
        // degenerate convex data is its own envelope; a strictly convex
        // function is not (the envelope solves lambda_min = 0)
        let q = |x: &[f64]| (x[0] - 0.5 * x[1]).powi(2);
        let r = solve_convex_envelope(&BoundaryData::from_fn(&d, q)).unwrap();
        assert!(sup_err(&r.solution, q) <= 4.0 * d.h, "{}", sup_err(&r.solution, q));
        let strict = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let r = solve_convex_envelope(&BoundaryData::from_fn(&d, strict)).unwrap();
        let centre = d.linear_index(&[16, 16]);
        assert!((r.solution.values[centre] - 1.0).abs() < 1e-6);

        let saddle = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
        let env = solve_convex_envelope(&BoundaryData::from_fn(&d, saddle)).unwrap().solution;
        let harm = solve_laplace(&BoundaryData::from_fn(&d, saddle)).unwrap().solution;
        assert!(env.values.iter().zip(&harm.values).all(|(a, b)| *a <= b + 1e-8));
        let p = crate::subequations::convexity_subequation(2);
        assert!(is_subharmonic(&p, &env, &Tolerances::default()).holds());

        let line = Domain::cube(1, -1.0, 1.0, 1.0 / 64.0).unwrap();
        let chord = solve_convex_envelope(&BoundaryData::from_fn(&line, |x| x[0].abs())).unwrap();
        assert!(sup_err(&chord.solution, |_| 1.0) < 1e-5);
    }

    #[test]
    fn envelope_is_fixed_point() {
        let d = square(-1.0, 1.0, 0.125);
        let r = solve_convex_envelope(&BoundaryData::from_fn(&d, |x| x[0] * x[1] + x[0].abs())).unwrap();
        let dirs = schemes::direction_neighbours(&d, 3);
        for (i, pairs) in dirs.iter().enumerate() {
            if !d.is_boundary(i) {
                let new = schemes::envelope_update(&r.solution.values, i, pairs);
                assert!((new - r.solution.values[i]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn monge_ampere_quadratic() {
        let q = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let mut errs = Vec::new();
        for h in [0.125, 0.0625] {
            let d = square(0.0, 1.0, h);
            let r = solve_monge_ampere(&BoundaryData::from_fn(&d, q), &ScalarField::Constant(1.0), None).unwrap();
            assert!(r.residual <= r.stop_tolerance);
            errs.push(sup_err(&r.solution, q));
        }
        assert!(errs[1] < errs[0] && errs[1] < 5e-3, "{errs:?}");
    }

    #[test]
    fn monge_ampere_with_identity_perturbation() {
        // D^2 u + I = I has the affine solutions
        let d = square(0.0, 1.0, 0.125);
        let aff = |x: &[f64]| x[0] - 0.5 * x[1];
        let m = MatrixField::constant(&crate::jets::SymMatrix::identity(2));
        let r = solve_monge_ampere(&BoundaryData::from_fn(&d, aff), &ScalarField::Constant(1.0), Some(&m)).unwrap();
        assert!(sup_err(&r.solution, aff) < 1e-6);
    }

    #[test]
    fn monge_ampere_rejects_negative_f() {
        let d = square(0.0, 1.0, 0.25);
        let g = BoundaryData::from_fn(&d, |_| 0.0);
        assert!(matches!(
            solve_monge_ampere(&g, &ScalarField::Constant(-1.0), None),
            Err(Error::InvalidCoefficient(_))
        ));
    }

    #[test]
    fn degenerate_monge_ampere_is_admissible_both_ways() {
        let d = square(-1.0, 1.0, 0.125);
        let g = BoundaryData::from_fn(&d, |x| (x[0] - x[1]).powi(2) + x[0]);
        let r = solve_monge_ampere(&g, &ScalarField::Constant(0.0), None).unwrap();
        let pair = builtin("monge_ampere", 2, &serde_json::json!({ "f": 0.0 }), Some(&d)).unwrap();
        let tol = Tolerances::default();
        assert!(crate::viscosity::admissible_subsolution(&pair, &r.solution, &tol).holds());
        assert!(crate::viscosity::admissible_supersolution(&pair, &r.solution, &tol).holds());
    }

    #[test]
    fn comparison_examples() {
        let d = square(-1.0, 1.0, 0.125);
        let h = laplacian_subequation(2);
        let tol = Tolerances::default();
        let harm = solve_laplace(&BoundaryData::from_fn(&d, |x| x[0] * x[1] + x[0])).unwrap().solution;
        assert!(check_comparison(&h, &harm, &harm, &tol).unwrap().passed());
        let sub = GridFunction::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]) - 1.0);
        let w = solve_laplace(&BoundaryData::from_grid(&sub).unwrap()).unwrap().solution;
        assert!(check_comparison(&h, &sub, &w, &tol).unwrap().passed());
        assert!(matches!(check_comparison(&h, &w, &sub, &tol), Err(Error::Precondition(_))));
    }

    #[test]
    fn monge_ampere_comparison() {
        let d = square(0.0, 1.0, 0.0625);
        let tol = Tolerances::default();
        let g = BoundaryData::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let u = solve_monge_ampere(&g, &ScalarField::Constant(1.1), None).unwrap().solution;
        let w = solve_monge_ampere(&g, &ScalarField::Constant(1.0), None).unwrap().solution;
        let pair = builtin("monge_ampere", 2, &serde_json::json!({ "f": 1.0 }), Some(&d)).unwrap();
        let r = check_comparison(&induce(&pair), &u, &w, &tol).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn zmp_examples() {
        let d = square(-1.0, 1.0, 0.125);
        let tol = Tolerances::default();
        let np = MonotonicityCone::Proper { dim: 2 };
        assert!(check_zmp(&np, &GridFunction::constant(&d, -0.01), &tol).unwrap().passed());
        let p = MonotonicityCone::Convexity { dim: 2 };
        let saddle = GridFunction::from_fn(&d, |x| x[0] * x[0] - x[1] * x[1] - 1.0);
        assert!(check_zmp(&p, &saddle, &tol).unwrap().passed());
        let mut bump = GridFunction::constant(&d, 0.0);
        let c = d.linear_index(&[8, 8]);
        bump.values[c] = 1.0;
        assert!(matches!(check_zmp(&p, &bump, &tol), Err(Error::Precondition(_))));
        let m0 = MonotonicityCone::Minimal { dim: 2 };
        assert!(matches!(check_zmp(&m0, &saddle, &tol), Err(Error::Unsupported(_))));
    }

    #[test]
    fn solve_result_sidecar() {
        let d = square(0.0, 1.0, 0.25);
        let r = solve_laplace(&BoundaryData::from_fn(&d, |x| x[0])).unwrap();
        let dir = std::env::temp_dir().join(format!("jetlab-sidecar-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let side = r.save(&dir.join("u.csv")).unwrap();
        let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(side).unwrap()).unwrap();
        assert_eq!(meta["scheme"], r.scheme);
        assert_eq!(GridFunction::load(&dir.join("u.csv")).unwrap(), r.solution);
        std::fs::remove_dir_all(dir).ok();
    }
}
