//! The signed distance operator `d(x, J) = +/- dist(J, boundary of F_x)`,
//! in Euclidean jet coordinates.

use std::sync::Arc;

use super::{OperatorSpec, Reduction, Subequation};
use crate::error::{Error, Result};
use crate::jets::{Jet, SymMatrix};

/// Orthonormal coordinates `(r, p, A_ii, sqrt2 * A_ij)`.
fn to_coords(j: &Jet) -> Vec<f64> {
    let n = j.dim();
    let mut v = Vec::with_capacity(1 + n + n * (n + 1) / 2);
    v.push(j.r);
    v.extend_from_slice(&j.p);
    for i in 0..n {
        for k in i..n {
            let s = if i == k { 1.0 } else { std::f64::consts::SQRT_2 };
            v.push(s * j.a.get(i, k));
        }
    }
    v
}

fn from_coords(n: usize, v: &[f64]) -> Jet {
    let mut a = SymMatrix::zeros(n);
    let mut idx = 1 + n;
    for i in 0..n {
        for k in i..n {
            let s = if i == k { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
            a.set(i, k, s * v[idx]);
            idx += 1;
        }
    }
    Jet {
        r: v[0],
        p: v[1..=n].to_vec(),
        a,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

enum Fiber {
    Proper,
    Full,
    Empty,
}

fn fiber_state(f: &Subequation, x: &[f64]) -> Fiber {
    let far = 1e6;
    let zero = Jet::zero(f.dim);
    let up = f.contains(x, &zero.shifted(far, &f.probe));
    let down = f.contains(x, &zero.shifted(-far, &f.probe));
    match (up, down) {
        (true, true) => Fiber::Full,
        (false, false) => Fiber::Empty,
        _ => Fiber::Proper,
    }
}

/// Signed Euclidean distance from `J` to the boundary of `F_x`: a ray
/// search along `J0` followed by projections along the estimated normal.
pub fn signed_distance(f: &Subequation, x: &[f64], j: &Jet) -> Result<f64> {
    f.check_point(x, j)?;
    match fiber_state(f, x) {
        Fiber::Proper => {}
        _ => return Err(Error::FiberDegenerate { point: x.to_vec() }),
    }
    Ok(distance_unchecked(f, x, j))
}

fn distance_unchecked(f: &Subequation, x: &[f64], j: &Jet) -> f64 {
    let n = f.dim;
    let inside = f.contains(x, j);
    let sign = if inside { 1.0 } else { -1.0 };
    let jc = to_coords(j);

    // first boundary point along the probe ray
    let probe_len = to_coords(&f.probe).iter().map(|v| v * v).sum::<f64>().sqrt();
    let on_side = |v: &[f64]| f.contains(x, &from_coords(n, v)) == inside;
    let cap = 1e6 * (1.0 + j.norm());
    let dir: Vec<f64> = to_coords(&f.probe).iter().map(|v| -sign * v / probe_len).collect();
    let Some(mut y) = bracket_and_bisect(&jc, &dir, &on_side, cap, f.tol.bisection_steps) else {
        return sign * f64::INFINITY;
    };
    let mut best = dist(&jc, &y);

    let margin = |v: &[f64]| f.raw_margin(x, &from_coords(n, v));
    for _ in 0..16 {
        let g = gradient(&margin, &y);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 || !gn.is_finite() {
            break;
        }
        let nrm: Vec<f64> = g.iter().map(|v| v / gn).collect();
        let offset: f64 = jc.iter().zip(&y).zip(&nrm).map(|((a, b), c)| (a - b) * c).sum();
        let z: Vec<f64> = jc.iter().zip(&nrm).map(|(a, c)| a - offset * c).collect();
        // walk from z along the normal to the boundary
        let z_in = f.contains(x, &from_coords(n, &z));
        let along: Vec<f64> = nrm.iter().map(|c| if z_in { -c } else { *c }).collect();
        let keep = |v: &[f64]| f.contains(x, &from_coords(n, v)) == z_in;
        let Some(cand) = bracket_and_bisect(&z, &along, &keep, best + 1.0, f.tol.bisection_steps) else {
            break;
        };
        let d = dist(&jc, &cand);
        if d < best - 1e-15 * (1.0 + best) {
            best = d;
            y = cand;
        } else {
            break;
        }
    }
    sign * best
}

/// From `start` (where `keep` holds) walks along `dir` until `keep` fails,
/// then bisects; returns the last point where `keep` holds.
fn bracket_and_bisect(
    start: &[f64],
    dir: &[f64],
    keep: &dyn Fn(&[f64]) -> bool,
    cap: f64,
    steps: usize,
) -> Option<Vec<f64>> {
    let at = |t: f64| -> Vec<f64> { start.iter().zip(dir).map(|(a, b)| a + t * b).collect() };
    if !keep(start) {
        return Some(start.to_vec());
    }
    let mut hi = 1e-6 * (1.0 + start.iter().map(|v| v.abs()).sum::<f64>());
    while keep(&at(hi)) {
        hi *= 2.0;
        if hi > cap {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if keep(&at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(at(lo))
}

fn gradient(f: &dyn Fn(&[f64]) -> f64, y: &[f64]) -> Vec<f64> {
    let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let h = 1e-6 * scale;
    let mut g = Vec::with_capacity(y.len());
    let mut buf = y.to_vec();
    for i in 0..y.len() {
        buf[i] = y[i] + h;
        let a = f(&buf);
        buf[i] = y[i] - h;
        let b = f(&buf);
        buf[i] = y[i];
        let d = (a - b) / (2.0 * h);
        g.push(if d.is_finite() { d } else { 0.0 });
    }
    g
}

/// The operator `J -> signed distance to the boundary of F_x`. Degenerate
/// fibers evaluate to `+inf` (full) or `-inf` (empty); the construction
/// itself fails if the fiber at the base centre (or origin) is degenerate.
pub fn signed_distance_operator(f: &Subequation) -> Result<OperatorSpec> {
    let x0 = f
        .base
        .as_ref()
        .map(|b| b.center())
        .unwrap_or_else(|| vec![0.0; f.dim]);
    if !matches!(fiber_state(f, &x0), Fiber::Proper) {
        return Err(Error::FiberDegenerate { point: x0 });
    }
    let set = f.clone();
    Ok(OperatorSpec {
        name: format!("signed_distance({})", f.name),
        dim: f.dim,
        reduction: Reduction::General,
        eval: Arc::new(move |x, j| match fiber_state(&set, x) {
            Fiber::Proper => distance_unchecked(&set, x, j),
            Fiber::Full => f64::INFINITY,
            Fiber::Empty => f64::NEG_INFINITY,
        }),
        constant_coefficients: f.constant_coefficients,
        params: serde_json::Value::Null,
    })
}
