//! Constraint sets `F` in `X x J^2`, proper elliptic pairs, duality and the
//! builtin examples.
//!
//! A set is either given by defining pieces combined with `min` (an
//! intersection) or `max` (a union), or by a bare membership oracle. The
//! dual of a defining form is again a defining form,
//! `J -> -m(x, -J)`, with the combination flipped.

mod builtins;
mod coeff;
mod distance;
mod pair;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cones::MonotonicityCone;
use crate::error::{Error, Result};
use crate::jets::{Domain, Jet, JetSampler, SymMatrix};
use crate::tolerances::Tolerances;

pub use builtins::{builtin, builtin_names};
pub use coeff::{MatrixField, ScalarField};
pub use distance::{signed_distance, signed_distance_operator};
pub use pair::{induce, EquationBoundary, OperatorSpec, ProperEllipticPair, Reduction};

pub type PointJetFn<T> = Arc<dyn Fn(&[f64], &Jet) -> T + Send + Sync>;
/// Draws a jet of the set, favouring its lower-dimensional faces.
pub type FaceSampler = Arc<dyn Fn(&[f64], &mut JetSampler, f64) -> Jet + Send + Sync>;

#[derive(Clone)]
pub struct Piece {
    pub label: String,
    pub f: PointJetFn<f64>,
}

impl Piece {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64], &Jet) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: &[f64], j: &Jet) -> f64 {
        sanitize((self.f)(x, j))
    }

    fn reflected(&self) -> Self {
        let f = self.f.clone();
        Self {
            label: format!("-{}(-J)", self.label),
            f: Arc::new(move |x, j| -sanitize(f(x, &j.neg()))),
        }
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combine {
    /// Intersection of the piece sets.
    Min,
    /// Union of the piece sets.
    Max,
}

impl Combine {
    fn flipped(self) -> Self {
        match self {
            Self::Min => Self::Max,
            Self::Max => Self::Min,
        }
    }
}

#[derive(Clone)]
pub enum Representation {
    Defining { combine: Combine, pieces: Vec<Piece> },
    Oracle(PointJetFn<bool>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Interior,
    BoundaryShell,
    Exterior,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub status: Status,
    pub margin: f64,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        self.status != Status::Exterior
    }
}

/// Outcome of testing a jet against a set inflated by a tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolerantTest {
    pub pass: bool,
    pub margin: f64,
    /// The tolerance actually applied to the deciding piece.
    pub allowance: f64,
}

#[derive(Clone)]
pub struct Subequation {
    pub name: String,
    pub dim: usize,
    pub repr: Representation,
    pub cone: MonotonicityCone,
    /// Probe jet `J0` in `Int M` used for interior tests and ray searches.
    pub probe: Jet,
    pub constant_coefficients: bool,
    pub base: Option<Domain>,
    pub faces: Option<FaceSampler>,
    pub tol: Tolerances,
}

impl fmt::Debug for Subequation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let repr = match &self.repr {
            Representation::Defining { combine, pieces } => format!(
                "{combine:?}[{}]",
                pieces.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join(", ")
            ),
            Representation::Oracle(_) => "oracle".into(),
        };
        f.debug_struct("Subequation")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("repr", &repr)
            .field("cone", &self.cone.label())
            .field("probe", &self.probe)
            .finish()
    }
}

impl Subequation {
    pub fn from_pieces(name: impl Into<String>, dim: usize, cone: MonotonicityCone, pieces: Vec<Piece>) -> Self {
        let probe = cone.interior_probe().unwrap_or_else(|| Jet::default_probe(dim));
        Self {
            name: name.into(),
            dim,
            repr: Representation::Defining {
                combine: Combine::Min,
                pieces,
            },
            cone,
            probe,
            constant_coefficients: true,
            base: None,
            faces: None,
            tol: Tolerances::default(),
        }
    }

    pub fn from_oracle(
        name: impl Into<String>,
        dim: usize,
        cone: MonotonicityCone,
        oracle: impl Fn(&[f64], &Jet) -> bool + Send + Sync + 'static,
    ) -> Self {
        let mut s = Self::from_pieces(name, dim, cone, Vec::new());
        s.repr = Representation::Oracle(Arc::new(oracle));
        s
    }

    /// The cone itself as a constant-coefficient subequation.
    pub fn from_cone(m: &MonotonicityCone) -> Self {
        let n = m.dim();
        let mut pieces = Vec::new();
        let value = || Piece::new("-r", |_: &[f64], j: &Jet| -j.r);
        let hess = || Piece::new("lambda_min(A)", |_: &[f64], j: &Jet| j.a.lambda_min());
        let dir = |d: &crate::cones::DirectionalCone| {
            let d = d.clone();
            Piece::new("min <a_i, p>", move |_: &[f64], j: &Jet| d.margin(&j.p))
        };
        match m {
            MonotonicityCone::Minimal { .. } => {
                pieces.push(value());
                pieces.push(Piece::new("-|p|", |_: &[f64], j: &Jet| {
                    -j.p.iter().map(|v| v * v).sum::<f64>().sqrt()
                }));
                pieces.push(hess());
            }
            MonotonicityCone::Proper { .. } => {
                pieces.push(value());
                pieces.push(hess());
            }
            MonotonicityCone::Convexity { .. } => pieces.push(hess()),
            MonotonicityCone::Directional(d) => {
                if !d.is_full() {
                    pieces.push(dir(d));
                }
                pieces.push(hess());
            }
            MonotonicityCone::ProperDirectional(d) => {
                pieces.push(value());
                if !d.is_full() {
                    pieces.push(dir(d));
                }
                pieces.push(hess());
            }
            MonotonicityCone::Generic(g) => {
                let p = g.predicate.clone();
                pieces.push(Piece::new(g.name.clone(), move |_: &[f64], j: &Jet| p(j)));
            }
        }
        let mut s = Self::from_pieces(m.label(), n, m.clone(), pieces);
        let cone = m.clone();
        s.faces = Some(Arc::new(move |_, rng, scale| cone.sample_member(rng, scale)));
        s
    }

    pub fn with_base(mut self, base: Option<Domain>) -> Self {
        self.base = base;
        self
    }

    pub fn with_probe(mut self, probe: Jet) -> Self {
        self.probe = probe;
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_faces(mut self, faces: FaceSampler) -> Self {
        self.faces = Some(faces);
        self
    }

    pub fn pieces(&self) -> Option<(&[Piece], Combine)> {
        match &self.repr {
            Representation::Defining { combine, pieces } => Some((pieces, *combine)),
            Representation::Oracle(_) => None,
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self.repr, Representation::Oracle(_))
    }

    pub fn check_point(&self, x: &[f64], j: &Jet) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if j.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: j.dim(),
            });
        }
        if let Some(b) = &self.base {
            let inside = x
                .iter()
                .zip(b.lo.iter().zip(&b.hi))
                .all(|(v, (l, h))| *v >= l - 1e-12 && *v <= h + 1e-12);
            if !inside {
                return Err(Error::OutsideBase { point: x.to_vec() });
            }
        }
        Ok(())
    }

    /// Membership without argument checks.
    pub fn contains(&self, x: &[f64], j: &Jet) -> bool {
        match &self.repr {
            Representation::Defining { .. } => self.defining_margin(x, j) >= 0.0,
            Representation::Oracle(o) => o(x, j),
        }
    }

    fn defining_margin(&self, x: &[f64], j: &Jet) -> f64 {
        match &self.repr {
            Representation::Defining { combine, pieces } => {
                let vals = pieces.iter().map(|p| p.eval(x, j));
                match combine {
                    Combine::Min => vals.fold(f64::INFINITY, f64::min),
                    Combine::Max => vals.fold(f64::NEG_INFINITY, f64::max),
                }
            }
            Representation::Oracle(_) => unreachable!("defining margin of an oracle set"),
        }
    }

    /// Signed margin without argument checks. For oracle sets this is the
    /// signed ray parameter to the boundary along `J0`.
    pub fn raw_margin(&self, x: &[f64], j: &Jet) -> f64 {
        match &self.repr {
            Representation::Defining { .. } => self.defining_margin(x, j),
            Representation::Oracle(_) => self.ray_margin(x, j),
        }
    }

    pub fn margin(&self, x: &[f64], j: &Jet) -> Result<f64> {
        self.check_point(x, j)?;
        Ok(self.raw_margin(x, j))
    }

    /// `J in Int F_x`: margin beyond the interior shell for defining sets,
    /// `J - t J0 in F_x` for oracle sets.
    pub fn interior(&self, x: &[f64], j: &Jet) -> bool {
        match &self.repr {
            Representation::Defining { .. } => self.defining_margin(x, j) > self.tol.eps_int(j),
            Representation::Oracle(o) => o(x, &j.shifted(-self.tol.probe_step(j), &self.probe)),
        }
    }

    /// Tri-state membership with margin.
    pub fn member(&self, x: &[f64], j: &Jet) -> Result<Membership> {
        self.check_point(x, j)?;
        Ok(self.member_unchecked(x, j))
    }

    pub fn member_unchecked(&self, x: &[f64], j: &Jet) -> Membership {
        match &self.repr {
            Representation::Defining { .. } => {
                let m = self.defining_margin(x, j);
                let eps = self.tol.eps_int(j);
                let status = if m > eps {
                    Status::Interior
                } else if m >= -eps {
                    Status::BoundaryShell
                } else {
                    Status::Exterior
                };
                Membership { status, margin: m }
            }
            Representation::Oracle(o) => {
                let t = self.tol.probe_step(j);
                let status = if o(x, &j.shifted(-t, &self.probe)) {
                    Status::Interior
                } else if !o(x, &j.shifted(t, &self.probe)) {
                    Status::Exterior
                } else {
                    Status::BoundaryShell
                };
                Membership {
                    status,
                    margin: self.ray_margin(x, j),
                }
            }
        }
    }

    /// Dirichlet dual `-(Int F)^c`, in closed form for defining sets.
    pub fn dual(&self) -> Subequation {
        match &self.repr {
            Representation::Defining { combine, pieces } => Subequation {
                name: format!("dual({})", self.name),
                repr: Representation::Defining {
                    combine: combine.flipped(),
                    pieces: pieces.iter().map(Piece::reflected).collect(),
                },
                faces: None,
                ..self.clone()
            },
            Representation::Oracle(_) => self.dual_by_oracle(),
        }
    }

    /// Dual through the set-level rule `J in F~ iff -J not in Int F`.
    pub fn dual_by_oracle(&self) -> Subequation {
        let inner = self.clone();
        Subequation {
            name: format!("dual*({})", self.name),
            repr: Representation::Oracle(Arc::new(move |x, j| !inner.interior(x, &j.neg()))),
            faces: None,
            ..self.clone()
        }
    }

    /// Uniform point of the base box, or of `[-1, 1]^n` without one.
    pub fn sample_point(&self, rng: &mut JetSampler) -> Vec<f64> {
        match &self.base {
            Some(b) => rng.point_in(&b.lo, &b.hi),
            None => rng.point_in(&vec![-1.0; self.dim], &vec![1.0; self.dim]),
        }
    }

    /// Smallest `t >= 0` (up to `cap`) with `pred(J + s*t*J0)` true, found by
    /// doubling and bisection, where `s` is the direction sign.
    fn ray_search(&self, x: &[f64], j: &Jet, sign: f64, want: bool, cap: f64) -> Option<f64> {
        let at = |t: f64| self.contains(x, &j.shifted(sign * t, &self.probe)) == want;
        if at(0.0) {
            return Some(0.0);
        }
        let mut hi = 1e-6 * (1.0 + j.norm());
        while !at(hi) {
            hi *= 2.0;
            if hi > cap {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..self.tol.bisection_steps {
            let mid = 0.5 * (lo + hi);
            if at(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    fn ray_cap(&self, j: &Jet) -> f64 {
        self.tol.jet_ball * (1.0 + j.norm())
    }

    fn ray_margin(&self, x: &[f64], j: &Jet) -> f64 {
        let cap = self.ray_cap(j);
        if self.contains(x, j) {
            self.ray_search(x, j, -1.0, false, cap).unwrap_or(cap)
        } else {
            -self.ray_search(x, j, 1.0, true, cap).unwrap_or(cap)
        }
    }

    /// Draws `J in F_x`: face samples when available, otherwise a random jet
    /// pushed along `J0` to or past the boundary.
    pub fn sample_member(&self, x: &[f64], rng: &mut JetSampler, scale: f64) -> Option<Jet> {
        for _ in 0..16 {
            if let Some(faces) = &self.faces {
                if rng.coin(0.5) {
                    let j = faces(x, rng, scale);
                    if self.contains(x, &j) {
                        return Some(j);
                    }
                }
            }
            let j = rng.jet(self.dim, scale);
            let cap = 1e3 * (1.0 + j.norm());
            let Some(t) = self.ray_search(x, &j, 1.0, true, cap) else {
                continue;
            };
            let extra = if rng.coin(0.35) {
                0.0
            } else {
                scale * rng.normal().abs()
            };
            let cand = j.shifted(t + extra, &self.probe);
            if self.contains(x, &cand) {
                return Some(cand);
            }
            let cand = j.shifted(t, &self.probe);
            if self.contains(x, &cand) {
                return Some(cand);
            }
        }
        None
    }

    /// Draws `J` outside `F_x`, pushed along `-J0` when needed.
    pub fn sample_nonmember(&self, x: &[f64], rng: &mut JetSampler, scale: f64) -> Option<Jet> {
        for _ in 0..16 {
            let j = rng.jet(self.dim, scale);
            let cap = 1e3 * (1.0 + j.norm());
            let Some(t) = self.ray_search(x, &j, -1.0, false, cap) else {
                continue;
            };
            let extra = scale * rng.normal().abs();
            let cand = j.shifted(-(t + extra), &self.probe);
            if !self.contains(x, &cand) {
                return Some(cand);
            }
        }
        None
    }

    /// Bisects the segment `[J_in, J_out]` for a jet within the boundary
    /// shell; the returned jet is on the inner side.
    pub fn boundary_probe(&self, x: &[f64], j_in: &Jet, j_out: &Jet) -> Result<Jet> {
        self.check_point(x, j_in)?;
        self.check_point(x, j_out)?;
        if !self.contains(x, j_in) {
            return Err(Error::Precondition("boundary probe: J_in is not in the fiber".into()));
        }
        if self.contains(x, j_out) {
            return Err(Error::Precondition("boundary probe: J_out is in the fiber".into()));
        }
        let point = |lam: f64| {
            crate::jets::jet_combine(1.0 - lam, j_in, lam, j_out).expect("dimensions checked")
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..self.tol.bisection_steps {
            let mid = 0.5 * (lo + hi);
            if self.contains(x, &point(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(point(lo))
    }

    /// Tests `J` against `F_x` inflated by `tau` in jet distance, to first
    /// order per piece: a piece passes when `m >= -tau * (1 + |grad m|)`.
    /// Intersections need every piece to pass, unions one.
    pub fn tolerant_member(&self, x: &[f64], j: &Jet, tau: f64) -> TolerantTest {
        match &self.repr {
            Representation::Defining { combine, pieces } => {
                if *combine == Combine::Max {
                    // a piece with nonnegative margin passes without a gradient
                    let top = pieces
                        .iter()
                        .map(|p| p.eval(x, j))
                        .fold(f64::NEG_INFINITY, f64::max);
                    if top >= 0.0 {
                        return TolerantTest {
                            pass: true,
                            margin: top,
                            allowance: 0.0,
                        };
                    }
                }
                let mut worst: Option<TolerantTest> = None;
                let mut best: Option<TolerantTest> = None;
                for p in pieces {
                    let t = piece_test(|jj| p.eval(x, jj), j, tau);
                    if worst.as_ref().is_none_or(|w| t.margin + t.allowance < w.margin + w.allowance) {
                        worst = Some(t.clone());
                    }
                    if best.as_ref().is_none_or(|b| t.margin + t.allowance > b.margin + b.allowance) {
                        best = Some(t);
                    }
                }
                let chosen = match combine {
                    Combine::Min => worst,
                    Combine::Max => best,
                };
                chosen.unwrap_or(TolerantTest {
                    pass: *combine == Combine::Min,
                    margin: match combine {
                        Combine::Min => f64::INFINITY,
                        Combine::Max => f64::NEG_INFINITY,
                    },
                    allowance: tau,
                })
            }
            Representation::Oracle(_) => piece_test(|jj| self.ray_margin(x, jj), j, tau),
        }
    }
}

/// Euclidean norm of the gradient of `f` at `j` in orthonormal jet
/// coordinates (off-diagonal Hessian entries weighted by `1/sqrt 2`),
/// by central differences.
pub fn jet_gradient_norm(f: impl Fn(&Jet) -> f64, j: &Jet) -> f64 {
    let n = j.dim();
    let step = 1e-6 * (1.0 + j.norm());
    let mut sq = 0.0;
    let mut diff = |plus: Jet, minus: Jet| {
        let d = (f(&plus) - f(&minus)) / (2.0 * step);
        if d.is_finite() {
            sq += d * d;
        }
    };
    diff(j.with_r(j.r + step), j.with_r(j.r - step));
    for i in 0..n {
        let mut a = j.clone();
        let mut b = j.clone();
        a.p[i] += step;
        b.p[i] -= step;
        diff(a, b);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for k in i..n {
            let h = if i == k { step } else { step * s };
            let mut pa = j.a.clone();
            let mut pb = j.a.clone();
            pa.set(i, k, j.a.get(i, k) + h);
            pb.set(i, k, j.a.get(i, k) - h);
            diff(j.with_a(pa), j.with_a(pb));
        }
    }
    sq.sqrt()
}

pub(crate) fn piece_test(f: impl Fn(&Jet) -> f64, j: &Jet, tau: f64) -> TolerantTest {
    let m = f(j);
    if m >= 0.0 {
        return TolerantTest {
            pass: true,
            margin: m,
            allowance: 0.0,
        };
    }
    if m == f64::NEG_INFINITY {
        return TolerantTest {
            pass: false,
            margin: m,
            allowance: tau,
        };
    }
    let allowance = tau * (1.0 + jet_gradient_norm(&f, j));
    TolerantTest {
        pass: m >= -allowance,
        margin: m,
        allowance,
    }
}

/// `P = {A >= 0}` constant-coefficient Hessian constraint.
pub fn convexity_subequation(n: usize) -> Subequation {
    let mut s = Subequation::from_cone(&MonotonicityCone::Convexity { dim: n });
    s.name = "P".into();
    s
}

/// `H = {tr A >= 0}`.
pub fn laplacian_subequation(n: usize) -> Subequation {
    let mut s = Subequation::from_pieces(
        "H",
        n,
        MonotonicityCone::Convexity { dim: n },
        vec![Piece::new("tr A", |_: &[f64], j: &Jet| j.a.trace())],
    );
    s.faces = Some(Arc::new(move |_, rng: &mut JetSampler, scale| {
        // tr A = 0 exactly on a coin flip
        let mut j = rng.jet(n, scale);
        if rng.coin(0.5) {
            let shift = j.a.trace() / n as f64;
            j.a = j.a.add(&SymMatrix::scaled_identity(n, -shift));
        }
        j
    }));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x0(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn laplacian_membership_examples() {
        let h = laplacian_subequation(2);
        let m = h.member(&x0(2), &Jet::hessian(SymMatrix::diag(&[1.0, -2.0]))).unwrap();
        assert_eq!(m.status, Status::Exterior);
        assert_eq!(m.margin, -1.0);
    }

    #[test]
    fn convexity_membership_examples() {
        let p = convexity_subequation(2);
        let m = p.member(&x0(2), &Jet::hessian(SymMatrix::diag(&[2.0, 3.0]))).unwrap();
        assert_eq!((m.status, m.margin), (Status::Interior, 2.0));
        let m = p.member(&x0(2), &Jet::hessian(SymMatrix::diag(&[0.0, 3.0]))).unwrap();
        assert_eq!(m.status, Status::BoundaryShell);
    }

    #[test]
    fn outside_base_rejected() {
        let p = convexity_subequation(1).with_base(Some(Domain::cube(1, 0.0, 1.0, 0.5).unwrap()));
        assert!(matches!(p.member(&[2.0], &Jet::zero(1)), Err(Error::OutsideBase { .. })));
    }

    #[test]
    fn laplacian_is_self_dual_in_closed_form() {
        let h = laplacian_subequation(3);
        let d = h.dual();
        let mut rng = JetSampler::new(4, 0);
        for _ in 0..200 {
            let j = rng.jet(3, 1.0);
            assert_eq!(h.raw_margin(&x0(3), &j), d.raw_margin(&x0(3), &j));
        }
    }

    #[test]
    fn convexity_dual_is_subaffine() {
        let d = convexity_subequation(2).dual();
        let a = SymMatrix::diag(&[-1.0, 0.25]);
        assert_eq!(d.raw_margin(&x0(2), &Jet::hessian(a)), 0.25);
    }

    #[test]
    fn oracle_dual_matches_closed_form_off_shell() {
        let p = convexity_subequation(2);
        let closed = p.dual();
        let oracle = p.dual_by_oracle();
        let mut rng = JetSampler::new(9, 0);
        for _ in 0..500 {
            let j = rng.jet(2, 1.0);
            let m = closed.raw_margin(&x0(2), &j);
            if m.abs() > 1e-8 {
                assert_eq!(m >= 0.0, oracle.contains(&x0(2), &j));
            }
        }
    }

    #[test]
    fn oracle_margin_is_ray_parameter() {
        let h = laplacian_subequation(2);
        let o = Subequation::from_oracle("H*", 2, h.cone.clone(), |_, j| j.a.trace() >= 0.0);
        // tr(A + t I) = -1 + 2t vanishes at t = 1/2
        let j = Jet::hessian(SymMatrix::diag(&[-1.0, 0.0]));
        assert!((o.raw_margin(&x0(2), &j) + 0.5).abs() < 1e-9);
        assert_eq!(o.member(&x0(2), &j).unwrap().status, Status::Exterior);
    }

    #[test]
    fn boundary_probe_examples() {
        let h = laplacian_subequation(2);
        let b = h
            .boundary_probe(&x0(2), &Jet::hessian(SymMatrix::identity(2)), &Jet::hessian(SymMatrix::identity(2).scale(-1.0)))
            .unwrap();
        assert!(b.a.trace().abs() <= 1e-12);

        let p = convexity_subequation(2);
        let b = p
            .boundary_probe(&x0(2), &Jet::hessian(SymMatrix::diag(&[1.0, 1.0])), &Jet::hessian(SymMatrix::diag(&[-1.0, 1.0])))
            .unwrap();
        assert!(b.a.get(0, 0).abs() < 1e-12 && (b.a.get(1, 1) - 1.0).abs() < 1e-12);

        assert!(matches!(
            p.boundary_probe(&x0(2), &Jet::zero(2).with_a(SymMatrix::diag(&[-1.0, 1.0])), &Jet::zero(2)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn samples_are_members() {
        let p = convexity_subequation(3);
        let mut rng = JetSampler::new(1, 0);
        for _ in 0..200 {
            let j = p.sample_member(&x0(3), &mut rng, 1.0).unwrap();
            assert!(p.contains(&x0(3), &j));
            let k = p.sample_nonmember(&x0(3), &mut rng, 1.0).unwrap();
            assert!(!p.contains(&x0(3), &k));
        }
    }

    #[test]
    fn tolerance_scales_with_gradient() {
        let h = laplacian_subequation(2);
        // |grad tr| = |I|_F = sqrt 2
        let j = Jet::hessian(SymMatrix::diag(&[-0.1, 0.0]));
        let t = h.tolerant_member(&x0(2), &j, 0.05);
        assert!(t.pass);
        assert!((t.allowance - 0.05 * (1.0 + 2f64.sqrt())).abs() < 1e-6);
        assert!(!h.tolerant_member(&x0(2), &j, 0.02).pass);
    }

    #[test]
    fn minimal_cone_dual_is_everything() {
        let d = Subequation::from_cone(&MonotonicityCone::Minimal { dim: 2 }).dual();
        let mut rng = JetSampler::new(2, 0);
        for _ in 0..100 {
            assert!(d.contains(&x0(2), &rng.jet(2, 3.0)));
        }
    }
}
