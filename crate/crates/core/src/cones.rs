//! Constant-coefficient monotonicity cones `M`, their Dirichlet duals and
//! strictly `M`-subharmonic quadratics.
//!
//! Margins follow one convention throughout: positive inside, negative
//! outside, magnitude a defining value (not a Euclidean distance).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{Domain, Jet, JetSampler, SymMatrix};

/// A closed convex cone `D = {p : <a_i, p> >= 0 for all i}` in `R^n`.
/// No normals means the whole space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalCone {
    pub dim: usize,
    pub normals: Vec<Vec<f64>>,
}

impl DirectionalCone {
    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            normals: Vec::new(),
        }
    }

    pub fn half_spaces(dim: usize, normals: Vec<Vec<f64>>) -> Result<Self> {
        for a in &normals {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.len(),
                });
            }
            if a.iter().all(|v| *v == 0.0) || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("cone normal must be finite and nonzero".into()));
            }
        }
        Ok(Self { dim, normals })
    }

    pub fn is_full(&self) -> bool {
        self.normals.is_empty()
    }

    /// `min_i <a_i, p>`, or `+inf` for the full space.
    pub fn margin(&self, p: &[f64]) -> f64 {
        self.normals
            .iter()
            .map(|a| dot(a, p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.margin(p) >= 0.0
    }

    /// A unit vector in the interior of `D`, if one is found.
    pub fn interior_direction(&self) -> Option<Vec<f64>> {
        let n = self.dim;
        if self.is_full() {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            return Some(e);
        }
        let unit: Vec<Vec<f64>> = self.normals.iter().map(|a| normalized(a)).collect();
        let score = |d: &[f64]| unit.iter().map(|a| dot(a, d)).fold(f64::INFINITY, f64::min);

        let mut candidates: Vec<Vec<f64>> = unit.clone();
        let mut sum = vec![0.0; n];
        for a in &unit {
            for k in 0..n {
                sum[k] += a[k];
            }
        }
        if sum.iter().any(|v| *v != 0.0) {
            candidates.push(normalized(&sum));
        }
        for k in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[k] = s;
                candidates.push(e);
            }
        }
        let mut rng = JetSampler::new(0x00d1_2ec7, 0);
        for _ in 0..256 {
            candidates.push(rng.unit_vec(n));
        }
        let best = candidates
            .into_iter()
            .map(|d| (score(&d), d))
            .max_by(|a, b| a.0.total_cmp(&b.0))?;
        (best.0 > 1e-9).then_some(best.1)
    }

    /// Pushes `p` into `D` along an interior direction.
    fn project_along(&self, p: &[f64], d: &[f64]) -> Vec<f64> {
        let mut s: f64 = 0.0;
        for a in &self.normals {
            let ad = dot(a, d);
            s = s.max(-dot(a, p) / ad);
        }
        p.iter().zip(d).map(|(x, y)| x + s * y).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalized(a: &[f64]) -> Vec<f64> {
    let n = dot(a, a).sqrt();
    a.iter().map(|v| v / n).collect()
}

/// A user-defined cone given by a defining function (`>= 0` inside).
#[derive(Clone)]
pub struct GenericCone {
    pub name: String,
    pub dim: usize,
    pub predicate: Arc<dyn Fn(&Jet) -> f64 + Send + Sync>,
    /// Declared interior jet, if any.
    pub probe: Option<Jet>,
    /// Tolerance declared for the sampled dual oracle.
    pub dual_tolerance: f64,
}

impl fmt::Debug for GenericCone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericCone")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("probe", &self.probe)
            .finish()
    }
}

/// Monotonicity cone subequations, with `N = {r <= 0}` and `P = {A >= 0}`.
#[derive(Clone, Debug)]
pub enum MonotonicityCone {
    /// `M0 = N x {0} x P`; empty interior.
    Minimal { dim: usize },
    /// `M(N,P) = N x R^n x P`.
    Proper { dim: usize },
    /// `M(P) = R x R^n x P`.
    Convexity { dim: usize },
    /// `M(D,P) = R x D x P`.
    Directional(DirectionalCone),
    /// `M(N,D,P) = N x D x P`.
    ProperDirectional(DirectionalCone),
    Generic(GenericCone),
}

impl MonotonicityCone {
    pub fn dim(&self) -> usize {
        match self {
            Self::Minimal { dim } | Self::Proper { dim } | Self::Convexity { dim } => *dim,
            Self::Directional(d) | Self::ProperDirectional(d) => d.dim,
            Self::Generic(g) => g.dim,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Minimal { .. } => "M0".into(),
            Self::Proper { .. } => "M(N,P)".into(),
            Self::Convexity { .. } => "M(P)".into(),
            Self::Directional(_) => "M(D,P)".into(),
            Self::ProperDirectional(_) => "M(N,D,P)".into(),
            Self::Generic(g) => format!("generic:{}", g.name),
        }
    }

    fn has_value_constraint(&self) -> bool {
        matches!(
            self,
            Self::Minimal { .. } | Self::Proper { .. } | Self::ProperDirectional(_)
        )
    }

    fn directions(&self) -> Option<&DirectionalCone> {
        match self {
            Self::Directional(d) | Self::ProperDirectional(d) => Some(d),
            _ => None,
        }
    }

    /// Defining value, unchecked dimensions.
    pub fn margin(&self, j: &Jet) -> f64 {
        if let Self::Generic(g) = self {
            return (g.predicate)(j);
        }
        let mut m = j.a.lambda_min();
        if self.has_value_constraint() {
            m = m.min(-j.r);
        }
        if let Some(d) = self.directions() {
            m = m.min(d.margin(&j.p));
        }
        if let Self::Minimal { .. } = self {
            let pn = dot(&j.p, &j.p).sqrt();
            m = m.min(-pn);
        }
        m
    }

    /// Defining value whose positivity characterises `Int M`.
    pub fn interior_margin(&self, j: &Jet) -> f64 {
        match self {
            Self::Minimal { .. } => self.margin(j).min(0.0),
            _ => self.margin(j),
        }
    }

    /// A jet in `Int M`, if the interior is nonempty.
    pub fn interior_probe(&self) -> Option<Jet> {
        let n = self.dim();
        match self {
            Self::Minimal { .. } => None,
            Self::Proper { .. } | Self::Convexity { .. } => Some(Jet::default_probe(n)),
            Self::Directional(d) | Self::ProperDirectional(d) => {
                let dir = d.interior_direction()?;
                Some(Jet {
                    r: -1.0,
                    p: dir,
                    a: SymMatrix::identity(n),
                })
            }
            Self::Generic(g) => {
                let probe = g.probe.clone().unwrap_or_else(|| Jet::default_probe(n));
                ((g.predicate)(&probe) > 0.0).then_some(probe)
            }
        }
    }

    /// Samples a jet of `M`, visiting lower-dimensional faces (r = 0,
    /// rank-deficient `A`, `p` on the boundary of `D`) with positive
    /// probability.
    pub fn sample_member(&self, rng: &mut JetSampler, scale: f64) -> Jet {
        let n = self.dim();
        if let Self::Generic(g) = self {
            for _ in 0..1000 {
                let j = rng.jet(n, scale);
                if (g.predicate)(&j) >= 0.0 {
                    return j;
                }
            }
            // fall back to shifting along the probe
            let probe = self.interior_probe().unwrap_or_else(|| Jet::default_probe(n));
            let mut j = rng.jet(n, scale);
            let mut t = scale;
            while (g.predicate)(&j) < 0.0 && t < 1e12 {
                j = j.shifted(t, &probe);
                t *= 2.0;
            }
            return j;
        }

        let r = if self.has_value_constraint() {
            if rng.coin(0.25) {
                0.0
            } else {
                -scale * rng.normal().abs()
            }
        } else {
            scale * rng.normal()
        };

        let p = match self {
            Self::Minimal { .. } => vec![0.0; n],
            Self::Directional(d) | Self::ProperDirectional(d) if !d.is_full() => {
                let raw = rng.normal_vec(n, scale);
                if d.contains(&raw) {
                    raw
                } else {
                    let dir = d.interior_direction().unwrap_or_else(|| vec![0.0; n]);
                    let on_face = d.project_along(&raw, &dir);
                    if rng.coin(0.5) {
                        on_face
                    } else {
                        let extra = scale * rng.normal().abs();
                        on_face.iter().zip(&dir).map(|(x, y)| x + extra * y).collect()
                    }
                }
            }
            _ => rng.normal_vec(n, scale),
        };

        let rank = rng.index(n + 1);
        let a = rng.psd_of_rank(n, rank, scale);
        Jet { r, p, a }
    }
}

/// Membership margin of `j` in `m` (`>= 0` iff `j` in `m`).
pub fn cone_member(m: &MonotonicityCone, j: &Jet) -> Result<f64> {
    check_dim(m, j)?;
    Ok(m.margin(j))
}

/// Interior margin of `j` (`> 0` iff `j` in `Int M`). Never positive for `M0`.
pub fn cone_interior_member(m: &MonotonicityCone, j: &Jet) -> Result<f64> {
    check_dim(m, j)?;
    Ok(m.interior_margin(j))
}

fn check_dim(m: &MonotonicityCone, j: &Jet) -> Result<()> {
    if m.dim() != j.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: j.dim(),
        });
    }
    Ok(())
}

/// Membership oracle for the dual cone `-(Int M)^c`.
#[derive(Clone, Debug)]
pub struct MonotonicityConeDual {
    pub cone: MonotonicityCone,
}

impl MonotonicityConeDual {
    /// `-interior_margin(-J)`; for the listed variants this is the closed
    /// form, e.g. `max(-r, lambda_max(A))` for `M(N,P)`.
    pub fn margin(&self, j: &Jet) -> f64 {
        -self.cone.interior_margin(&j.neg())
    }

    pub fn contains(&self, j: &Jet) -> bool {
        self.margin(j) >= -self.tolerance()
    }

    /// Declared tolerance: zero for closed forms, the cone's declared value
    /// for generic (sampled) cones.
    pub fn tolerance(&self) -> f64 {
        match &self.cone {
            MonotonicityCone::Generic(g) => g.dual_tolerance,
            _ => 0.0,
        }
    }

    pub fn label(&self) -> String {
        format!("dual {}", self.cone.label())
    }
}

pub fn cone_dual(m: &MonotonicityCone) -> MonotonicityConeDual {
    MonotonicityConeDual { cone: m.clone() }
}

/// `psi(x) = c + <b, x> + 1/2 <Q (x - x0), x - x0>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub c: f64,
    pub b: Vec<f64>,
    pub q: SymMatrix,
    pub x0: Vec<f64>,
}

impl Quadratic {
    pub fn value(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.x0).map(|(a, b)| a - b).collect();
        self.c + dot(&self.b, x) + 0.5 * self.q.quad_form(&d)
    }

    /// The 2-jet of `psi` at `x`.
    pub fn jet_at(&self, x: &[f64]) -> Jet {
        let d: Vec<f64> = x.iter().zip(&self.x0).map(|(a, b)| a - b).collect();
        let qd = self.q.mul_vec(&d);
        Jet {
            r: self.value(x),
            p: self.b.iter().zip(&qd).map(|(a, b)| a + b).collect(),
            a: self.q.clone(),
        }
    }
}

/// Searches `psi = 1/2 |x - x0|^2 - C` for a quadratic whose jet lies in
/// `Int M` at every grid node of `omega`. `None` when the family fails
/// (always for `M0`).
pub fn strict_approximator(m: &MonotonicityCone, omega: &Domain) -> Option<Quadratic> {
    let n = m.dim();
    if n != omega.dim() {
        return None;
    }
    if let MonotonicityCone::Minimal { .. } = m {
        return None;
    }
    let nodes: Vec<Vec<f64>> = (0..omega.node_count()).map(|i| omega.point(i)).collect();
    let radius_from = |x0: &[f64]| {
        nodes
            .iter()
            .map(|x| x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };

    let mut centres = vec![vec![0.0; n]];
    if let Some(d) = m.directions().filter(|d| !d.is_full()) {
        let dir = d.interior_direction()?;
        let worst = d
            .normals
            .iter()
            .map(|a| dot(&normalized(a), &dir))
            .fold(f64::INFINITY, f64::min);
        let t = (0.5 * omega.diameter() + 1.0) / worst;
        let c = omega.center();
        centres = vec![c.iter().zip(&dir).map(|(x, y)| x - t * y).collect()];
    }

    for x0 in centres {
        let r = radius_from(&x0);
        for shift in [0.0, 0.5 * r * r + 1.0] {
            let psi = Quadratic {
                c: -shift,
                b: vec![0.0; n],
                q: SymMatrix::identity(n),
                x0: x0.clone(),
            };
            if nodes.iter().all(|x| m.interior_margin(&psi.jet_at(x)) > 0.0) {
                return Some(psi);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(r: f64, p: Vec<f64>, a: SymMatrix) -> Jet {
        Jet::new(r, p, a).unwrap()
    }

    #[test]
    fn proper_cone_margin() {
        let m = MonotonicityCone::Proper { dim: 2 };
        let j = jet(-1.0, vec![5.0, 0.0], SymMatrix::identity(2));
        assert_eq!(cone_member(&m, &j).unwrap(), 1.0);
    }

    #[test]
    fn minimal_cone_excludes_gradients() {
        let m = MonotonicityCone::Minimal { dim: 2 };
        let j = jet(0.0, vec![1.0, 0.0], SymMatrix::zeros(2));
        assert!(cone_member(&m, &j).unwrap() < 0.0);
        let j = jet(-3.0, vec![0.0, 0.0], SymMatrix::identity(2).scale(5.0));
        assert!(cone_member(&m, &j).unwrap() >= 0.0);
        assert!(cone_interior_member(&m, &j).unwrap() <= 0.0);
    }

    #[test]
    fn directional_margin_from_half_space() {
        let d = DirectionalCone::half_spaces(2, vec![vec![1.0, 0.0]]).unwrap();
        let m = MonotonicityCone::Directional(d);
        let j = jet(3.0, vec![-1.0, 0.0], SymMatrix::identity(2));
        assert_eq!(cone_member(&m, &j).unwrap(), -1.0);
    }

    #[test]
    fn interior_examples() {
        let m = MonotonicityCone::Proper { dim: 2 };
        let inner = jet(-1.0, vec![0.0, 0.0], SymMatrix::identity(2));
        assert_eq!(cone_interior_member(&m, &inner).unwrap(), 1.0);
        let edge = jet(0.0, vec![0.0, 0.0], SymMatrix::identity(2));
        assert!(cone_interior_member(&m, &edge).unwrap() <= 0.0);
    }

    #[test]
    fn dual_examples() {
        let m = MonotonicityCone::Proper { dim: 2 };
        let dual = cone_dual(&m);
        // -J = (-1, 0, I) is interior, so J is outside the dual
        let j = jet(1.0, vec![0.0, 0.0], SymMatrix::identity(2).scale(-1.0));
        assert!(!dual.contains(&j));
        // -J = (2, 0, I) is not interior
        let j = jet(-2.0, vec![0.0, 0.0], SymMatrix::identity(2).scale(-1.0));
        assert!(dual.contains(&j));

        let p = cone_dual(&MonotonicityCone::Convexity { dim: 2 });
        let a = SymMatrix::diag(&[-3.0, 0.5]);
        assert_eq!(p.margin(&Jet::hessian(a.clone())), a.lambda_max());
    }

    #[test]
    fn dimension_mismatch() {
        let m = MonotonicityCone::Convexity { dim: 3 };
        assert!(cone_member(&m, &Jet::zero(2)).is_err());
    }

    #[test]
    fn approximator_examples() {
        let omega = Domain::cube(2, -1.0, 1.0, 0.25).unwrap();
        let psi = strict_approximator(&MonotonicityCone::Convexity { dim: 2 }, &omega).unwrap();
        assert_eq!(psi.c, 0.0);
        assert_eq!(psi.x0, vec![0.0, 0.0]);

        let psi = strict_approximator(&MonotonicityCone::Proper { dim: 2 }, &omega).unwrap();
        // C > R^2/2 with R = sqrt 2
        assert!(-psi.c > 1.0);
        for i in 0..omega.node_count() {
            let j = psi.jet_at(&omega.point(i));
            assert!(j.r < 0.0);
            assert_eq!(j.a, SymMatrix::identity(2));
        }

        assert!(strict_approximator(&MonotonicityCone::Minimal { dim: 2 }, &omega).is_none());
    }

    #[test]
    fn approximator_for_directional_cone() {
        let d = DirectionalCone::half_spaces(2, vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let omega = Domain::cube(2, 0.0, 1.0, 0.125).unwrap();
        let m = MonotonicityCone::ProperDirectional(d);
        let psi = strict_approximator(&m, &omega).unwrap();
        for i in 0..omega.node_count() {
            assert!(m.interior_margin(&psi.jet_at(&omega.point(i))) > 0.0);
        }
    }

    #[test]
    fn empty_interior_direction_cone() {
        // p1 >= 0 and -p1 >= 0 leaves a line, no interior
        let d = DirectionalCone::half_spaces(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert!(d.interior_direction().is_none());
        assert!(MonotonicityCone::Directional(d).interior_probe().is_none());
    }
}
