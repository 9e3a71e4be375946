use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Piece, PointJetFn, Subequation};
use crate::cones::{DirectionalCone, MonotonicityCone};
use crate::expr::{Env, Expression};
use crate::jets::{Domain, Jet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    PureSecondOrder,
    GradientFree,
    General,
}

/// An operator `F(x, J)` continuous on its constraint.
#[derive(Clone)]
pub struct OperatorSpec {
    pub name: String,
    pub dim: usize,
    pub reduction: Reduction,
    pub eval: PointJetFn<f64>,
    pub constant_coefficients: bool,
    /// Coefficient description echoed into reports.
    pub params: Value,
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("reduction", &self.reduction)
            .field("params", &self.params)
            .finish()
    }
}

impl OperatorSpec {
    pub fn eval(&self, x: &[f64], j: &Jet) -> f64 {
        let v = (self.eval)(x, j);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Directionality data of a gradient factor: `g(p + q) >= g(p)` on `D`
/// and `g(p + eta*qbar) >= g(p) + omega(eta)`.
#[derive(Clone, Debug)]
pub struct GradientFactor {
    pub g: Expression,
    pub cone: DirectionalCone,
    pub qbar: Vec<f64>,
    /// `omega` written in the variable `x1 = eta`.
    pub omega: Expression,
}

impl GradientFactor {
    pub fn g_at(&self, p: &[f64]) -> f64 {
        self.g.eval(&Env::at_gradient(p)).unwrap_or(f64::NAN)
    }

    pub fn omega_at(&self, eta: f64) -> f64 {
        self.omega.eval(&Env::at_point(&[eta])).unwrap_or(f64::NAN)
    }
}

/// An operator with its constraint `G` (or none, the unconstrained case).
#[derive(Clone, Debug)]
pub struct ProperEllipticPair {
    pub operator: OperatorSpec,
    pub constraint: Option<Subequation>,
    pub cone: MonotonicityCone,
    pub probe: Jet,
    pub base: Option<Domain>,
    pub gradient_factor: Option<GradientFactor>,
}

impl ProperEllipticPair {
    pub fn dim(&self) -> usize {
        self.operator.dim
    }

    pub fn name(&self) -> &str {
        &self.operator.name
    }

    pub fn is_constrained(&self) -> bool {
        self.constraint.is_some()
    }

    pub fn constant_coefficients(&self) -> bool {
        self.operator.constant_coefficients
            && self.constraint.as_ref().is_none_or(|g| g.constant_coefficients)
    }

    /// Constraint margin; `+inf` when unconstrained.
    pub fn g_margin(&self, x: &[f64], j: &Jet) -> f64 {
        self.constraint
            .as_ref()
            .map_or(f64::INFINITY, |g| g.raw_margin(x, j))
    }

    pub fn f(&self, x: &[f64], j: &Jet) -> f64 {
        self.operator.eval(x, j)
    }

    pub fn case_tag(&self) -> &'static str {
        if self.is_constrained() {
            "constrained"
        } else {
            "unconstrained"
        }
    }

    /// The constraint `G` as a subequation; `J^2` itself when unconstrained.
    pub fn constraint_or_full(&self) -> Subequation {
        self.constraint.clone().unwrap_or_else(|| {
            let mut s = Subequation::from_pieces(
                "J2",
                self.dim(),
                self.cone.clone(),
                vec![Piece::new("1", |_: &[f64], _: &Jet| 1.0)],
            )
            .with_probe(self.probe.clone())
            .with_base(self.base.clone());
            s.constant_coefficients = true;
            s
        })
    }
}

/// The candidate set `{(x, J) in G : F(x, J) >= 0}` of the correspondence
/// relation. It is not checked to be a subequation here.
pub fn induce(pair: &ProperEllipticPair) -> Subequation {
    let mut pieces: Vec<Piece> = match &pair.constraint {
        Some(g) => match g.pieces() {
            Some((p, super::Combine::Min)) => p.to_vec(),
            _ => {
                let g = g.clone();
                vec![Piece::new(g.name.clone(), move |x: &[f64], j: &Jet| g.raw_margin(x, j))]
            }
        },
        None => Vec::new(),
    };
    let op = pair.operator.clone();
    pieces.push(Piece {
        label: op.name.clone(),
        f: Arc::new(move |x, j| op.eval(x, j)),
    });
    let mut s = Subequation::from_pieces(
        format!("induced({})", pair.operator.name),
        pair.dim(),
        pair.cone.clone(),
        pieces,
    )
    .with_probe(pair.probe.clone())
    .with_base(pair.base.clone());
    s.constant_coefficients = pair.constant_coefficients();
    s.faces = pair.constraint.as_ref().and_then(|g| g.faces.clone());
    s
}

/// Sampled jets of `Gamma(x) = {J in G_x : F(x, J) = 0}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EquationBoundary {
    pub eps: f64,
    pub jets: Vec<(Vec<f64>, Jet)>,
}

impl EquationBoundary {
    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }
}
