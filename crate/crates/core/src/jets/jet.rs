use serde::{Deserialize, Serialize};

use super::SymMatrix;
use crate::error::{Error, Result};

/// A 2-jet `(r, p, A)`: value, gradient and Hessian slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub r: f64,
    pub p: Vec<f64>,
    pub a: SymMatrix,
}

impl Jet {
    pub fn new(r: f64, p: Vec<f64>, a: SymMatrix) -> Result<Self> {
        if p.len() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: p.len(),
            });
        }
        Ok(Self { r, p, a })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            r: 0.0,
            p: vec![0.0; n],
            a: SymMatrix::zeros(n),
        }
    }

    /// Pure second-order jet `(0, 0, A)`.
    pub fn hessian(a: SymMatrix) -> Self {
        Self {
            r: 0.0,
            p: vec![0.0; a.dim()],
            a,
        }
    }

    /// The default probe jet `(-1, 0, I)`.
    pub fn default_probe(n: usize) -> Self {
        Self {
            r: -1.0,
            p: vec![0.0; n],
            a: SymMatrix::identity(n),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.p.iter().all(|v| v.is_finite()) && self.a.is_finite()
    }

    /// `|r| + |p| + |A|_F`.
    pub fn norm(&self) -> f64 {
        self.r.abs() + euclid(&self.p) + self.a.frobenius()
    }

    /// Euclidean norm in the coordinates `(r, p, A)` with the Frobenius norm on `A`.
    pub fn euclidean_norm(&self) -> f64 {
        let pa = euclid(&self.p);
        let af = self.a.frobenius();
        (self.r * self.r + pa * pa + af * af).sqrt()
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            r: s * self.r,
            p: self.p.iter().map(|v| s * v).collect(),
            a: self.a.scale(s),
        }
    }

    /// `self + t * dir`, assuming matching dimensions.
    pub fn shifted(&self, t: f64, dir: &Jet) -> Self {
        lin_comb(1.0, self, t, dir)
    }

    pub fn with_r(&self, r: f64) -> Self {
        Self {
            r,
            ..self.clone()
        }
    }

    pub fn with_a(&self, a: SymMatrix) -> Self {
        Self {
            a,
            ..self.clone()
        }
    }
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lin_comb(a: f64, j1: &Jet, b: f64, j2: &Jet) -> Jet {
    Jet {
        r: a * j1.r + b * j2.r,
        p: j1.p.iter().zip(&j2.p).map(|(x, y)| a * x + b * y).collect(),
        a: SymMatrix::lin_comb(a, &j1.a, b, &j2.a),
    }
}

/// Componentwise `a * j1 + b * j2`.
///
/// Every slot is evaluated as `a*x + b*y` in that order, so results are
/// bit-stable across call sites.
pub fn jet_combine(a: f64, j1: &Jet, b: f64, j2: &Jet) -> Result<Jet> {
    if j1.dim() != j2.dim() {
        return Err(Error::DimensionMismatch {
            expected: j1.dim(),
            found: j2.dim(),
        });
    }
    Ok(lin_comb(a, j1, b, j2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    }

    #[test]
    fn combine_identity() {
        let j = Jet::new(0.5, vec![1.0, -2.0], SymMatrix::diag(&[3.0, 4.0])).unwrap();
        assert_eq!(jet_combine(1.0, &j, 1.0, &Jet::zero(2)).unwrap(), j);
    }

    #[test]
    fn combine_examples() {
        let i = Jet::hessian(SymMatrix::identity(2));
        let m = Jet::zero(2).with_r(-1.0);
        let got = jet_combine(1.0, &i, 1.0, &m).unwrap();
        assert_eq!(got, Jet::hessian(SymMatrix::identity(2)).with_r(-1.0));

        let j = Jet::new(1.0, e1(2), SymMatrix::identity(2)).unwrap();
        assert_eq!(jet_combine(2.0, &j, -1.0, &j).unwrap(), j);
    }

    #[test]
    fn combine_dimension_mismatch() {
        let err = jet_combine(1.0, &Jet::zero(2), 1.0, &Jet::zero(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn new_checks_dimensions() {
        assert!(Jet::new(0.0, vec![0.0; 3], SymMatrix::zeros(2)).is_err());
    }
}
