//! Coefficient fields `f(x)`, `M(x)` given as constants, expressions or
//! grid samples.

use std::path::Path;
use std::sync::Arc;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Env, Expression};
use crate::jets::{Domain, SymMatrix};
use crate::viscosity::GridFunction;

#[derive(Clone, Debug)]
pub enum ScalarField {
    Constant(f64),
    Expr(Expression),
    /// Multilinear interpolation of samples, clamped outside the box.
    Grid(Arc<GridFunction>),
}

impl ScalarField {
    /// Reads a number, an expression string, or `{"grid_csv": path}`.
    /// Relative grid paths resolve against `dir`.
    pub fn from_json(v: &Value, dir: Option<&Path>) -> Result<Self> {
        match v {
            Value::Number(n) => Ok(Self::Constant(n.as_f64().unwrap_or(f64::NAN))),
            Value::String(s) => {
                let e = parse_expression(s)?;
                if e.uses(|v| !matches!(v, crate::expr::Var::X(_))) {
                    return Err(Error::InvalidCoefficient(format!(
                        "coefficient `{s}` may only depend on x"
                    )));
                }
                Ok(Self::Expr(e))
            }
            Value::Object(map) => {
                let path = map
                    .get("grid_csv")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::InvalidInput("field object needs `grid_csv`".into()))?;
                let mut full = dir.map(Path::to_path_buf).unwrap_or_default();
                full.push(path);
                Ok(Self::Grid(Arc::new(GridFunction::load(&full)?)))
            }
            other => Err(Error::InvalidInput(format!("cannot read coefficient from {other}"))),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Constant(c) => Ok(*c),
            Self::Expr(e) => e.eval(&Env::at_point(x)),
            Self::Grid(g) => Ok(g.interpolate(x)),
        }
    }

    /// Evaluation for hot paths; failures become NaN.
    pub fn at(&self, x: &[f64]) -> f64 {
        self.eval(x).unwrap_or(f64::NAN)
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant(_) => true,
            Self::Expr(e) => e.is_constant(),
            Self::Grid(_) => false,
        }
    }

    pub fn describe(&self) -> Value {
        match self {
            Self::Constant(c) => serde_json::json!(c),
            Self::Expr(e) => Value::String(e.source().to_string()),
            Self::Grid(g) => serde_json::json!({ "grid": g.domain }),
        }
    }

    /// Evaluates at every node of `omega` (or at the origin if none) and
    /// rejects non-finite or, when `nonnegative`, negative values.
    pub fn validate(&self, name: &str, dim: usize, omega: Option<&Domain>, nonnegative: bool) -> Result<()> {
        let points: Vec<Vec<f64>> = match omega {
            Some(d) => (0..d.node_count()).map(|i| d.point(i)).collect(),
            None => vec![vec![0.0; dim]],
        };
        for x in points {
            let v = self
                .eval(&x)
                .map_err(|e| Error::InvalidCoefficient(format!("{name} at {x:?}: {e}")))?;
            if !v.is_finite() {
                return Err(Error::InvalidCoefficient(format!("{name} is not finite at {x:?}")));
            }
            if nonnegative && v < 0.0 {
                return Err(Error::InvalidCoefficient(format!("{name} = {v} < 0 at {x:?}")));
            }
        }
        Ok(())
    }
}

/// A symmetric-matrix field stored as packed upper-triangle scalar fields.
#[derive(Clone, Debug)]
pub struct MatrixField {
    pub dim: usize,
    pub entries: Vec<ScalarField>,
}

impl MatrixField {
    pub fn zero(dim: usize) -> Self {
        Self::constant(&SymMatrix::zeros(dim))
    }

    pub fn constant(m: &SymMatrix) -> Self {
        Self {
            dim: m.dim(),
            entries: m.packed().iter().map(|v| ScalarField::Constant(*v)).collect(),
        }
    }

    /// Reads an `n x n` array of scalar fields; the upper triangle is used.
    pub fn from_json(v: &Value, dim: usize, dir: Option<&Path>) -> Result<Self> {
        let rows = v
            .as_array()
            .ok_or_else(|| Error::InvalidInput("matrix field must be an array of rows".into()))?;
        if rows.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rows.len(),
            });
        }
        let mut entries = Vec::with_capacity(dim * (dim + 1) / 2);
        for (i, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| Error::InvalidInput("matrix row must be an array".into()))?;
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            for cell in row.iter().skip(i) {
                entries.push(ScalarField::from_json(cell, dir)?);
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn eval(&self, x: &[f64]) -> Result<SymMatrix> {
        let mut m = SymMatrix::zeros(self.dim);
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                m.set(i, j, self.entries[k].eval(x)?);
                k += 1;
            }
        }
        Ok(m)
    }

    pub fn at(&self, x: &[f64]) -> SymMatrix {
        self.eval(x)
            .unwrap_or_else(|_| SymMatrix::scaled_identity(self.dim, f64::NAN))
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(ScalarField::is_constant)
    }

    pub fn describe(&self) -> Value {
        let mut rows = vec![vec![Value::Null; self.dim]; self.dim];
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = self.entries[k].describe();
                rows[i][j] = d.clone();
                rows[j][i] = d;
                k += 1;
            }
        }
        serde_json::json!(rows)
    }

    pub fn validate(&self, name: &str, omega: Option<&Domain>) -> Result<()> {
        for e in &self.entries {
            e.validate(name, self.dim, omega, false)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn scalar_sources() {
        assert_eq!(ScalarField::from_json(&json!(2.5), None).unwrap().at(&[0.0]), 2.5);
        let e = ScalarField::from_json(&json!("1 + x1"), None).unwrap();
        assert_eq!(e.at(&[2.0]), 3.0);
        assert!(!e.is_constant());
        assert!(ScalarField::from_json(&json!("p1"), None).is_err());
    }

    #[test]
    fn negative_coefficient_rejected() {
        let d = Domain::cube(2, 0.0, 1.0, 0.5).unwrap();
        let f = ScalarField::from_json(&json!("x1 - 0.5"), None).unwrap();
        assert!(matches!(
            f.validate("f", 2, Some(&d), true),
            Err(Error::InvalidCoefficient(_))
        ));
    }

    #[test]
    fn matrix_field_uses_upper_triangle() {
        let m = MatrixField::from_json(&json!([["x1", 1], [7, 0]]), 2, None).unwrap();
        let a = m.eval(&[3.0, 0.0]).unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert!(!m.is_constant());
    }
}
