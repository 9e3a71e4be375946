//! Problem-definition files.
//!
//! ```json
//! { "operator": "monge_ampere", "params": { "f": 1.0 }, "dimension": 2,
//!   "domain": { "lo": 0.0, "hi": 1.0, "h": 0.0625 },
//!   "boundary": "0.5*(x1^2 + x2^2)" }
//! ```
//!
//! Coefficient and grid fields accept numbers, expression strings in `x`,
//! or `{"grid_csv": path}` with paths relative to the problem file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cones::{DirectionalCone, MonotonicityCone};
use crate::dirichlet::BoundaryData;
use crate::error::{Error, Result};
use crate::expr::{parse_expression, Env};
use crate::jets::Domain;
use crate::subequations::{builtin, MatrixField, ProperEllipticPair, ScalarField};
use crate::viscosity::GridFunction;

/// A side of the box: one number for a cube, or one per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Bound {
    fn expand(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            Self::Scalar(v) => Ok(vec![*v; n]),
            Self::Vector(v) if v.len() == n => Ok(v.clone()),
            Self::Vector(v) => Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Bound,
    pub hi: Bound,
    pub h: f64,
}

/// The parsed file. Serializing it gives the echo carried by reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub operator: String,
    #[serde(default = "empty_object")]
    pub params: Value,
    pub dimension: usize,
    pub domain: DomainSpec,
    /// Dirichlet data for `solve` and `compare`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Value>,
    /// Grid function under test (subsolution candidate for `compare`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Value>,
    /// Supersolution candidate for `compare`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Value>,
    /// Monotonicity cone for `zmp`: `"M(P)"`, `"M(N,P)"`, `"M0"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<String>,
    /// Levels for `fiber-modulus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    /// Directory relative grid paths resolve against.
    pub dir: PathBuf,
}

impl Problem {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &dir)
    }

    pub fn parse(text: &str, dir: &Path) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(text)?;
        if spec.dimension == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let p = Self {
            spec,
            dir: dir.to_path_buf(),
        };
        p.domain()?;
        Ok(p)
    }

    pub fn echo(&self) -> Value {
        serde_json::to_value(&self.spec).unwrap_or(Value::Null)
    }

    pub fn dim(&self) -> usize {
        self.spec.dimension
    }

    pub fn domain(&self) -> Result<Domain> {
        let n = self.dim();
        let d = &self.spec.domain;
        Domain::new(d.lo.expand(n)?, d.hi.expand(n)?, d.h)
    }

    /// `params` with relative `grid_csv` paths made relative to `dir`.
    pub fn resolved_params(&self) -> Value {
        resolve_paths(&self.spec.params, &self.dir)
    }

    pub fn pair(&self, base: &Domain) -> Result<ProperEllipticPair> {
        builtin(&self.spec.operator, self.dim(), &self.resolved_params(), Some(base))
    }

    /// The right-hand side `f` of the Monge–Ampère family.
    pub fn f_field(&self) -> Result<ScalarField> {
        match self.spec.params.get("f") {
            Some(v) => ScalarField::from_json(v, Some(&self.dir)),
            None => Ok(ScalarField::Constant(1.0)),
        }
    }

    pub fn m_field(&self) -> Result<Option<MatrixField>> {
        self.spec
            .params
            .get("m")
            .map(|v| MatrixField::from_json(v, self.dim(), Some(&self.dir)))
            .transpose()
    }

    pub fn grid_field(&self, v: &Value, domain: &Domain) -> Result<GridFunction> {
        match v {
            Value::Number(n) => Ok(GridFunction::constant(domain, n.as_f64().unwrap_or(f64::NAN))),
            Value::String(s) => {
                let e = parse_expression(s)?;
                if e.uses(|v| !matches!(v, crate::expr::Var::X(_))) || e.max_index(true) > domain.dim() {
                    return Err(Error::InvalidInput(format!("grid field `{s}` may only use x1..x{}", domain.dim())));
                }
                let values = (0..domain.node_count())
                    .map(|i| e.eval(&Env::at_point(&domain.point(i))))
                    .collect::<Result<Vec<_>>>()?;
                GridFunction::new(domain.clone(), values)
            }
            Value::Object(map) => {
                let rel = map
                    .get("grid_csv")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::InvalidInput("grid field object needs `grid_csv`".into()))?;
                let g = GridFunction::load(&self.dir.join(rel))?;
                if g.domain != *domain {
                    return Err(Error::InvalidInput(format!(
                        "grid `{rel}` does not match the problem domain (h = {})",
                        domain.h
                    )));
                }
                Ok(g)
            }
            other => Err(Error::InvalidInput(format!("cannot read a grid field from {other}"))),
        }
    }

    pub fn u(&self, domain: &Domain) -> Result<Option<GridFunction>> {
        self.spec.u.as_ref().map(|v| self.grid_field(v, domain)).transpose()
    }

    pub fn w(&self, domain: &Domain) -> Result<Option<GridFunction>> {
        self.spec.w.as_ref().map(|v| self.grid_field(v, domain)).transpose()
    }

    pub fn boundary(&self, domain: &Domain) -> Result<Option<BoundaryData>> {
        match &self.spec.boundary {
            None => Ok(None),
            Some(Value::String(s)) => {
                let e = parse_expression(s)?;
                BoundaryData::from_expression(domain, &e).map(Some)
            }
            Some(v) => BoundaryData::from_grid(&self.grid_field(v, domain)?).map(Some),
        }
    }

    /// The cone named by `cone`, else the operator's own.
    pub fn cone(&self, pair: &ProperEllipticPair) -> Result<MonotonicityCone> {
        let n = self.dim();
        match self.spec.cone.as_deref() {
            None => Ok(pair.cone.clone()),
            Some("M(P)") => Ok(MonotonicityCone::Convexity { dim: n }),
            Some("M(N,P)") => Ok(MonotonicityCone::Proper { dim: n }),
            Some("M0") => Ok(MonotonicityCone::Minimal { dim: n }),
            Some("M(D,P)") => {
                let mut e = vec![0.0; n];
                e[0] = 1.0;
                Ok(MonotonicityCone::Directional(DirectionalCone::half_spaces(n, vec![e])?))
            }
            Some(other) => Err(Error::InvalidInput(format!("unknown cone `{other}`"))),
        }
    }
}

fn resolve_paths(v: &Value, dir: &Path) -> Value {
    match v {
        Value::Object(map) => {
            let mut out = serde_json::Map::new();
            for (k, val) in map {
                let val = match (k.as_str(), val) {
                    ("grid_csv", Value::String(p)) if Path::new(p).is_relative() => {
                        Value::String(dir.join(p).to_string_lossy().into_owned())
                    }
                    _ => resolve_paths(val, dir),
                };
                out.insert(k.clone(), val);
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.iter().map(|x| resolve_paths(x, dir)).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MA: &str = r#"{
        "operator": "perturbed_monge_ampere",
        "params": { "f": 1, "m": [["x1", 0], [0, 0]] },
        "dimension": 2,
        "domain": { "lo": 0, "hi": [1, 2], "h": 0.25 },
        "boundary": "x1 + x2"
    }"#;

    #[test]
    fn parses_and_builds() {
        let p = Problem::parse(MA, Path::new(".")).unwrap();
        let d = p.domain().unwrap();
        assert_eq!(d.counts(), vec![5, 9]);
        let pair = p.pair(&d).unwrap();
        assert_eq!(pair.name(), "perturbed_monge_ampere");
        assert!(!pair.constant_coefficients());
        let g = p.boundary(&d).unwrap().unwrap();
        assert_eq!(g.values.values[d.node_count() - 1], 3.0);
        assert!(p.m_field().unwrap().is_some());
    }

    #[test]
    fn echo_round_trips() {
        let p = Problem::parse(MA, Path::new(".")).unwrap();
        let again: ProblemSpec = serde_json::from_value(p.echo()).unwrap();
        assert_eq!(again, p.spec);
    }

    #[test]
    fn rejects_bad_files() {
        let unknown = MA.replace("\"boundary\"", "\"bounday\"");
        assert!(Problem::parse(&unknown, Path::new(".")).is_err());
        let bad_dim = MA.replace("[1, 2]", "[1, 2, 3]");
        assert!(Problem::parse(&bad_dim, Path::new(".")).is_err());
        let p = Problem::parse(&MA.replace("perturbed_monge_ampere", "nope"), Path::new(".")).unwrap();
        assert!(matches!(p.pair(&p.domain().unwrap()), Err(Error::UnknownBuiltin(_))));
    }

    #[test]
    fn grid_paths_resolve_against_the_file() {
        let dir = std::env::temp_dir().join(format!("jetlab-problem-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let d = Domain::cube(2, 0.0, 1.0, 0.25).unwrap();
        GridFunction::from_fn(&d, |x| 1.0 + x[0]).save(&dir.join("f.csv")).unwrap();
        let text = r#"{ "operator": "monge_ampere", "params": { "f": { "grid_csv": "f.csv" } },
            "dimension": 2, "domain": { "lo": 0, "hi": 1, "h": 0.25 }, "u": { "grid_csv": "f.csv" } }"#;
        let p = Problem::parse(text, &dir).unwrap();
        let pair = p.pair(&d).unwrap();
        assert!(!pair.constant_coefficients());
        assert_eq!(p.f_field().unwrap().at(&[1.0, 0.0]), 2.0);
        assert_eq!(p.u(&d).unwrap().unwrap().values[0], 1.0);
        assert!(p.u(&d.with_spacing(0.5).unwrap()).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
