use std::sync::Arc;

use serde_json::Value;

use super::coeff::{MatrixField, ScalarField};
use super::pair::{GradientFactor, OperatorSpec, ProperEllipticPair, Reduction};
use super::{induce, signed_distance_operator, Piece, Subequation};
use crate::cones::{DirectionalCone, MonotonicityCone};
use crate::error::{Error, Result};
use crate::expr::{parse_expression, Env};
use crate::jets::{Domain, Jet, JetSampler, SymMatrix};

const NAMES: &[&str] = &[
    "laplace",
    "min_eigenvalue",
    "monge_ampere",
    "perturbed_monge_ampere",
    "transport",
    "det_minus_r",
    "signed_distance",
];

pub fn builtin_names() -> &'static [&'static str] {
    NAMES
}

fn param<'a>(params: &'a Value, key: &str) -> Option<&'a Value> {
    params.as_object().and_then(|m| m.get(key))
}

fn scalar_param(params: &Value, key: &str, default: f64) -> Result<ScalarField> {
    match param(params, key) {
        Some(v) => ScalarField::from_json(v, None),
        None => Ok(ScalarField::Constant(default)),
    }
}

fn unconstrained(
    name: &str,
    dim: usize,
    reduction: Reduction,
    eval: impl Fn(&[f64], &Jet) -> f64 + Send + Sync + 'static,
    base: Option<&Domain>,
) -> ProperEllipticPair {
    let cone = MonotonicityCone::Convexity { dim };
    ProperEllipticPair {
        operator: OperatorSpec {
            name: name.into(),
            dim,
            reduction,
            eval: Arc::new(eval),
            constant_coefficients: true,
            params: Value::Object(Default::default()),
        },
        constraint: None,
        probe: Jet::default_probe(dim),
        cone,
        base: base.cloned(),
        gradient_factor: None,
    }
}

/// Builds a named example pair. `base` is the region `X` on which
/// coefficients are validated and evaluated.
pub fn builtin(name: &str, dim: usize, params: &Value, base: Option<&Domain>) -> Result<ProperEllipticPair> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if let Some(b) = base {
        if b.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: b.dim(),
            });
        }
    }
    match name {
        "laplace" => Ok(unconstrained(
            "laplace",
            dim,
            Reduction::PureSecondOrder,
            |_, j| j.a.trace(),
            base,
        )),
        "min_eigenvalue" => Ok(unconstrained(
            "min_eigenvalue",
            dim,
            Reduction::PureSecondOrder,
            |_, j| j.a.lambda_min(),
            base,
        )),
        "monge_ampere" => {
            let f = scalar_param(params, "f", 1.0)?;
            monge_ampere("monge_ampere", dim, MatrixField::zero(dim), f, base)
        }
        "perturbed_monge_ampere" => {
            let f = scalar_param(params, "f", 1.0)?;
            let m = match param(params, "m") {
                Some(v) => MatrixField::from_json(v, dim, None)?,
                None => MatrixField::zero(dim),
            };
            monge_ampere("perturbed_monge_ampere", dim, m, f, base)
        }
        "transport" => transport(dim, params, base),
        "det_minus_r" => det_minus_r(dim, params, base),
        "signed_distance" => {
            let of = param(params, "of")
                .ok_or_else(|| Error::InvalidInput("signed_distance needs `of`".into()))?;
            let inner_name = param(of, "operator")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::InvalidInput("`of` needs an `operator` name".into()))?;
            let inner_params = param(of, "params").cloned().unwrap_or(Value::Null);
            let inner = builtin(inner_name, dim, &inner_params, base)?;
            let set = induce(&inner);
            let mut op = signed_distance_operator(&set)?;
            op.params = serde_json::json!({ "of": { "operator": inner_name, "params": inner_params } });
            Ok(ProperEllipticPair {
                operator: op,
                constraint: None,
                cone: inner.cone.clone(),
                probe: inner.probe.clone(),
                base: base.cloned(),
                gradient_factor: None,
            })
        }
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

fn monge_ampere(
    name: &str,
    dim: usize,
    m: MatrixField,
    f: ScalarField,
    base: Option<&Domain>,
) -> Result<ProperEllipticPair> {
    f.validate("f", dim, base, true)?;
    m.validate("M", base)?;
    let constant = f.is_constant() && m.is_constant();
    let cone = MonotonicityCone::Convexity { dim };

    let mg = m.clone();
    let mut g = Subequation::from_pieces(
        "A + M(x) >= 0",
        dim,
        cone.clone(),
        vec![Piece::new("lambda_min(A + M(x))", move |x: &[f64], j: &Jet| {
            j.a.add(&mg.at(x)).lambda_min()
        })],
    )
    .with_base(base.cloned());
    g.constant_coefficients = m.is_constant();
    let mf = m.clone();
    g.faces = Some(Arc::new(move |x: &[f64], rng: &mut JetSampler, scale| {
        let rank = rng.index(dim + 1);
        let p = rng.psd_of_rank(dim, rank, scale);
        Jet {
            r: scale * rng.normal(),
            p: rng.normal_vec(dim, scale),
            a: p.add(&mf.at(x).scale(-1.0)),
        }
    }));

    let params = serde_json::json!({ "f": f.describe(), "m": m.describe() });
    let eval = move |x: &[f64], j: &Jet| j.a.add(&m.at(x)).det() - f.at(x);
    Ok(ProperEllipticPair {
        operator: OperatorSpec {
            name: name.into(),
            dim,
            reduction: Reduction::PureSecondOrder,
            eval: Arc::new(eval),
            constant_coefficients: constant,
            params,
        },
        constraint: Some(g),
        probe: Jet::default_probe(dim),
        cone,
        base: base.cloned(),
        gradient_factor: None,
    })
}

fn transport(dim: usize, params: &Value, base: Option<&Domain>) -> Result<ProperEllipticPair> {
    let f = scalar_param(params, "f", 1.0)?;
    f.validate("f", dim, base, true)?;
    let g_src = param(params, "g").and_then(Value::as_str).unwrap_or("max(p1, 0)");
    let g = parse_expression(g_src)?;
    if g.uses(|v| !matches!(v, crate::expr::Var::P(_))) || g.max_index(false) > dim {
        return Err(Error::InvalidCoefficient(format!(
            "gradient factor `{g_src}` may only use p1..p{dim}"
        )));
    }
    let normals: Vec<Vec<f64>> = match param(params, "cone") {
        Some(v) => serde_json::from_value(v.clone())?,
        None => {
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            vec![e]
        }
    };
    let d = DirectionalCone::half_spaces(dim, normals)?;
    let qbar: Vec<f64> = match param(params, "qbar") {
        Some(v) => serde_json::from_value(v.clone())?,
        None => d
            .interior_direction()
            .ok_or_else(|| Error::InvalidInput("direction cone D has empty interior".into()))?,
    };
    if qbar.len() != dim || d.margin(&qbar) <= 0.0 {
        return Err(Error::InvalidInput("qbar must lie in the interior of D".into()));
    }
    let omega_src = match param(params, "omega").and_then(Value::as_str) {
        Some(s) => s.to_string(),
        None => format!("x1 * {:?}", qbar[0]),
    };
    let omega = parse_expression(&omega_src)?;

    let cone = MonotonicityCone::Directional(d.clone());
    let probe = Jet {
        r: -1.0,
        p: qbar.clone(),
        a: SymMatrix::identity(dim),
    };
    let mut gset = Subequation::from_cone(&cone)
        .with_probe(probe.clone())
        .with_base(base.cloned());
    gset.name = "M(D,P)".into();

    let constant = f.is_constant();
    let params_echo = serde_json::json!({
        "g": g_src,
        "f": f.describe(),
        "cone": d.normals,
        "qbar": qbar,
        "omega": omega_src,
    });
    let ge = g.clone();
    let eval = move |x: &[f64], j: &Jet| {
        let gp = ge.eval(&Env::at_gradient(&j.p)).unwrap_or(f64::NAN);
        gp * j.a.det() - f.at(x)
    };
    Ok(ProperEllipticPair {
        operator: OperatorSpec {
            name: "transport".into(),
            dim,
            reduction: Reduction::General,
            eval: Arc::new(eval),
            constant_coefficients: constant,
            params: params_echo,
        },
        constraint: Some(gset),
        cone,
        probe,
        base: base.cloned(),
        gradient_factor: Some(GradientFactor {
            g,
            cone: d,
            qbar,
            omega,
        }),
    })
}

fn det_minus_r(dim: usize, params: &Value, base: Option<&Domain>) -> Result<ProperEllipticPair> {
    let which = param(params, "constraint").and_then(Value::as_str).unwrap_or("G2");
    let cone = match which {
        "G1" => MonotonicityCone::Proper { dim },
        "G2" => MonotonicityCone::Convexity { dim },
        other => {
            return Err(Error::InvalidInput(format!(
                "det_minus_r constraint must be G1 or G2, got `{other}`"
            )))
        }
    };
    let mut g = Subequation::from_cone(&cone).with_base(base.cloned());
    g.name = which.into();
    Ok(ProperEllipticPair {
        operator: OperatorSpec {
            name: format!("det_minus_r[{which}]"),
            dim,
            reduction: Reduction::GradientFree,
            eval: Arc::new(|_, j| j.a.det() - j.r),
            constant_coefficients: true,
            params: serde_json::json!({ "constraint": which }),
        },
        constraint: Some(g),
        probe: Jet::default_probe(dim),
        cone,
        base: base.cloned(),
        gradient_factor: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn laplace_induces_h() {
        let pair = builtin("laplace", 2, &json!({}), None).unwrap();
        let h = induce(&pair);
        let j = Jet::hessian(SymMatrix::diag(&[1.0, -2.0]));
        assert_eq!(h.raw_margin(&[0.0, 0.0], &j), -1.0);
    }

    #[test]
    fn perturbed_ma_fibers() {
        let d = Domain::cube(2, 0.0, 1.0, 0.25).unwrap();
        let pair = builtin(
            "perturbed_monge_ampere",
            2,
            &json!({ "m": [["x1", 0], [0, 0]], "f": 1 }),
            Some(&d),
        )
        .unwrap();
        assert!(!pair.constant_coefficients());
        let f = induce(&pair);
        // A + M(x) = diag(1, 1) at x1 = 0.5
        let j = Jet::hessian(SymMatrix::diag(&[0.5, 1.0]));
        assert!(f.raw_margin(&[0.5, 0.5], &j).abs() < 1e-15);
        let j = Jet::hessian(SymMatrix::diag(&[0.4, 2.0]));
        assert!(f.contains(&[0.5, 0.5], &j));
        assert!(!f.contains(&[0.0, 0.5], &j));
    }

    #[test]
    fn det_minus_r_pathology_jet() {
        let pair = builtin("det_minus_r", 2, &json!({ "constraint": "G2" }), None).unwrap();
        let j = Jet::zero(2).with_r(-1.0);
        assert_eq!(pair.f(&[0.0, 0.0], &j), 1.0);
        let f = induce(&pair);
        assert!(f.contains(&[0.0, 0.0], &j));
        assert!(!f.interior(&[0.0, 0.0], &j));
    }

    #[test]
    fn negative_f_rejected() {
        let d = Domain::cube(2, -1.0, 1.0, 0.5).unwrap();
        let e = builtin("monge_ampere", 2, &json!({ "f": "x1" }), Some(&d));
        assert!(matches!(e, Err(Error::InvalidCoefficient(_))));
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(
            builtin("heat", 2, &json!({}), None),
            Err(Error::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn transport_directionality_probe() {
        let pair = builtin("transport", 2, &json!({}), None).unwrap();
        let gf = pair.gradient_factor.as_ref().unwrap();
        assert_eq!(gf.qbar, vec![1.0, 0.0]);
        assert_eq!(gf.g_at(&[2.0, -5.0]), 2.0);
        assert_eq!(pair.probe.p, vec![1.0, 0.0]);
    }
}
