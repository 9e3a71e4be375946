use jetlab::cones::{cone_dual, DirectionalCone, MonotonicityCone};
use jetlab::dirichlet::{solve_convex_envelope, solve_laplace, BoundaryData};
use jetlab::expr::{parse_expression, Ast, BinOp, Env, Expression, Func, Var};
use jetlab::subequations::builtin;
use jetlab::{jet_combine, Domain, Jet, JetSampler, SymMatrix};
use proptest::prelude::*;
use serde_json::json;

fn sym(n: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-5.0..5.0f64, n * (n + 1) / 2).prop_map(move |v| {
        let mut it = v.into_iter();
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, it.next().unwrap());
            }
        }
        m
    })
}

fn jet(n: usize) -> impl Strategy<Value = Jet> {
    (-5.0..5.0f64, prop::collection::vec(-5.0..5.0f64, n), sym(n)).prop_map(|(r, p, a)| Jet { r, p, a })
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + scale)
}

proptest! {
    #[test]
    fn eigen_reconstructs(m in (1usize..=4).prop_flat_map(sym)) {
        let n = m.dim();
        let e = m.eigen().unwrap();
        let scale = m.frobenius();
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(close(e.values.iter().sum(), m.trace(), scale));
        prop_assert!(close(e.values.iter().product(), m.det(), scale.powi(n as i32)));
        for i in 0..n {
            for j in 0..n {
                let rebuilt: f64 = (0..n).map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j]).sum();
                prop_assert!(close(rebuilt, m.get(i, j), scale));
                let dot: f64 = (0..n).map(|k| e.vectors[i][k] * e.vectors[j][k]).sum();
                let kronecker = f64::from(u8::from(i == j));
                prop_assert!(close(dot, kronecker, 1.0));
            }
        }
    }

    #[test]
    fn jet_norms_are_norms(a in jet(3), b in jet(3), s in -4.0..4.0f64) {
        let sum = jet_combine(1.0, &a, 1.0, &b).unwrap();
        prop_assert!(sum.norm() <= a.norm() + b.norm() + 1e-12);
        prop_assert!(sum.euclidean_norm() <= a.euclidean_norm() + b.euclidean_norm() + 1e-12);
        prop_assert!(close(a.scale(s).norm(), s.abs() * a.norm(), a.norm()));
        prop_assert!(a.euclidean_norm() <= a.norm() + 1e-12);
        prop_assert!(a.norm() <= 3f64.sqrt() * a.euclidean_norm() + 1e-12);
    }

    #[test]
    fn jet_combine_is_componentwise(a in jet(2), b in jet(2), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let c = jet_combine(s, &a, t, &b).unwrap();
        prop_assert_eq!(c.r, s * a.r + t * b.r);
        for i in 0..2 {
            prop_assert_eq!(c.p[i], s * a.p[i] + t * b.p[i]);
            for j in 0..2 {
                prop_assert_eq!(c.a.get(i, j), s * a.a.get(i, j) + t * b.a.get(i, j));
            }
        }
        prop_assert_eq!(jet_combine(s, &a, t, &b).unwrap(), c);
        prop_assert!(jet_combine(1.0, &a, 1.0, &Jet::zero(3)).is_err());
    }

    #[test]
    fn cones_are_convex_cones_inside_their_duals(seed in any::<u64>(), s in 0.0..3.0f64, t in 0.0..3.0f64) {
        let cones = [
            MonotonicityCone::Minimal { dim: 2 },
            MonotonicityCone::Proper { dim: 2 },
            MonotonicityCone::Convexity { dim: 2 },
            MonotonicityCone::Directional(DirectionalCone::half_spaces(2, vec![vec![1.0, 0.0]]).unwrap()),
            MonotonicityCone::ProperDirectional(DirectionalCone::half_spaces(2, vec![vec![1.0, 1.0]]).unwrap()),
        ];
        let mut rng = JetSampler::new(seed, 0);
        for m in &cones {
            let a = m.sample_member(&mut rng, 1.0);
            let b = m.sample_member(&mut rng, 1.0);
            let tol = 1e-9 * (1.0 + a.norm() + b.norm()) * (1.0 + s + t);
            prop_assert!(m.margin(&a) >= -tol, "{} sampled a non-member", m.label());
            prop_assert!(m.margin(&jet_combine(s, &a, t, &b).unwrap()) >= -tol, "{} not a convex cone", m.label());
            prop_assert!(cone_dual(m).margin(&a) >= -tol, "{} not inside its dual", m.label());
        }
    }

    #[test]
    fn builtin_duals_are_involutions(seed in any::<u64>()) {
        let d = Domain::cube(2, -1.0, 1.0, 0.25).unwrap();
        let mut rng = JetSampler::new(seed, 1);
        for name in ["laplace", "min_eigenvalue", "monge_ampere"] {
            let pair = builtin(name, 2, &json!({}), Some(&d)).unwrap();
            let f = jetlab::subequations::induce(&pair);
            let ff = f.dual().dual();
            let x = d.center();
            for _ in 0..20 {
                let j = rng.jet(2, 2.0);
                let m = f.raw_margin(&x, &j);
                if m.abs() > 1e-6 {
                    prop_assert_eq!(f.contains(&x, &j), ff.contains(&x, &j), "{}", name);
                    prop_assert_eq!(f.dual().contains(&x, &j), !f.interior(&x, &j.neg()), "{}", name);
                }
            }
        }
    }

    #[test]
    fn laplace_solver_preserves_boundary_order(
        c in prop::collection::vec(-1.0..1.0f64, 4),
        lift in 0.0..0.5f64,
    ) {
        let d = Domain::cube(2, 0.0, 1.0, 0.125).unwrap();
        let g = |x: &[f64]| c[0] + c[1] * x[0] + c[2] * (3.0 * x[1]).sin() + c[3] * x[0] * x[0];
        let lo = solve_laplace(&BoundaryData::from_fn(&d, g)).unwrap().solution;
        let hi = solve_laplace(&BoundaryData::from_fn(&d, |x| g(x) + lift * (1.0 + x[0]))).unwrap().solution;
        for i in 0..d.node_count() {
            prop_assert!(lo.values[i] <= hi.values[i] + 1e-9);
        }
    }

    #[test]
    fn envelope_solver_preserves_boundary_order(
        c in prop::collection::vec(-1.0..1.0f64, 3),
        lift in 0.0..0.5f64,
    ) {
        let d = Domain::cube(2, 0.0, 1.0, 0.125).unwrap();
        let g = |x: &[f64]| c[0] * x[0] + c[1] * (2.0 * x[1]).cos() + c[2] * x[0] * x[1];
        let lo = solve_convex_envelope(&BoundaryData::from_fn(&d, g)).unwrap().solution;
        let hi = solve_convex_envelope(&BoundaryData::from_fn(&d, |x| g(x) + lift * x[1])).unwrap().solution;
        for i in 0..d.node_count() {
            prop_assert!(lo.values[i] <= hi.values[i] + 1e-9);
        }
    }
}

fn ast() -> impl Strategy<Value = Ast> {
    let leaf = prop_oneof![
        (0.0..100.0f64).prop_map(Ast::Num),
        (0usize..2).prop_map(|i| Ast::Var(Var::X(i))),
        (0usize..2).prop_map(|i| Ast::Var(Var::P(i))),
        Just(Ast::Var(Var::R)),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow),
        ];
        let unary = prop_oneof![
            Just(Func::Exp),
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Abs),
            Just(Func::Sqrt),
        ];
        let binary = prop_oneof![Just(Func::Min), Just(Func::Max)];
        prop_oneof![
            inner.clone().prop_map(|a| Ast::Neg(Box::new(a))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Ast::Bin(o, Box::new(a), Box::new(b))),
            (unary, inner.clone()).prop_map(|(f, a)| Ast::Call(f, vec![a])),
            (binary, inner.clone(), inner).prop_map(|(f, a, b)| Ast::Call(f, vec![a, b])),
        ]
    })
}

/// Tree-walking reference semantics; `None` where evaluation is an error.
/// Intermediate NaNs propagate (and `min`/`max` drop them); only a NaN
/// result is an error.
fn oracle(a: &Ast, x: &[f64], r: f64, p: &[f64]) -> Option<f64> {
    walk(a, x, r, p).filter(|v| !v.is_nan())
}

fn walk(a: &Ast, x: &[f64], r: f64, p: &[f64]) -> Option<f64> {
    Some(match a {
        Ast::Num(v) => *v,
        Ast::Var(Var::X(i)) => x[*i],
        Ast::Var(Var::P(i)) => p[*i],
        Ast::Var(Var::R) => r,
        Ast::Neg(a) => -walk(a, x, r, p)?,
        Ast::Bin(op, a, b) => {
            let (a, b) = (walk(a, x, r, p)?, walk(b, x, r, p)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div if b == 0.0 => return None,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
        Ast::Call(f, args) => {
            let v: Vec<f64> = args.iter().map(|a| walk(a, x, r, p)).collect::<Option<_>>()?;
            match f {
                Func::Exp => v[0].exp(),
                Func::Sin => v[0].sin(),
                Func::Cos => v[0].cos(),
                Func::Abs => v[0].abs(),
                Func::Sqrt if v[0] < 0.0 => return None,
                Func::Sqrt => v[0].sqrt(),
                Func::Min => v[0].min(v[1]),
                Func::Max => v[0].max(v[1]),
            }
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn expressions_print_parse_fixpoint(a in ast(), x in prop::array::uniform2(-2.0..2.0f64), r in -2.0..2.0f64, p in prop::array::uniform2(-2.0..2.0f64)) {
        let printed = a.to_string();
        let parsed = parse_expression(&printed).unwrap();
        prop_assert_eq!(parsed.ast().to_string(), printed.clone());
        let reparsed = parse_expression(&parsed.ast().to_string()).unwrap();
        prop_assert_eq!(reparsed.ast(), parsed.ast());

        let env = Env { x: &x, r, p: &p };
        let compiled = Expression::from_ast(a.clone()).eval(&env).ok();
        let via_text = parsed.eval(&env).ok();
        let expected = oracle(&a, &x, r, &p);
        prop_assert_eq!(compiled.map(f64::to_bits), expected.map(f64::to_bits), "{}", printed);
        prop_assert_eq!(via_text.map(f64::to_bits), expected.map(f64::to_bits), "{}", printed);
    }
}
