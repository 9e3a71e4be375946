//! Stencils and node updates of the monotone schemes.

use crate::jets::Domain;
use crate::subequations::{MatrixField, ScalarField};

/// Primitive lattice directions with sup-norm at most `radius`, one of each
/// `+/-` pair. In one dimension only `e1`.
pub fn lattice_directions(dim: usize, radius: i64) -> Vec<Vec<i64>> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    match dim {
        1 => vec![vec![1]],
        2 => {
            let mut out = Vec::new();
            for a in 0..=radius {
                for b in -radius..=radius {
                    if (a == 0 && b <= 0) || gcd(a, b) != 1 {
                        continue;
                    }
                    out.push(vec![a, b]);
                }
            }
            out
        }
        _ => (0..dim)
            .map(|k| {
                let mut e = vec![0; dim];
                e[k] = 1;
                e
            })
            .collect(),
    }
}

/// Orthogonal pairs `(e, e')` of two-dimensional lattice directions.
pub fn orthogonal_pairs(radius: i64) -> Vec<(Vec<i64>, Vec<i64>)> {
    let dirs = lattice_directions(2, radius);
    let mut out = Vec::new();
    for e in &dirs {
        // canonical representative of the perpendicular direction
        let mut q = vec![-e[1], e[0]];
        if q[0] < 0 || (q[0] == 0 && q[1] < 0) {
            q = vec![-q[0], -q[1]];
        }
        if dirs.contains(&q) && e < &q {
            out.push((e.clone(), q));
        }
    }
    out
}

fn offset(d: &Domain, node: usize, e: &[i64], s: i64) -> Option<usize> {
    let counts = d.counts();
    let idx = d.multi_index(node);
    let mut m = Vec::with_capacity(idx.len());
    for ((i, c), v) in idx.iter().zip(&counts).zip(e) {
        let k = *i as i64 + s * v;
        if k < 0 || k >= *c as i64 {
            return None;
        }
        m.push(k as usize);
    }
    Some(d.linear_index(&m))
}

/// The `2n` axis neighbours of each interior node.
pub(crate) fn axis_neighbours(d: &Domain) -> Vec<Option<Vec<usize>>> {
    let n = d.dim();
    (0..d.node_count())
        .map(|i| {
            if d.is_boundary(i) {
                return None;
            }
            let mut out = Vec::with_capacity(2 * n);
            for k in 0..n {
                let mut e = vec![0; n];
                e[k] = 1;
                out.push(offset(d, i, &e, 1)?);
                out.push(offset(d, i, &e, -1)?);
            }
            Some(out)
        })
        .collect()
}

pub(crate) fn laplace_update(u: &[f64], nb: &[usize]) -> f64 {
    nb.iter().map(|&j| u[j]).sum::<f64>() / nb.len() as f64
}

/// `(x + he, x - he)` index pairs for the lattice directions fitting at
/// each node.
pub(crate) fn direction_neighbours(d: &Domain, radius: i64) -> Vec<Vec<(usize, usize)>> {
    let dirs = lattice_directions(d.dim(), radius);
    (0..d.node_count())
        .map(|i| {
            dirs.iter()
                .filter_map(|e| Some((offset(d, i, e, 1)?, offset(d, i, e, -1)?)))
                .collect()
        })
        .collect()
}

pub(crate) fn envelope_update(u: &[f64], i: usize, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(p, m)| 0.5 * (u[p] + u[m])).fold(u[i], f64::min)
}

#[derive(Clone, Debug)]
pub(crate) struct Arm {
    plus: usize,
    minus: usize,
    /// `1 / (|e|^2 h^2)`.
    w: f64,
    /// `<M e, e> / |e|^2`.
    m: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct MaNode {
    f: f64,
    pairs: Vec<(Arm, Arm)>,
}

pub(crate) fn ma_stencil(d: &Domain, radius: i64, f: &ScalarField, m: Option<&MatrixField>) -> Vec<Option<MaNode>> {
    let pairs = orthogonal_pairs(radius);
    let h = d.h;
    (0..d.node_count())
        .map(|i| {
            if d.is_boundary(i) {
                return None;
            }
            let x = d.point(i);
            let mx = m.map(|m| m.at(&x));
            let arm = |e: &[i64]| -> Option<Arm> {
                let ef: Vec<f64> = e.iter().map(|v| *v as f64).collect();
                let len2: f64 = ef.iter().map(|v| v * v).sum();
                Some(Arm {
                    plus: offset(d, i, e, 1)?,
                    minus: offset(d, i, e, -1)?,
                    w: 1.0 / (len2 * h * h),
                    m: mx.as_ref().map_or(0.0, |m| m.quad_form(&ef) / len2),
                })
            };
            let ps = pairs
                .iter()
                .filter_map(|(a, b)| Some((arm(a)?, arm(b)?)))
                .collect();
            Some(MaNode { f: f.at(&x), pairs: ps })
        })
        .collect()
}

/// Scheme value at node `i` and the largest sensitivity `-dS/du_i` over the
/// pairs.
pub(crate) fn ma_operator(u: &[f64], i: usize, st: &MaNode) -> (f64, f64) {
    let mut val = f64::INFINITY;
    let mut diag: f64 = 0.0;
    for (e1, e2) in &st.pairs {
        let a = (u[e1.plus] + u[e1.minus] - 2.0 * u[i]) * e1.w + e1.m;
        let b = (u[e2.plus] + u[e2.minus] - 2.0 * u[i]) * e2.w + e2.m;
        let term = a.max(0.0) * b.max(0.0) + a.min(0.0) + b.min(0.0);
        val = val.min(term);
        let da = if a > 0.0 { b.max(0.0) } else { 1.0 };
        let db = if b > 0.0 { a.max(0.0) } else { 1.0 };
        diag = diag.max(2.0 * e1.w * da + 2.0 * e2.w * db);
    }
    (val - st.f, diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::JetSampler;

    #[test]
    fn direction_sets() {
        assert_eq!(lattice_directions(2, 1).len(), 4);
        assert_eq!(lattice_directions(2, 3).len(), 16);
        let pairs = orthogonal_pairs(3);
        assert_eq!(pairs.len(), 8);
        for (a, b) in pairs {
            assert_eq!(a[0] * b[0] + a[1] * b[1], 0);
        }
    }

    fn random_state(rng: &mut JetSampler, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.normal()).collect()
    }

    #[test]
    fn updates_are_monotone_in_neighbours() {
        let d = Domain::cube(2, 0.0, 1.0, 0.125).unwrap();
        let mut rng = JetSampler::new(3, 0);
        let ma = ma_stencil(&d, 3, &ScalarField::Constant(1.0), None);
        let env = direction_neighbours(&d, 3);
        let ax = axis_neighbours(&d);
        let h2 = d.h * d.h;
        for _ in 0..1000 {
            let u = random_state(&mut rng, d.node_count());
            let i = loop {
                let i = rng.index(d.node_count());
                if !d.is_boundary(i) {
                    break i;
                }
            };
            let k = rng.index(d.node_count());
            if k == i {
                continue;
            }
            let mut v = u.clone();
            v[k] += rng.uniform(0.0, 1.0);
            let st = ma[i].as_ref().unwrap();
            // the Jacobi step with dt <= h^2/4 scaled by the sensitivity
            let step = |s: &[f64]| {
                let (val, diag) = ma_operator(s, i, st);
                s[i] + val / diag.max(4.0 / h2)
            };
            let (su, _) = ma_operator(&u, i, st);
            let (sv, _) = ma_operator(&v, i, st);
            assert!(sv >= su);
            assert!(envelope_update(&v, i, &env[i]) >= envelope_update(&u, i, &env[i]));
            let n = ax[i].as_ref().unwrap();
            assert!(laplace_update(&v, n) >= laplace_update(&u, n));
            let _ = step(&u);
        }
    }

    #[test]
    fn ma_operator_exact_on_quadratics() {
        let d = Domain::cube(2, 0.0, 1.0, 0.125).unwrap();
        let st = ma_stencil(&d, 3, &ScalarField::Constant(1.0), None);
        let u: Vec<f64> = (0..d.node_count())
            .map(|i| {
                let x = d.point(i);
                0.5 * (x[0] * x[0] + x[1] * x[1])
            })
            .collect();
        for (i, s) in st.iter().enumerate() {
            if let Some(s) = s {
                assert!(ma_operator(&u, i, s).0.abs() < 1e-10);
            }
        }
    }
}
