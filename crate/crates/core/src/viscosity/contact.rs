//! Discrete contact jets: quadratics from a finite test family that touch a
//! grid function from above (upper) or below (lower) on a stencil.

use serde::{Deserialize, Serialize};

use super::GridFunction;
use crate::error::{Error, Result};
use crate::jets::{Jet, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactJetSet {
    pub node: usize,
    pub x: Vec<f64>,
    pub side: Side,
    pub jets: Vec<Jet>,
}

impl ContactJetSet {
    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }
}

/// Contact jets at an interior node on the `(2k+1)^n` stencil. Candidates
/// are `(u(x), p, A)` with `p` the central difference gradient moved on an
/// `h`-lattice and `A` the second difference Hessian (and its least lift
/// along `I` that touches on the whole stencil) moved by `+/- s*h` along the
/// identity and its eigendirections (`s` in `{1, 2}`); a candidate is kept
/// when its quadratic touches from the requested side within the slack.
/// Lower jets of `u` are the negated upper jets of `-u`.
pub fn contact_jets(u: &GridFunction, node: usize, side: Side, k: usize, slack: f64) -> Result<ContactJetSet> {
    let d = &u.domain;
    if node >= u.len() {
        return Err(Error::InvalidInput(format!("node {node} out of range")));
    }
    if k == 0 || !d.is_interior_at_depth(node, k) {
        return Err(Error::InvalidInput(format!("node {node} has no radius-{k} stencil inside the grid")));
    }
    let mut jets = Vec::new();
    visit_contact_jets(u, node, side, k, slack, |j| {
        jets.push(j.clone());
        true
    });
    Ok(ContactJetSet {
        node,
        x: d.point(node),
        side,
        jets,
    })
}

/// Feeds the contact jets of [`contact_jets`] to `visit` in the same order
/// without collecting them; `visit` returns `false` to stop early. Returns
/// whether every jet was visited. The node must be interior at depth `k`.
pub(crate) fn visit_contact_jets(
    u: &GridFunction,
    node: usize,
    side: Side,
    k: usize,
    slack: f64,
    visit: impl FnMut(&Jet) -> bool,
) -> bool {
    let sign = match side {
        Side::Upper => 1.0,
        Side::Lower => -1.0,
    };
    upper_jets(u, node, k, slack, sign, visit)
}

/// Upper contact jets of `sign * u`, multiplied by `sign`.
fn upper_jets(u: &GridFunction, node: usize, k: usize, slack: f64, sign: f64, mut visit: impl FnMut(&Jet) -> bool) -> bool {
    let values = &u.values;
    let d = &u.domain;
    let n = d.dim();
    let h = d.h;
    let u0 = sign * values[node];
    if !u0.is_finite() {
        return true;
    }
    let idx = d.multi_index(node);
    let at = |off: &[i64]| -> f64 {
        let m: Vec<usize> = idx.iter().zip(off).map(|(i, o)| (*i as i64 + o) as usize).collect();
        sign * values[d.linear_index(&m)]
    };
    // finite differences use the centre value in place of sentinels
    let fd = |off: &[i64]| {
        let v = at(off);
        if v.is_finite() {
            v
        } else {
            u0
        }
    };
    let unit = |i: usize, s: i64| -> Vec<i64> {
        let mut o = vec![0; n];
        o[i] = s;
        o
    };
    let p_fd: Vec<f64> = (0..n).map(|i| (fd(&unit(i, 1)) - fd(&unit(i, -1))) / (2.0 * h)).collect();
    let a_fd = SymMatrix::from_fn(n, |i, j| {
        if i == j {
            (fd(&unit(i, 1)) - 2.0 * u0 + fd(&unit(i, -1))) / (h * h)
        } else {
            let mut pp = vec![0; n];
            pp[i] = 1;
            pp[j] = 1;
            let mut pm = pp.clone();
            pm[j] = -1;
            let mut mp = pp.clone();
            mp[i] = -1;
            let mm: Vec<i64> = pp.iter().map(|v| -v).collect();
            (fd(&pp) - fd(&pm) - fd(&mp) + fd(&mm)) / (4.0 * h * h)
        }
    });

    let stencil: Vec<(Vec<f64>, f64)> = lattice(n, k as i64)
        .into_iter()
        .filter(|o| o.iter().any(|v| *v != 0))
        .map(|o| {
            let v = at(&o);
            (o.iter().map(|c| *c as f64 * h).collect(), v)
        })
        .collect();

    let mut a_moves = vec![SymMatrix::zeros(n)];
    let frame: Vec<Vec<f64>> = a_fd.eigen().map(|e| e.vectors).unwrap_or_default();
    for s in [1.0, 2.0] {
        for sg in [1.0, -1.0] {
            a_moves.push(SymMatrix::scaled_identity(n, sg * s * h));
            if n > 1 {
                for v in &frame {
                    a_moves.push(SymMatrix::outer(v, sg * s * h));
                }
            }
        }
    }

    // quadratic forms are linear in A: tabulate them per stencil point
    let forms = |a: &SymMatrix| -> Vec<f64> { stencil.iter().map(|(dx, _)| a.quad_form(dx)).collect() };
    let move_forms: Vec<Vec<f64>> = a_moves.iter().map(forms).collect();
    let fd_forms = forms(&a_fd);
    let half_sq: Vec<f64> = stencil
        .iter()
        .map(|(dx, _)| 0.5 * dx.iter().map(|c| c * c).sum::<f64>())
        .collect();
    // candidate Hessians, already multiplied by `sign`
    let signed = |a: SymMatrix| if sign < 0.0 { a.scale(-1.0) } else { a };
    let plain: Vec<SymMatrix> = a_moves.iter().map(|m| signed(a_fd.add(m))).collect();

    let mut jet = Jet {
        r: sign * u0,
        p: vec![0.0; n],
        a: SymMatrix::zeros(n),
    };
    let mut lins = vec![0.0; stencil.len()];
    let mut kept: Vec<usize> = Vec::with_capacity(a_moves.len());
    for dp in lattice(n, 1) {
        let p: Vec<f64> = p_fd.iter().zip(&dp).map(|(a, b)| a + *b as f64 * h).collect();
        for (l, (dx, _)) in lins.iter_mut().zip(&stencil) {
            *l = p.iter().zip(dx).map(|(a, b)| a * b).sum();
        }
        for (q, v) in jet.p.iter_mut().zip(&p) {
            *q = sign * v;
        }
        // second differences do not see the diagonal stencil points; lift
        // along I by the least amount that restores touching there
        let lift = stencil
            .iter()
            .enumerate()
            .filter(|(_, (_, v))| v.is_finite())
            .map(|(k, (_, v))| (v - slack - u0 - lins[k] - 0.5 * fd_forms[k]) / half_sq[k])
            .fold(0.0, f64::max);
        let touches = |mf: &[f64], l: f64| {
            stencil.iter().enumerate().all(|(k, (_, v))| {
                if *v == f64::NEG_INFINITY {
                    return true;
                }
                let phi = u0 + lins[k] + 0.5 * (fd_forms[k] + mf[k]) + l * half_sq[k];
                v.is_finite() && phi >= v - slack
            })
        };
        kept.clear();
        for (m, mf) in move_forms.iter().enumerate() {
            if touches(mf, 0.0) {
                kept.push(m);
                jet.a.copy_from(&plain[m]);
                if !visit(&jet) {
                    return false;
                }
            }
        }
        if lift > 0.0 {
            let lifted = signed(SymMatrix::scaled_identity(n, lift));
            for (m, mf) in move_forms.iter().enumerate() {
                if !touches(mf, lift) {
                    continue;
                }
                let a = plain[m].add(&lifted);
                // moves are distinct, so only a lifted candidate can repeat one
                if kept.iter().any(|&i| plain[i] == a) {
                    continue;
                }
                jet.a.copy_from(&a);
                if !visit(&jet) {
                    return false;
                }
            }
        }
    }
    true
}

/// All integer vectors in `{-k..=k}^n`, in lexicographic order.
fn lattice(n: usize, k: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-k..=k).map(move |c| {
                    let mut w = v.clone();
                    w.push(c);
                    w
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Domain;

    fn line() -> Domain {
        Domain::cube(1, -1.0, 1.0, 1.0 / 64.0).unwrap()
    }

    #[test]
    fn smooth_quadratic_jets() {
        let d = Domain::cube(2, -1.0, 1.0, 0.125).unwrap();
        let u = GridFunction::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let node = d.linear_index(&[10, 6]);
        let x = d.point(node);
        let slack = 4.0 * d.h * d.h;
        let up = contact_jets(&u, node, Side::Upper, 1, slack).unwrap();
        let exact = Jet {
            r: u.values[node],
            p: x.clone(),
            a: SymMatrix::identity(2),
        };
        assert!(up.jets.iter().any(|j| (j.p[0] - x[0]).abs() < 1e-12 && j.a.add(&exact.a.scale(-1.0)).frobenius() < 1e-9));
        assert!(up.jets.iter().any(|j| j.a.lambda_min() > 1.0));
        let low = contact_jets(&u, node, Side::Lower, 1, slack).unwrap();
        assert!(low.jets.iter().any(|j| j.a.lambda_max() < 1.0));
    }

    #[test]
    fn abs_kink() {
        let d = line();
        let u = GridFunction::from_fn(&d, |x| x[0].abs());
        let node = d.linear_index(&[64]);
        let slack = 4.0 * d.h * d.h;
        let low = contact_jets(&u, node, Side::Lower, 1, slack).unwrap();
        assert!(!low.is_empty());
        assert!(low.jets.iter().all(|j| j.a.get(0, 0) > 10.0 && j.p[0].abs() <= 1.0 + 1e-12));
        let up = contact_jets(&u.neg(), node, Side::Upper, 1, slack).unwrap();
        assert!(up.jets.iter().all(|j| j.a.get(0, 0) < -10.0));
    }

    #[test]
    fn touching_is_verified() {
        let d = Domain::cube(2, -1.0, 1.0, 0.25).unwrap();
        let u = GridFunction::from_fn(&d, |x| (x[0] * 3.0).sin() * x[1]);
        let slack = 4.0 * d.h * d.h;
        for node in 0..u.len() {
            if !d.is_interior_at_depth(node, 1) {
                continue;
            }
            let set = contact_jets(&u, node, Side::Upper, 1, slack).unwrap();
            let x = d.point(node);
            for j in &set.jets {
                assert_eq!(j.r, u.values[node]);
                for other in 0..u.len() {
                    let y = d.point(other);
                    let dx: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
                    if dx.iter().all(|v| v.abs() <= d.h * 1.000001) {
                        let phi = j.r + j.p[0] * dx[0] + j.p[1] * dx[1] + 0.5 * j.a.quad_form(&dx);
                        assert!(phi >= u.values[other] - slack - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn sentinel_node_is_empty_and_boundary_rejected() {
        let d = line();
        let mut u = GridFunction::constant(&d, 0.0);
        u.values[10] = f64::NEG_INFINITY;
        assert!(contact_jets(&u, 10, Side::Upper, 1, 1e-3).unwrap().is_empty());
        assert!(contact_jets(&u, 0, Side::Upper, 1, 1e-3).is_err());
        // a -inf neighbour imposes nothing from above
        assert!(!contact_jets(&u, 11, Side::Upper, 1, 1e-3).unwrap().is_empty());
    }
}
