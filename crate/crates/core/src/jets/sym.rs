//! Dense symmetric matrices stored as a packed upper triangle, with a
//! cyclic Jacobi eigensolver.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A real symmetric `n x n` matrix.
///
/// Only the upper triangle is stored, so symmetry holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    upper: Vec<f64>,
}

/// Ascending eigenvalues with an orthonormal eigenframe.
///
/// `vectors[k]` is the unit eigenvector belonging to `values[k]`.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, s);
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from full rows, averaging the two triangles.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Ok(Self::from_fn(n, |i, j| 0.5 * (rows[i][j] + rows[j][i])))
    }

    /// Outer product `s * v v^T`.
    pub fn outer(v: &[f64], s: f64) -> Self {
        Self::from_fn(v.len(), |i, j| s * v[i] * v[j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[packed_index(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.n, i, j);
        self.upper[k] = v;
    }

    /// Packed upper-triangle entries, row by row.
    pub fn packed(&self) -> &[f64] {
        &self.upper
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    /// `a * self + b * other`, entrywise in packed order.
    pub fn lin_comb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        debug_assert_eq!(x.n, y.n);
        Self {
            n: x.n,
            upper: x
                .upper
                .iter()
                .zip(&y.upper)
                .map(|(u, v)| a * u + b * v)
                .collect(),
        }
    }

    /// Overwrites `self` with `other` without reallocating.
    pub fn copy_from(&mut self, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        self.upper.copy_from_slice(&other.upper);
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::lin_comb(1.0, self, 1.0, other)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|v| s * v).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// The quadratic form `<A v, v>`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            s += self.get(i, i) * v[i] * v[i];
            for j in (i + 1)..self.n {
                s += 2.0 * self.get(i, j) * v[i] * v[j];
            }
        }
        s
    }

    /// Frobenius inner product `tr(A B)`.
    pub fn frobenius_dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let w = if i == j { 1.0 } else { 2.0 };
                s += w * self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    /// Determinant. Closed forms up to `n = 3`, partial-pivot LU above.
    pub fn det(&self) -> f64 {
        let g = |i, j| self.get(i, j);
        match self.n {
            0 => 1.0,
            1 => g(0, 0),
            2 => g(0, 0) * g(1, 1) - g(0, 1) * g(0, 1),
            3 => {
                g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(1, 2))
                    - g(0, 1) * (g(0, 1) * g(2, 2) - g(1, 2) * g(0, 2))
                    + g(0, 2) * (g(0, 1) * g(1, 2) - g(1, 1) * g(0, 2))
            }
            n => {
                let mut m = self.to_rows();
                let mut det = 1.0;
                for col in 0..n {
                    let piv = (col..n)
                        .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                        .unwrap();
                    if m[piv][col] == 0.0 {
                        return 0.0;
                    }
                    if piv != col {
                        m.swap(piv, col);
                        det = -det;
                    }
                    det *= m[col][col];
                    for row in (col + 1)..n {
                        let f = m[row][col] / m[col][col];
                        for k in col..n {
                            m[row][k] -= f * m[col][k];
                        }
                    }
                }
                det
            }
        }
    }

    /// Ascending eigenvalues only. Uses a closed form for `n <= 2`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![self.get(0, 0)],
            2 => {
                let (a, b, c) = (self.get(0, 0), self.get(0, 1), self.get(1, 1));
                let m = 0.5 * (a + c);
                let d = (0.5 * (a - c)).hypot(b);
                vec![m - d, m + d]
            }
            _ => jacobi(self).values,
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    /// Full eigendecomposition by cyclic Jacobi.
    pub fn eigen(&self) -> Result<SymEigen> {
        if !self.is_finite() {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(jacobi(self))
    }
}

/// Cyclic Jacobi with Rutishauser's rotation formulas.
fn jacobi(m: &SymMatrix) -> SymEigen {
    let n = m.n;
    let mut a = m.to_rows();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = m.frobenius();

    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[p][p] -= t * apq;
                a[q][q] += t * apq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[r][p];
                        let arq = a[r][q];
                        a[r][p] = arp - s * (arq + tau * arp);
                        a[p][r] = a[r][p];
                        a[r][q] = arq + s * (arp - tau * arq);
                        a[q][r] = a[r][q];
                    }
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = vp - s * (vq + tau * vp);
                    row[q] = vq + s * (vp - tau * vq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    SymEigen {
        values: order.iter().map(|&k| a[k][k]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..n).map(|r| v[r][k]).collect())
            .collect(),
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &SymMatrix, e: &SymEigen) -> f64 {
        let mut worst: f64 = 0.0;
        for (lam, v) in e.values.iter().zip(&e.vectors) {
            let av = a.mul_vec(v);
            let r: f64 = av
                .iter()
                .zip(v)
                .map(|(x, y)| (x - lam * y).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        worst
    }

    #[test]
    fn diagonal_case() {
        let e = SymMatrix::diag(&[2.0, 3.0]).eigen().unwrap();
        assert_eq!(e.values, vec![2.0, 3.0]);
        assert_eq!(e.vectors[0], vec![1.0, 0.0]);
        assert_eq!(e.vectors[1], vec![0.0, 1.0]);
    }

    #[test]
    fn swap_matrix() {
        let a = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = a.eigen().unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // eigenvector for -1 is (1,-1)/sqrt2 up to sign
        let v = &e.vectors[0];
        assert!((v[0].abs() - s).abs() < 1e-12 && (v[0] + v[1]).abs() < 1e-12);
        let w = &e.vectors[1];
        assert!((w[0].abs() - s).abs() < 1e-12 && (w[0] - w[1]).abs() < 1e-12);
        assert!(residual(&a, &e) <= 1e-12 * a.frobenius());
    }

    #[test]
    fn rejects_non_finite() {
        let a = SymMatrix::diag(&[1.0, f64::NAN]);
        assert!(matches!(a.eigen(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn lu_det_matches_closed_form_on_block() {
        let mut a = SymMatrix::zeros(4);
        a.set(0, 0, 2.0);
        a.set(0, 1, 1.0);
        a.set(1, 1, 3.0);
        a.set(2, 2, -1.0);
        a.set(3, 3, 4.0);
        a.set(2, 3, 0.5);
        let expected = (2.0 * 3.0 - 1.0) * (-1.0 * 4.0 - 0.25);
        assert!((a.det() - expected).abs() < 1e-12);
    }

    #[test]
    fn frobenius_dot_and_quad_form() {
        let a = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, -1.0]]).unwrap();
        assert_eq!(a.frobenius_dot(&SymMatrix::identity(2)), 0.0);
        assert_eq!(a.quad_form(&[1.0, 1.0]), 4.0);
        assert!((a.frobenius() - 10f64.sqrt()).abs() < 1e-15);
    }
}
