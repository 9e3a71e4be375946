use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned box with a uniform grid spacing.
///
/// Nodes are `lo + i*h` for `i = 0..counts[k]` along each axis. Linear node
/// indices run with axis 0 slowest (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, h: f64) -> Result<Self> {
        let d = Self { lo, hi, h };
        d.validate()?;
        Ok(d)
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64, h: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n], h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lo.len(),
                found: self.hi.len(),
            });
        }
        if self.lo.is_empty() {
            return Err(Error::InvalidInput("domain has dimension 0".into()));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing {} must be > 0", self.h)));
        }
        for (l, u) in self.lo.iter().zip(&self.hi) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidInput(format!("box side [{l}, {u}] is empty")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Nodes per axis: `floor((hi - lo)/h) + 1`.
    pub fn counts(&self) -> Vec<usize> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, u)| ((u - l) / self.h + 1e-9).floor() as usize + 1)
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        let counts = self.counts();
        let mut idx = vec![0; counts.len()];
        for k in (0..counts.len()).rev() {
            idx[k] = lin % counts[k];
            lin /= counts[k];
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        let counts = self.counts();
        idx.iter()
            .zip(&counts)
            .fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn point_of(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.lo)
            .map(|(&i, l)| l + i as f64 * self.h)
            .collect()
    }

    pub fn point(&self, lin: usize) -> Vec<f64> {
        self.point_of(&self.multi_index(lin))
    }

    /// True when every index is at least `depth` away from both ends.
    pub fn is_interior_at_depth(&self, lin: usize, depth: usize) -> bool {
        let counts = self.counts();
        self.multi_index(lin)
            .iter()
            .zip(&counts)
            .all(|(&i, &c)| i >= depth && i + depth < c)
    }

    pub fn is_boundary(&self, lin: usize) -> bool {
        !self.is_interior_at_depth(lin, 1)
    }

    /// Whether `x` lies in the closed box (with a small relative slack).
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, u))| *v >= l - 1e-12 * (1.0 + l.abs()) && *v <= u + 1e-12 * (1.0 + u.abs()))
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Same box with a different spacing.
    pub fn with_spacing(&self, h: f64) -> Result<Self> {
        Self::new(self.lo.clone(), self.hi.clone(), h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_count_formula() {
        let d = Domain::new(vec![0.0, -1.0], vec![1.0, 1.0], 0.25).unwrap();
        assert_eq!(d.counts(), vec![5, 9]);
        assert_eq!(d.node_count(), 45);
        // non-divisible side rounds down
        let d = Domain::new(vec![0.0], vec![1.0], 0.3).unwrap();
        assert_eq!(d.counts(), vec![4]);
    }

    #[test]
    fn index_round_trip() {
        let d = Domain::cube(3, 0.0, 1.0, 0.5).unwrap();
        for lin in 0..d.node_count() {
            assert_eq!(d.linear_index(&d.multi_index(lin)), lin);
        }
        assert_eq!(d.point(d.linear_index(&[1, 2, 0])), vec![0.5, 1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(Domain::new(vec![1.0], vec![0.0], 0.1).is_err());
        assert!(Domain::new(vec![0.0], vec![1.0], 0.0).is_err());
        assert!(Domain::new(vec![0.0], vec![1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn boundary_flags() {
        let d = Domain::cube(2, 0.0, 1.0, 0.5).unwrap();
        let interior: Vec<usize> = (0..d.node_count()).filter(|&i| !d.is_boundary(i)).collect();
        assert_eq!(interior, vec![4]);
    }
}
