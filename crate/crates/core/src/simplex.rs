use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ w = 1` for a [`SimplexVector`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point of the probability simplex Δ(A): a population strategy `q` or a
/// target weighting `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSimplex("empty weight vector".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0 || **w > 1.0)
        {
            return Err(Error::InvalidSimplex(format!(
                "component {i} = {w} is outside [0, 1]"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidSimplex(format!(
                "components sum to {total}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Builds a simplex vector from nonnegative masses by normalising them.
    /// Used where weights come out of sums of particle weights, which only add
    /// up to 1 up to rounding.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|m| *m < 0.0 || !m.is_finite()) {
            return Err(Error::InvalidSimplex(format!(
                "masses {masses:?} cannot be normalised"
            )));
        }
        Ok(Self(masses.into_iter().map(|m| m / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "simplex of dimension 0");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, k: usize) -> Self {
        assert!(k < n, "vertex {k} out of range for Δ({n})");
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        Self(w)
    }

    /// Euclidean projection of an arbitrary vector onto the simplex
    /// (sort-and-threshold).
    pub fn project(v: &[f64]) -> Self {
        let mut sorted = v.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut cumulative = 0.0;
        let mut theta = 0.0;
        for (i, s) in sorted.iter().enumerate() {
            cumulative += s;
            let candidate = (cumulative - 1.0) / (i + 1) as f64;
            if s - candidate > 0.0 {
                theta = candidate;
            }
        }
        let w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
        let total: f64 = w.iter().sum();
        Self(w.into_iter().map(|x| x / total).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Convex combination `(1 − alpha)·self + alpha·other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        let w = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect();
        Self::project_rounding(w)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn project_rounding(mut w: Vec<f64>) -> Self {
        for x in &mut w {
            *x = x.clamp(0.0, 1.0);
        }
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        Self(w)
    }
}

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(s: SimplexVector) -> Self {
        s.0
    }
}

impl std::ops::Index<usize> for SimplexVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sums_and_negatives() {
        assert!(SimplexVector::new(vec![0.5, 0.4]).is_err());
        assert!(SimplexVector::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexVector::new(vec![]).is_err());
        assert!(SimplexVector::new(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn projection_lands_on_simplex() {
        let p = SimplexVector::project(&[0.9, 0.3, -0.2]);
        let s: f64 = p.as_slice().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p.as_slice().iter().all(|x| *x >= 0.0));
        // points already on the simplex are fixed
        let q = SimplexVector::project(&[0.2, 0.3, 0.5]);
        assert!(q.max_abs_diff(&SimplexVector::new(vec![0.2, 0.3, 0.5]).unwrap()) < 1e-15);
    }
}
