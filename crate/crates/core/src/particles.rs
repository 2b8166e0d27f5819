//! Weighted particle ensembles: the empirical stand-in for the population
//! density `ρ(x, t)` over payoff space.

use rand::Rng;
use serde::Serialize;

use crate::approachability::RegionPartition;
use crate::error::{Error, Result};
use crate::polytope::PayoffPolytope;
use crate::simplex::SimplexVector;

/// Tolerance on `Σ w = 1`.
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleEnsemble {
    positions: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Current log-time `s`.
    time: f64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<Vec<f64>>, weights: Vec<f64>, time: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if weights.len() != positions.len() {
            return Err(Error::InvalidEnsemble(format!(
                "{} weights for {} particles",
                weights.len(),
                positions.len()
            )));
        }
        let dim = positions[0].len();
        if dim == 0 {
            return Err(Error::InvalidEnsemble("particles have dimension 0".into()));
        }
        if let Some(i) = positions.iter().position(|p| p.len() != dim) {
            return Err(Error::InvalidEnsemble(format!(
                "particle {i} has dimension {}, expected {dim}",
                positions[i].len()
            )));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidEnsemble("non-finite particle position".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidEnsemble("weights must be nonnegative".into()));
        }
        let total = crate::linalg::compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self {
            positions,
            weights,
            time,
        })
    }

    /// Equal weights `1/N`.
    pub fn equally_weighted(positions: Vec<Vec<f64>>) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Self::new(positions, vec![1.0 / n as f64; n], 0.0)
    }

    pub fn point_mass(x: Vec<f64>) -> Result<Self> {
        Self::new(vec![x], vec![1.0], 0.0)
    }

    /// `n` i.i.d. uniform draws on the polytope.
    pub fn sample_uniform<R: Rng + ?Sized>(poly: &PayoffPolytope, n: usize, rng: &mut R) -> Result<Self> {
        let sampler = poly.uniform_sampler();
        let positions = (0..n).map(|_| sampler.sample(rng)).collect();
        Self::equally_weighted(positions)
    }

    /// Re-weights the particles so that the region masses under `part` equal
    /// `q`, keeping weights uniform within each region.
    pub fn reweighted_to(&self, part: &RegionPartition, q: &SimplexVector) -> Result<Self> {
        let labels: Vec<usize> = self.positions.iter().map(|x| part.assign(x)).collect();
        let mut counts = vec![0usize; part.n_regions()];
        for l in &labels {
            counts[*l] += 1;
        }
        for (k, (c, qk)) in counts.iter().zip(q.as_slice()).enumerate() {
            if *c == 0 && *qk > 0.0 {
                return Err(Error::InvalidEnsemble(format!(
                    "region {k} holds no particles but needs mass {qk}"
                )));
            }
        }
        let mut weights: Vec<f64> = labels
            .iter()
            .map(|l| q[*l] / counts[*l] as f64)
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self::new(self.positions.clone(), weights, self.time)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.positions
    }

    pub(crate) fn set_time(&mut self, s: f64) {
        self.time = s;
    }

    /// Weighted standard deviation of the positions around their mean
    /// (root of the trace of the covariance).
    pub fn spread(&self) -> f64 {
        let mean = mean_state(self);
        self.positions
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * crate::linalg::dist(x, &mean).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Mean state `ρ̄ = Σ w_i x_i`.
pub fn mean_state(rho: &ParticleEnsemble) -> Vec<f64> {
    let mut mean = vec![0.0; rho.dim()];
    for (x, w) in rho.positions.iter().zip(&rho.weights) {
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += w * xi;
        }
    }
    mean
}
