//! Quadratic cost and the backward Riccati equation for its value matrix.
//!
//! With running cost `g = ½ (y − x)ᵀ Q (y − x)` and terminal cost
//! `Ψ = ½ (y − x)ᵀ S (y − x)`, the quadratic ansatz `φ = ½ eᵀ Φ_t e` reduces
//! the value equation to `Φ̇ = Φ − Q` on `[0, T]` with `Φ_T = S`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest internal RK4 step.
const MAX_SUBSTEP: f64 = 0.05;
/// Relative asymmetry tolerated in cost matrices.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    q: DMatrix<f64>,
    s: DMatrix<f64>,
    horizon: f64,
}

impl CostSpec {
    pub fn new(q: DMatrix<f64>, s: DMatrix<f64>, horizon: f64) -> Result<Self> {
        check_spd("Q", &q)?;
        check_spd("S", &s)?;
        if q.shape() != s.shape() {
            return Err(Error::DimensionMismatch {
                expected: q.nrows(),
                actual: s.nrows(),
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidCost(format!("horizon {horizon} must be positive")));
        }
        Ok(Self { q, s, horizon })
    }

    /// `Q = S = I_m`.
    pub fn identity(m: usize, horizon: f64) -> Result<Self> {
        Self::new(DMatrix::identity(m, m), DMatrix::identity(m, m), horizon)
    }

    pub fn from_rows(q: &[Vec<f64>], s: &[Vec<f64>], horizon: f64) -> Result<Self> {
        Self::new(matrix_from_rows("Q", q)?, matrix_from_rows("S", s)?, horizon)
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn running(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `g(x, y) = ½ (y − x)ᵀ Q (y − x)`.
    pub fn running_cost(&self, x: &[f64], y: &[f64]) -> f64 {
        quadratic(&self.q, x, y)
    }

    /// `Ψ(x, y) = ½ (y − x)ᵀ S (y − x)`.
    pub fn terminal_cost(&self, x: &[f64], y: &[f64]) -> f64 {
        quadratic(&self.s, x, y)
    }
}

fn quadratic(m: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let ei = y[i] - x[i];
        for j in 0..n {
            total += ei * m[(i, j)] * (y[j] - x[j]);
        }
    }
    0.5 * total
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidCost(format!("{name} must be a nonempty square matrix")));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

fn check_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidCost(format!("{name} must be a nonempty square matrix")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCost(format!("{name} has non-finite entries")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::InvalidCost(format!("{name} is not symmetric")));
    }
    let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if !(min_eig > 0.0) {
        return Err(Error::InvalidCost(format!(
            "{name} is not positive definite (smallest eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiTrajectory {
    pub times: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
}

impl RiccatiTrajectory {
    /// `Φ` at the grid time nearest to `t`, with `t` clipped to
    /// `[lower, T]`.
    pub fn nearest(&self, t: f64, lower: f64) -> &DMatrix<f64> {
        let first = self.times[0];
        let last = *self.times.last().expect("nonempty grid");
        let t = t.clamp(lower.max(first), last);
        let h = (last - first) / (self.times.len() - 1) as f64;
        let k = ((t - first) / h).round() as usize;
        &self.matrices[k.min(self.matrices.len() - 1)]
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty grid")
    }
}

/// Backward RK4 integration of `Φ̇ = Φ − Q` from `Φ_T = S` on a uniform grid
/// of `grid_steps` intervals.
pub fn riccati_solve(spec: &CostSpec, grid_steps: usize) -> Result<RiccatiTrajectory> {
    if grid_steps < 2 {
        return Err(Error::InvalidParameter(format!("grid_steps = {grid_steps} must be at least 2")));
    }
    let horizon = spec.horizon;
    let h = horizon / grid_steps as f64;
    let substeps = (h / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let dt = -h / substeps as f64;
    let rhs = |phi: &DMatrix<f64>| phi - &spec.q;

    let mut matrices = vec![spec.s.clone(); grid_steps + 1];
    let mut phi = spec.s.clone();
    for k in (0..grid_steps).rev() {
        for _ in 0..substeps {
            let k1 = rhs(&phi);
            let k2 = rhs(&(&phi + &k1 * (0.5 * dt)));
            let k3 = rhs(&(&phi + &k2 * (0.5 * dt)));
            let k4 = rhs(&(&phi + &k3 * dt));
            phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        // symmetrise away rounding drift
        phi = (&phi + phi.transpose()) * 0.5;
        matrices[k] = phi.clone();
    }
    let times = (0..=grid_steps)
        .map(|k| if k == grid_steps { horizon } else { k as f64 * h })
        .collect();
    Ok(RiccatiTrajectory { times, matrices })
}
