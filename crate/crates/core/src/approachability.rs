//! 1st-moment approachability against a population with known action
//! distribution `q`.
//!
//! When the opponent is a random draw from the population, the best a player
//! can steer the average payoff towards is any point of
//! `T(q) = conv{u(l, q) : l ∈ A}`. For a target `y ∈ T(q)` the state space is
//! split into regions by the separation scores
//!
//! ```text
//! h_k(x) = (x − y)ᵀ (u(k, q) − y)
//! ```
//!
//! and the bang-bang strategy plays `argmin_k h_k(x)`. Because
//! `y = Σ p_k u(k, q)` for some `p ∈ Δ(A)`, the weighted sum `Σ p_k h_k(x)`
//! vanishes, so the chosen action always has `h_k(x) ≤ 0`: the Blackwell
//! inequality holds at every state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::VectorPayoffGame;
use crate::linalg::{dot, norm, sub};
use crate::polytope::PayoffPolytope;
use crate::simplex::SimplexVector;

/// Slack for the Blackwell inequality.
pub const BLACKWELL_TOL: f64 = 1e-9;

/// Point in payoff space the population steers towards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Target(Vec<f64>);

impl Target {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("target {y:?} is not finite")));
        }
        Ok(Self(y))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// State-dependent payoff `f = (1/t)(u(a, q) − x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateDrift {
    pub value: Vec<f64>,
    pub time: f64,
}

pub fn drift(
    game: &VectorPayoffGame,
    a: usize,
    q: &SimplexVector,
    x: &[f64],
    t: f64,
) -> Result<StateDrift> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    game.check_point(x)?;
    let u = game.mixed_payoff(a, q)?;
    Ok(StateDrift {
        value: u.iter().zip(x).map(|(u, x)| (u - x) / t).collect(),
        time: t,
    })
}

/// Expected value of the projected game at `x`:
/// `min_a λᵀ(u(a, q) − x)` with its lowest-index minimiser. The `1/t` factor
/// is dropped; positive scaling never moves the minimiser.
pub fn expected_projected_value(
    game: &VectorPayoffGame,
    q: &SimplexVector,
    x: &[f64],
    lambda: &[f64],
) -> Result<(f64, usize)> {
    game.check_point(x)?;
    game.check_point(lambda)?;
    let n = norm(lambda);
    if n == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("λ must be a unit vector, ‖λ‖ = {n}")));
    }
    let mut best = (f64::INFINITY, 0);
    for (a, u) in game.anchors(q)?.iter().enumerate() {
        let v = dot(lambda, &sub(u, x));
        if v < best.0 {
            best = (v, a);
        }
    }
    Ok(best)
}

/// Blackwell's condition for the singleton target `{y}`:
/// `(x − y)ᵀ(x − y + f) ≤ 0` (with [`BLACKWELL_TOL`] slack).
pub fn blackwell_step_condition(x: &[f64], y: &Target, d: &StateDrift) -> bool {
    let e = sub(x, y.as_slice());
    let lhs: f64 = e
        .iter()
        .zip(&d.value)
        .map(|(e, f)| e * (e + f))
        .sum();
    lhs <= BLACKWELL_TOL
}

/// `T(q) = conv{u(l, q) : l ∈ A}`.
pub fn target_set(game: &VectorPayoffGame, q: &SimplexVector) -> Result<PayoffPolytope> {
    PayoffPolytope::from_points(game.anchors(q)?)
}

/// `y ∈ T(q)`.
pub fn is_approachable(y: &Target, game: &VectorPayoffGame, q: &SimplexVector) -> Result<bool> {
    game.check_point(y.as_slice())?;
    target_set(game, q)?.contains(y.as_slice())
}

/// Weights `p` with `Σ_l p_l u(l, q) = y`, when `y ∈ T(q)`.
pub fn target_weights(
    game: &VectorPayoffGame,
    q: &SimplexVector,
    y: &Target,
) -> Result<Option<SimplexVector>> {
    game.check_point(y.as_slice())?;
    let anchors = game.anchors(q)?;
    // work with the raw anchors (no dedup) so weights index actions
    let n = anchors.len();
    let poly = PayoffPolytope::from_points(&anchors)?;
    let Some(w) = poly.convex_weights(y.as_slice())? else {
        return Ok(None);
    };
    // map deduplicated vertex weights back to the first action with that anchor
    let mut p = vec![0.0; n];
    for (vw, v) in w.iter().zip(poly.vertices()) {
        let k = anchors
            .iter()
            .position(|a| a.iter().zip(v).all(|(x, y)| (x - y).abs() <= crate::polytope::DEDUP_TOL))
            .expect("vertex comes from an anchor");
        p[k] += vw;
    }
    Ok(Some(SimplexVector::from_masses(p)?))
}

/// Bang-bang partition of payoff space for a target `y` and population
/// strategy `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionPartition {
    target: Target,
    anchors: Vec<Vec<f64>>,
    /// `u(k, q) − y`
    offsets: Vec<Vec<f64>>,
}

impl RegionPartition {
    pub fn new(game: &VectorPayoffGame, q: &SimplexVector, y: Target) -> Result<Self> {
        game.check_point(y.as_slice())?;
        Ok(Self::from_anchors(game.anchors(q)?, y))
    }

    pub fn from_anchors(anchors: Vec<Vec<f64>>, target: Target) -> Self {
        let offsets = anchors.iter().map(|u| sub(u, target.as_slice())).collect();
        Self {
            target,
            anchors,
            offsets,
        }
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn n_regions(&self) -> usize {
        self.anchors.len()
    }

    /// `h_k(x) = (x − y)ᵀ(u(k, q) − y)`.
    pub fn score(&self, k: usize, x: &[f64]) -> f64 {
        let y = self.target.as_slice();
        x.iter()
            .zip(y)
            .zip(&self.offsets[k])
            .map(|((x, y), o)| (x - y) * o)
            .sum()
    }

    /// `argmin_k h_k(x)`, ties to the lowest index.
    pub fn assign(&self, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for k in 0..self.n_regions() {
            let s = self.score(k, x);
            if s < best.0 {
                best = (s, k);
            }
        }
        best.1
    }

    /// True when `x` lies in the literal half-space
    /// `R_k = {ξ | (ξ − y)ᵀ(u(k, q) − y) ≤ 0}`.
    pub fn in_half_space(&self, k: usize, x: &[f64]) -> bool {
        self.score(k, x) <= 0.0
    }
}

/// Action played at `x` by the bang-bang strategy.
pub fn region_assign(part: &RegionPartition, x: &[f64]) -> usize {
    part.assign(x)
}

/// Projection onto the nonpositive orthant.
pub fn orthant_projection(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.min(0.0)).collect()
}
