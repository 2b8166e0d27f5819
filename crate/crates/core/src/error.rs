use thiserror::Error;

/// Errors raised by the game, approachability, equilibrium and simulation APIs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("action index {index} out of range for a game with {n_actions} actions")]
    ActionOutOfRange { index: usize, n_actions: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid simplex vector: {0}")]
    InvalidSimplex(String),

    #[error("invalid Harsanyi game: {0}")]
    InvalidHarsanyi(String),

    #[error("type `{0}` has zero prior probability")]
    ZeroProbabilityType(String),

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("direction vector must be nonzero")]
    ZeroDirection,

    #[error("particle ensemble is empty")]
    EmptyEnsemble,

    #[error("invalid particle ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid cost specification: {0}")]
    InvalidCost(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("target {0:?} is not approachable: it lies outside T(q)")]
    NotApproachable(Vec<f64>),

    #[error("candidate is not a fixed point (L = {lyapunov:e})")]
    NotFixedPoint { lyapunov: f64 },

    #[error("no convergence after {iterations} iterations (final L = {lyapunov:e})")]
    NoConvergence { iterations: usize, lyapunov: f64 },

    #[error(
        "finite-difference step {step} below particle resolution: h and h/2 Jacobian estimates differ by {relative_gap:.3} (relative)"
    )]
    UnresolvedJacobian { step: f64, relative_gap: f64 },

    #[error("particle {particle} left the state space by {distance:e} at s = {s}")]
    LeftStateSpace { particle: usize, distance: f64, s: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
