pub mod approachability;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod harsanyi;
pub mod linalg;
pub mod particles;
pub mod polytope;
pub mod riccati;
pub mod sim;
pub mod simplex;

pub use approachability::{RegionPartition, StateDrift, Target};
pub use equilibrium::{EquilibriumCandidate, EstimateError, FlowParameters};
pub use error::{Error, Result};
pub use game::{regret_transform, ScalarGame, VectorPayoffGame};
pub use harsanyi::{BayesianStrategy, HarsanyiGame};
pub use particles::{mean_state, ParticleEnsemble};
pub use polytope::{contains, payoff_polytope, PayoffPolytope};
pub use riccati::{riccati_solve, CostSpec, RiccatiTrajectory};
pub use sim::{simulate_population, SimulationConfig, SimulationMode, SimulationRecord};
pub use simplex::SimplexVector;
