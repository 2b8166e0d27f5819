//! Population simulation in log-time.
//!
//! With `t = e^s` the average-payoff dynamics become `ẋ = u(a*, q) − x`, where
//! `a*` minimises `(Φ_t (x − y))ᵀ (u(a, q) − x)`. Every particle moves
//! exponentially towards an anchor point, so the flow is integrated exactly:
//! between switching events the state relaxes towards a fixed point `z`, and
//! the event times have closed forms.
//!
//! On a switching surface the Filippov velocity is `z − x` with `z − y` the
//! minimum `Φ`-norm point of `conv{u(k, q) − y}` over the tied actions. That
//! choice keeps the tied scores equal and leaves the others above them. At
//! `y ∈ T(q)` on the separating hyperplane it reduces to `z = y`, which is
//! playing the target weights `p`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::approachability::{is_approachable, Target};
use crate::equilibrium::{induced_density, EquilibriumCandidate};
use crate::error::{Error, Result};
use crate::game::VectorPayoffGame;
use crate::linalg::{dist, dot, mat_vec, norm, sub};
use crate::particles::{mean_state, ParticleEnsemble};
use crate::polytope::{payoff_polytope, PayoffPolytope, MEMBERSHIP_TOL};
use crate::riccati::{riccati_solve, CostSpec};
use crate::simplex::SimplexVector;

/// Largest log-time step.
pub const MAX_DS: f64 = 0.1;
/// Scores within this fraction of the score scale count as tied.
const TIE_TOL: f64 = 1e-10;
/// Absolute score noise, relative to the coordinate and offset scales.
const ROUNDING_TOL: f64 = 1e-14;
/// Tie tolerance of the fallback once the event budget is spent.
const LOOSE_TIE_TOL: f64 = 1e-6;
/// Switching events resolved per particle per step.
const MAX_EVENTS: usize = 64;

/// `argmin_a (Φ(x − y))ᵀ(u(a, q) − x)`, ties to the lowest index.
pub fn best_response(
    game: &VectorPayoffGame,
    q: &SimplexVector,
    x: &[f64],
    phi: &DMatrix<f64>,
    y: &Target,
) -> Result<usize> {
    game.check_point(x)?;
    game.check_point(y.as_slice())?;
    if phi.nrows() != x.len() || phi.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: phi.nrows(),
        });
    }
    let e = sub(x, y.as_slice());
    let g: Vec<f64> = (phi * nalgebra::DVector::from_column_slice(&e)).iter().copied().collect();
    let mut best = (f64::INFINITY, 0);
    for (a, u) in game.anchors(q)?.iter().enumerate() {
        let score = dot(&g, &sub(u, x));
        if score < best.0 {
            best = (score, a);
        }
    }
    Ok(best.1)
}

/// `x' = u(a, q) + (x − u(a, q)) e^{−ds}`.
pub fn step_agent(
    game: &VectorPayoffGame,
    x: &[f64],
    a: usize,
    q: &SimplexVector,
    ds: f64,
) -> Result<Vec<f64>> {
    if !(ds > 0.0) {
        return Err(Error::InvalidParameter(format!("step {ds} must be positive")));
    }
    game.check_point(x)?;
    let u = game.mixed_payoff(a, q)?;
    Ok(relax(x, &u, (-ds).exp()))
}

fn relax(x: &[f64], z: &[f64], decay: f64) -> Vec<f64> {
    x.iter().zip(z).map(|(xi, zi)| zi + (xi - zi) * decay).collect()
}

/// Anchors, target and metric for one step.
struct Frame {
    y: Vec<f64>,
    /// `u(k, q) − y`
    offsets: Vec<Vec<f64>>,
    /// Row-major `Φ`.
    phi: Vec<f64>,
    offset_scale: f64,
    /// Score error from rounding `x` near `y`.
    noise: f64,
}

impl Frame {
    fn new(anchors: Vec<Vec<f64>>, y: &[f64], phi: &DMatrix<f64>) -> Self {
        let offsets: Vec<Vec<f64>> = anchors.iter().map(|u| sub(u, y)).collect();
        let offset_scale = offsets.iter().map(|w| norm(w)).fold(0.0, f64::max);
        let m = y.len();
        let phi: Vec<f64> = (0..m * m).map(|i| phi[(i / m, i % m)]).collect();
        let coord_scale = anchors
            .iter()
            .flatten()
            .chain(y)
            .fold(1.0f64, |acc, v| acc.max(v.abs()));
        let phi_scale = phi.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) * m as f64;
        Self {
            y: y.to_vec(),
            offsets,
            phi,
            offset_scale,
            noise: ROUNDING_TOL * coord_scale * phi_scale * offset_scale,
        }
    }

    /// `Φ`-scores `(Φ(x − y))ᵀ(u(k, q) − y)` and the gradient `Φ(x − y)`.
    fn scores(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = mat_vec(&self.phi, &sub(x, &self.y));
        let h = self.offsets.iter().map(|w| dot(&g, w)).collect();
        (h, g)
    }

    fn argmin(h: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, v) in h.iter().enumerate() {
            if *v < best.0 {
                best = (*v, k);
            }
        }
        best.1
    }

    /// Weights over `active` of the minimum `Φ`-norm point of their offsets.
    fn sliding_weights(&self, active: &[usize]) -> Vec<f64> {
        let k = active.len();
        let gram = DMatrix::from_fn(k, k, |i, j| {
            dot(&mat_vec(&self.phi, &self.offsets[active[i]]), &self.offsets[active[j]])
        });
        min_norm_weights(&gram)
    }

    /// Tied actions at `x` and the offset `z − y` of their sliding point.
    fn sliding_offset(&self, x: &[f64], tie_tol: f64) -> (Vec<f64>, Vec<usize>, Vec<f64>) {
        let (h, g) = self.scores(x);
        let tol = tie_tol * norm(&g) * self.offset_scale + self.noise;
        let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
        let active: Vec<usize> = (0..h.len()).filter(|k| h[*k] <= h_min + tol).collect();
        let alpha = self.sliding_weights(&active);
        let mut z_off = vec![0.0; self.y.len()];
        for (a, k) in alpha.iter().zip(&active) {
            crate::linalg::axpy(&mut z_off, *a, &self.offsets[*k]);
        }
        (h, active, z_off)
    }

    /// Advances `x` by `ds` of log-time.
    fn advance(&self, x: &mut Vec<f64>, ds: f64) {
        let mut remaining = ds;
        for _ in 0..MAX_EVENTS {
            let (h, active, z_off) = self.sliding_offset(x, TIE_TOL);
            let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
            let gz = mat_vec(&self.phi, &z_off);
            let c = dot(&gz, &z_off);
            let mut sigma = remaining;
            for k in (0..h.len()).filter(|k| !active.contains(k)) {
                let a_k = dot(&gz, &self.offsets[k]);
                if a_k < c {
                    let gap = h[k] - h_min;
                    sigma = sigma.min((gap / (c - a_k)).ln_1p());
                }
            }
            let z: Vec<f64> = self.y.iter().zip(&z_off).map(|(y, o)| y + o).collect();
            *x = relax(x, &z, (-sigma).exp());
            remaining -= sigma;
            if remaining <= 0.0 {
                return;
            }
        }
        // event budget spent on chattering: slide with a looser tie set
        let (_, _, z_off) = self.sliding_offset(x, LOOSE_TIE_TOL);
        let z: Vec<f64> = self.y.iter().zip(&z_off).map(|(y, o)| y + o).collect();
        *x = relax(x, &z, (-remaining).exp());
    }
}

/// Minimiser of `αᵀGα` over the simplex, by enumerating supports in order of
/// size and solving the KKT system on each.
fn min_norm_weights(gram: &DMatrix<f64>) -> Vec<f64> {
    let n = gram.nrows();
    if n == 1 {
        return vec![1.0];
    }
    let scale = gram.diagonal().amax().max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = support.len();
        // [G_T  −1; 1ᵀ 0] [α; c] = [0; 1]
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        for (i, si) in support.iter().enumerate() {
            for (j, sj) in support.iter().enumerate() {
                kkt[(i, j)] = gram[(*si, *sj)];
            }
            kkt[(i, k)] = -1.0;
            kkt[(k, i)] = 1.0;
        }
        let mut rhs = nalgebra::DVector::zeros(k + 1);
        rhs[k] = 1.0;
        let Some(sol) = kkt.clone().lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().any(|v| !v.is_finite()) || (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + scale) {
            continue;
        }
        if sol.iter().take(k).any(|a| *a < -1e-9) {
            continue;
        }
        let c = sol[k];
        let mut alpha = vec![0.0; n];
        for (i, si) in support.iter().enumerate() {
            alpha[*si] = sol[i].max(0.0);
        }
        let feasible = (0..n)
            .filter(|j| mask & (1 << j) == 0)
            .all(|j| (0..n).map(|i| gram[(j, i)] * alpha[i]).sum::<f64>() >= c - tol);
        if feasible {
            let total: f64 = alpha.iter().sum();
            return alpha.into_iter().map(|a| a / total).collect();
        }
    }
    // unreachable for positive semidefinite Gram matrices up to rounding
    let k = (0..n)
        .min_by(|a, b| gram[(*a, *a)].total_cmp(&gram[(*b, *b)]))
        .expect("nonempty");
    let mut alpha = vec![0.0; n];
    alpha[k] = 1.0;
    alpha
}

/// How `(q, y)` are chosen during a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SimulationMode {
    /// Constant `q` and `y ∈ T(q)`.
    FixedTarget { q: SimplexVector, y: Target },
    /// Constant `p`; `q` is re-induced from the ensemble every step and
    /// `y = Σ p_l q_k M_lk`.
    SelfConfirming { p: SimplexVector, q: SimplexVector },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub s_max: f64,
    pub ds: f64,
    /// Intervals of the Riccati grid.
    pub riccati_steps: usize,
    /// Steps between trajectory rows.
    pub record_every: usize,
    /// Particles (from index 0) written to the trajectory.
    pub trajectory_particles: usize,
    /// Steps between state-space membership checks.
    pub membership_every: usize,
}

impl SimulationConfig {
    pub fn new(s_max: f64, ds: f64) -> Self {
        Self {
            s_max,
            ds,
            riccati_steps: 1000,
            record_every: 1,
            trajectory_particles: 0,
            membership_every: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.s_max > 0.0 && self.s_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("s_max = {} must be positive", self.s_max)));
        }
        if !(self.ds > 0.0 && self.ds <= MAX_DS) {
            return Err(Error::InvalidParameter(format!(
                "ds = {} must lie in (0, {MAX_DS}]",
                self.ds
            )));
        }
        if self.record_every == 0 || self.membership_every == 0 {
            return Err(Error::InvalidParameter("strides must be positive".into()));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.s_max / self.ds - 1e-9).ceil().max(1.0) as usize
    }

    fn log_time(&self, k: usize) -> f64 {
        (k as f64 * self.ds).min(self.s_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub s: f64,
    pub t: f64,
    pub q: Vec<f64>,
    pub target: Vec<f64>,
    pub mean_state: Vec<f64>,
    pub mean_distance: f64,
    pub max_distance: f64,
    /// Weighted mean of the running cost accumulated so far.
    pub mean_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub s: f64,
    pub t: f64,
    pub particle: usize,
    pub x: Vec<f64>,
    pub action: usize,
}

/// Worst values of the per-step invariants over all particles and steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    /// `max ‖x_{k+1} − y‖ / (e^{−ds}‖x_k − y‖)`.
    pub max_step_contraction: f64,
    /// `max ‖x_k − y‖ / (e^{−(s_k − s_0)}‖x_0 − y_0‖)`.
    pub max_cumulative_contraction: f64,
    /// `max (x − y)ᵀ(u(a*, q) − y)` at the start of each step; this is both
    /// the Blackwell left-hand side at `t = 1` and the supporting-hyperplane
    /// score.
    pub max_separation: f64,
    /// Largest membership residual found at the checked steps.
    pub max_exit: f64,
}

impl InvariantReport {
    fn new() -> Self {
        Self {
            max_step_contraction: 0.0,
            max_cumulative_contraction: 0.0,
            max_separation: f64::NEG_INFINITY,
            max_exit: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub snapshots: Vec<Snapshot>,
    pub trajectory: Vec<TrajectoryRow>,
    pub initial_positions: Vec<Vec<f64>>,
    pub initial_actions: Vec<usize>,
    pub final_actions: Vec<usize>,
    pub final_ensemble: ParticleEnsemble,
    /// Total cost `J` per particle, terminal cost included.
    pub costs: Vec<f64>,
    pub invariants: InvariantReport,
}

impl SimulationRecord {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("at least the initial snapshot")
    }

    /// Weighted mean of `J`.
    pub fn mean_cost(&self) -> f64 {
        self.costs.iter().zip(self.final_ensemble.weights()).map(|(j, w)| j * w).sum()
    }
}

/// Advances `rho0` from `s = 0` to `s_max` under best-response dynamics.
pub fn simulate_population(
    game: &VectorPayoffGame,
    spec: &CostSpec,
    rho0: &ParticleEnsemble,
    mode: &SimulationMode,
    config: &SimulationConfig,
) -> Result<SimulationRecord> {
    config.validate()?;
    let m = game.payoff_dim();
    if spec.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: spec.dim(),
        });
    }
    if rho0.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if rho0.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: rho0.dim(),
        });
    }
    match mode {
        SimulationMode::FixedTarget { q, y } => {
            if !is_approachable(y, game, q)? {
                return Err(Error::NotApproachable(y.as_slice().to_vec()));
            }
        }
        SimulationMode::SelfConfirming { p, q } => {
            game.check_strategy(p)?;
            game.check_strategy(q)?;
        }
    }
    let riccati = riccati_solve(spec, config.riccati_steps)?;
    let state_space = payoff_polytope(game);
    let mut rho = rho0.clone();
    rho.set_time(0.0);
    let n = rho.len();
    let n_steps = config.n_steps();

    check_membership(&state_space, &rho, 0.0)?;
    let y0 = current_target(game, &rho, mode, None)?.1;
    let initial_distance: Vec<f64> = rho.positions().iter().map(|x| dist(x, &y0)).collect();

    let mut costs = vec![0.0; n];
    let mut snapshots = Vec::with_capacity(n_steps + 1);
    let mut trajectory = Vec::new();
    let mut invariants = InvariantReport::new();
    let mut initial_actions = Vec::new();
    let mut q_prev: Option<SimplexVector> = None;

    for k in 0..=n_steps {
        let s = config.log_time(k);
        let t = s.exp();
        let (q, y) = current_target(game, &rho, mode, q_prev.as_ref())?;
        let frame = Frame::new(game.anchors(&q)?, &y, riccati.nearest(t, 1.0));
        if k % config.membership_every == 0 || k == n_steps {
            invariants.max_exit = invariants.max_exit.max(check_membership(&state_space, &rho, s)?);
        }
        record_snapshot(&mut snapshots, k, s, &q, &y, &rho, &costs);
        cumulative_contraction(&mut invariants, &rho, &y, &initial_distance, s);

        let actions: Vec<usize> = rho.positions().par_iter().map(|x| Frame::argmin(&frame.scores(x).0)).collect();
        if k == 0 {
            initial_actions = actions.clone();
        }
        if k % config.record_every == 0 || k == n_steps {
            for (i, x) in rho.positions().iter().take(config.trajectory_particles).enumerate() {
                trajectory.push(TrajectoryRow {
                    step: k,
                    s,
                    t,
                    particle: i,
                    x: x.clone(),
                    action: actions[i],
                });
            }
        }
        if k == n_steps {
            for (j, x) in costs.iter_mut().zip(rho.positions()) {
                *j += spec.terminal_cost(x, &y);
            }
            return Ok(SimulationRecord {
                snapshots,
                trajectory,
                initial_positions: rho0.positions().to_vec(),
                initial_actions,
                final_actions: actions,
                final_ensemble: rho,
                costs,
                invariants,
            });
        }

        let s_next = config.log_time(k + 1);
        let ds = s_next - s;
        let dt = s_next.exp() - t;
        let decay = (-ds).exp();
        let outcomes: Vec<(f64, f64)> = rho
            .positions_mut()
            .par_iter_mut()
            .zip(costs.par_iter_mut())
            .zip(actions.par_iter())
            .map(|((x, j), a)| {
                *j += spec.running_cost(x, &y) * dt;
                let separation = dot(&sub(x, &y), &frame.offsets[*a]);
                let before = dist(x, &y);
                frame.advance(x, ds);
                let after = dist(x, &y);
                let ratio = if before > 1e-9 { after / (decay * before) } else { 0.0 };
                (ratio, separation)
            })
            .collect();
        for (ratio, separation) in outcomes {
            invariants.max_step_contraction = invariants.max_step_contraction.max(ratio);
            invariants.max_separation = invariants.max_separation.max(separation);
        }
        rho.set_time(s_next);
        q_prev = Some(q);
    }
    unreachable!("loop returns at the final step")
}

/// `(q, y)` for the current step.
fn current_target(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    mode: &SimulationMode,
    q_prev: Option<&SimplexVector>,
) -> Result<(SimplexVector, Vec<f64>)> {
    match mode {
        SimulationMode::FixedTarget { q, y } => Ok((q.clone(), y.as_slice().to_vec())),
        SimulationMode::SelfConfirming { p, q } => {
            let regions_from = q_prev.unwrap_or(q).clone();
            let cand = EquilibriumCandidate::new(game, p.clone(), regions_from)?;
            let q = induced_density(game, rho, &cand)?;
            let y = game.bilinear_payoff(p, &q)?;
            Ok((q, y))
        }
    }
}

fn check_membership(state_space: &PayoffPolytope, rho: &ParticleEnsemble, s: f64) -> Result<f64> {
    let residuals = rho
        .positions()
        .par_iter()
        .map(|x| state_space.membership_residual(x))
        .collect::<Result<Vec<f64>>>()?;
    let mut worst = 0.0f64;
    for (i, r) in residuals.iter().enumerate() {
        if *r > MEMBERSHIP_TOL {
            return Err(Error::LeftStateSpace {
                particle: i,
                distance: *r,
                s,
            });
        }
        worst = worst.max(*r);
    }
    Ok(worst)
}

fn record_snapshot(
    snapshots: &mut Vec<Snapshot>,
    step: usize,
    s: f64,
    q: &SimplexVector,
    y: &[f64],
    rho: &ParticleEnsemble,
    costs: &[f64],
) {
    let distances: Vec<f64> = rho.positions().iter().map(|x| dist(x, y)).collect();
    let weights = rho.weights();
    snapshots.push(Snapshot {
        step,
        s,
        t: s.exp(),
        q: q.as_slice().to_vec(),
        target: y.to_vec(),
        mean_state: mean_state(rho),
        mean_distance: distances.iter().zip(weights).map(|(d, w)| d * w).sum(),
        max_distance: distances.iter().copied().fold(0.0, f64::max),
        mean_cost: costs.iter().zip(weights).map(|(j, w)| j * w).sum(),
    });
}

fn cumulative_contraction(
    inv: &mut InvariantReport,
    rho: &ParticleEnsemble,
    y: &[f64],
    initial_distance: &[f64],
    s: f64,
) {
    let decay = (-s).exp();
    for (x, d0) in rho.positions().iter().zip(initial_distance) {
        if *d0 > 1e-9 {
            inv.max_cumulative_contraction = inv.max_cumulative_contraction.max(dist(x, y) / (decay * d0));
        }
    }
}

/// `J = Σ g(x_k, y)(t_{k+1} − t_k) + Ψ(x_K, y)` over samples `(t_k, x_k)`.
pub fn evaluate_cost(spec: &CostSpec, trajectory: &[(f64, Vec<f64>)], y: &[f64]) -> Result<f64> {
    let Some((_, last)) = trajectory.last() else {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    };
    if trajectory.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidParameter("trajectory times must increase strictly".into()));
    }
    if trajectory.iter().any(|(_, x)| x.len() != spec.dim()) || y.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            actual: y.len(),
        });
    }
    let running: f64 = trajectory
        .windows(2)
        .map(|w| spec.running_cost(&w[0].1, y) * (w[1].0 - w[0].0))
        .sum();
    Ok(running + spec.terminal_cost(last, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approachability::RegionPartition;
    use crate::game::library::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pd_regret() -> VectorPayoffGame {
        prisoners_dilemma().regret_transform()
    }

    fn uniform(game: &VectorPayoffGame, n: usize, seed: u64) -> ParticleEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ParticleEnsemble::sample_uniform(&payoff_polytope(game), n, &mut rng).unwrap()
    }

    #[test]
    fn best_response_matches_region_assign() {
        let game = pd_regret();
        let x_space = payoff_polytope(&game);
        let sampler = x_space.uniform_sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let phi = DMatrix::identity(2, 2);
        for _ in 0..10_000 {
            let q0: f64 = rng.gen();
            let q = SimplexVector::new(vec![q0, 1.0 - q0]).unwrap();
            let x = sampler.sample(&mut rng);
            let y = Target::new(sampler.sample(&mut rng)).unwrap();
            let part = RegionPartition::new(&game, &q, y.clone()).unwrap();
            assert_eq!(best_response(&game, &q, &x, &phi, &y).unwrap(), part.assign(&x));
        }
    }

    #[test]
    fn best_response_examples() {
        let game = prisoners_dilemma_payoffs();
        let half = SimplexVector::uniform(2);
        let phi = DMatrix::identity(2, 2);
        let y = Target::new(vec![2.0, 2.0]).unwrap();
        assert_eq!(best_response(&game, &half, &[2.0, 2.0], &phi, &y).unwrap(), 0);
        assert_eq!(best_response(&game, &half, &[1.0, 1.0], &phi, &y).unwrap(), 0);
        assert_eq!(best_response(&game, &half, &[3.0, 3.0], &phi, &y).unwrap(), 1);
    }

    #[test]
    fn step_agent_examples() {
        let game = pd_regret();
        let half = SimplexVector::uniform(2);
        let u = game.mixed_payoff(0, &half).unwrap();
        assert_eq!(step_agent(&game, &u, 0, &half, 0.3).unwrap(), u);
        let far = step_agent(&game, &[-1.0, 0.0], 0, &half, 50.0).unwrap();
        assert!(dist(&far, &u) < 1e-15);
        assert!(step_agent(&game, &u, 0, &half, 0.0).is_err());

        let y = [-0.5, 0.5];
        let x = [-1.0, 0.0];
        let part = RegionPartition::new(&game, &half, Target::new(y.to_vec()).unwrap()).unwrap();
        let a = part.assign(&x);
        let next = step_agent(&game, &x, a, &half, 0.1).unwrap();
        assert!(dist(&next, &y) < dist(&x, &y));
    }

    #[test]
    fn min_norm_weight_cases() {
        // opposite vectors (1, 0) and (−3, 0): zero at weights (3/4, 1/4)
        let g = DMatrix::from_row_slice(2, 2, &[1.0, -3.0, -3.0, 9.0]);
        let w = min_norm_weights(&g);
        assert!((w[0] - 0.75).abs() < 1e-12 && (w[1] - 0.25).abs() < 1e-12);
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(min_norm_weights(&g), vec![0.5, 0.5]);
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 4.0]);
        assert_eq!(min_norm_weights(&g), vec![1.0, 0.0]);
        // (1, 0) and (1, 1): the first is already the nearest point
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]);
        assert_eq!(min_norm_weights(&g), vec![1.0, 0.0]);
    }

    #[test]
    fn sliding_on_the_hyperplane_is_radial() {
        let game = prisoners_dilemma_payoffs();
        let half = SimplexVector::uniform(2);
        let y = [2.0, 2.0];
        let frame = Frame::new(game.anchors(&half).unwrap(), &y, &DMatrix::identity(2, 2));
        // H has normal (−1/2, 3/2); (3, 7/3) lies on it
        let mut x = vec![3.0, 2.0 + 1.0 / 3.0];
        let before = sub(&x, &y);
        frame.advance(&mut x, 0.1);
        let after = sub(&x, &y);
        let decay = (-0.1f64).exp();
        for (a, b) in after.iter().zip(&before) {
            assert!((a - decay * b).abs() < 1e-12, "{after:?} vs {before:?}");
        }
    }

    #[test]
    fn crossing_switches_action_exactly() {
        // single hyperplane crossing: the exact solution passes through y's
        // hyperplane and then slides; contraction holds throughout
        let game = pd_regret();
        let half = SimplexVector::uniform(2);
        let y = [-0.5, 0.5];
        let frame = Frame::new(game.anchors(&half).unwrap(), &y, &DMatrix::identity(2, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sampler = payoff_polytope(&game);
        let sampler = sampler.uniform_sampler();
        for _ in 0..1000 {
            let mut x = sampler.sample(&mut rng);
            let d0 = dist(&x, &y);
            let ds = rng.gen_range(0.01..0.1);
            frame.advance(&mut x, ds);
            assert!(dist(&x, &y) <= (-ds).exp() * d0 * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn pd_regret_collapses_to_target() {
        let game = pd_regret();
        let rho = uniform(&game, 500, 1);
        let mode = SimulationMode::FixedTarget {
            q: SimplexVector::uniform(2),
            y: Target::new(vec![-0.5, 0.5]).unwrap(),
        };
        let spec = CostSpec::identity(2, 10f64.exp()).unwrap();
        let rec = simulate_population(&game, &spec, &rho, &mode, &SimulationConfig::new(10.0, 0.1)).unwrap();
        assert_eq!(rec.snapshots.len(), 101);
        assert!(rec.final_snapshot().max_distance < 1e-3);
        assert!(rec.invariants.max_step_contraction <= 1.0 + 1e-6);
        assert!(rec.invariants.max_cumulative_contraction <= 1.0 + 1e-6);
        assert!(rec.invariants.max_separation <= 1e-9);
        assert!(rec.snapshots.windows(2).all(|w| w[1].s > w[0].s));
    }

    #[test]
    fn self_confirming_pd_coupling_flips() {
        let game = prisoners_dilemma_payoffs();
        let rho = uniform(&game, 2_000, 2);
        let mode = SimulationMode::SelfConfirming {
            p: SimplexVector::uniform(2),
            q: SimplexVector::uniform(2),
        };
        let spec = CostSpec::identity(2, 5f64.exp()).unwrap();
        let rec = simulate_population(&game, &spec, &rho, &mode, &SimulationConfig::new(5.0, 0.1)).unwrap();
        let first = &rec.snapshots[0];
        assert!((first.q[0] - 0.5).abs() < 0.05);
        assert!(rec.mean_cost() > 0.0);
        // transport breaks uniformity and the undamped coupling ends in a
        // period-2 flip between the pure strategies
        let tail: Vec<&Snapshot> = rec.snapshots.iter().rev().take(4).collect();
        assert!(tail.iter().all(|s| s.q[0] == 0.0 || s.q[0] == 1.0));
        assert_ne!(tail[0].q, tail[1].q);
        assert_eq!(tail[0].q, tail[2].q);
    }

    #[test]
    fn simulation_rejects_bad_input() {
        let game = pd_regret();
        let rho = uniform(&game, 10, 3);
        let spec = CostSpec::identity(2, 10.0).unwrap();
        let outside = SimulationMode::FixedTarget {
            q: SimplexVector::uniform(2),
            y: Target::new(vec![5.0, 5.0]).unwrap(),
        };
        assert!(matches!(
            simulate_population(&game, &spec, &rho, &outside, &SimulationConfig::new(1.0, 0.1)),
            Err(Error::NotApproachable(_))
        ));
        let fine = SimulationMode::FixedTarget {
            q: SimplexVector::uniform(2),
            y: Target::new(vec![-0.5, 0.5]).unwrap(),
        };
        assert!(simulate_population(&game, &spec, &rho, &fine, &SimulationConfig::new(1.0, 0.2)).is_err());
        let stray = ParticleEnsemble::point_mass(vec![9.0, 9.0]).unwrap();
        assert!(matches!(
            simulate_population(&game, &spec, &stray, &fine, &SimulationConfig::new(1.0, 0.1)),
            Err(Error::LeftStateSpace { .. })
        ));
    }

    #[test]
    fn trajectory_rows_follow_stride() {
        let game = pd_regret();
        let rho = uniform(&game, 20, 4);
        let mode = SimulationMode::FixedTarget {
            q: SimplexVector::uniform(2),
            y: Target::new(vec![-0.5, 0.5]).unwrap(),
        };
        let spec = CostSpec::identity(2, 2f64.exp()).unwrap();
        let mut config = SimulationConfig::new(2.0, 0.1);
        config.record_every = 5;
        config.trajectory_particles = 3;
        let rec = simulate_population(&game, &spec, &rho, &mode, &config).unwrap();
        assert_eq!(rec.trajectory.len(), 5 * 3);
        assert_eq!(rec.trajectory.last().unwrap().step, 20);
    }

    #[test]
    fn cost_examples() {
        let spec = CostSpec::identity(2, 1.0).unwrap();
        let y = [1.0, 2.0];
        let at_target = vec![(0.0, y.to_vec()), (0.5, y.to_vec()), (1.0, y.to_vec())];
        assert_eq!(evaluate_cost(&spec, &at_target, &y).unwrap(), 0.0);
        let x = vec![0.0, 0.0];
        let constant = vec![(0.0, x.clone()), (1.0, x.clone())];
        let j = evaluate_cost(&spec, &constant, &y).unwrap();
        assert!((j - 5.0).abs() < 1e-15);
        let closer = vec![(0.0, vec![0.5, 1.0]), (1.0, vec![0.5, 1.0])];
        assert!(evaluate_cost(&spec, &closer, &y).unwrap() < j);
        assert!(evaluate_cost(&spec, &[], &y).is_err());
    }
}
