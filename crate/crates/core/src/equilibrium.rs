//! Self-confirmed equilibria.
//!
//! A candidate `(p, q)` fixes the target `y = Σ p_l q_k M_lk` and with it the
//! bang-bang partition of payoff space. Populating that partition with the
//! current density gives the induced population strategy `q̃(p, q)`; the
//! candidate is self-confirmed when `q̃ = q`. The estimate error is
//! `ν = q − q̃` with Lyapunov function `L = ½ νᵀν`.

use rayon::prelude::*;
use serde::Serialize;

use crate::approachability::{target_weights, RegionPartition, Target};
use crate::error::{Error, Result};
use crate::game::VectorPayoffGame;
use crate::linalg::{dot, max_abs, norm};
use crate::particles::ParticleEnsemble;
use crate::simplex::SimplexVector;

/// Default finite-difference step for Jacobians of `q̃`.
pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Relative disagreement between the `h` and `h/2` estimates that flags an
/// unresolved Jacobian.
pub const RICHARDSON_TOL: f64 = 0.1;
/// Tangent components below this are treated as zero.
const TANGENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumCandidate {
    p: SimplexVector,
    q: SimplexVector,
    y: Vec<f64>,
}

impl EquilibriumCandidate {
    /// Candidate with `y` derived from `(p, q)`.
    pub fn new(game: &VectorPayoffGame, p: SimplexVector, q: SimplexVector) -> Result<Self> {
        let y = game.bilinear_payoff(&p, &q)?;
        Ok(Self { p, q, y })
    }

    /// Candidate whose `p` reproduces a pinned target `y` under `q`.
    pub fn pinned(game: &VectorPayoffGame, q: SimplexVector, y: &Target) -> Result<Self> {
        let p = target_weights(game, &q, y)?
            .ok_or_else(|| Error::NotApproachable(y.as_slice().to_vec()))?;
        Self::new(game, p, q)
    }

    pub fn p(&self) -> &SimplexVector {
        &self.p
    }

    pub fn q(&self) -> &SimplexVector {
        &self.q
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn target(&self) -> Target {
        Target::new(self.y.clone()).expect("bilinear payoff of finite tables is finite")
    }

    pub fn partition(&self, game: &VectorPayoffGame) -> Result<RegionPartition> {
        RegionPartition::new(game, &self.q, self.target())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateError {
    pub nu: Vec<f64>,
    pub lyapunov: f64,
}

impl EstimateError {
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.nu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowParameters {
    pub kappa: f64,
    pub step: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl FlowParameters {
    pub fn new(kappa: f64, step: f64, max_iter: usize, tol: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa} must be positive")));
        }
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::InvalidParameter(format!("step = {step} must lie in (0, 1]")));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tol = {tol} must be positive")));
        }
        Ok(Self {
            kappa,
            step,
            max_iter,
            tol,
        })
    }
}

impl Default for FlowParameters {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            step: 0.5,
            max_iter: 200,
            tol: 0.02,
        }
    }
}

/// Region labels of every particle, in particle order.
pub(crate) fn region_labels(part: &RegionPartition, rho: &ParticleEnsemble) -> Vec<usize> {
    rho.positions().par_iter().map(|x| part.assign(x)).collect()
}

/// Weighted region masses, summed in particle order.
pub(crate) fn region_masses(part: &RegionPartition, rho: &ParticleEnsemble) -> Result<SimplexVector> {
    if rho.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let labels = region_labels(part, rho);
    let mut mass = vec![0.0; part.n_regions()];
    for (k, w) in labels.iter().zip(rho.weights()) {
        mass[*k] += w;
    }
    SimplexVector::from_masses(mass)
}

/// `q̃_k`: weighted fraction of the ensemble in region `k` of the partition
/// induced by the candidate.
pub fn induced_density(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    cand: &EquilibriumCandidate,
) -> Result<SimplexVector> {
    if rho.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    game.check_point(&rho.positions()[0])?;
    region_masses(&cand.partition(game)?, rho)
}

pub fn estimate_error(q: &SimplexVector, q_tilde: &SimplexVector) -> Result<EstimateError> {
    if q.len() != q_tilde.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: q_tilde.len(),
        });
    }
    let nu: Vec<f64> = q.as_slice().iter().zip(q_tilde.as_slice()).map(|(a, b)| a - b).collect();
    let lyapunov = 0.5 * dot(&nu, &nu);
    Ok(EstimateError { nu, lyapunov })
}

/// How the candidate moves between iterations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum UpdateRule {
    /// `p` stays fixed, `y` follows `q`.
    HoldWeights,
    /// `y` stays fixed, `p` follows `q`.
    PinTarget(Target),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lyapunov: f64,
    pub nu_max: f64,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointOutcome {
    pub converged: bool,
    pub candidate: EquilibriumCandidate,
    pub induced: SimplexVector,
    pub trace: Vec<IterationRecord>,
}

impl FixedPointOutcome {
    pub fn lyapunov_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.lyapunov).collect()
    }

    pub fn final_lyapunov(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.lyapunov)
    }
}

/// Damped iteration `q ← (1 − η)q + η q̃`, recording every iterate. Never
/// fails on non-convergence; see [`fixed_point_solve`].
pub fn fixed_point_iterate(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    initial: &EquilibriumCandidate,
    params: &FlowParameters,
    rule: &UpdateRule,
) -> Result<FixedPointOutcome> {
    let mut cand = initial.clone();
    let mut trace = Vec::new();
    for iteration in 0..=params.max_iter {
        let induced = induced_density(game, rho, &cand)?;
        let err = estimate_error(&cand.q, &induced)?;
        trace.push(IterationRecord {
            iteration,
            lyapunov: err.lyapunov,
            nu_max: err.max_abs(),
            q: cand.q.as_slice().to_vec(),
        });
        if err.max_abs() <= params.tol || iteration == params.max_iter {
            return Ok(FixedPointOutcome {
                converged: err.max_abs() <= params.tol,
                candidate: cand,
                induced,
                trace,
            });
        }
        let q = cand.q.mix(&induced, params.step);
        cand = match rule {
            UpdateRule::HoldWeights => EquilibriumCandidate::new(game, cand.p.clone(), q)?,
            UpdateRule::PinTarget(y) => EquilibriumCandidate::pinned(game, q, y)?,
        };
    }
    unreachable!("loop returns on its last iteration")
}

/// Fixed point of `q ↦ q̃` within `params.tol` in max norm.
pub fn fixed_point_solve(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    initial: &EquilibriumCandidate,
    params: &FlowParameters,
    rule: &UpdateRule,
) -> Result<FixedPointOutcome> {
    let outcome = fixed_point_iterate(game, rho, initial, params, rule)?;
    if outcome.converged {
        Ok(outcome)
    } else {
        Err(Error::NoConvergence {
            iterations: params.max_iter,
            lyapunov: outcome.final_lyapunov(),
        })
    }
}

/// `L(i·dt) ≤ e^{−2κ i dt} L(0)·(1 + 1e-6)` for every recorded `i`.
pub fn lyapunov_decay_check(trace: &[f64], kappa: f64, dt: f64) -> bool {
    let Some(l0) = trace.first() else {
        return false;
    };
    trace
        .iter()
        .enumerate()
        .all(|(i, l)| *l <= (-2.0 * kappa * i as f64 * dt).exp() * l0 * (1.0 + 1e-6))
}

/// Which argument of `q̃(p, q)` a perturbation acts on.
#[derive(Clone, Copy)]
enum Slot {
    P,
    Q,
}

/// One-sided-safe central difference of `q̃` along `dir` (not necessarily
/// unit) in slot `slot`. The step is measured along `dir/‖dir‖` after
/// re-projection onto the simplex.
fn directional_jacobian(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    cand: &EquilibriumCandidate,
    slot: Slot,
    dir: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let n = dir.len();
    let len = norm(dir);
    if len <= TANGENT_TOL {
        return Ok(vec![0.0; n]);
    }
    let base = match slot {
        Slot::P => cand.p.as_slice(),
        Slot::Q => cand.q.as_slice(),
    };
    let unit: Vec<f64> = dir.iter().map(|d| d / len).collect();
    let shifted = |sign: f64| -> Result<(f64, SimplexVector)> {
        let raw: Vec<f64> = base.iter().zip(&unit).map(|(b, u)| b + sign * h * u).collect();
        let projected = SimplexVector::project(&raw);
        let offset: Vec<f64> = projected.as_slice().iter().zip(base).map(|(a, b)| a - b).collect();
        let moved = dot(&offset, &unit);
        let c = match slot {
            Slot::P => EquilibriumCandidate::new(game, projected, cand.q.clone())?,
            Slot::Q => EquilibriumCandidate::new(game, cand.p.clone(), projected)?,
        };
        Ok((moved, induced_density(game, rho, &c)?))
    };
    let (s_plus, q_plus) = shifted(1.0)?;
    let (s_minus, q_minus) = shifted(-1.0)?;
    let span = s_plus - s_minus;
    if span <= TANGENT_TOL * h {
        return Ok(vec![0.0; n]);
    }
    Ok(q_plus
        .as_slice()
        .iter()
        .zip(q_minus.as_slice())
        .map(|(a, b)| len * (a - b) / span)
        .collect())
}

fn check_tangent(dir: &[f64], n: usize) -> Result<()> {
    if dir.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: dir.len(),
        });
    }
    let s: f64 = dir.iter().sum();
    if s.abs() > TANGENT_TOL || dir.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "direction {dir:?} is not tangent to the simplex"
        )));
    }
    Ok(())
}

/// `∂_p q̃ ṗ + ∂_q q̃ q̇` at step `h`.
fn induced_derivative(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    cand: &EquilibriumCandidate,
    pdot: &[f64],
    qdot: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let jp = directional_jacobian(game, rho, cand, Slot::P, pdot, h)?;
    let jq = directional_jacobian(game, rho, cand, Slot::Q, qdot, h)?;
    Ok(jp.iter().zip(&jq).map(|(a, b)| a + b).collect())
}

/// Directional derivative of `ν` along `(ṗ, q̇)`:
/// `ν̇ = q̇ − ∂_p q̃ ṗ − ∂_q q̃ q̇`.
///
/// Fails with [`Error::UnresolvedJacobian`] when the estimates at `h` and
/// `h/2` disagree by more than 10%.
pub fn error_flow_derivative(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    cand: &EquilibriumCandidate,
    pdot: &[f64],
    qdot: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let n = game.n_actions();
    check_tangent(pdot, n)?;
    check_tangent(qdot, n)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("finite-difference step {h} must be positive")));
    }
    if rho.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let coarse = induced_derivative(game, rho, cand, pdot, qdot, h)?;
    let fine = induced_derivative(game, rho, cand, pdot, qdot, 0.5 * h)?;
    let scale = max_abs(&coarse).max(max_abs(&fine));
    let gap = coarse.iter().zip(&fine).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 && gap > RICHARDSON_TOL * scale {
        return Err(Error::UnresolvedJacobian {
            step: h,
            relative_gap: gap / scale,
        });
    }
    Ok(qdot.iter().zip(&coarse).map(|(qd, d)| qd - d).collect())
}

/// Edge directions `e_i − e_j` feasible at `x` (`x_j > 0`).
pub fn feasible_tangents(x: &SimplexVector) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && x[j] > 0.0 {
                let mut d = vec![0.0; n];
                d[i] = 1.0;
                d[j] = -1.0;
                out.push(d);
            }
        }
    }
    out
}

/// Unit directions `(e_i − e_j)/√2`, `i ≠ j`, spanning the sum-zero subspace
/// in both orientations.
pub fn sum_zero_directions(n: usize) -> Vec<Vec<f64>> {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let mut d = vec![0.0; n];
                d[i] = c;
                d[j] = -c;
                out.push(d);
            }
        }
    }
    out
}

/// Grid of feasible `(ṗ, q̇)` pairs: each of `ṗ`, `q̇` is zero or a feasible
/// edge direction, excluding the all-zero pair.
pub fn tangent_grid(cand: &EquilibriumCandidate) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = cand.p.len();
    let zero = vec![0.0; n];
    let ps: Vec<Vec<f64>> = std::iter::once(zero.clone()).chain(feasible_tangents(&cand.p)).collect();
    let qs: Vec<Vec<f64>> = std::iter::once(zero).chain(feasible_tangents(&cand.q)).collect();
    let mut out = Vec::new();
    for pd in &ps {
        for qd in &qs {
            if norm(pd) > 0.0 || norm(qd) > 0.0 {
                out.push((pd.clone(), qd.clone()));
            }
        }
    }
    out
}

/// True iff for every `λ` in the grid some feasible `(ṗ, q̇)` makes
/// `λᵀν̇` negative and some makes it positive.
pub fn nonuniqueness_check(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    cand: &EquilibriumCandidate,
    lambdas: &[Vec<f64>],
    h: f64,
    tol: f64,
) -> Result<bool> {
    let lyapunov = estimate_error(&cand.q, &induced_density(game, rho, cand)?)?.lyapunov;
    if lyapunov > tol {
        return Err(Error::NotFixedPoint { lyapunov });
    }
    let n = game.n_actions();
    for l in lambdas {
        if l.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: l.len(),
            });
        }
        if norm(l) <= 0.0 {
            return Err(Error::ZeroDirection);
        }
    }
    let flows = tangent_grid(cand)
        .iter()
        .map(|(pd, qd)| error_flow_derivative(game, rho, cand, pd, qd, h))
        .collect::<Result<Vec<_>>>()?;
    let eps = 1e-12;
    Ok(lambdas.iter().all(|l| {
        let values: Vec<f64> = flows.iter().map(|f| dot(l, f)).collect();
        values.iter().any(|v| *v < -eps) && values.iter().any(|v| *v > eps)
    }))
}

/// A feasible direction realising `ν̇ = −κν` component-wise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayDirection {
    pub pdot: Vec<f64>,
    pub qdot: Vec<f64>,
    pub nu_dot: Vec<f64>,
}

/// Searches the tangent grid, scaled by `α ≥ 0`, for `(ṗ, q̇)` with
/// `ν̇ ≤ −κν` component-wise.
pub fn find_decay_direction(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    cand: &EquilibriumCandidate,
    kappa: f64,
    h: f64,
) -> Result<Option<DecayDirection>> {
    let nu = estimate_error(&cand.q, &induced_density(game, rho, cand)?)?.nu;
    let goal: Vec<f64> = nu.iter().map(|v| -kappa * v).collect();
    let slack = 1e-12 * (1.0 + max_abs(&goal));
    for (pd, qd) in tangent_grid(cand) {
        let flow = error_flow_derivative(game, rho, cand, &pd, &qd, h)?;
        let mut alphas: Vec<f64> = flow
            .iter()
            .zip(&goal)
            .filter(|(f, _)| f.abs() > 0.0)
            .map(|(f, g)| g / f)
            .filter(|a| *a >= 0.0 && a.is_finite())
            .collect();
        alphas.push(0.0);
        for alpha in alphas {
            if flow.iter().zip(&goal).all(|(f, g)| alpha * f <= g + slack) {
                return Ok(Some(DecayDirection {
                    pdot: pd.iter().map(|v| alpha * v).collect(),
                    qdot: qd.iter().map(|v| alpha * v).collect(),
                    nu_dot: flow.iter().map(|v| alpha * v).collect(),
                }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::library::*;
    use crate::harsanyi::battle_of_sexes;
    use crate::polytope::payoff_polytope;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform(game: &VectorPayoffGame, n: usize, seed: u64) -> ParticleEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ParticleEnsemble::sample_uniform(&payoff_polytope(game), n, &mut rng).unwrap()
    }

    fn sv(v: &[f64]) -> SimplexVector {
        SimplexVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pd_barycenter_is_self_confirmed() {
        let game = prisoners_dilemma_payoffs();
        let rho = uniform(&game, 10_000, 1);
        let cand = EquilibriumCandidate::new(&game, SimplexVector::uniform(2), SimplexVector::uniform(2)).unwrap();
        assert_eq!(cand.y(), &[2.0, 2.0]);
        let qt = induced_density(&game, &rho, &cand).unwrap();
        assert!((qt[0] - 0.5).abs() < 0.02, "{qt:?}");
        let out = fixed_point_solve(&game, &rho, &cand, &FlowParameters::default(), &UpdateRule::HoldWeights).unwrap();
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn bos_vertex_induces_second_action() {
        let game = battle_of_sexes().maximal_regret_game().unwrap();
        let rho = uniform(&game, 2_000, 2);
        let q = SimplexVector::vertex(4, 0);
        let cand = EquilibriumCandidate::pinned(&game, q.clone(), &Target::new(vec![0.0, 0.0]).unwrap()).unwrap();
        assert!(crate::linalg::max_abs(cand.y()) < 1e-12);
        let qt = induced_density(&game, &rho, &cand).unwrap();
        assert!(qt.max_abs_diff(&SimplexVector::vertex(4, 1)) < 1e-12, "{qt:?}");
        let err = estimate_error(&q, &SimplexVector::vertex(4, 1)).unwrap();
        assert_eq!(err.nu, vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!(err.lyapunov, 1.0);
    }

    #[test]
    fn point_mass_inside_a_region() {
        let game = prisoners_dilemma_payoffs();
        let rho = ParticleEnsemble::point_mass(vec![1.0, 1.0]).unwrap();
        let cand = EquilibriumCandidate::new(&game, SimplexVector::uniform(2), SimplexVector::uniform(2)).unwrap();
        assert_eq!(induced_density(&game, &rho, &cand).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn estimate_error_examples() {
        let q = sv(&[0.2, 0.3, 0.5]);
        let e = estimate_error(&q, &q).unwrap();
        assert_eq!(e.lyapunov, 0.0);
        assert!(e.nu.iter().all(|v| *v == 0.0));
        let e = estimate_error(&q, &sv(&[0.5, 0.5, 0.0])).unwrap();
        assert!(e.nu.iter().sum::<f64>().abs() < 1e-12);
        assert!(estimate_error(&q, &SimplexVector::uniform(2)).is_err());
    }

    #[test]
    fn parametric_vertex_fixed_point() {
        // b < −a: the hyperplane through (0, a) only touches X at that vertex
        let game = parametric_regret(-2.0, 1.0).unwrap();
        let rho = uniform(&game, 10_000, 3);
        let cand = EquilibriumCandidate::new(&game, SimplexVector::vertex(2, 0), SimplexVector::vertex(2, 0)).unwrap();
        assert_eq!(cand.y(), &[0.0, -2.0]);
        let out = fixed_point_solve(&game, &rho, &cand, &FlowParameters::default(), &UpdateRule::HoldWeights).unwrap();
        assert_eq!(out.trace[0].lyapunov, 0.0);
    }

    #[test]
    fn parametric_vertex_not_fixed_when_b_below_a() {
        let game = parametric_regret(2.0, 1.0).unwrap();
        let rho = uniform(&game, 10_000, 4);
        let y = Target::new(vec![-1.0, 0.0]).unwrap();
        let cand = EquilibriumCandidate::pinned(&game, SimplexVector::vertex(2, 1), &y).unwrap();
        let qt = induced_density(&game, &rho, &cand).unwrap();
        let err = estimate_error(cand.q(), &qt).unwrap();
        assert!(err.max_abs() > 0.1, "{err:?}");
        let params = FlowParameters::new(1.0, 0.5, 5, 1e-3).unwrap();
        let out = fixed_point_iterate(&game, &rho, &cand, &params, &UpdateRule::HoldWeights).unwrap();
        assert!(out.candidate.q()[1] < 1.0);
    }

    #[test]
    fn no_convergence_reports_final_lyapunov() {
        let game = battle_of_sexes().maximal_regret_game().unwrap();
        let rho = uniform(&game, 500, 5);
        let y = Target::new(vec![0.0, 0.0]).unwrap();
        let cand = EquilibriumCandidate::pinned(&game, SimplexVector::vertex(4, 0), &y).unwrap();
        let params = FlowParameters::new(1.0, 1.0, 3, 1e-6).unwrap();
        match fixed_point_solve(&game, &rho, &cand, &params, &UpdateRule::PinTarget(y)) {
            Err(Error::NoConvergence { iterations, lyapunov }) => {
                assert_eq!(iterations, 3);
                assert!(lyapunov > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn flow_parameter_validation() {
        assert!(FlowParameters::new(1.0, 0.0, 10, 1e-3).is_err());
        assert!(FlowParameters::new(1.0, 1.5, 10, 1e-3).is_err());
        assert!(FlowParameters::new(0.0, 0.5, 10, 1e-3).is_err());
        assert!(FlowParameters::new(1.0, 0.5, 10, 0.0).is_err());
    }

    #[test]
    fn lyapunov_decay_examples() {
        assert!(lyapunov_decay_check(&[0.0; 5], 1.0, 0.1));
        assert!(!lyapunov_decay_check(&[1.0, 1.1, 1.2], 1.0, 0.1));
        for kappa in [0.5, 1.0, 2.0] {
            // ν̇ = −κν integrated exactly
            let nu0 = [0.3, -0.1, -0.2];
            let trace: Vec<f64> = (0..50)
                .map(|i| {
                    let f = (-kappa * i as f64 * 0.05).exp();
                    0.5 * nu0.iter().map(|v| (v * f) * (v * f)).sum::<f64>()
                })
                .collect();
            assert!(lyapunov_decay_check(&trace, kappa, 0.05));
            assert!(!lyapunov_decay_check(&trace, 1.5 * kappa, 0.05));
        }
    }

    #[test]
    fn zero_direction_gives_zero_flow() {
        let game = prisoners_dilemma_payoffs();
        let rho = uniform(&game, 1_000, 6);
        let cand = EquilibriumCandidate::new(&game, SimplexVector::uniform(2), SimplexVector::uniform(2)).unwrap();
        let f = error_flow_derivative(&game, &rho, &cand, &[0.0, 0.0], &[0.0, 0.0], 1e-3).unwrap();
        assert_eq!(f, vec![0.0, 0.0]);
        assert!(error_flow_derivative(&game, &rho, &cand, &[1.0, 0.0], &[0.0, 0.0], 1e-3).is_err());
    }

    #[test]
    fn locally_constant_induced_density_gives_qdot() {
        let game = prisoners_dilemma_payoffs();
        let rho = ParticleEnsemble::point_mass(vec![1.0, 1.0]).unwrap();
        let cand = EquilibriumCandidate::new(&game, SimplexVector::uniform(2), SimplexVector::uniform(2)).unwrap();
        let qdot = [0.3, -0.3];
        let f = error_flow_derivative(&game, &rho, &cand, &[-0.2, 0.2], &qdot, 1e-3).unwrap();
        assert_eq!(f, qdot.to_vec());
    }

    #[test]
    fn flow_derivative_is_linear() {
        let game = prisoners_dilemma_payoffs();
        let rho = uniform(&game, 100_000, 7);
        let cand = EquilibriumCandidate::new(&game, SimplexVector::uniform(2), SimplexVector::uniform(2)).unwrap();
        let pd = [0.5, -0.5];
        let qd = [-0.25, 0.25];
        let base = error_flow_derivative(&game, &rho, &cand, &pd, &qd, 0.05).unwrap();
        for alpha in [0.5, 2.0, 3.0] {
            let scaled: Vec<f64> = pd.iter().map(|v| alpha * v).collect();
            let scaled_q: Vec<f64> = qd.iter().map(|v| alpha * v).collect();
            let f = error_flow_derivative(&game, &rho, &cand, &scaled, &scaled_q, 0.05).unwrap();
            for (a, b) in f.iter().zip(&base) {
                assert!((a - alpha * b).abs() <= 0.05 * (alpha * b).abs() + 1e-12, "{f:?} vs {base:?}");
            }
        }
    }

    #[test]
    fn pd_barycenter_is_nonunique() {
        let game = prisoners_dilemma_payoffs();
        let rho = uniform(&game, 100_000, 8);
        let cand = EquilibriumCandidate::new(&game, SimplexVector::uniform(2), SimplexVector::uniform(2)).unwrap();
        let lambdas = sum_zero_directions(2);
        assert!(nonuniqueness_check(&game, &rho, &cand, &lambdas, 0.05, 1e-3).unwrap());
    }

    #[test]
    fn isolated_vertex_is_unique() {
        let game = parametric_regret(-2.0, 1.0).unwrap();
        let rho = uniform(&game, 10_000, 9);
        let cand = EquilibriumCandidate::new(&game, SimplexVector::vertex(2, 0), SimplexVector::vertex(2, 0)).unwrap();
        let lambdas = sum_zero_directions(2);
        assert!(!nonuniqueness_check(&game, &rho, &cand, &lambdas, 1e-3, 1e-12).unwrap());
    }

    #[test]
    fn dirac_density_is_unique() {
        let game = prisoners_dilemma_payoffs();
        let rho = ParticleEnsemble::point_mass(vec![1.0, 1.0]).unwrap();
        let cand = EquilibriumCandidate::new(&game, SimplexVector::vertex(2, 0), SimplexVector::vertex(2, 0)).unwrap();
        let lambdas = sum_zero_directions(2);
        assert!(!nonuniqueness_check(&game, &rho, &cand, &lambdas, 1e-3, 1e-12).unwrap());
    }

    #[test]
    fn nonuniqueness_requires_fixed_point() {
        let game = prisoners_dilemma_payoffs();
        let rho = ParticleEnsemble::point_mass(vec![1.0, 1.0]).unwrap();
        let cand = EquilibriumCandidate::new(&game, SimplexVector::uniform(2), SimplexVector::uniform(2)).unwrap();
        let r = nonuniqueness_check(&game, &rho, &cand, &sum_zero_directions(2), 1e-3, 1e-12);
        assert!(matches!(r, Err(Error::NotFixedPoint { .. })));
    }

    #[test]
    fn pd_off_equilibrium_admits_decay_direction() {
        let game = prisoners_dilemma_payoffs();
        let rho = uniform(&game, 100_000, 10);
        let cand = EquilibriumCandidate::new(&game, SimplexVector::uniform(2), sv(&[0.7, 0.3])).unwrap();
        let nu = estimate_error(cand.q(), &induced_density(&game, &rho, &cand).unwrap()).unwrap().nu;
        assert!(nu[0].abs() > 0.05);
        let d = find_decay_direction(&game, &rho, &cand, 1.0, 0.05).unwrap().expect("direction");
        for (f, v) in d.nu_dot.iter().zip(&nu) {
            assert!(*f <= -v + 1e-9);
        }
    }
}
