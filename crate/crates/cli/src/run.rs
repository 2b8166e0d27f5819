//! Executing scenarios and writing their outputs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vecpop::approachability::Target;
use vecpop::equilibrium::{
    estimate_error, fixed_point_iterate, induced_density, lyapunov_decay_check, nonuniqueness_check,
    sum_zero_directions, FixedPointOutcome, UpdateRule,
};
use vecpop::sim::InvariantReport;
use vecpop::{
    payoff_polytope, simulate_population, EquilibriumCandidate, FlowParameters, ParticleEnsemble,
    SimulationConfig, SimulationMode, SimulationRecord, VectorPayoffGame,
};

use crate::error::CliError;
use crate::format::{fmt_num, write_json};
use crate::report::{bayesian_report, pure_strategies, target_set_report};
use crate::scenario::{DensitySpec, ModeSpec, Scenario};

/// `‖q − q̃‖_∞` below which an initial ensemble certifies self-confirmation.
pub const CERTIFICATE_TOL: f64 = 0.02;
/// Particles within this distance of a cluster's first member join it.
pub const CLUSTER_RADIUS: f64 = 1e-3;
/// Largest clusters listed in a summary.
const MAX_CLUSTERS: usize = 10;
/// Relative slack on the contraction ratios.
pub const CONTRACTION_SLACK: f64 = 1e-6;
/// Slack on the separation score `(x − y)ᵀ(u(a*, q) − y)`.
pub const SEPARATION_SLACK: f64 = 1e-9;
const VERTEX_TOL: f64 = 1e-9;

/// Extra report requested on the command line instead of the scenario's mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    TargetSets,
    Bayesian,
}

/// Initial ensemble of a scenario.
pub fn build_ensemble(s: &Scenario) -> Result<ParticleEnsemble, CliError> {
    let density = s
        .file
        .density
        .as_ref()
        .ok_or_else(|| CliError::Validation("scenario has no density".into()))?;
    let game = &s.game;
    let sample = |n: usize| -> Result<ParticleEnsemble, CliError> {
        let seed = s
            .file
            .seed
            .ok_or_else(|| CliError::Validation("`seed` is required for sampled densities".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(ParticleEnsemble::sample_uniform(&payoff_polytope(game), n, &mut rng)?)
    };
    Ok(match density {
        DensitySpec::Uniform { particles } => sample(*particles)?,
        DensitySpec::UniformReweighted { particles } => {
            let uniform = sample(*particles)?;
            let cand = initial_candidate(s)?;
            uniform.reweighted_to(&cand.partition(game)?, cand.q())?
        }
        DensitySpec::Points { points, weights } => match weights {
            Some(w) => ParticleEnsemble::new(points.clone(), w.clone(), 0.0)?,
            None => ParticleEnsemble::equally_weighted(points.clone())?,
        },
    })
}

/// The candidate `(p, q, y)` a scenario starts from.
pub fn initial_candidate(s: &Scenario) -> Result<EquilibriumCandidate, CliError> {
    let game = &s.game;
    Ok(match &s.file.mode {
        ModeSpec::FixedTarget { q, y } => EquilibriumCandidate::pinned(game, q.clone(), &Target::new(y.clone())?)?,
        ModeSpec::SelfConfirming { p, q } => EquilibriumCandidate::new(game, p.clone(), q.clone())?,
        ModeSpec::EquilibriumSolve { p, q, y, .. } => match (p, y) {
            (Some(p), _) => EquilibriumCandidate::new(game, p.clone(), q.clone())?,
            (None, Some(y)) => EquilibriumCandidate::pinned(game, q.clone(), &Target::new(y.clone())?)?,
            (None, None) => return Err(CliError::Validation("equilibrium_solve needs `p` or `y`".into())),
        },
        _ => return Err(CliError::Validation("mode has no candidate".into())),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateReport {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub y: Vec<f64>,
    pub induced_q: Vec<f64>,
    pub nu: Vec<f64>,
    pub nu_max: f64,
    pub lyapunov: f64,
    /// `‖ν‖_∞` within the tolerance.
    pub self_confirmed: bool,
}

pub fn candidate_report(
    game: &VectorPayoffGame,
    rho: &ParticleEnsemble,
    cand: &EquilibriumCandidate,
    tol: f64,
) -> Result<CandidateReport, CliError> {
    let induced = induced_density(game, rho, cand)?;
    let err = estimate_error(cand.q(), &induced)?;
    Ok(CandidateReport {
        p: cand.p().as_slice().to_vec(),
        q: cand.q().as_slice().to_vec(),
        y: cand.y().to_vec(),
        induced_q: induced.into_vec(),
        nu_max: err.max_abs(),
        self_confirmed: err.max_abs() <= tol,
        nu: err.nu,
        lyapunov: err.lyapunov,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub point: Vec<f64>,
    pub mass: f64,
    pub particles: usize,
}

/// Greedy clustering: each point joins the first cluster whose seed lies
/// within `radius`. Sorted by mass, then by point.
pub fn cluster_points(points: &[Vec<f64>], weights: &[f64], radius: f64) -> Vec<Cluster> {
    let mut seeds: Vec<&[f64]> = Vec::new();
    let mut sums: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    for (x, w) in points.iter().zip(weights) {
        let hit = seeds.iter().position(|s| dist(s, x) <= radius);
        let k = hit.unwrap_or_else(|| {
            seeds.push(x);
            sums.push((vec![0.0; x.len()], 0.0, 0));
            seeds.len() - 1
        });
        let (sum, mass, count) = &mut sums[k];
        for (si, xi) in sum.iter_mut().zip(x) {
            *si += w * xi;
        }
        *mass += w;
        *count += 1;
    }
    let mut clusters: Vec<Cluster> = sums
        .into_iter()
        .map(|(sum, mass, particles)| Cluster {
            point: sum.iter().map(|v| v / mass).collect(),
            mass,
            particles,
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.mass
            .total_cmp(&a.mass)
            .then_with(|| a.point.partial_cmp(&b.point).expect("finite points"))
    });
    clusters
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionSummary {
    pub action: String,
    pub particles: usize,
    pub initial_mass: f64,
    /// `u(k, q)` for the initial `q`.
    pub anchor: Vec<f64>,
    pub final_mean: Option<Vec<f64>>,
    pub max_distance_to_anchor: Option<f64>,
    pub max_distance_to_target: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalState {
    pub q: Vec<f64>,
    pub target: Vec<f64>,
    pub mean_state: Vec<f64>,
    pub spread: f64,
    pub mean_distance: f64,
    pub max_distance: f64,
    pub mean_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantSummary {
    #[serde(flatten)]
    pub worst: InvariantReport,
    pub contraction_holds: bool,
    pub blackwell_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub name: String,
    pub mode: String,
    pub actions: Vec<String>,
    pub particles: usize,
    pub seed: Option<u64>,
    pub s_max: f64,
    pub ds: f64,
    pub steps: usize,
    /// The initial candidate and the density its regions induce on the
    /// initial ensemble.
    pub certificate: CandidateReport,
    pub final_state: FinalState,
    pub invariants: InvariantSummary,
    pub cluster_count: usize,
    pub limit_points: Vec<Cluster>,
    /// Particles grouped by the action they play at `s = 0`.
    pub regions: Vec<RegionSummary>,
}

pub struct SimulationOutcome {
    pub initial: ParticleEnsemble,
    pub record: SimulationRecord,
    pub summary: SimulationSummary,
}

fn simulation_mode(s: &Scenario) -> Result<SimulationMode, CliError> {
    Ok(match &s.file.mode {
        ModeSpec::FixedTarget { q, y } => SimulationMode::FixedTarget {
            q: q.clone(),
            y: Target::new(y.clone())?,
        },
        ModeSpec::SelfConfirming { p, q } => SimulationMode::SelfConfirming {
            p: p.clone(),
            q: q.clone(),
        },
        _ => return Err(CliError::Validation("mode does not simulate".into())),
    })
}

/// Runs a `fixed_target` or `self_confirming` scenario.
pub fn simulate(s: &Scenario) -> Result<SimulationOutcome, CliError> {
    let game = &s.game;
    let mode = simulation_mode(s)?;
    let rho0 = build_ensemble(s)?;
    let cand = initial_candidate(s)?;
    let certificate = candidate_report(game, &rho0, &cand, CERTIFICATE_TOL)?;
    let config = SimulationConfig {
        record_every: s.file.output.record_every,
        trajectory_particles: s.file.output.trajectory_particles,
        ..SimulationConfig::new(s.file.s_max, s.file.ds)
    };
    let record = simulate_population(game, &s.cost_spec()?, &rho0, &mode, &config)?;
    let last = record.final_snapshot();
    let fin = &record.final_ensemble;

    let anchors = game.anchors(cand.q())?;
    let regions = game
        .actions()
        .iter()
        .enumerate()
        .map(|(k, action)| {
            let members: Vec<usize> = (0..fin.len()).filter(|i| record.initial_actions[*i] == k).collect();
            let mass: f64 = members.iter().map(|i| rho0.weights()[*i]).sum();
            let finals = || members.iter().map(|i| &fin.positions()[*i]);
            let max_to = |p: &[f64]| finals().map(|x| dist(x, p)).fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
            let final_mean = (mass > 0.0).then(|| {
                let mut mean = vec![0.0; game.payoff_dim()];
                for i in &members {
                    for (m, x) in mean.iter_mut().zip(&fin.positions()[*i]) {
                        *m += fin.weights()[*i] * x / mass;
                    }
                }
                mean
            });
            RegionSummary {
                action: action.clone(),
                particles: members.len(),
                initial_mass: mass,
                anchor: anchors[k].clone(),
                final_mean,
                max_distance_to_anchor: max_to(&anchors[k]),
                max_distance_to_target: max_to(&last.target),
            }
        })
        .collect();

    let clusters = cluster_points(fin.positions(), fin.weights(), CLUSTER_RADIUS);
    let inv = record.invariants.clone();
    let summary = SimulationSummary {
        name: s.name().to_string(),
        mode: match mode {
            SimulationMode::FixedTarget { .. } => "fixed_target".into(),
            SimulationMode::SelfConfirming { .. } => "self_confirming".into(),
        },
        actions: game.actions().to_vec(),
        particles: rho0.len(),
        seed: s.file.seed,
        s_max: s.file.s_max,
        ds: s.file.ds,
        steps: last.step,
        certificate,
        final_state: FinalState {
            q: last.q.clone(),
            target: last.target.clone(),
            mean_state: last.mean_state.clone(),
            spread: fin.spread(),
            mean_distance: last.mean_distance,
            max_distance: last.max_distance,
            mean_cost: record.mean_cost(),
        },
        invariants: InvariantSummary {
            contraction_holds: inv.max_step_contraction <= 1.0 + CONTRACTION_SLACK
                && inv.max_cumulative_contraction <= 1.0 + CONTRACTION_SLACK,
            blackwell_holds: inv.max_separation <= SEPARATION_SLACK,
            worst: inv,
        },
        cluster_count: clusters.len(),
        limit_points: clusters.into_iter().take(MAX_CLUSTERS).collect(),
        regions,
    };
    Ok(SimulationOutcome {
        initial: rho0,
        record,
        summary,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NonuniquenessReport {
    pub nonunique: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub name: String,
    pub actions: Vec<String>,
    pub particles: usize,
    pub seed: Option<u64>,
    pub kappa: f64,
    pub eta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub initial: CandidateReport,
    pub converged: bool,
    pub iterations: usize,
    #[serde(rename = "final")]
    pub final_candidate: CandidateReport,
    /// Whether the final target is a vertex of the state space.
    pub target_is_vertex: bool,
    /// The damped map as an Euler step of `q̇ = κ(q̃ − q)` with `dt = η/κ`.
    pub lyapunov_decay: bool,
    pub nonuniqueness: Option<NonuniquenessReport>,
}

pub struct SolveOutcome {
    pub ensemble: ParticleEnsemble,
    pub outcome: FixedPointOutcome,
    pub summary: SolveSummary,
}

/// Solve parameters overridable from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOverrides {
    pub eta: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Runs the damped fixed-point iteration of an `equilibrium_solve` scenario.
/// `fixed_target` and `self_confirming` scenarios start from their candidate.
pub fn solve(s: &Scenario, o: SolveOverrides) -> Result<SolveOutcome, CliError> {
    let game = &s.game;
    let (kappa, eta, tol, max_iter, check_nonunique, fd_step) = match &s.file.mode {
        ModeSpec::EquilibriumSolve {
            kappa,
            eta,
            tol,
            max_iter,
            nonuniqueness,
            fd_step,
            ..
        } => (*kappa, *eta, *tol, *max_iter, *nonuniqueness, *fd_step),
        ModeSpec::FixedTarget { .. } | ModeSpec::SelfConfirming { .. } => {
            let d = FlowParameters::default();
            (d.kappa, d.step, d.tol, d.max_iter, false, vecpop::equilibrium::DEFAULT_FD_STEP)
        }
        _ => return Err(CliError::Validation("scenario mode has no equilibrium candidate".into())),
    };
    let params = FlowParameters::new(kappa, o.eta.unwrap_or(eta), o.max_iter.unwrap_or(max_iter), o.tol.unwrap_or(tol))?;
    let rule = match &s.file.mode {
        ModeSpec::FixedTarget { y, .. } | ModeSpec::EquilibriumSolve { y: Some(y), p: None, .. } => {
            UpdateRule::PinTarget(Target::new(y.clone())?)
        }
        _ => UpdateRule::HoldWeights,
    };
    let rho = build_ensemble(s)?;
    let initial = initial_candidate(s)?;
    let outcome = fixed_point_iterate(game, &rho, &initial, &params, &rule)?;
    let cand = &outcome.candidate;
    let final_candidate = candidate_report(game, &rho, cand, params.tol)?;
    let x_space = payoff_polytope(game);
    let target_is_vertex = x_space
        .vertices()
        .iter()
        .any(|v| dist(v, cand.y()) <= VERTEX_TOL);
    let nonuniqueness = (check_nonunique && outcome.converged).then(|| {
        let n = game.n_actions();
        let l_tol = 0.5 * n as f64 * params.tol * params.tol;
        match nonuniqueness_check(game, &rho, cand, &sum_zero_directions(n), fd_step, l_tol) {
            Ok(b) => NonuniquenessReport {
                nonunique: Some(b),
                error: None,
            },
            Err(e) => NonuniquenessReport {
                nonunique: None,
                error: Some(e.to_string()),
            },
        }
    });
    let summary = SolveSummary {
        name: s.name().to_string(),
        actions: game.actions().to_vec(),
        particles: rho.len(),
        seed: s.file.seed,
        kappa: params.kappa,
        eta: params.step,
        tol: params.tol,
        max_iter: params.max_iter,
        initial: candidate_report(game, &rho, &initial, params.tol)?,
        converged: outcome.converged,
        iterations: outcome.trace.len() - 1,
        final_candidate,
        target_is_vertex,
        lyapunov_decay: lyapunov_decay_check(&outcome.lyapunov_trace(), params.kappa, params.step / params.kappa),
        nonuniqueness,
    };
    Ok(SolveOutcome {
        ensemble: rho,
        outcome,
        summary,
    })
}

fn write_trajectory(path: &Path, game: &VectorPayoffGame, record: &SimulationRecord) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header = vec!["step".to_string(), "s".into(), "t".into(), "particle_id".into()];
    header.extend((1..=game.payoff_dim()).map(|i| format!("x_{i}")));
    header.push("action".into());
    w.write_record(&header)?;
    for row in &record.trajectory {
        let mut rec = vec![row.step.to_string(), fmt_num(row.s), fmt_num(row.t), row.particle.to_string()];
        rec.extend(row.x.iter().map(|v| fmt_num(*v)));
        rec.push(game.actions()[row.action].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_iterations(path: &Path, outcome: &FixedPointOutcome) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let n = outcome.candidate.q().len();
    let mut header = vec!["iteration".to_string(), "lyapunov".into(), "nu_max".into()];
    header.extend((1..=n).map(|i| format!("q_{i}")));
    w.write_record(&header)?;
    for r in &outcome.trace {
        let mut rec = vec![r.iteration.to_string(), fmt_num(r.lyapunov), fmt_num(r.nu_max)];
        rec.extend(r.q.iter().map(|v| fmt_num(*v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Validation(format!("{}: {other:?}", path.display())),
    }
}

/// Files written by one run.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    /// Set when an iterative solve stopped without converging; outputs are
    /// still written.
    pub no_convergence: Option<vecpop::Error>,
}

/// Runs a scenario and writes its outputs to `out`.
pub fn run_scenario(s: &Scenario, out: &Path, report: Option<ReportKind>) -> Result<RunOutput, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut output = RunOutput::default();
    let mut emit = |name: &str| {
        let p = out.join(name);
        output.files.push(p.clone());
        p
    };
    let kind = match report {
        Some(ReportKind::TargetSets) => Some(ReportKind::TargetSets),
        Some(ReportKind::Bayesian) => Some(ReportKind::Bayesian),
        None => match s.file.mode {
            ModeSpec::TargetSetReport { .. } => Some(ReportKind::TargetSets),
            ModeSpec::BayesianReport => Some(ReportKind::Bayesian),
            _ => None,
        },
    };
    match kind {
        Some(ReportKind::TargetSets) => {
            let qs = match &s.file.mode {
                ModeSpec::TargetSetReport { q: Some(qs) } => qs.clone(),
                _ => pure_strategies(s.game.n_actions()),
            };
            write_json(&emit("target_sets.json"), &target_set_report(&s.game, &qs)?)?;
        }
        Some(ReportKind::Bayesian) => {
            let h = s
                .harsanyi
                .as_ref()
                .ok_or_else(|| CliError::Validation("the bayesian report needs a Harsanyi game".into()))?;
            write_json(&emit("bayesian.json"), &bayesian_report(h)?)?;
        }
        None => match s.file.mode {
            ModeSpec::EquilibriumSolve { .. } => {
                let solved = solve(s, SolveOverrides::default())?;
                write_iterations(&emit("iterations.csv"), &solved.outcome)?;
                write_json(&emit("summary.json"), &solved.summary)?;
                if !solved.outcome.converged {
                    output.no_convergence = Some(vecpop::Error::NoConvergence {
                        iterations: solved.summary.max_iter,
                        lyapunov: solved.outcome.final_lyapunov(),
                    });
                }
            }
            _ => {
                let sim = simulate(s)?;
                write_trajectory(&emit("trajectory.csv"), &s.game, &sim.record)?;
                write_json(&emit("summary.json"), &sim.summary)?;
            }
        },
    }
    Ok(output)
}

/// Runs the fixed-point solve and writes `iterations.csv` and `summary.json`.
pub fn run_solve(s: &Scenario, out: &Path, o: SolveOverrides) -> Result<RunOutput, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let solved = solve(s, o)?;
    let iterations = out.join("iterations.csv");
    let summary = out.join("summary.json");
    write_iterations(&iterations, &solved.outcome)?;
    write_json(&summary, &solved.summary)?;
    Ok(RunOutput {
        files: vec![iterations, summary],
        no_convergence: (!solved.outcome.converged).then(|| vecpop::Error::NoConvergence {
            iterations: solved.summary.max_iter,
            lyapunov: solved.outcome.final_lyapunov(),
        }),
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
