//! Scenario files: which game, which initial population, what to compute.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use vecpop::approachability::Target;
use vecpop::game::{library, ScalarGame, VectorGameFile};
use vecpop::harsanyi::{HarsanyiFile, HarsanyiGame};
use vecpop::{CostSpec, SimplexVector, VectorPayoffGame};

use crate::error::CliError;

/// Names accepted by `run` without a file.
pub const BUILTINS: [&str; 6] = [
    "pd_payoff",
    "pd_regret",
    "coordination",
    "hawk_dove",
    "parametric",
    "bayesian_bos",
];

fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "pd_payoff" => include_str!("../scenarios/pd_payoff.json"),
        "pd_regret" => include_str!("../scenarios/pd_regret.json"),
        "coordination" => include_str!("../scenarios/coordination.json"),
        "hawk_dove" => include_str!("../scenarios/hawk_dove.json"),
        "parametric" => include_str!("../scenarios/parametric.json"),
        "bayesian_bos" => include_str!("../scenarios/bayesian_bos.json"),
        _ => return None,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    Inline {
        actions: Vec<String>,
        payoff_dim: usize,
        payoffs: Vec<Vec<Vec<f64>>>,
    },
    File {
        path: PathBuf,
    },
    /// Regret transform of a scalar symmetric game.
    Regret {
        actions: Vec<String>,
        payoffs: Vec<Vec<f64>>,
    },
    /// Maximal-regret transform of a Harsanyi game, inline or from a file.
    MaxRegret {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        harsanyi: Option<HarsanyiFile>,
    },
    /// `[(0,a),(0,b); (−a,0),(−b,0)]`.
    Parametric {
        a: f64,
        b: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSpec {
    FixedTarget {
        q: SimplexVector,
        y: Vec<f64>,
    },
    SelfConfirming {
        p: SimplexVector,
        q: SimplexVector,
    },
    EquilibriumSolve {
        p: Option<SimplexVector>,
        q: SimplexVector,
        /// Pins the target; `p` is then derived from `q` every iteration.
        #[serde(default)]
        y: Option<Vec<f64>>,
        #[serde(default = "default_kappa")]
        kappa: f64,
        #[serde(default = "default_eta")]
        eta: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default)]
        nonuniqueness: bool,
        #[serde(default = "default_fd_step")]
        fd_step: f64,
    },
    TargetSetReport {
        /// Population strategies to report; every pure strategy when absent.
        #[serde(default)]
        q: Option<Vec<SimplexVector>>,
    },
    BayesianReport,
}

fn default_kappa() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    0.5
}
fn default_tol() -> f64 {
    0.02
}
fn default_max_iter() -> usize {
    200
}
fn default_fd_step() -> f64 {
    vecpop::equilibrium::DEFAULT_FD_STEP
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform {
        particles: usize,
    },
    /// Uniform positions re-weighted so the mode's partition induces its `q`.
    UniformReweighted {
        particles: usize,
    },
    Points {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

impl DensitySpec {
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, DensitySpec::Points { .. })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostFile {
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    /// Defaults to `e^{s_max}`.
    #[serde(default)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_trajectory_particles")]
    pub trajectory_particles: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_trajectory_particles() -> usize {
    100
}
fn default_record_every() -> usize {
    10
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            trajectory_particles: default_trajectory_particles(),
            record_every: default_record_every(),
        }
    }
}

/// A scenario file as written.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub game: GameSpec,
    pub mode: ModeSpec,
    #[serde(default)]
    pub density: Option<DensitySpec>,
    #[serde(default)]
    pub cost: Option<CostFile>,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_ds")]
    pub ds: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_s_max() -> f64 {
    10.0
}
fn default_ds() -> f64 {
    0.1
}

/// A validated scenario with its game resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub game: VectorPayoffGame,
    pub harsanyi: Option<HarsanyiGame>,
    /// Directory relative paths resolve against.
    pub base_dir: PathBuf,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub particles: Option<usize>,
    pub s_max: Option<f64>,
    pub ds: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

/// Loads a built-in scenario by name or a scenario file by path.
pub fn load_scenario(name_or_path: &str, overrides: &Overrides) -> Result<Scenario, CliError> {
    let (text, origin, base_dir) = match builtin_source(name_or_path) {
        Some(src) => (src.to_string(), format!("builtin:{name_or_path}"), PathBuf::from(".")),
        None => {
            let path = Path::new(name_or_path);
            if !path.exists() && !name_or_path.contains(['/', '.']) {
                return Err(CliError::Validation(format!(
                    "unknown scenario '{name_or_path}'; builtins are {}",
                    BUILTINS.join(", ")
                )));
            }
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (text, path.display().to_string(), base)
        }
    };
    let file = parse_json::<ScenarioFile>(&text, &origin)?;
    Scenario::from_file(file, base_dir, overrides)
}

/// Parses JSON with the failing field path in the error.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        // the inner message already carries line and column
        CliError::Validation(format!("{origin}: at `{}`: {}", e.path(), e.inner()))
    })
}

impl Scenario {
    pub fn from_file(mut file: ScenarioFile, base_dir: PathBuf, overrides: &Overrides) -> Result<Self, CliError> {
        apply_overrides(&mut file, overrides)?;
        let (game, harsanyi) = resolve_game(&file.game, &base_dir)?;
        let scenario = Self {
            file,
            game,
            harsanyi,
            base_dir,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    fn validate(&self) -> Result<(), CliError> {
        let n = self.game.n_actions();
        let m = self.game.payoff_dim();
        let f = &self.file;
        let check_q = |label: &str, q: &SimplexVector| {
            if q.len() == n {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "mode.{label} has {} components but the game has {n} actions",
                    q.len()
                )))
            }
        };
        let check_y = |y: &[f64]| {
            if y.len() == m && y.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "mode.y must be a finite vector of length {m}"
                )))
            }
        };
        match &f.mode {
            ModeSpec::FixedTarget { q, y } => {
                check_q("q", q)?;
                check_y(y)?;
            }
            ModeSpec::SelfConfirming { p, q } => {
                check_q("p", p)?;
                check_q("q", q)?;
            }
            ModeSpec::EquilibriumSolve {
                p,
                q,
                y,
                kappa,
                eta,
                tol,
                max_iter,
                fd_step,
                ..
            } => {
                check_q("q", q)?;
                match (p, y) {
                    (Some(p), None) => check_q("p", p)?,
                    (None, Some(y)) => check_y(y)?,
                    _ => {
                        return Err(CliError::Validation(
                            "equilibrium_solve needs exactly one of `p` and `y`".into(),
                        ))
                    }
                }
                vecpop::FlowParameters::new(*kappa, *eta, *max_iter, *tol)?;
                if !(*fd_step > 0.0) {
                    return Err(CliError::Validation("mode.fd_step must be positive".into()));
                }
            }
            ModeSpec::TargetSetReport { q } => {
                for qi in q.iter().flatten() {
                    check_q("q[]", qi)?;
                }
            }
            ModeSpec::BayesianReport => {
                if self.harsanyi.is_none() {
                    return Err(CliError::Validation(
                        "bayesian_report needs a max_regret game source".into(),
                    ));
                }
            }
        }
        if self.needs_density() {
            let density = f
                .density
                .as_ref()
                .ok_or_else(|| CliError::Validation(format!("mode needs a `density` for {}", f.name)))?;
            if density.is_stochastic() && f.seed.is_none() {
                return Err(CliError::Validation("`seed` is required for sampled densities".into()));
            }
            match density {
                DensitySpec::Uniform { particles } | DensitySpec::UniformReweighted { particles } => {
                    if *particles == 0 {
                        return Err(CliError::Validation("density.particles must be positive".into()));
                    }
                }
                DensitySpec::Points { points, weights } => {
                    if points.is_empty() || points.iter().any(|p| p.len() != m) {
                        return Err(CliError::Validation(format!(
                            "density.points must be a nonempty list of length-{m} vectors"
                        )));
                    }
                    if weights.as_ref().is_some_and(|w| w.len() != points.len()) {
                        return Err(CliError::Validation("density.weights must match density.points".into()));
                    }
                }
            }
        }
        if self.needs_simulation() {
            if !(f.s_max > 0.0 && f.s_max.is_finite()) {
                return Err(CliError::Validation("s_max must be positive".into()));
            }
            if !(f.ds > 0.0 && f.ds <= vecpop::sim::MAX_DS) {
                return Err(CliError::Validation(format!(
                    "ds must lie in (0, {}]",
                    vecpop::sim::MAX_DS
                )));
            }
            if f.output.record_every == 0 {
                return Err(CliError::Validation("output.record_every must be positive".into()));
            }
            self.cost_spec()?;
        }
        Ok(())
    }

    pub fn needs_density(&self) -> bool {
        matches!(
            self.file.mode,
            ModeSpec::FixedTarget { .. } | ModeSpec::SelfConfirming { .. } | ModeSpec::EquilibriumSolve { .. }
        )
    }

    pub fn needs_simulation(&self) -> bool {
        matches!(self.file.mode, ModeSpec::FixedTarget { .. } | ModeSpec::SelfConfirming { .. })
    }

    pub fn cost_spec(&self) -> Result<CostSpec, CliError> {
        let horizon_default = self.file.s_max.exp();
        let m = self.game.payoff_dim();
        let spec = match &self.file.cost {
            None => CostSpec::identity(m, horizon_default)?,
            Some(c) => CostSpec::from_rows(&c.q, &c.s, c.horizon.unwrap_or(horizon_default))?,
        };
        if spec.dim() != m {
            return Err(CliError::Validation(format!(
                "cost matrices are {}×{} but payoffs have dimension {m}",
                spec.dim(),
                spec.dim()
            )));
        }
        Ok(spec)
    }

    pub fn fixed_target(&self) -> Option<(SimplexVector, Target)> {
        match &self.file.mode {
            ModeSpec::FixedTarget { q, y } => Some((q.clone(), Target::new(y.clone()).ok()?)),
            _ => None,
        }
    }
}

fn apply_overrides(file: &mut ScenarioFile, o: &Overrides) -> Result<(), CliError> {
    if let Some(seed) = o.seed {
        file.seed = Some(seed);
    }
    if let Some(s) = o.s_max {
        file.s_max = s;
    }
    if let Some(ds) = o.ds {
        file.ds = ds;
    }
    if let Some(n) = o.particles {
        match &mut file.density {
            Some(DensitySpec::Uniform { particles }) | Some(DensitySpec::UniformReweighted { particles }) => {
                *particles = n
            }
            _ => {
                return Err(CliError::Validation(
                    "--particles needs a sampled density in the scenario".into(),
                ))
            }
        }
    }
    if o.a.is_some() || o.b.is_some() {
        match &mut file.game {
            GameSpec::Parametric { a, b } => {
                *a = o.a.unwrap_or(*a);
                *b = o.b.unwrap_or(*b);
            }
            _ => return Err(CliError::Validation("--a/--b apply to parametric games only".into())),
        }
    }
    Ok(())
}

/// Resolves a game source to the vector game (and the Harsanyi game it came
/// from, if any).
pub fn resolve_game(spec: &GameSpec, base_dir: &Path) -> Result<(VectorPayoffGame, Option<HarsanyiGame>), CliError> {
    Ok(match spec {
        GameSpec::Inline {
            actions,
            payoff_dim,
            payoffs,
        } => (VectorPayoffGame::new(actions.clone(), *payoff_dim, payoffs.clone())?, None),
        GameSpec::File { path } => {
            let path = base_dir.join(path);
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let file: VectorGameFile = parse_json(&text, &path.display().to_string())?;
            (VectorPayoffGame::try_from(file)?, None)
        }
        GameSpec::Regret { actions, payoffs } => {
            (ScalarGame::new(actions.clone(), payoffs.clone())?.regret_transform(), None)
        }
        GameSpec::MaxRegret { path, harsanyi } => {
            let file = match (path, harsanyi) {
                (Some(p), None) => {
                    let p = base_dir.join(p);
                    let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
                    parse_json::<HarsanyiFile>(&text, &p.display().to_string())?
                }
                (None, Some(h)) => h.clone(),
                _ => {
                    return Err(CliError::Validation(
                        "max_regret needs exactly one of `path` and `harsanyi`".into(),
                    ))
                }
            };
            let h = HarsanyiGame::new(file)?;
            (h.maximal_regret_game()?, Some(h))
        }
        GameSpec::Parametric { a, b } => (library::parametric_regret(*a, *b)?, None),
    })
}

/// A game named on the command line: a builtin scenario's game or a file
/// holding a scenario, a game source, a vector game or a Harsanyi game.
pub fn load_game(name_or_path: &str) -> Result<(VectorPayoffGame, Option<HarsanyiGame>), CliError> {
    if builtin_source(name_or_path).is_some() {
        let s = load_scenario(name_or_path, &Overrides::default())?;
        return Ok((s.game, s.harsanyi));
    }
    let path = Path::new(name_or_path);
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let origin = path.display().to_string();
    let value: serde_json::Value = parse_json(&text, &origin)?;
    let has = |key: &str| value.get(key).is_some();
    if has("mode") {
        let file: ScenarioFile = parse_json(&text, &origin)?;
        let (g, h) = resolve_game(&file.game, &base)?;
        Ok((g, h))
    } else if has("kind") {
        resolve_game(&parse_json::<GameSpec>(&text, &origin)?, &base)
    } else if has("states") {
        let h = HarsanyiGame::new(parse_json::<HarsanyiFile>(&text, &origin)?)?;
        Ok((h.maximal_regret_game()?, Some(h)))
    } else {
        Ok((VectorPayoffGame::try_from(parse_json::<VectorGameFile>(&text, &origin)?)?, None))
    }
}

/// Loads a Harsanyi game from a file, or the built-in Battle of the Sexes
/// for `bos` / `bayesian_bos`.
pub fn load_harsanyi(name_or_path: &str) -> Result<HarsanyiGame, CliError> {
    if matches!(name_or_path, "bos" | "bayesian_bos") {
        return Ok(vecpop::harsanyi::battle_of_sexes());
    }
    let (_, h) = load_game(name_or_path)?;
    h.ok_or_else(|| CliError::Validation(format!("{name_or_path} does not describe a Harsanyi game")))
}
