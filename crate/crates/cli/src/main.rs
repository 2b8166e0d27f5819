use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vecpop::SimplexVector;
use vecpop_cli::format::to_json_string;
use vecpop_cli::report::{bayesian_report, pure_strategies, target_set_report};
use vecpop_cli::{load_game, load_harsanyi, load_scenario, run_scenario, run_solve, CliError, Overrides, ReportKind, RunOutput, SolveOverrides};

#[derive(Parser)]
#[command(name = "vecpop", version, about = "Vector-payoff population games: scenarios, simulations and reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a scenario file.
    #[command(allow_negative_numbers = true)]
    Run {
        /// Built-in name or path to a scenario JSON file.
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Output directory; defaults to `out/<scenario name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Produce a report instead of the scenario's own mode.
        #[arg(long, value_enum)]
        report: Option<ReportArg>,
    },
    /// Print a report as JSON.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Fixed-point solvers.
    #[command(subcommand)]
    Solve(SolveCommand),
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Vertex sets of `T(q)` for the given population strategies.
    TargetSets {
        /// Built-in scenario name, scenario file, game file or Harsanyi file.
        game: String,
        /// Comma-separated simplex vector; repeatable. Every pure strategy when
        /// omitted.
        #[arg(long)]
        q: Vec<String>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bayesian equilibria, maximal regrets and constant-strategy checks.
    Bayesian {
        /// Harsanyi game file, or `bos` for the built-in Battle of the Sexes.
        harsanyi: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SolveCommand {
    /// Damped fixed-point iteration `q ← (1 − η)q + η q̃`.
    #[command(allow_negative_numbers = true)]
    Equilibrium {
        scenario: String,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    s_max: Option<f64>,
    #[arg(long)]
    ds: Option<f64>,
    /// Parametric game parameter `a`.
    #[arg(long)]
    a: Option<f64>,
    /// Parametric game parameter `b`.
    #[arg(long)]
    b: Option<f64>,
}

impl From<OverrideArgs> for Overrides {
    fn from(o: OverrideArgs) -> Self {
        Overrides {
            seed: o.seed,
            particles: o.particles,
            s_max: o.s_max,
            ds: o.ds,
            a: o.a,
            b: o.b,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    TargetSets,
    Bayesian,
}

fn parse_simplex(text: &str) -> Result<SimplexVector, CliError> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Validation(format!("--q {text}: {e}")))?;
    Ok(SimplexVector::new(values)?)
}

fn emit(text: String, out: Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(&path, text).map_err(|e| CliError::io(&path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish(output: RunOutput) -> Result<(), CliError> {
    for f in &output.files {
        println!("wrote {}", f.display());
    }
    match output.no_convergence {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            overrides,
            out,
            report,
        } => {
            let s = load_scenario(&scenario, &overrides.into())?;
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(s.name()));
            let report = report.map(|r| match r {
                ReportArg::TargetSets => ReportKind::TargetSets,
                ReportArg::Bayesian => ReportKind::Bayesian,
            });
            finish(run_scenario(&s, &out, report)?)
        }
        Command::Report(ReportCommand::TargetSets { game, q, out }) => {
            let (game, _) = load_game(&game)?;
            let qs = if q.is_empty() {
                pure_strategies(game.n_actions())
            } else {
                q.iter().map(|t| parse_simplex(t)).collect::<Result<Vec<_>, _>>()?
            };
            emit(to_json_string(&target_set_report(&game, &qs)?)?, out)
        }
        Command::Report(ReportCommand::Bayesian { harsanyi, out }) => {
            let h = load_harsanyi(&harsanyi)?;
            emit(to_json_string(&bayesian_report(&h)?)?, out)
        }
        Command::Solve(SolveCommand::Equilibrium {
            scenario,
            eta,
            tol,
            max_iter,
            overrides,
            out,
        }) => {
            let s = load_scenario(&scenario, &overrides.into())?;
            let out = out.unwrap_or_else(|| PathBuf::from("out").join(format!("{}_solve", s.name())));
            finish(run_solve(&s, &out, SolveOverrides { eta, tol, max_iter })?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
