//! Target-set and Bayesian reports.

use serde::Serialize;
use vecpop::approachability::{is_approachable, target_set, target_weights, Target};
use vecpop::harsanyi::HarsanyiGame;
use vecpop::{BayesianStrategy, Result, SimplexVector, VectorPayoffGame};

/// Slack for exact-arithmetic comparisons on payoff tables.
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct TargetSetEntry {
    pub q: Vec<f64>,
    /// `u(k, q)` per action, keyed by action name.
    pub anchors: Vec<(String, Vec<f64>)>,
    /// Vertices of `T(q)` in lexicographic order.
    pub vertices: Vec<Vec<f64>>,
    pub origin_approachable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetSetReport {
    pub actions: Vec<String>,
    pub payoffs: Vec<Vec<Vec<f64>>>,
    pub target_sets: Vec<TargetSetEntry>,
}

/// Every pure strategy of an `n`-action game.
pub fn pure_strategies(n: usize) -> Vec<SimplexVector> {
    (0..n).map(|k| SimplexVector::vertex(n, k)).collect()
}

pub fn target_set_report(game: &VectorPayoffGame, qs: &[SimplexVector]) -> Result<TargetSetReport> {
    let origin = Target::new(vec![0.0; game.payoff_dim()])?;
    let target_sets = qs
        .iter()
        .map(|q| {
            let anchors = game.anchors(q)?;
            let mut vertices = target_set(game, q)?.vertices().to_vec();
            vertices.sort_by(|a, b| a.partial_cmp(b).expect("finite vertices"));
            Ok(TargetSetEntry {
                q: q.as_slice().to_vec(),
                anchors: game.actions().iter().cloned().zip(anchors).collect(),
                vertices,
                origin_approachable: is_approachable(&origin, game, q)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TargetSetReport {
        actions: game.actions().to_vec(),
        payoffs: game.payoffs().to_vec(),
        target_sets,
    })
}

/// Outcome of reaching the origin against a pure population strategy with the
/// constant strategy whose anchor is the origin.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantStrategyCheck {
    pub q: Vec<f64>,
    pub origin_approachable: bool,
    /// Action played at every state, when the origin is an anchor.
    pub action: Option<String>,
    /// Population strategy produced when everybody plays `action`.
    pub induced_q: Option<Vec<f64>>,
    pub self_confirmed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileCheck {
    pub row: String,
    pub column: String,
    pub row_regret: Vec<f64>,
    pub column_regret: Vec<f64>,
    /// Largest gain of a unilateral pure deviation in the ex-ante game.
    pub best_deviation_gain: f64,
    pub is_nash: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BayesianReport {
    pub strategies: [Vec<String>; 2],
    /// Row player's per-type expected payoffs, `[row][column]`.
    pub expected_payoffs: Vec<Vec<Vec<f64>>>,
    /// Row player's per-type maximal regret, `[row][column]`.
    pub maximal_regret: Vec<Vec<Vec<f64>>>,
    /// Pure Nash profiles of the ex-ante expected game.
    pub equilibria: Vec<(String, String)>,
    /// Profiles where both players' maximal regret is component-wise
    /// nonpositive, each with a brute-force deviation check.
    pub nonpositive_regret_profiles: Vec<ProfileCheck>,
    /// Number of nonpositive-regret profiles that are not Nash.
    pub counterexamples: usize,
    /// Present when both players share the strategy set.
    pub constant_strategies: Option<Vec<ConstantStrategyCheck>>,
}

fn nonpositive(v: &[f64]) -> bool {
    v.iter().all(|x| *x <= EPS)
}

/// Largest ex-ante gain from a unilateral pure deviation at `(row, column)`.
fn best_deviation_gain(
    h: &HarsanyiGame,
    strategies: &[Vec<BayesianStrategy>; 2],
    row: &BayesianStrategy,
    column: &BayesianStrategy,
) -> Result<f64> {
    let base_row = h.ex_ante_payoff(0, row, column)?;
    let base_col = h.ex_ante_payoff(1, column, row)?;
    let mut gain = f64::NEG_INFINITY;
    for s in &strategies[0] {
        gain = gain.max(h.ex_ante_payoff(0, s, column)? - base_row);
    }
    for s in &strategies[1] {
        gain = gain.max(h.ex_ante_payoff(1, s, row)? - base_col);
    }
    Ok(gain)
}

fn constant_strategy_checks(h: &HarsanyiGame) -> Result<Vec<ConstantStrategyCheck>> {
    let game = h.maximal_regret_game()?;
    let n = game.n_actions();
    let origin = Target::new(vec![0.0; game.payoff_dim()])?;
    pure_strategies(n)
        .into_iter()
        .map(|q| {
            let weights = target_weights(&game, &q, &origin)?;
            let anchors = game.anchors(&q)?;
            // the constant strategy needs an action whose anchor is the origin
            let action = weights
                .as_ref()
                .and_then(|_| anchors.iter().position(|u| u.iter().all(|v| v.abs() <= EPS)));
            let induced = action.map(|a| SimplexVector::vertex(n, a));
            Ok(ConstantStrategyCheck {
                q: q.as_slice().to_vec(),
                origin_approachable: weights.is_some(),
                action: action.map(|a| game.actions()[a].clone()),
                self_confirmed: induced.as_ref().is_some_and(|i| i.max_abs_diff(&q) <= EPS),
                induced_q: induced.map(SimplexVector::into_vec),
            })
        })
        .collect()
}

pub fn bayesian_report(h: &HarsanyiGame) -> Result<BayesianReport> {
    let strategies = [h.enumerate_bayesian_strategies(0), h.enumerate_bayesian_strategies(1)];
    let labels = [0, 1].map(|i| strategies[i].iter().map(|s| h.strategy_label(i, s)).collect::<Vec<_>>());
    let table = |f: &dyn Fn(&BayesianStrategy, &BayesianStrategy) -> Result<Vec<f64>>| {
        strategies[0]
            .iter()
            .map(|r| strategies[1].iter().map(|c| f(r, c)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()
    };
    let expected_payoffs = table(&|r, c| h.bayesian_expected_payoffs(0, r, c))?;
    let maximal_regret = table(&|r, c| h.maximal_regret(0, r, c))?;
    let equilibria = h
        .pure_bayesian_equilibria()?
        .into_iter()
        .map(|(i, j)| (labels[0][i].clone(), labels[1][j].clone()))
        .collect();

    let mut profiles = Vec::new();
    for (i, r) in strategies[0].iter().enumerate() {
        for (j, c) in strategies[1].iter().enumerate() {
            let row_regret = h.maximal_regret(0, r, c)?;
            let column_regret = h.maximal_regret(1, c, r)?;
            if !(nonpositive(&row_regret) && nonpositive(&column_regret)) {
                continue;
            }
            let gain = best_deviation_gain(h, &strategies, r, c)?;
            profiles.push(ProfileCheck {
                row: labels[0][i].clone(),
                column: labels[1][j].clone(),
                row_regret,
                column_regret,
                best_deviation_gain: gain,
                is_nash: gain <= EPS,
            });
        }
    }
    let counterexamples = profiles.iter().filter(|p| !p.is_nash).count();
    let constant_strategies = if h.n_types(0) == h.n_types(1) {
        Some(constant_strategy_checks(h)?)
    } else {
        None
    };
    Ok(BayesianReport {
        strategies: labels,
        expected_payoffs,
        maximal_regret,
        equilibria,
        nonpositive_regret_profiles: profiles,
        counterexamples,
        constant_strategies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use vecpop::harsanyi::{battle_of_sexes, HarsanyiFile, TypeEvent};

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn bos_equilibria_and_regret_profiles_agree() {
        let r = bayesian_report(&battle_of_sexes()).unwrap();
        let expected = vec![pair("O_l,F_h", "O_l,O_h"), pair("O_l,O_h", "O_l,F_h")];
        let mut eq = r.equilibria.clone();
        eq.sort();
        assert_eq!(eq, expected);
        let mut nonpos: Vec<_> = r
            .nonpositive_regret_profiles
            .iter()
            .map(|p| pair(&p.row, &p.column))
            .collect();
        nonpos.sort();
        assert_eq!(nonpos, expected);
        assert_eq!(r.counterexamples, 0);
    }

    #[test]
    fn bos_constant_strategies_contradict() {
        let r = bayesian_report(&battle_of_sexes()).unwrap();
        let checks = r.constant_strategies.unwrap();
        let induced: Vec<Vec<f64>> = checks.iter().map(|c| c.induced_q.clone().unwrap()).collect();
        let e = |k| SimplexVector::vertex(4, k).into_vec();
        assert_eq!(induced, vec![e(1), e(0), e(0), e(2)]);
        assert!(checks.iter().all(|c| c.origin_approachable && !c.self_confirmed));
    }

    #[test]
    fn single_state_reduces_to_nash_check() {
        // matching pennies has no pure equilibrium; a coordination game has two
        let ev = |n: &str| TypeEvent {
            name: n.into(),
            states: vec!["w".into()],
        };
        let make = |row: Vec<Vec<f64>>, col: Vec<Vec<f64>>| {
            HarsanyiGame::new(HarsanyiFile {
                states: vec!["w".into()],
                prior: vec![1.0],
                actions: vec!["A".into(), "B".into()],
                types: [vec![ev("t")], vec![ev("t")]],
                payoffs: vec![[row, col]],
            })
            .unwrap()
        };
        let pennies = make(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
        let r = bayesian_report(&pennies).unwrap();
        assert!(r.equilibria.is_empty());
        assert!(r.nonpositive_regret_profiles.is_empty());

        let coord = make(vec![vec![2.0, 0.0], vec![0.0, 1.0]], vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        let r = bayesian_report(&coord).unwrap();
        assert_eq!(r.equilibria, vec![pair("A_t", "A_t"), pair("B_t", "B_t")]);
        assert_eq!(r.nonpositive_regret_profiles.len(), 2);
        assert_eq!(r.counterexamples, 0);
    }

    #[test]
    fn bos_target_sets() {
        let game = battle_of_sexes().maximal_regret_game().unwrap();
        let report = target_set_report(&game, &pure_strategies(4)).unwrap();
        let sq = |pts: &[[f64; 2]]| {
            let mut v: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        let expected = [
            sq(&[[0.0, 1.0], [0.0, 0.0], [3.0, 1.0], [3.0, 0.0]]),
            sq(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]),
            sq(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]),
            sq(&[[1.0, 0.0], [1.0, 3.0], [0.0, 0.0], [0.0, 3.0]]),
        ];
        for (entry, exp) in report.target_sets.iter().zip(&expected) {
            assert_eq!(&entry.vertices, exp);
            assert!(entry.origin_approachable);
        }
    }
}
