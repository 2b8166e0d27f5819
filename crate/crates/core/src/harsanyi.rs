//! Two-player Harsanyi games with finitely many states of the world, and the
//! maximal-regret vector-payoff game built from their pure Bayesian
//! strategies.
//!
//! Nature draws a state `ω` with prior `θ`; each player observes the type
//! event containing `ω`, picks an action from the common set `B`, and receives
//! `ϖ_i(own, opponent; ω)`. A pure Bayesian strategy assigns one action to
//! each of the player's types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::VectorPayoffGame;

const PRIOR_TOL: f64 = 1e-12;

/// A player's type: the set of states in which the player observes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeEvent {
    pub name: String,
    pub states: Vec<String>,
}

/// On-disk form of a Harsanyi game. `payoffs[state][player][own][opponent]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarsanyiFile {
    pub states: Vec<String>,
    pub prior: Vec<f64>,
    pub actions: Vec<String>,
    pub types: [Vec<TypeEvent>; 2],
    pub payoffs: Vec<[Vec<Vec<f64>>; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HarsanyiFile", into = "HarsanyiFile")]
pub struct HarsanyiGame {
    file: HarsanyiFile,
    /// `type_of[player][state]`
    type_of: [Vec<usize>; 2],
}

/// A `T_i`-measurable pure strategy: `assignment[type] = action`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BayesianStrategy {
    pub assignment: Vec<usize>,
}

impl BayesianStrategy {
    pub fn action_for(&self, ty: usize) -> usize {
        self.assignment[ty]
    }
}

impl TryFrom<HarsanyiFile> for HarsanyiGame {
    type Error = Error;

    fn try_from(file: HarsanyiFile) -> Result<Self> {
        HarsanyiGame::new(file)
    }
}

impl From<HarsanyiGame> for HarsanyiFile {
    fn from(h: HarsanyiGame) -> Self {
        h.file
    }
}

impl HarsanyiGame {
    pub fn new(file: HarsanyiFile) -> Result<Self> {
        let n_states = file.states.len();
        if n_states == 0 {
            return Err(Error::InvalidHarsanyi("no states of the world".into()));
        }
        if file.prior.len() != n_states {
            return Err(Error::InvalidHarsanyi(format!(
                "prior has {} entries for {n_states} states",
                file.prior.len()
            )));
        }
        if file.prior.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidHarsanyi("prior entries must be nonnegative".into()));
        }
        let total: f64 = file.prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOL {
            return Err(Error::InvalidHarsanyi(format!("prior sums to {total}, expected 1")));
        }
        let n_actions = file.actions.len();
        if n_actions == 0 {
            return Err(Error::InvalidHarsanyi("the action set is empty".into()));
        }

        let state_index = |name: &str| file.states.iter().position(|s| s == name);
        let mut type_of: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (player, events) in file.types.iter().enumerate() {
            if events.is_empty() {
                return Err(Error::InvalidHarsanyi(format!("player {player} has no types")));
            }
            let mut assigned = vec![None; n_states];
            for (t, ev) in events.iter().enumerate() {
                for s in &ev.states {
                    let idx = state_index(s).ok_or_else(|| {
                        Error::InvalidHarsanyi(format!(
                            "type `{}` of player {player} names unknown state `{s}`",
                            ev.name
                        ))
                    })?;
                    if assigned[idx].replace(t).is_some() {
                        return Err(Error::InvalidHarsanyi(format!(
                            "state `{s}` belongs to two types of player {player}"
                        )));
                    }
                }
            }
            type_of[player] = assigned
                .into_iter()
                .enumerate()
                .map(|(s, t)| {
                    t.ok_or_else(|| {
                        Error::InvalidHarsanyi(format!(
                            "state `{}` is not covered by any type of player {player}",
                            file.states[s]
                        ))
                    })
                })
                .collect::<Result<_>>()?;
        }

        if file.payoffs.len() != n_states {
            return Err(Error::InvalidHarsanyi(format!(
                "payoffs given for {} states, expected {n_states}",
                file.payoffs.len()
            )));
        }
        for (s, per_player) in file.payoffs.iter().enumerate() {
            for (player, m) in per_player.iter().enumerate() {
                let square = m.len() == n_actions && m.iter().all(|r| r.len() == n_actions);
                if !square {
                    return Err(Error::InvalidHarsanyi(format!(
                        "payoff matrix of player {player} in state `{}` must be {n_actions}×{n_actions}",
                        file.states[s]
                    )));
                }
                if m.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidHarsanyi(format!(
                        "payoff matrix of player {player} in state `{}` has non-finite entries",
                        file.states[s]
                    )));
                }
            }
        }
        Ok(Self { file, type_of })
    }

    pub fn file(&self) -> &HarsanyiFile {
        &self.file
    }

    pub fn n_states(&self) -> usize {
        self.file.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.file.actions.len()
    }

    pub fn n_types(&self, player: usize) -> usize {
        self.file.types[player].len()
    }

    pub fn type_names(&self, player: usize) -> Vec<&str> {
        self.file.types[player].iter().map(|t| t.name.as_str()).collect()
    }

    pub fn prior(&self) -> &[f64] {
        &self.file.prior
    }

    pub fn type_of(&self, player: usize, state: usize) -> usize {
        self.type_of[player][state]
    }

    /// `ϖ_player(own, opponent; state)`.
    pub fn payoff(&self, player: usize, state: usize, own: usize, opponent: usize) -> f64 {
        self.file.payoffs[state][player][own][opponent]
    }

    fn type_probability(&self, player: usize, ty: usize) -> f64 {
        (0..self.n_states())
            .filter(|&s| self.type_of[player][s] == ty)
            .map(|s| self.file.prior[s])
            .sum()
    }

    /// Label such as `O_l,F_h`.
    pub fn strategy_label(&self, player: usize, s: &BayesianStrategy) -> String {
        s.assignment
            .iter()
            .zip(&self.file.types[player])
            .map(|(a, t)| format!("{}_{}", self.file.actions[*a], t.name))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// All pure Bayesian strategies of `player`, ordered lexicographically
    /// with the first type most significant and actions in declaration order.
    pub fn enumerate_bayesian_strategies(&self, player: usize) -> Vec<BayesianStrategy> {
        let types = self.n_types(player);
        let b = self.n_actions();
        let count = b.pow(types as u32);
        (0..count)
            .map(|mut code| {
                let mut assignment = vec![0; types];
                for slot in assignment.iter_mut().rev() {
                    *slot = code % b;
                    code /= b;
                }
                BayesianStrategy { assignment }
            })
            .collect()
    }

    /// Type-conditional expected payoffs of `player` when playing `own`
    /// against `opponent`, one component per own type.
    pub fn bayesian_expected_payoffs(
        &self,
        player: usize,
        own: &BayesianStrategy,
        opponent: &BayesianStrategy,
    ) -> Result<Vec<f64>> {
        let other = 1 - player;
        self.check_strategy(player, own)?;
        self.check_strategy(other, opponent)?;
        (0..self.n_types(player))
            .map(|t| {
                let mass = self.type_probability(player, t);
                if mass <= 0.0 {
                    return Err(Error::ZeroProbabilityType(self.file.types[player][t].name.clone()));
                }
                let total: f64 = (0..self.n_states())
                    .filter(|&s| self.type_of[player][s] == t)
                    .map(|s| {
                        let a_own = own.action_for(t);
                        let a_opp = opponent.action_for(self.type_of[other][s]);
                        self.file.prior[s] * self.payoff(player, s, a_own, a_opp)
                    })
                    .sum();
                Ok(total / mass)
            })
            .collect()
    }

    /// Ex-ante expected payoff `E_θ ϖ_player(σ(ω))`.
    pub fn ex_ante_payoff(
        &self,
        player: usize,
        own: &BayesianStrategy,
        opponent: &BayesianStrategy,
    ) -> Result<f64> {
        let other = 1 - player;
        self.check_strategy(player, own)?;
        self.check_strategy(other, opponent)?;
        Ok((0..self.n_states())
            .map(|s| {
                let a_own = own.action_for(self.type_of[player][s]);
                let a_opp = opponent.action_for(self.type_of[other][s]);
                self.file.prior[s] * self.payoff(player, s, a_own, a_opp)
            })
            .sum())
    }

    /// Per-type maximal regret of `own` against `opponent`: for each own type,
    /// the best gain over all deviations `k ∈ Σ`.
    pub fn maximal_regret(
        &self,
        player: usize,
        own: &BayesianStrategy,
        opponent: &BayesianStrategy,
    ) -> Result<Vec<f64>> {
        let base = self.bayesian_expected_payoffs(player, own, opponent)?;
        let mut best = vec![f64::NEG_INFINITY; base.len()];
        for k in self.enumerate_bayesian_strategies(player) {
            let alt = self.bayesian_expected_payoffs(player, &k, opponent)?;
            for (b, a) in best.iter_mut().zip(alt) {
                *b = b.max(a);
            }
        }
        Ok(best.into_iter().zip(base).map(|(b, v)| b - v).collect())
    }

    /// Vector-payoff game over pure Bayesian strategies with maximal-regret
    /// payoffs, seen by player 0. Needs both players to have the same number
    /// of types so that Σ is common.
    pub fn maximal_regret_game(&self) -> Result<VectorPayoffGame> {
        self.require_common_strategy_set()?;
        self.strategy_table(|own, opp| self.maximal_regret(0, own, opp))
    }

    /// Same shape as [`Self::maximal_regret_game`] but with the type-conditional
    /// expected payoffs as vectors.
    pub fn expected_payoff_game(&self) -> Result<VectorPayoffGame> {
        self.require_common_strategy_set()?;
        self.strategy_table(|own, opp| self.bayesian_expected_payoffs(0, own, opp))
    }

    fn strategy_table<F>(&self, entry: F) -> Result<VectorPayoffGame>
    where
        F: Fn(&BayesianStrategy, &BayesianStrategy) -> Result<Vec<f64>>,
    {
        let own = self.enumerate_bayesian_strategies(0);
        let opp = self.enumerate_bayesian_strategies(1);
        let payoffs = own
            .iter()
            .map(|s| opp.iter().map(|o| entry(s, o)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let names = own.iter().map(|s| self.strategy_label(0, s)).collect();
        VectorPayoffGame::new(names, self.n_types(0), payoffs)
    }

    fn require_common_strategy_set(&self) -> Result<()> {
        if self.n_types(0) != self.n_types(1) {
            return Err(Error::InvalidHarsanyi(format!(
                "players have {} and {} types; the strategy set must be common",
                self.n_types(0),
                self.n_types(1)
            )));
        }
        Ok(())
    }

    /// Pure Bayesian-strategy profiles `(i, j)` (indices into each player's
    /// enumeration) that are Nash equilibria of the ex-ante expected game.
    pub fn pure_bayesian_equilibria(&self) -> Result<Vec<(usize, usize)>> {
        let s0 = self.enumerate_bayesian_strategies(0);
        let s1 = self.enumerate_bayesian_strategies(1);
        // payoff tables [i][j] for each player
        let mut u0 = vec![vec![0.0; s1.len()]; s0.len()];
        let mut u1 = vec![vec![0.0; s1.len()]; s0.len()];
        for (i, a) in s0.iter().enumerate() {
            for (j, b) in s1.iter().enumerate() {
                u0[i][j] = self.ex_ante_payoff(0, a, b)?;
                u1[i][j] = self.ex_ante_payoff(1, b, a)?;
            }
        }
        const EPS: f64 = 1e-12;
        let mut out = Vec::new();
        for i in 0..s0.len() {
            for j in 0..s1.len() {
                let row_ok = (0..s0.len()).all(|k| u0[k][j] <= u0[i][j] + EPS);
                let col_ok = (0..s1.len()).all(|k| u1[i][k] <= u1[i][j] + EPS);
                if row_ok && col_ok {
                    out.push((i, j));
                }
            }
        }
        Ok(out)
    }

    fn check_strategy(&self, player: usize, s: &BayesianStrategy) -> Result<()> {
        if s.assignment.len() != self.n_types(player) {
            return Err(Error::DimensionMismatch {
                expected: self.n_types(player),
                actual: s.assignment.len(),
            });
        }
        if let Some(a) = s.assignment.iter().find(|a| **a >= self.n_actions()) {
            return Err(Error::ActionOutOfRange {
                index: *a,
                n_actions: self.n_actions(),
            });
        }
        Ok(())
    }
}

/// The incomplete-information Battle of the Sexes: each player is type `l` or
/// `h` with probability 1/2, independently, and observes only their own type.
pub fn battle_of_sexes() -> HarsanyiGame {
    let l = vec![vec![3.0, 1.0], vec![0.0, 2.0]];
    let h = vec![vec![1.0, 3.0], vec![2.0, 0.0]];
    let ev = |name: &str, states: [&str; 2]| TypeEvent {
        name: name.into(),
        states: states.iter().map(|s| s.to_string()).collect(),
    };
    HarsanyiGame::new(HarsanyiFile {
        states: ["ll", "lh", "hl", "hh"].map(String::from).to_vec(),
        prior: vec![0.25; 4],
        actions: vec!["O".into(), "F".into()],
        types: [
            vec![ev("l", ["ll", "lh"]), ev("h", ["hl", "hh"])],
            vec![ev("l", ["ll", "hl"]), ev("h", ["lh", "hh"])],
        ],
        // state `xy`: row has type x, column has type y
        payoffs: vec![
            [l.clone(), l.clone()],
            [l.clone(), h.clone()],
            [h.clone(), l.clone()],
            [h.clone(), h],
        ],
    })
    .expect("static game")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strat(v: &[usize]) -> BayesianStrategy {
        BayesianStrategy {
            assignment: v.to_vec(),
        }
    }

    #[test]
    fn enumeration_order_matches_table_labels() {
        let h = battle_of_sexes();
        let labels: Vec<String> = h
            .enumerate_bayesian_strategies(0)
            .iter()
            .map(|s| h.strategy_label(0, s))
            .collect();
        assert_eq!(labels, ["O_l,O_h", "O_l,F_h", "F_l,O_h", "F_l,F_h"]);
    }

    #[test]
    fn enumeration_counts() {
        let mut file = battle_of_sexes().file().clone();
        // 3 types for player 0
        file.states = ["a", "b", "c"].map(String::from).to_vec();
        file.prior = vec![0.5, 0.25, 0.25];
        let one = |n: &str, s: &[&str]| TypeEvent {
            name: n.into(),
            states: s.iter().map(|x| x.to_string()).collect(),
        };
        file.types = [
            vec![one("x", &["a"]), one("y", &["b"]), one("z", &["c"])],
            vec![one("w", &["a", "b", "c"])],
        ];
        file.payoffs.truncate(3);
        let h = HarsanyiGame::new(file).unwrap();
        assert_eq!(h.enumerate_bayesian_strategies(0).len(), 8);
        assert_eq!(h.enumerate_bayesian_strategies(1).len(), 2);
    }

    #[test]
    fn expected_payoffs_match_table() {
        let h = battle_of_sexes();
        assert_eq!(h.bayesian_expected_payoffs(0, &strat(&[0, 0]), &strat(&[0, 0])).unwrap(), vec![3.0, 1.0]);
        assert_eq!(h.bayesian_expected_payoffs(0, &strat(&[1, 0]), &strat(&[0, 0])).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn maximal_regret_examples() {
        let h = battle_of_sexes();
        assert_eq!(h.maximal_regret(0, &strat(&[1, 0]), &strat(&[0, 0])).unwrap(), vec![3.0, 1.0]);
        assert_eq!(h.maximal_regret(0, &strat(&[0, 1]), &strat(&[0, 0])).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_probability_type_is_an_error() {
        let mut file = battle_of_sexes().file().clone();
        file.prior = vec![0.5, 0.5, 0.0, 0.0];
        let h = HarsanyiGame::new(file).unwrap();
        let err = h
            .bayesian_expected_payoffs(0, &strat(&[0, 0]), &strat(&[0, 0]))
            .unwrap_err();
        assert_eq!(err, Error::ZeroProbabilityType("h".into()));
    }

    #[test]
    fn validation_catches_bad_partitions() {
        let mut file = battle_of_sexes().file().clone();
        file.types[0][1].states = vec!["hl".into()];
        assert!(matches!(HarsanyiGame::new(file), Err(Error::InvalidHarsanyi(_))));
        let mut file = battle_of_sexes().file().clone();
        file.prior[0] = 0.3;
        assert!(HarsanyiGame::new(file).is_err());
        let mut file = battle_of_sexes().file().clone();
        file.types[1][0].states.push("ll".into());
        assert!(HarsanyiGame::new(file).is_err());
    }

    #[test]
    fn bos_pure_equilibria() {
        let h = battle_of_sexes();
        assert_eq!(h.pure_bayesian_equilibria().unwrap(), vec![(0, 1), (1, 0)]);
    }
}
