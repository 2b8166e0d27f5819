//! Vector-payoff games and the regret transform of symmetric scalar games.
//!
//! A [`VectorPayoffGame`] stores `M_lk ∈ R^m` for own action `l` (row) and
//! opponent action `k` (column). Only the row player's view is stored; the
//! opponent's payoffs follow by symmetry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::SimplexVector;

/// On-disk form: `{actions, payoff_dim, payoffs}` with `payoffs[own][opponent]`
/// a vector of length `payoff_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorGameFile {
    pub actions: Vec<String>,
    pub payoff_dim: usize,
    pub payoffs: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorGameFile", into = "VectorGameFile")]
pub struct VectorPayoffGame {
    actions: Vec<String>,
    payoff_dim: usize,
    /// Row-major `n × n` table of payoff vectors.
    payoffs: Vec<Vec<Vec<f64>>>,
}

impl VectorPayoffGame {
    pub fn new(actions: Vec<String>, payoff_dim: usize, payoffs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = actions.len();
        if n == 0 {
            return Err(Error::InvalidGame("the action set is empty".into()));
        }
        if payoff_dim == 0 {
            return Err(Error::InvalidGame("payoff_dim must be positive".into()));
        }
        if payoffs.len() != n {
            return Err(Error::InvalidGame(format!(
                "expected {n} payoff rows, got {}",
                payoffs.len()
            )));
        }
        for (l, row) in payoffs.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGame(format!(
                    "row {l} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (k, v) in row.iter().enumerate() {
                if v.len() != payoff_dim {
                    return Err(Error::InvalidGame(format!(
                        "payoff ({l},{k}) has length {}, expected payoff_dim = {payoff_dim}",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidGame(format!("payoff ({l},{k}) is not finite")));
                }
            }
        }
        Ok(Self {
            actions,
            payoff_dim,
            payoffs,
        })
    }

    /// Convenience constructor with actions named `a0, a1, …`.
    pub fn from_table(payoffs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = payoffs.len();
        let m = payoffs
            .first()
            .and_then(|r| r.first())
            .map(Vec::len)
            .unwrap_or(0);
        Self::new((0..n).map(|i| format!("a{i}")).collect(), m, payoffs)
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn payoff_dim(&self) -> usize {
        self.payoff_dim
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    /// `M_lk`.
    pub fn payoff(&self, own: usize, opponent: usize) -> &[f64] {
        &self.payoffs[own][opponent]
    }

    pub fn payoffs(&self) -> &[Vec<Vec<f64>>] {
        &self.payoffs
    }

    /// All `M_lk` in row-major order.
    pub fn payoff_vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.payoffs.iter().flatten().map(Vec::as_slice)
    }

    pub(crate) fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.n_actions() {
            return Err(Error::ActionOutOfRange {
                index: a,
                n_actions: self.n_actions(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_strategy(&self, q: &SimplexVector) -> Result<()> {
        if q.len() != self.n_actions() {
            return Err(Error::DimensionMismatch {
                expected: self.n_actions(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.payoff_dim {
            return Err(Error::DimensionMismatch {
                expected: self.payoff_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Expected payoff of action `a` against a population playing `q`:
    /// `u(a, q) = Σ_k q_k M_ak`.
    pub fn mixed_payoff(&self, a: usize, q: &SimplexVector) -> Result<Vec<f64>> {
        self.check_action(a)?;
        self.check_strategy(q)?;
        Ok(self.mixed_payoff_unchecked(a, q.as_slice()))
    }

    pub(crate) fn mixed_payoff_unchecked(&self, a: usize, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.payoff_dim];
        for (weight, v) in q.iter().zip(&self.payoffs[a]) {
            if *weight == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(v) {
                *o += weight * x;
            }
        }
        out
    }

    /// `u(k, q)` for every action `k`.
    pub fn anchors(&self, q: &SimplexVector) -> Result<Vec<Vec<f64>>> {
        self.check_strategy(q)?;
        Ok((0..self.n_actions())
            .map(|k| self.mixed_payoff_unchecked(k, q.as_slice()))
            .collect())
    }

    /// Bilinear extension `Σ_{l,k} p_l q_k M_lk`.
    pub fn bilinear_payoff(&self, p: &SimplexVector, q: &SimplexVector) -> Result<Vec<f64>> {
        self.check_strategy(p)?;
        self.check_strategy(q)?;
        let mut y = vec![0.0; self.payoff_dim];
        for (l, pl) in p.as_slice().iter().enumerate() {
            if *pl == 0.0 {
                continue;
            }
            for (o, x) in y.iter_mut().zip(self.mixed_payoff_unchecked(l, q.as_slice())) {
                *o += pl * x;
            }
        }
        Ok(y)
    }

    /// Multiplies every payoff by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let payoffs = self
            .payoffs
            .iter()
            .map(|row| row.iter().map(|v| v.iter().map(|x| c * x).collect()).collect())
            .collect();
        Self {
            actions: self.actions.clone(),
            payoff_dim: self.payoff_dim,
            payoffs,
        }
    }
}

impl TryFrom<VectorGameFile> for VectorPayoffGame {
    type Error = Error;

    fn try_from(f: VectorGameFile) -> Result<Self> {
        Self::new(f.actions, f.payoff_dim, f.payoffs)
    }
}

impl From<VectorPayoffGame> for VectorGameFile {
    fn from(g: VectorPayoffGame) -> Self {
        Self {
            actions: g.actions,
            payoff_dim: g.payoff_dim,
            payoffs: g.payoffs,
        }
    }
}

/// On-disk form of a symmetric scalar game: `{actions, payoffs}` with
/// `payoffs[own][opponent]` the row player's payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarGameFile {
    pub actions: Vec<String>,
    pub payoffs: Vec<Vec<f64>>,
}

impl TryFrom<ScalarGameFile> for ScalarGame {
    type Error = Error;

    fn try_from(f: ScalarGameFile) -> Result<Self> {
        Self::new(f.actions, f.payoffs)
    }
}

impl From<ScalarGame> for ScalarGameFile {
    fn from(g: ScalarGame) -> Self {
        Self {
            actions: g.actions,
            payoffs: g.payoffs,
        }
    }
}

/// A symmetric two-player scalar game given by the row player's payoffs
/// `π(own, opponent)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalarGameFile", into = "ScalarGameFile")]
pub struct ScalarGame {
    actions: Vec<String>,
    payoffs: Vec<Vec<f64>>,
}

impl ScalarGame {
    pub fn new(actions: Vec<String>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        let n = actions.len();
        if n == 0 {
            return Err(Error::InvalidGame("the action set is empty".into()));
        }
        if payoffs.len() != n || payoffs.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidGame(format!(
                "scalar payoff table must be {n}×{n}"
            )));
        }
        if payoffs.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGame("scalar payoffs must be finite".into()));
        }
        Ok(Self { actions, payoffs })
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn payoff(&self, own: usize, opponent: usize) -> f64 {
        self.payoffs[own][opponent]
    }

    /// Pure Nash equilibria `(row, column)` by brute force; the column
    /// player's payoff is `π(column, row)` by symmetry.
    pub fn pure_nash_equilibria(&self) -> Vec<(usize, usize)> {
        let n = self.n_actions();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let row_best = (0..n).all(|k| self.payoffs[k][j] <= self.payoffs[i][j]);
                let col_best = (0..n).all(|k| self.payoffs[k][i] <= self.payoffs[j][i]);
                if row_best && col_best {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Regret vectors `u(l, k') = (π(j, k') − π(l, k'))_{j ∈ A}`.
    pub fn regret_transform(&self) -> VectorPayoffGame {
        let n = self.n_actions();
        let payoffs = (0..n)
            .map(|l| {
                (0..n)
                    .map(|k| (0..n).map(|j| self.payoffs[j][k] - self.payoffs[l][k]).collect())
                    .collect()
            })
            .collect();
        VectorPayoffGame {
            actions: self.actions.clone(),
            payoff_dim: n,
            payoffs,
        }
    }
}

/// Free-function form of [`ScalarGame::regret_transform`].
pub fn regret_transform(base: &ScalarGame) -> VectorPayoffGame {
    base.regret_transform()
}

/// Standard games used throughout the examples and tests.
pub mod library {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    pub fn prisoners_dilemma() -> ScalarGame {
        ScalarGame::new(
            names(&["Cooperate", "Defect"]),
            vec![vec![3.0, 0.0], vec![4.0, 1.0]],
        )
        .expect("static game")
    }

    /// Prisoners' dilemma with both players' payoffs as the vector payoff.
    pub fn prisoners_dilemma_payoffs() -> VectorPayoffGame {
        VectorPayoffGame::new(
            names(&["Cooperate", "Defect"]),
            2,
            vec![
                vec![vec![3.0, 3.0], vec![0.0, 4.0]],
                vec![vec![4.0, 0.0], vec![1.0, 1.0]],
            ],
        )
        .expect("static game")
    }

    pub fn coordination() -> ScalarGame {
        ScalarGame::new(
            names(&["Mozart", "Mahler"]),
            vec![vec![2.0, 0.0], vec![0.0, 1.0]],
        )
        .expect("static game")
    }

    pub fn hawk_dove() -> ScalarGame {
        ScalarGame::new(
            names(&["Hawk", "Dove"]),
            vec![vec![-1.0, 4.0], vec![0.0, 2.0]],
        )
        .expect("static game")
    }

    /// Regret game `[(0,a),(0,b); (−a,0),(−b,0)]`.
    pub fn parametric_regret(a: f64, b: f64) -> Result<VectorPayoffGame> {
        VectorPayoffGame::new(
            names(&["Top", "Bottom"]),
            2,
            vec![
                vec![vec![0.0, a], vec![0.0, b]],
                vec![vec![-a, 0.0], vec![-b, 0.0]],
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;

    fn table(game: &VectorPayoffGame) -> Vec<Vec<Vec<f64>>> {
        game.payoffs().to_vec()
    }

    #[test]
    fn mixed_payoff_pd_figure_points() {
        let g = prisoners_dilemma_payoffs();
        let half = SimplexVector::uniform(2);
        assert_eq!(g.mixed_payoff(0, &half).unwrap(), vec![1.5, 3.5]);
        assert_eq!(g.mixed_payoff(1, &half).unwrap(), vec![2.5, 0.5]);
    }

    #[test]
    fn mixed_payoff_at_vertex_is_entry() {
        let g = prisoners_dilemma_payoffs();
        for a in 0..2 {
            for k in 0..2 {
                let e = SimplexVector::vertex(2, k);
                assert_eq!(g.mixed_payoff(a, &e).unwrap(), g.payoff(a, k));
            }
        }
    }

    #[test]
    fn mixed_payoff_rejects_bad_action() {
        let g = prisoners_dilemma_payoffs();
        let err = g.mixed_payoff(2, &SimplexVector::uniform(2)).unwrap_err();
        assert_eq!(err, Error::ActionOutOfRange { index: 2, n_actions: 2 });
    }

    #[test]
    fn regret_tables_match_printed_ones() {
        let pd = prisoners_dilemma().regret_transform();
        assert_eq!(
            table(&pd),
            vec![
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
                vec![vec![-1.0, 0.0], vec![-1.0, 0.0]],
            ]
        );
        let co = coordination().regret_transform();
        assert_eq!(
            table(&co),
            vec![
                vec![vec![0.0, -2.0], vec![0.0, 1.0]],
                vec![vec![2.0, 0.0], vec![-1.0, 0.0]],
            ]
        );
        let hd = hawk_dove().regret_transform();
        assert_eq!(
            table(&hd),
            vec![
                vec![vec![0.0, 1.0], vec![0.0, -2.0]],
                vec![vec![-1.0, 0.0], vec![2.0, 0.0]],
            ]
        );
    }

    #[test]
    fn regret_own_component_is_zero() {
        for g in [prisoners_dilemma(), coordination(), hawk_dove()] {
            let r = g.regret_transform();
            for l in 0..r.n_actions() {
                for k in 0..r.n_actions() {
                    assert_eq!(r.payoff(l, k)[l], 0.0);
                }
            }
        }
    }

    #[test]
    fn hawk_dove_equilibria_have_nonpositive_regret() {
        let hd = hawk_dove();
        let eq = hd.pure_nash_equilibria();
        assert_eq!(eq, vec![(0, 1), (1, 0)]);
        let r = hd.regret_transform();
        for (i, j) in eq {
            assert!(r.payoff(i, j).iter().all(|x| *x <= 0.0));
            assert!(r.payoff(j, i).iter().all(|x| *x <= 0.0));
        }
    }

    #[test]
    fn invalid_tables_are_rejected() {
        assert!(VectorPayoffGame::from_table(vec![vec![vec![1.0], vec![1.0, 2.0]], vec![vec![0.0], vec![0.0]]]).is_err());
        assert!(VectorPayoffGame::from_table(vec![vec![vec![f64::NAN]]]).is_err());
        assert!(VectorPayoffGame::from_table(vec![]).is_err());
    }
}
