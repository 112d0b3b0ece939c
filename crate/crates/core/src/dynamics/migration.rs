use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::CongestionGame;
use crate::state::GameState;

/// Number of players moving between each ordered pair of paths in one round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationVector {
    moves: BTreeMap<(usize, usize), usize>,
}

impl MigrationVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `k` movers from `p` to `q`. Self-moves are dropped.
    pub fn add(&mut self, p: usize, q: usize, k: usize) {
        if p != q && k > 0 {
            *self.moves.entry((p, q)).or_insert(0) += k;
        }
    }

    pub fn merge(&mut self, other: &MigrationVector) {
        for (&(p, q), &k) in &other.moves {
            self.add(p, q, k);
        }
    }

    pub fn get(&self, p: usize, q: usize) -> usize {
        self.moves.get(&(p, q)).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Total number of migrating players.
    pub fn total(&self) -> usize {
        self.moves.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.moves.iter().map(|(&(p, q), &k)| (p, q, k))
    }

    /// `Δx_P = Σ_Q (Δx_QP − Δx_PQ)` per path.
    pub fn path_delta(&self, strategies: usize) -> Vec<i64> {
        let mut delta = vec![0i64; strategies];
        for (p, q, k) in self.iter() {
            delta[p] -= k as i64;
            delta[q] += k as i64;
        }
        delta
    }

    /// `Δx_e = Σ_{P∋e} Δx_P` per edge.
    pub fn edge_delta(&self, game: &CongestionGame) -> Vec<i64> {
        let mut delta = vec![0i64; game.edge_count()];
        for (p, dp) in self.path_delta(game.strategy_count()).into_iter().enumerate() {
            if dp != 0 {
                for &e in &game.strategies()[p] {
                    delta[e] += dp;
                }
            }
        }
        delta
    }

    /// No origin loses more players than it has, and moves stay within a
    /// player class.
    pub fn check_feasible(&self, game: &CongestionGame, x: &GameState) -> Result<()> {
        let strategies = game.strategy_count();
        let mut leaving = vec![0usize; strategies];
        for (p, q, k) in self.iter() {
            if p >= strategies || q >= strategies {
                return Err(Error::InfeasibleMigration(format!("pair ({p},{q}) out of range")));
            }
            if game.class_of(p) != game.class_of(q) {
                return Err(Error::InfeasibleMigration(format!(
                    "pair ({p},{q}) crosses player classes"
                )));
            }
            leaving[p] += k;
        }
        match leaving.iter().enumerate().find(|(p, l)| **l > x.count(*p)) {
            Some((p, l)) => Err(Error::InfeasibleMigration(format!(
                "{l} players leave path {p} which holds {}",
                x.count(p)
            ))),
            None => Ok(()),
        }
    }

    /// `x + Δx`, applied atomically.
    pub fn apply(&self, game: &CongestionGame, x: &GameState) -> Result<GameState> {
        self.check_feasible(game, x)?;
        let delta = self.path_delta(game.strategy_count());
        let counts = x
            .counts()
            .iter()
            .zip(&delta)
            .map(|(&c, &d)| (c as i64 + d) as usize)
            .collect();
        GameState::new(game, counts)
    }
}
