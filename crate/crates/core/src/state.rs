use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::CongestionGame;

/// Players per strategy together with the induced edge congestion.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    counts: Vec<usize>,
    congestion: Vec<usize>,
}

impl GameState {
    pub fn new(game: &CongestionGame, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != game.strategy_count() {
            return Err(Error::InvalidState(format!(
                "{} counts for {} strategies",
                counts.len(),
                game.strategy_count()
            )));
        }
        for (c, class) in game.classes().iter().enumerate() {
            let placed: usize = class.strategies.iter().map(|&p| counts[p]).sum();
            if placed != class.players {
                return Err(Error::InvalidState(format!(
                    "class {c} has {placed} players placed, expected {}",
                    class.players
                )));
            }
        }
        let congestion = Self::edge_loads(game, &counts);
        Ok(GameState { counts, congestion })
    }

    /// Every player of every class on the class's first strategy.
    pub fn first_strategies(game: &CongestionGame) -> Self {
        let mut counts = vec![0; game.strategy_count()];
        for class in game.classes() {
            counts[class.strategies[0]] += class.players;
        }
        Self::new(game, counts).expect("class sizes are consistent")
    }

    /// All players on path `p` (symmetric games only).
    pub fn all_on(game: &CongestionGame, p: usize) -> Result<Self> {
        if !game.is_symmetric() {
            return Err(Error::Unsupported("a symmetric game".into()));
        }
        let mut counts = vec![0; game.strategy_count()];
        *counts.get_mut(p).ok_or(Error::InvalidPath(p))? = game.n();
        Self::new(game, counts)
    }

    fn edge_loads(game: &CongestionGame, counts: &[usize]) -> Vec<usize> {
        let mut loads = vec![0; game.edge_count()];
        for (p, &c) in counts.iter().enumerate() {
            if c > 0 {
                for &e in &game.strategies()[p] {
                    loads[e] += c;
                }
            }
        }
        loads
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, p: usize) -> usize {
        self.counts[p]
    }

    pub fn congestion(&self) -> &[usize] {
        &self.congestion
    }

    /// Indices of strategies with at least one player.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(p, _)| p)
    }

    /// Moves one player from `p` to `q`, keeping congestion in sync.
    pub fn move_player(&mut self, game: &CongestionGame, p: usize, q: usize) -> Result<()> {
        self.move_players(game, p, q, 1)
    }

    pub(crate) fn move_players(
        &mut self,
        game: &CongestionGame,
        p: usize,
        q: usize,
        k: usize,
    ) -> Result<()> {
        if p >= self.counts.len() {
            return Err(Error::InvalidPath(p));
        }
        if q >= self.counts.len() {
            return Err(Error::InvalidPath(q));
        }
        if self.counts[p] < k {
            return Err(Error::EmptyOrigin(p));
        }
        if game.class_of(p) != game.class_of(q) {
            return Err(Error::InvalidState(format!(
                "paths {p} and {q} belong to different player classes"
            )));
        }
        if p == q || k == 0 {
            return Ok(());
        }
        self.counts[p] -= k;
        self.counts[q] += k;
        for &e in &game.strategies()[p] {
            self.congestion[e] -= k;
        }
        for &e in &game.strategies()[q] {
            self.congestion[e] += k;
        }
        Ok(())
    }

    /// Recomputes congestion from scratch and compares.
    pub fn is_consistent(&self, game: &CongestionGame) -> bool {
        self.counts.iter().sum::<usize>() == game.n()
            && Self::edge_loads(game, &self.counts) == self.congestion
    }
}
