//! Congestion games and the scalar quantities evaluated on their states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::LatencyFunction;
use crate::state::GameState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    Network,
    Singleton,
    Explicit,
}

/// A group of players sharing one strategy space. Symmetric games have a
/// single class; threshold games have one class per base player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerClass {
    pub players: usize,
    pub strategies: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CongestionGame {
    edges: Vec<LatencyFunction>,
    strategies: Vec<Vec<usize>>,
    classes: Vec<PlayerClass>,
    strategy_class: Vec<usize>,
    n: usize,
    kind: GameKind,
    paths_through: Vec<Vec<usize>>,
    // ℓ_e(k) for k in 0..=n+1, row-major by edge
    latency_table: Vec<f64>,
    // Σ_{i=1..k} ℓ_e(i) for k in 0..=n+1
    prefix_table: Vec<f64>,
}

/// `L_av` and `L_av⁺` of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averages {
    pub l_av: f64,
    pub l_av_plus: f64,
}

impl CongestionGame {
    /// A symmetric game: every player may use every strategy.
    pub fn new(
        edges: Vec<LatencyFunction>,
        strategies: Vec<Vec<usize>>,
        n: usize,
        kind: GameKind,
    ) -> Result<Self> {
        let class = PlayerClass {
            players: n,
            strategies: (0..strategies.len()).collect(),
        };
        Self::with_classes(edges, strategies, vec![class], kind)
    }

    pub fn with_classes(
        edges: Vec<LatencyFunction>,
        strategies: Vec<Vec<usize>>,
        classes: Vec<PlayerClass>,
        kind: GameKind,
    ) -> Result<Self> {
        let m = edges.len();
        if m == 0 {
            return Err(Error::InvalidGame("no edges".into()));
        }
        if strategies.is_empty() {
            return Err(Error::InvalidGame("no strategies".into()));
        }
        let n: usize = classes.iter().map(|c| c.players).sum();
        if n == 0 {
            return Err(Error::InvalidGame("at least one player required".into()));
        }

        let mut canonical = Vec::with_capacity(strategies.len());
        for (p, s) in strategies.into_iter().enumerate() {
            let mut s = s;
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(Error::InvalidGame(format!("strategy {p} is empty")));
            }
            if let Some(e) = s.iter().find(|e| **e >= m) {
                return Err(Error::InvalidGame(format!(
                    "strategy {p} references edge {e} but the game has {m} edges"
                )));
            }
            canonical.push(s);
        }
        let strategies = canonical;

        let mut strategy_class = vec![usize::MAX; strategies.len()];
        for (c, class) in classes.iter().enumerate() {
            if class.strategies.is_empty() {
                return Err(Error::InvalidGame(format!("class {c} has no strategies")));
            }
            for &p in &class.strategies {
                if p >= strategies.len() {
                    return Err(Error::InvalidGame(format!("class {c} names strategy {p}")));
                }
                if strategy_class[p] != usize::MAX {
                    return Err(Error::InvalidGame(format!(
                        "strategy {p} belongs to more than one class"
                    )));
                }
                strategy_class[p] = c;
            }
        }
        if let Some(p) = strategy_class.iter().position(|c| *c == usize::MAX) {
            return Err(Error::InvalidGame(format!("strategy {p} belongs to no class")));
        }

        if kind == GameKind::Singleton {
            let mut seen = vec![false; m];
            for (p, s) in strategies.iter().enumerate() {
                if s.len() != 1 {
                    return Err(Error::InvalidGame(format!(
                        "singleton game strategy {p} has {} edges",
                        s.len()
                    )));
                }
                if std::mem::replace(&mut seen[s[0]], true) {
                    return Err(Error::InvalidGame(format!(
                        "singleton game repeats edge {}",
                        s[0]
                    )));
                }
            }
        }

        for (e, f) in edges.iter().enumerate() {
            if let Some(max) = f.domain_max() {
                if max != n {
                    return Err(Error::InvalidGame(format!(
                        "edge {e} table has {} entries, expected {}",
                        max + 1,
                        n + 1
                    )));
                }
            }
            let at_one = f.eval_unchecked(1);
            if at_one.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::InvalidGame(format!(
                    "edge {e} has non-positive latency {at_one} at congestion 1"
                )));
            }
        }

        let mut paths_through = vec![Vec::new(); m];
        for (p, s) in strategies.iter().enumerate() {
            for &e in s {
                paths_through[e].push(p);
            }
        }

        let width = n + 2;
        let mut latency_table = Vec::with_capacity(m * width);
        let mut prefix_table = Vec::with_capacity(m * width);
        for f in &edges {
            let mut acc = 0.0;
            for k in 0..width {
                let v = f.eval_unchecked(k);
                latency_table.push(v);
                if k > 0 {
                    acc += v;
                }
                prefix_table.push(acc);
            }
        }

        Ok(CongestionGame {
            edges,
            strategies,
            classes,
            strategy_class,
            n,
            kind,
            paths_through,
            latency_table,
            prefix_table,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GameKind {
        self.kind
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn strategy_count(&self) -> usize {
        self.strategies.len()
    }

    pub fn edges(&self) -> &[LatencyFunction] {
        &self.edges
    }

    pub fn strategies(&self) -> &[Vec<usize>] {
        &self.strategies
    }

    pub fn strategy(&self, p: usize) -> Result<&[usize]> {
        self.strategies
            .get(p)
            .map(Vec::as_slice)
            .ok_or(Error::InvalidPath(p))
    }

    pub fn classes(&self) -> &[PlayerClass] {
        &self.classes
    }

    pub fn class_of(&self, p: usize) -> usize {
        self.strategy_class[p]
    }

    pub fn is_symmetric(&self) -> bool {
        self.classes.len() == 1
    }

    pub fn is_singleton(&self) -> bool {
        self.kind == GameKind::Singleton
    }

    pub fn paths_through(&self, e: usize) -> &[usize] {
        &self.paths_through[e]
    }

    /// `ℓ_e(k)` for `k <= n + 1`.
    #[inline]
    pub fn edge_latency(&self, e: usize, k: usize) -> f64 {
        self.latency_table[e * (self.n + 2) + k]
    }

    /// `Σ_{i=1..k} ℓ_e(i)`.
    #[inline]
    pub fn edge_potential(&self, e: usize, k: usize) -> f64 {
        self.prefix_table[e * (self.n + 2) + k]
    }

    fn check_path(&self, p: usize) -> Result<()> {
        if p < self.strategies.len() {
            Ok(())
        } else {
            Err(Error::InvalidPath(p))
        }
    }

    /// `ℓ_P(x)`.
    pub fn path_latency(&self, x: &GameState, p: usize) -> Result<f64> {
        self.check_path(p)?;
        Ok(self.path_latency_unchecked(x, p))
    }

    #[inline]
    pub fn path_latency_unchecked(&self, x: &GameState, p: usize) -> f64 {
        let cong = x.congestion();
        self.strategies[p]
            .iter()
            .map(|&e| self.edge_latency(e, cong[e]))
            .sum()
    }

    /// `ℓ_P(x + 1_P)`.
    #[inline]
    pub fn path_latency_plus(&self, x: &GameState, p: usize) -> f64 {
        let cong = x.congestion();
        self.strategies[p]
            .iter()
            .map(|&e| self.edge_latency(e, cong[e] + 1))
            .sum()
    }

    /// `ℓ_Q(x + 1_Q - 1_P)`: the latency a player on `p` would see after
    /// switching alone to `q`.
    pub fn latency_after_move(&self, x: &GameState, p: usize, q: usize) -> Result<f64> {
        self.check_path(p)?;
        self.check_path(q)?;
        if x.count(p) == 0 {
            return Err(Error::EmptyOrigin(p));
        }
        Ok(self.latency_after_move_unchecked(x, p, q))
    }

    #[inline]
    pub fn latency_after_move_unchecked(&self, x: &GameState, p: usize, q: usize) -> f64 {
        let cong = x.congestion();
        if p == q {
            return self.path_latency_unchecked(x, p);
        }
        let from = &self.strategies[p];
        self.strategies[q]
            .iter()
            .map(|&e| {
                let shared = from.binary_search(&e).is_ok();
                self.edge_latency(e, if shared { cong[e] } else { cong[e] + 1 })
            })
            .sum()
    }

    pub fn averages(&self, x: &GameState) -> Averages {
        let n = self.n as f64;
        let (mut l_av, mut l_av_plus) = (0.0, 0.0);
        for (p, &xp) in x.counts().iter().enumerate() {
            if xp == 0 {
                continue;
            }
            let w = xp as f64 / n;
            l_av += w * self.path_latency_unchecked(x, p);
            l_av_plus += w * self.path_latency_plus(x, p);
        }
        Averages { l_av, l_av_plus }
    }

    /// Rosenthal's potential `Φ(x) = Σ_e Σ_{i=1..x_e} ℓ_e(i)`.
    pub fn potential(&self, x: &GameState) -> f64 {
        x.congestion()
            .iter()
            .enumerate()
            .map(|(e, &k)| self.edge_potential(e, k))
            .sum()
    }

    /// Largest current latency among paths with at least one player.
    pub fn max_used_latency(&self, x: &GameState) -> f64 {
        x.counts()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(p, _)| self.path_latency_unchecked(x, p))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
