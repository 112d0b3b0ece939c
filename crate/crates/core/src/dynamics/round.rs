use rand::Rng;
use rayon::prelude::*;

use super::{
    exploration_migration_prob, imitation_migration_prob, MigrationVector, Protocol,
    ProtocolParams, StreamRng,
};
use crate::bounds::ElasticityBounds;
use crate::error::{Error, Result};
use crate::game::CongestionGame;
use crate::state::GameState;

const CHUNK: usize = 16_384;
const PARALLEL_MIN: usize = 2 * CHUNK;

/// Evaluates concurrent rounds of one protocol on a fixed game.
pub struct RoundEngine<'a> {
    game: &'a CongestionGame,
    bounds: &'a ElasticityBounds,
    params: &'a ProtocolParams,
}

struct ClassView<'a> {
    players: usize,
    strategies: &'a [usize],
    cumulative: Vec<usize>,
}

impl ClassView<'_> {
    #[inline]
    fn locate(&self, k: usize) -> usize {
        self.cumulative.partition_point(|&c| c <= k) - 1
    }
}

/// Per-origin migration probabilities indexed by position in the class.
struct Rows {
    imitation: Vec<f64>,
    exploration: Vec<f64>,
}

struct Work {
    class: usize,
    path: usize,
    row: usize,
    first_player: u64,
    count: usize,
}

impl<'a> RoundEngine<'a> {
    pub fn new(
        game: &'a CongestionGame,
        bounds: &'a ElasticityBounds,
        params: &'a ProtocolParams,
    ) -> Result<Self> {
        params.validate()?;
        Ok(RoundEngine {
            game,
            bounds,
            params,
        })
    }

    fn rows_for(&self, x: &GameState, protocol: Protocol, class: &ClassView, p: usize) -> Rows {
        let l_p = self.game.path_latency_unchecked(x, p);
        let imitate = matches!(protocol, Protocol::Imitation | Protocol::Combined);
        let explore = matches!(protocol, Protocol::Exploration | Protocol::Combined);
        let mut rows = Rows {
            imitation: Vec::new(),
            exploration: Vec::new(),
        };
        if imitate {
            rows.imitation = class
                .strategies
                .iter()
                .map(|&q| {
                    if q == p || x.count(q) == 0 {
                        0.0
                    } else {
                        let after = self.game.latency_after_move_unchecked(x, p, q);
                        imitation_migration_prob(l_p, after, self.bounds, self.params)
                    }
                })
                .collect();
        }
        if explore {
            rows.exploration = class
                .strategies
                .iter()
                .map(|&q| {
                    if q == p {
                        0.0
                    } else {
                        let after = self.game.latency_after_move_unchecked(x, p, q);
                        exploration_migration_prob(
                            l_p,
                            after,
                            self.bounds,
                            class.strategies.len(),
                            class.players,
                            self.params.lambda,
                        )
                    }
                })
                .collect();
        }
        rows
    }

    /// Migration vector of round `round` (1-based) from snapshot `x`.
    pub fn round(&self, x: &GameState, protocol: Protocol, round: u64) -> Result<MigrationVector> {
        if protocol == Protocol::Sequential {
            return Err(Error::InvalidParams(
                "sequential imitation is not a concurrent round".into(),
            ));
        }
        let classes: Vec<ClassView> = self
            .game
            .classes()
            .iter()
            .map(|c| {
                let mut cumulative = Vec::with_capacity(c.strategies.len() + 1);
                cumulative.push(0);
                let mut acc = 0;
                for &p in &c.strategies {
                    acc += x.count(p);
                    cumulative.push(acc);
                }
                ClassView {
                    players: c.players,
                    strategies: &c.strategies,
                    cumulative,
                }
            })
            .collect();

        let mut rows = Vec::new();
        let mut work = Vec::new();
        let mut next_player = 0u64;
        for (ci, class) in classes.iter().enumerate() {
            for &p in class.strategies {
                let count = x.count(p);
                if count == 0 {
                    continue;
                }
                let first = next_player;
                next_player += count as u64;
                let r = self.rows_for(x, protocol, class, p);
                let movable = r.imitation.iter().chain(&r.exploration).any(|mu| *mu > 0.0);
                if !movable {
                    continue;
                }
                rows.push(r);
                let row = rows.len() - 1;
                let mut offset = 0;
                while offset < count {
                    let len = CHUNK.min(count - offset);
                    work.push(Work {
                        class: ci,
                        path: p,
                        row,
                        first_player: first + offset as u64,
                        count: len,
                    });
                    offset += len;
                }
            }
        }

        let active: usize = work.iter().map(|w| w.count).sum();
        let run = |w: &Work| self.simulate(w, &classes[w.class], &rows[w.row], protocol, round);
        let parts: Vec<MigrationVector> = if active >= PARALLEL_MIN {
            work.par_iter().map(run).collect()
        } else {
            work.iter().map(run).collect()
        };
        let mut mv = MigrationVector::new();
        for part in &parts {
            mv.merge(part);
        }
        Ok(mv)
    }

    fn simulate(
        &self,
        w: &Work,
        class: &ClassView,
        rows: &Rows,
        protocol: Protocol,
        round: u64,
    ) -> MigrationVector {
        let mut mv = MigrationVector::new();
        let width = class.strategies.len();
        for id in w.first_player..w.first_player + w.count as u64 {
            let mut rng = StreamRng::new(self.params.seed, round, id);
            let imitate = match protocol {
                Protocol::Imitation => true,
                Protocol::Exploration => false,
                _ => rng.gen::<bool>(),
            };
            let (j, mu) = if imitate {
                let j = class.locate(rng.gen_range(0..class.players));
                (j, rows.imitation[j])
            } else {
                let j = rng.gen_range(0..width);
                (j, rows.exploration[j])
            };
            if mu > 0.0 && rng.gen::<f64>() < mu {
                mv.add(w.path, class.strategies[j], 1);
            }
        }
        mv
    }

    pub fn step(&self, x: &GameState, protocol: Protocol, round: u64) -> Result<(GameState, MigrationVector)> {
        let mv = self.round(x, protocol, round)?;
        let next = mv.apply(self.game, x)?;
        Ok((next, mv))
    }
}

/// Probability that a single player on `p` ends the round on each other path.
pub fn move_distribution(
    game: &CongestionGame,
    bounds: &ElasticityBounds,
    x: &GameState,
    params: &ProtocolParams,
    protocol: Protocol,
    p: usize,
) -> Vec<(usize, f64)> {
    let class = &game.classes()[game.class_of(p)];
    let (w_imit, w_expl) = match protocol {
        Protocol::Imitation => (1.0, 0.0),
        Protocol::Exploration => (0.0, 1.0),
        Protocol::Combined => (0.5, 0.5),
        Protocol::Sequential => return Vec::new(),
    };
    let l_p = game.path_latency_unchecked(x, p);
    class
        .strategies
        .iter()
        .filter(|&&q| q != p)
        .filter_map(|&q| {
            let after = game.latency_after_move_unchecked(x, p, q);
            let mut prob = 0.0;
            if w_imit > 0.0 && x.count(q) > 0 {
                let sample = x.count(q) as f64 / class.players as f64;
                prob += w_imit * sample * imitation_migration_prob(l_p, after, bounds, params);
            }
            if w_expl > 0.0 {
                let sample = 1.0 / class.strategies.len() as f64;
                prob += w_expl
                    * sample
                    * exploration_migration_prob(
                        l_p,
                        after,
                        bounds,
                        class.strategies.len(),
                        class.players,
                        params.lambda,
                    );
            }
            (prob > 0.0).then_some((q, prob))
        })
        .collect()
}

pub fn concurrent_round(
    game: &CongestionGame,
    bounds: &ElasticityBounds,
    x: &GameState,
    params: &ProtocolParams,
    protocol: Protocol,
    round: u64,
) -> Result<(GameState, MigrationVector)> {
    RoundEngine::new(game, bounds, params)?.step(x, protocol, round)
}

/// One round of the Imitation Protocol.
pub fn imitation_round(
    game: &CongestionGame,
    bounds: &ElasticityBounds,
    x: &GameState,
    params: &ProtocolParams,
    round: u64,
) -> Result<(GameState, MigrationVector)> {
    concurrent_round(game, bounds, x, params, Protocol::Imitation, round)
}

/// One round of the Exploration Protocol: players sample paths, not players.
pub fn exploration_round(
    game: &CongestionGame,
    bounds: &ElasticityBounds,
    x: &GameState,
    params: &ProtocolParams,
    round: u64,
) -> Result<(GameState, MigrationVector)> {
    concurrent_round(game, bounds, x, params, Protocol::Exploration, round)
}

/// Each player flips a fair coin between the two sampling rules.
pub fn combined_round(
    game: &CongestionGame,
    bounds: &ElasticityBounds,
    x: &GameState,
    params: &ProtocolParams,
    round: u64,
) -> Result<(GameState, MigrationVector)> {
    concurrent_round(game, bounds, x, params, Protocol::Combined, round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::is_imitation_stable;
    use crate::latency::LatencyFunction;
    use crate::paths::singleton_game;

    fn linear(a: &[f64], n: usize) -> CongestionGame {
        singleton_game(a.iter().map(|&a| LatencyFunction::linear(a).unwrap()).collect(), n).unwrap()
    }

    #[test]
    fn stable_state_does_not_move() {
        let g = linear(&[1.0, 1.0], 4);
        let b = ElasticityBounds::compute(&g).unwrap();
        let x = GameState::new(&g, vec![3, 1]).unwrap();
        assert!(is_imitation_stable(&g, &x, b.nu));
        let params = ProtocolParams { lambda: 1.0, ..Default::default() };
        for r in 1..200 {
            let (y, mv) = imitation_round(&g, &b, &x, &params, r).unwrap();
            assert!(mv.is_empty());
            assert_eq!(y, x);
        }
    }

    #[test]
    fn lone_player_never_moves() {
        let g = linear(&[5.0, 1.0], 1);
        let b = ElasticityBounds::compute(&g).unwrap();
        let x = GameState::new(&g, vec![1, 0]).unwrap();
        let params = ProtocolParams { lambda: 1.0, use_nu_threshold: false, ..Default::default() };
        for r in 1..100 {
            assert!(imitation_round(&g, &b, &x, &params, r).unwrap().1.is_empty());
        }
    }

    #[test]
    fn moves_only_pass_the_guard() {
        let g = linear(&[1.0, 2.0, 4.0], 60);
        let b = ElasticityBounds::compute(&g).unwrap();
        let x = GameState::new(&g, vec![5, 15, 40]).unwrap();
        let params = ProtocolParams { lambda: 1.0, ..Default::default() };
        let mut moved = 0;
        for r in 1..50 {
            let (_, mv) = imitation_round(&g, &b, &x, &params, r).unwrap();
            for (p, q, k) in mv.iter() {
                let lp = g.path_latency(&x, p).unwrap();
                let lq = g.latency_after_move(&x, p, q).unwrap();
                assert!(lp > lq + b.nu);
                moved += k;
            }
            mv.check_feasible(&g, &x).unwrap();
        }
        assert!(moved > 0);
    }

    #[test]
    fn exploration_reaches_unused_paths() {
        let g = linear(&[4.0, 1.0], 10);
        let b = ElasticityBounds::compute(&g).unwrap();
        let x = GameState::new(&g, vec![10, 0]).unwrap();
        let params = ProtocolParams { lambda: 1.0, ..Default::default() };
        let mut seen = false;
        for r in 1..100 {
            let (_, mv) = exploration_round(&g, &b, &x, &params, r).unwrap();
            if mv.get(0, 1) > 0 {
                seen = true;
                break;
            }
        }
        assert!(seen);
        assert!(imitation_round(&g, &b, &x, &params, 1).unwrap().1.is_empty());
    }

    #[test]
    fn rounds_are_reproducible() {
        let g = linear(&[1.0, 1.5, 3.0], 50_000);
        let b = ElasticityBounds::compute(&g).unwrap();
        let x = GameState::new(&g, vec![5_000, 15_000, 30_000]).unwrap();
        let params = ProtocolParams { lambda: 0.5, seed: 9, ..Default::default() };
        let a = combined_round(&g, &b, &x, &params, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| combined_round(&g, &b, &x, &params, 3).unwrap());
        assert_eq!(a, c);
        assert!(!a.1.is_empty());
    }

    #[test]
    fn sequential_is_not_a_round() {
        let g = linear(&[1.0], 2);
        let b = ElasticityBounds::compute(&g).unwrap();
        let x = GameState::all_on(&g, 0).unwrap();
        let params = ProtocolParams::default();
        assert!(concurrent_round(&g, &b, &x, &params, Protocol::Sequential, 1).is_err());
    }

    #[test]
    fn move_distribution_weights_by_sampling() {
        let g = linear(&[2.0, 1.0], 4);
        let b = ElasticityBounds::compute(&g).unwrap();
        let x = GameState::new(&g, vec![3, 1]).unwrap();
        let params = ProtocolParams { lambda: 0.5, ..Default::default() };
        // ℓ_1 = 6, ℓ_2(after) = 2, μ = 0.5 * 4/6, sampled with probability 1/4
        let dist = move_distribution(&g, &b, &x, &params, Protocol::Imitation, 0);
        assert_eq!(dist.len(), 1);
        assert!((dist[0].1 - 0.25 * 0.5 * 4.0 / 6.0).abs() < 1e-15);
    }
}
