use rand::Rng;

use crate::game::CongestionGame;
use crate::state::GameState;

/// Ordered pairs `(P, Q)` of used paths in one class such that a player on
/// `P` strictly improves by copying a player on `Q`.
pub fn improving_pairs(game: &CongestionGame, x: &GameState) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for class in game.classes() {
        for &p in &class.strategies {
            if x.count(p) == 0 {
                continue;
            }
            let l_p = game.path_latency_unchecked(x, p);
            for &q in &class.strategies {
                if q != p && x.count(q) > 0 && game.latency_after_move_unchecked(x, p, q) < l_p {
                    pairs.push((p, q));
                }
            }
        }
    }
    pairs
}

/// One step of sequential imitation: a uniformly random improving
/// (imitator, imitated) player pair moves, regardless of the size of the
/// gain. Returns the move made, or `None` at an imitation-stable state.
pub fn sequential_imitation_step<R: Rng + ?Sized>(
    game: &CongestionGame,
    x: &mut GameState,
    rng: &mut R,
) -> Option<(usize, usize)> {
    let pairs = improving_pairs(game, x);
    if pairs.is_empty() {
        return None;
    }
    // a path pair stands for x_P · x_Q player pairs
    let total: u128 = pairs
        .iter()
        .map(|&(p, q)| (x.count(p) * x.count(q)) as u128)
        .sum();
    let mut pick = rng.gen_range(0..total);
    for &(p, q) in &pairs {
        let w = (x.count(p) * x.count(q)) as u128;
        if pick < w {
            x.move_player(game, p, q).expect("improving pair has an occupied origin");
            return Some((p, q));
        }
        pick -= w;
    }
    unreachable!("pick is below the total weight")
}
