//! Instance builders: random singleton games, the overshooting pair, the
//! slow-sampling instance and quadratic threshold games.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{CongestionGame, GameKind, PlayerClass};
use crate::latency::LatencyFunction;
use crate::paths::singleton_game;
use crate::state::GameState;

/// A quadratic threshold game on `n_base` base players.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGameSpec {
    pub n_base: usize,
    /// Symmetric weights `a_ij > 0`; the diagonal is ignored.
    pub weights: Vec<Vec<f64>>,
    /// Replace every base player by three copies and offset `ℓ_{r_i}`.
    pub tripled: bool,
    /// `init(i)`: true places base player `i` (or its third copy) on `S_in`.
    pub initial_in: Vec<bool>,
}

impl ThresholdGameSpec {
    /// Random integer weights in `1..=max_weight` and a random `init`.
    pub fn random(n_base: usize, max_weight: u32, tripled: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = vec![vec![0.0; n_base]; n_base];
        for i in 0..n_base {
            for j in i + 1..n_base {
                let a = rng.gen_range(1..=max_weight.max(1)) as f64;
                weights[i][j] = a;
                weights[j][i] = a;
            }
        }
        let initial_in = (0..n_base).map(|_| rng.gen()).collect();
        ThresholdGameSpec {
            n_base,
            weights,
            tripled,
            initial_in,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_base < 2 {
            return Err(Error::InvalidParams("a threshold game needs at least two base players".into()));
        }
        if self.weights.len() != self.n_base || self.weights.iter().any(|r| r.len() != self.n_base) {
            return Err(Error::InvalidParams(format!("weights must be a {0}x{0} matrix", self.n_base)));
        }
        if self.initial_in.len() != self.n_base {
            return Err(Error::InvalidParams(format!("initial_in must have {} entries", self.n_base)));
        }
        for i in 0..self.n_base {
            for j in 0..self.n_base {
                if i == j {
                    continue;
                }
                let a = self.weights[i][j];
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidParams(format!("weight a[{i}][{j}] = {a} is not positive")));
                }
                if a != self.weights[j][i] {
                    return Err(Error::InvalidParams(format!("weights are not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdGame {
    pub game: CongestionGame,
    /// Strategy index of `S_out` per base player.
    pub out_strategy: Vec<usize>,
    /// Strategy index of `S_in` per base player.
    pub in_strategy: Vec<usize>,
    pub initial_state: GameState,
    pub tripled: bool,
}

impl ThresholdGame {
    /// Base players whose three copies all sit on `S_out` or all on `S_in`.
    /// Empty for untripled games.
    pub fn invariant_violations(&self, x: &GameState) -> Vec<usize> {
        if !self.tripled {
            return Vec::new();
        }
        (0..self.out_strategy.len())
            .filter(|&i| x.count(self.out_strategy[i]) == 3 || x.count(self.in_strategy[i]) == 3)
            .collect()
    }
}

/// Index of resource `r_ij` (`i < j`) among the `r_ij` block.
fn pair_index(n_base: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * n_base - i * (i + 1) / 2 + (j - i - 1)
}

/// Resources `r_0..r_{n−1}` come first, followed by `r_ij` for `i < j` in
/// lexicographic order. Base player `i` owns strategies `2i` (`S_out`) and
/// `2i+1` (`S_in`), each in its own player class.
pub fn build_threshold_game(spec: &ThresholdGameSpec) -> Result<ThresholdGame> {
    spec.validate()?;
    let nb = spec.n_base;
    let copies = if spec.tripled { 3 } else { 1 };

    let mut edges = Vec::new();
    for i in 0..nb {
        let total: f64 = (0..nb).filter(|&j| j != i).map(|j| spec.weights[i][j]).sum();
        let offset = if spec.tripled { 1.5 * total } else { 0.0 };
        edges.push(LatencyFunction::polynomial(vec![offset, 0.5 * total])?);
    }
    for i in 0..nb {
        for j in i + 1..nb {
            edges.push(LatencyFunction::linear(spec.weights[i][j])?);
        }
    }

    let mut strategies = Vec::with_capacity(2 * nb);
    let mut classes = Vec::with_capacity(nb);
    for i in 0..nb {
        strategies.push(vec![i]);
        strategies.push(
            (0..nb)
                .filter(|&j| j != i)
                .map(|j| nb + pair_index(nb, i, j))
                .collect(),
        );
        classes.push(PlayerClass {
            players: copies,
            strategies: vec![2 * i, 2 * i + 1],
        });
    }
    let game = CongestionGame::with_classes(edges, strategies, classes, GameKind::Explicit)?;

    let mut counts = vec![0; 2 * nb];
    for i in 0..nb {
        let init = 2 * i + usize::from(spec.initial_in[i]);
        if spec.tripled {
            counts[2 * i] += 1;
            counts[2 * i + 1] += 1;
        }
        counts[init] += 1;
    }
    let initial_state = GameState::new(&game, counts)?;
    Ok(ThresholdGame {
        game,
        out_strategy: (0..nb).map(|i| 2 * i).collect(),
        in_strategy: (0..nb).map(|i| 2 * i + 1).collect(),
        initial_state,
        tripled: spec.tripled,
    })
}

/// Two links, `ℓ₁(x) = c` and `ℓ₂(x) = x^d`, with `x₂` players on link 2.
pub fn build_overshoot_pair(c: f64, d: usize, n: usize, x2: usize) -> Result<(CongestionGame, GameState)> {
    if x2 > n {
        return Err(Error::InvalidParams(format!("x2 = {x2} exceeds n = {n}")));
    }
    let b = c - (x2 as f64).powi(d as i32);
    if !(b > 0.0) {
        return Err(Error::InvalidParams(format!("b = c - x2^d = {b} must be positive")));
    }
    let game = singleton_game(
        vec![LatencyFunction::constant(c)?, LatencyFunction::monomial(1.0, d)?],
        n,
    )?;
    let state = GameState::new(&game, vec![n - x2, x2])?;
    Ok((game, state))
}

/// `m` identical links `ℓ(x) = x`, `n = 2m` players at `(3, 1, 2, …, 2)`.
pub fn build_sampling_lowerbound(m: usize) -> Result<(CongestionGame, GameState)> {
    if m < 3 {
        return Err(Error::InvalidParams(format!("m = {m} must be at least 3")));
    }
    let game = singleton_game(vec![LatencyFunction::linear(1.0)?; m], 2 * m)?;
    let mut counts = vec![2; m];
    counts[0] = 3;
    counts[1] = 1;
    let state = GameState::new(&game, counts)?;
    Ok((game, state))
}

/// Parallel links with `ℓ_e(x) = a_e·x`.
pub fn linear_singleton(slopes: &[f64], n: usize) -> Result<CongestionGame> {
    let fs = slopes
        .iter()
        .map(|&a| LatencyFunction::linear(a))
        .collect::<Result<Vec<_>>>()?;
    singleton_game(fs, n)
}

/// Parallel links with `ℓ_e(x) = a_e·(x/n)^degree`.
pub fn scaled_singleton(slopes: &[f64], degree: usize, n: usize) -> Result<CongestionGame> {
    let scale = (n as f64).powi(degree as i32);
    let fs = slopes
        .iter()
        .map(|&a| LatencyFunction::monomial(a / scale, degree))
        .collect::<Result<Vec<_>>>()?;
    singleton_game(fs, n)
}

/// Every player picks a strategy of its class uniformly at random.
pub fn random_state<R: Rng + ?Sized>(game: &CongestionGame, rng: &mut R) -> Result<GameState> {
    let mut counts = vec![0; game.strategy_count()];
    for class in game.classes() {
        for _ in 0..class.players {
            counts[class.strategies[rng.gen_range(0..class.strategies.len())]] += 1;
        }
    }
    GameState::new(game, counts)
}

/// `m` links `ℓ_e(x) = a_e·x^degree` with `a_e` uniform in `range`, and a
/// uniformly random initial assignment.
pub fn random_singleton(
    m: usize,
    n: usize,
    range: (f64, f64),
    degree: usize,
    seed: u64,
) -> Result<(CongestionGame, GameState)> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParams("m and n must be positive".into()));
    }
    let (lo, hi) = range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidParams(format!("coefficient range [{lo}, {hi}] must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = (0..m)
        .map(|_| {
            let a = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            LatencyFunction::monomial(a, degree)
        })
        .collect::<Result<Vec<_>>>()?;
    let game = singleton_game(fs, n)?;
    let state = random_state(&game, &mut rng)?;
    Ok((game, state))
}
