//! Equilibrium detectors, potential-gain accounting, statistical checks of
//! the imitation dynamics and the social-cost quantities of linear
//! singleton games.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::ElasticityBounds;
use crate::dynamics::{move_distribution, MigrationVector, Protocol, ProtocolParams, RoundEngine};
use crate::error::{Error, Result};
use crate::game::CongestionGame;
use crate::latency::LatencyFunction;
use crate::state::GameState;

/// Relative tolerance for exact algebraic identities.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumParams {
    pub delta: f64,
    pub epsilon: f64,
    pub nu: f64,
}

impl EquilibriumParams {
    pub fn new(delta: f64, epsilon: f64, nu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidParams(format!("delta {delta} outside [0, 1]")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParams(format!("epsilon {epsilon} must be >= 0")));
        }
        if !(nu >= 0.0) {
            return Err(Error::InvalidParams(format!("nu {nu} must be >= 0")));
        }
        Ok(EquilibriumParams { delta, epsilon, nu })
    }

    /// Uses the game's slope bound as `ν`.
    pub fn for_game(delta: f64, epsilon: f64, bounds: &ElasticityBounds) -> Result<Self> {
        Self::new(delta, epsilon, bounds.nu)
    }
}

/// True iff no player can gain more than `nu` by copying a player of its
/// own class.
pub fn is_imitation_stable(game: &CongestionGame, x: &GameState, nu: f64) -> bool {
    game.classes().iter().all(|class| {
        class.strategies.iter().filter(|&&p| x.count(p) > 0).all(|&p| {
            let l_p = game.path_latency_unchecked(x, p);
            class
                .strategies
                .iter()
                .filter(|&&q| q != p && x.count(q) > 0)
                .all(|&q| l_p <= game.latency_after_move_unchecked(x, p, q) + nu)
        })
    })
}

/// True iff no player has a strictly better path in its strategy space.
pub fn is_nash(game: &CongestionGame, x: &GameState) -> bool {
    game.classes().iter().all(|class| {
        class.strategies.iter().filter(|&&p| x.count(p) > 0).all(|&p| {
            let l_p = game.path_latency_unchecked(x, p);
            class
                .strategies
                .iter()
                .filter(|&&q| q != p)
                .all(|&q| game.latency_after_move_unchecked(x, p, q) >= l_p)
        })
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathClasses {
    /// `ℓ_P > (1+ε)·L_av⁺ + ν`
    pub expensive: Vec<usize>,
    /// `ℓ_P < (1−ε)·L_av − ν`
    pub cheap: Vec<usize>,
}

pub fn classify_paths(game: &CongestionGame, x: &GameState, eq: &EquilibriumParams) -> PathClasses {
    let avg = game.averages(x);
    let high = (1.0 + eq.epsilon) * avg.l_av_plus + eq.nu;
    let low = (1.0 - eq.epsilon) * avg.l_av - eq.nu;
    let mut out = PathClasses::default();
    for p in 0..game.strategy_count() {
        let l = game.path_latency_unchecked(x, p);
        if l > high {
            out.expensive.push(p);
        } else if l < low {
            out.cheap.push(p);
        }
    }
    out
}

/// Players on expensive or cheap paths.
pub fn unsatisfied_players(game: &CongestionGame, x: &GameState, eq: &EquilibriumParams) -> usize {
    let c = classify_paths(game, x, eq);
    c.expensive.iter().chain(&c.cheap).map(|&p| x.count(p)).sum()
}

pub fn is_approx_equilibrium(game: &CongestionGame, x: &GameState, eq: &EquilibriumParams) -> bool {
    unsatisfied_players(game, x, eq) as f64 <= eq.delta * game.n() as f64
}

/// `Σ_{P,Q} Δx_PQ · (ℓ_Q(x + 1_Q − 1_P) − ℓ_P(x))`.
pub fn virtual_gain(game: &CongestionGame, x: &GameState, mv: &MigrationVector) -> Result<f64> {
    mv.check_feasible(game, x)?;
    Ok(mv
        .iter()
        .map(|(p, q, k)| {
            k as f64 * (game.latency_after_move_unchecked(x, p, q) - game.path_latency_unchecked(x, p))
        })
        .sum())
}

/// `Σ_e F_e(x, Δx)`, the concurrency correction on every edge.
pub fn error_terms(game: &CongestionGame, x: &GameState, mv: &MigrationVector) -> Result<f64> {
    mv.check_feasible(game, x)?;
    let cong = x.congestion();
    let mut total = 0.0;
    for (e, de) in mv.edge_delta(game).into_iter().enumerate() {
        let xe = cong[e];
        if de > 0 {
            let base = game.edge_latency(e, xe + 1);
            for u in xe + 1..=xe + de as usize {
                total += game.edge_latency(e, u) - base;
            }
        } else if de < 0 {
            let top = game.edge_latency(e, xe);
            for u in xe - (-de) as usize + 1..=xe {
                total += top - game.edge_latency(e, u);
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialDecomposition {
    pub virtual_gain: f64,
    pub error_sum: f64,
    pub true_gain: f64,
}

impl PotentialDecomposition {
    pub fn slack(&self) -> f64 {
        self.virtual_gain + self.error_sum - self.true_gain
    }
}

/// Computes `ΔΦ`, `ΣV_PQ` and `ΣF_e` and checks `ΔΦ ≤ ΣV + ΣF`.
pub fn decompose(game: &CongestionGame, x: &GameState, mv: &MigrationVector) -> Result<PotentialDecomposition> {
    let virtual_gain = virtual_gain(game, x, mv)?;
    let error_sum = error_terms(game, x, mv)?;
    let next = mv.apply(game, x)?;
    let phi = game.potential(x);
    let true_gain = game.potential(&next) - phi;
    let d = PotentialDecomposition {
        virtual_gain,
        error_sum,
        true_gain,
    };
    if d.slack() < -RELATIVE_TOLERANCE * phi.max(1.0) {
        return Err(Error::BoundViolated {
            true_gain,
            virtual_gain,
            error_sum,
        });
    }
    Ok(d)
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub replays: usize,
    pub imitation_stable: bool,
    pub mean_delta_phi: f64,
    pub stderr_delta_phi: f64,
    pub mean_virtual_gain: f64,
    /// Mean of `ΔΦ − ½ΣV` per replay.
    pub mean_excess: f64,
    pub stderr_excess: f64,
    /// Replays with non-zero potential change.
    pub moving_replays: usize,
    /// `mean ΔΦ + 3·stderr < 0` (or every replay exactly 0 at a stable state).
    pub supermartingale: bool,
    /// `mean ΔΦ ≤ ½·mean ΣV + 3·stderr`.
    pub half_gain_bound: bool,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.supermartingale && self.half_gain_bound
    }
}

/// Replays one imitation round from `x` with independent randomness and
/// tests that the potential drops in expectation, by at least half the
/// expected virtual gain.
pub fn martingale_test(
    game: &CongestionGame,
    bounds: &ElasticityBounds,
    x: &GameState,
    params: &ProtocolParams,
    replays: usize,
) -> Result<MartingaleReport> {
    if replays == 0 {
        return Err(Error::InvalidParams("at least one replay required".into()));
    }
    let engine = RoundEngine::new(game, bounds, params)?;
    let phi = game.potential(x);
    let nu = if params.use_nu_threshold { bounds.nu } else { 0.0 };
    let stable = is_imitation_stable(game, x, nu);
    let samples: Vec<(f64, f64)> = (1..=replays as u64)
        .into_par_iter()
        .map(|r| {
            let mv = engine.round(x, Protocol::Imitation, r)?;
            if mv.is_empty() {
                return Ok((0.0, 0.0));
            }
            let v = virtual_gain(game, x, &mv)?;
            let next = mv.apply(game, x)?;
            Ok((game.potential(&next) - phi, v))
        })
        .collect::<Result<_>>()?;

    let delta: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let excess: Vec<f64> = samples.iter().map(|s| s.0 - 0.5 * s.1).collect();
    let (mean_delta_phi, stderr_delta_phi) = mean_and_stderr(&delta);
    let (mean_excess, stderr_excess) = mean_and_stderr(&excess);
    let mean_virtual_gain = compensated_sum(samples.iter().map(|s| s.1)) / replays as f64;
    let moving_replays = delta.iter().filter(|d| **d != 0.0).count();

    let supermartingale = if stable {
        moving_replays == 0
    } else {
        mean_delta_phi + 3.0 * stderr_delta_phi < 0.0
    };
    let half_gain_bound = mean_excess <= 3.0 * stderr_excess;

    Ok(MartingaleReport {
        replays,
        imitation_stable: stable,
        mean_delta_phi,
        stderr_delta_phi,
        mean_virtual_gain,
        mean_excess,
        stderr_excess,
        moving_replays,
        supermartingale,
        half_gain_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundExpectation {
    pub delta_phi: f64,
    pub virtual_gain: f64,
    /// Number of joint outcomes enumerated.
    pub outcomes: usize,
}

const MAX_JOINT_OUTCOMES: usize = 1 << 22;

/// Exact expectation of `ΔΦ` and `ΣV` over one concurrent round, by
/// enumerating the joint decisions of all players. Only for tiny instances.
pub fn exact_round_expectation(
    game: &CongestionGame,
    bounds: &ElasticityBounds,
    x: &GameState,
    params: &ProtocolParams,
    protocol: Protocol,
) -> Result<RoundExpectation> {
    // one entry per player: origin and its (target, probability) options
    let mut players: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
    let mut outcomes = 1usize;
    for p in x.support() {
        let dist = move_distribution(game, bounds, x, params, protocol, p);
        for _ in 0..x.count(p) {
            outcomes = outcomes
                .checked_mul(dist.len() + 1)
                .filter(|o| *o <= MAX_JOINT_OUTCOMES)
                .ok_or_else(|| Error::Unsupported("an instance small enough to enumerate".into()))?;
            players.push((p, dist.clone()));
        }
    }

    let phi = game.potential(x);
    let mut exp_phi = 0.0;
    let mut exp_v = 0.0;
    // depth-first over (next player, probability so far, partial moves)
    let mut stack: Vec<(usize, f64, MigrationVector)> = vec![(0, 1.0, MigrationVector::new())];
    while let Some((i, prob, partial)) = stack.pop() {
        if prob == 0.0 {
            continue;
        }
        if i == players.len() {
            let next = partial.apply(game, x)?;
            exp_phi += prob * (game.potential(&next) - phi);
            exp_v += prob * virtual_gain(game, x, &partial)?;
            continue;
        }
        let (p, dist) = &players[i];
        let stay: f64 = 1.0 - dist.iter().map(|d| d.1).sum::<f64>();
        stack.push((i + 1, prob * stay, partial.clone()));
        for &(q, pq) in dist {
            let mut next = partial.clone();
            next.add(*p, q, 1);
            stack.push((i + 1, prob * pq, next));
        }
    }
    Ok(RoundExpectation {
        delta_phi: exp_phi,
        virtual_gain: exp_v,
        outcomes,
    })
}

/// Slope `a` of a latency function of the form `a·x`.
pub fn linear_slope(f: &LatencyFunction) -> Option<f64> {
    match f {
        LatencyFunction::Polynomial(c) => {
            let a = c.get(1).copied().unwrap_or(0.0);
            let rest_zero = c.iter().enumerate().all(|(i, v)| i == 1 || *v == 0.0);
            (rest_zero && a > 0.0).then_some(a)
        }
        LatencyFunction::Table(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalOptimum {
    /// `x̃_e = n / (A_Γ·a_e)`
    pub loads: Vec<f64>,
    /// `A_Γ = Σ_e 1/a_e`
    pub a_gamma: f64,
    /// Common latency `n / A_Γ`.
    pub latency: f64,
    /// Edges with `x̃_e < 1`.
    pub useless: Vec<usize>,
    pub slopes: Vec<f64>,
}

fn linear_singleton_slopes(game: &CongestionGame) -> Result<Vec<f64>> {
    if !game.is_singleton() {
        return Err(Error::Unsupported("a singleton game".into()));
    }
    game.edges()
        .iter()
        .map(|f| linear_slope(f).ok_or_else(|| Error::Unsupported("linear latencies a·x".into())))
        .collect()
}

pub fn fractional_optimum(game: &CongestionGame) -> Result<FractionalOptimum> {
    let slopes = linear_singleton_slopes(game)?;
    let n = game.n() as f64;
    let a_gamma: f64 = slopes.iter().map(|a| 1.0 / a).sum();
    let loads: Vec<f64> = slopes.iter().map(|a| n / (a_gamma * a)).collect();
    let useless = loads
        .iter()
        .enumerate()
        .filter(|(_, l)| **l < 1.0)
        .map(|(e, _)| e)
        .collect();
    Ok(FractionalOptimum {
        loads,
        a_gamma,
        latency: n / a_gamma,
        useless,
        slopes,
    })
}

/// Average latency `Σ_e (x_e/n)·ℓ_e(x_e)` of a singleton game.
pub fn social_cost(game: &CongestionGame, x: &GameState) -> Result<f64> {
    if !game.is_singleton() {
        return Err(Error::Unsupported("a singleton game".into()));
    }
    let n = game.n() as f64;
    Ok(x.congestion()
        .iter()
        .enumerate()
        .map(|(e, &k)| k as f64 / n * game.edge_latency(e, k))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBounds {
    pub social_cost: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Checks `n/A_Γ ≤ SC(x) ≤ 3·n/A_Γ` at a state where no player can gain more
/// than `a_max` and every resource is used.
pub fn stable_cost_bounds_check(game: &CongestionGame, x: &GameState) -> Result<CostBounds> {
    let opt = fractional_optimum(game)?;
    if !opt.useless.is_empty() {
        return Err(Error::Unsupported(format!("no useless resources (found {:?})", opt.useless)));
    }
    if x.congestion().contains(&0) {
        return Err(Error::InvalidState("a resource is unused".into()));
    }
    let a_max = opt.slopes.iter().copied().fold(0.0, f64::max);
    if !is_imitation_stable(game, x, a_max) {
        return Err(Error::InvalidState("some player can gain more than a_max".into()));
    }
    let sc = social_cost(game, x)?;
    let lower = opt.latency;
    let upper = 3.0 * opt.latency;
    let tol = RELATIVE_TOLERANCE * upper;
    Ok(CostBounds {
        social_cost: sc,
        lower,
        upper,
        holds: sc >= lower - tol && sc <= upper + tol,
    })
}
