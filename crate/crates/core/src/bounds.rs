use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::CongestionGame;

/// Steepness parameters of a game's latency functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityBounds {
    /// Elasticity bound, at least 1.
    pub d: f64,
    /// Largest increment on almost empty edges, per edge.
    pub nu_e: Vec<f64>,
    /// `Σ_{e∈P} ν_e`, per strategy.
    pub nu_p: Vec<f64>,
    /// `max_P ν_P`; the minimum gain for an imitation move.
    pub nu: f64,
    /// Largest single-step latency increase on any edge over `1..=n`.
    pub beta: f64,
    /// `min_e ℓ_e(1)`.
    pub ell_min: f64,
    /// `max_P Σ_{e∈P} ℓ_e(n)`.
    pub ell_max: f64,
}

impl ElasticityBounds {
    pub fn compute(game: &CongestionGame) -> Result<Self> {
        let n = game.n();
        let edges = game.edges();
        if edges.is_empty() {
            return Err(Error::InvalidGame("no edges".into()));
        }
        if let Some(e) = edges.iter().position(|f| f.eval_unchecked(1) <= 0.0) {
            return Err(Error::InvalidGame(format!("edge {e} has ℓ(1) <= 0")));
        }

        let d = edges
            .iter()
            .map(|f| f.elasticity_bound(n))
            .fold(1.0, f64::max);
        let near_empty = (d.ceil() as usize).min(n.max(1));
        let nu_e: Vec<f64> = edges.iter().map(|f| f.max_increment(near_empty)).collect();
        let nu_p: Vec<f64> = game
            .strategies()
            .iter()
            .map(|s| s.iter().map(|&e| nu_e[e]).sum())
            .collect();
        let nu = nu_p.iter().copied().fold(0.0, f64::max);
        let beta = edges.iter().map(|f| f.max_slope(n)).fold(0.0, f64::max);
        let ell_min = edges
            .iter()
            .map(|f| f.eval_unchecked(1))
            .fold(f64::INFINITY, f64::min);
        let ell_max = game
            .strategies()
            .iter()
            .map(|s| s.iter().map(|&e| game.edge_latency(e, n)).sum::<f64>())
            .fold(0.0, f64::max);

        Ok(ElasticityBounds {
            d,
            nu_e,
            nu_p,
            nu,
            beta,
            ell_min,
            ell_max,
        })
    }
}
