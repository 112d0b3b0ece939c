//! Round-based imitation and exploration dynamics.
//!
//! A concurrent round evaluates every player's decision against one
//! immutable snapshot, buffers the moves into a [`MigrationVector`] and
//! applies them at once. Randomness for player `i` in round `r` comes from
//! the stream keyed by `(seed, r, i)`.

mod migration;
mod rng;
mod round;
mod run;
mod sequential;

use serde::{Deserialize, Serialize};

pub use migration::MigrationVector;
pub use rng::StreamRng;
pub use round::{
    combined_round, concurrent_round, exploration_round, imitation_round, move_distribution,
    RoundEngine,
};
pub use run::{run, RunOptions, StopCondition, Trace, TraceRow};
pub use sequential::{improving_pairs, sequential_imitation_step};

use crate::bounds::ElasticityBounds;
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1.0 / 512.0;
/// Conservative constant below `1/(2e^8 + 8)`.
pub const STRICT_LAMBDA: f64 = 1.6e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Imitation,
    Exploration,
    Combined,
    Sequential,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imitation" => Ok(Protocol::Imitation),
            "exploration" => Ok(Protocol::Exploration),
            "combined" => Ok(Protocol::Combined),
            "sequential" => Ok(Protocol::Sequential),
            other => Err(Error::InvalidParams(format!("unknown protocol '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub lambda: f64,
    /// Require a gain above `ν` before an imitation move.
    pub use_nu_threshold: bool,
    /// Divide imitation probabilities by the elasticity bound `d`. Turning
    /// this off gives the undamped variant used in overshooting experiments.
    pub elasticity_damping: bool,
    pub protocol: Protocol,
    pub seed: u64,
    pub round_limit: usize,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            lambda: DEFAULT_LAMBDA,
            use_nu_threshold: true,
            elasticity_damping: true,
            protocol: Protocol::Imitation,
            seed: 0,
            round_limit: 100_000,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ProtocolParams { seed, ..self.clone() }
    }
}

/// Imitation migration probability `μ_PQ = (λ/d)·(ℓ_P − ℓ_Q⁺)/ℓ_P`, zero
/// unless the gain exceeds `ν` (or zero, with the guard disabled).
pub fn imitation_migration_prob(
    l_p: f64,
    l_q_after: f64,
    bounds: &ElasticityBounds,
    params: &ProtocolParams,
) -> f64 {
    let gain = l_p - l_q_after;
    let threshold = if params.use_nu_threshold { bounds.nu } else { 0.0 };
    if gain <= threshold || gain <= 0.0 || l_p <= 0.0 {
        return 0.0;
    }
    let damping = if params.elasticity_damping { bounds.d } else { 1.0 };
    (params.lambda / damping * gain / l_p).min(1.0)
}

/// Exploration migration probability
/// `min{1, λ·|𝒫|·ℓ_min/(β·n)·(ℓ_P − ℓ_Q⁺)/ℓ_P}`.
pub fn exploration_migration_prob(
    l_p: f64,
    l_q_after: f64,
    bounds: &ElasticityBounds,
    strategies: usize,
    players: usize,
    lambda: f64,
) -> f64 {
    let gain = l_p - l_q_after;
    if gain <= 0.0 || l_p <= 0.0 {
        return 0.0;
    }
    let scale = if bounds.beta > 0.0 {
        lambda * strategies as f64 * bounds.ell_min / (bounds.beta * players as f64)
    } else {
        f64::INFINITY
    };
    (scale * gain / l_p).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(d: f64, nu: f64) -> ElasticityBounds {
        ElasticityBounds {
            d,
            nu_e: vec![],
            nu_p: vec![],
            nu,
            beta: 1.0,
            ell_min: 1.0,
            ell_max: 10.0,
        }
    }

    #[test]
    fn zero_gain_never_moves() {
        let p = ProtocolParams::default();
        assert_eq!(imitation_migration_prob(5.0, 5.0, &bounds(1.0, 0.0), &p), 0.0);
    }

    #[test]
    fn formula_value() {
        let p = ProtocolParams {
            lambda: 0.5,
            ..Default::default()
        };
        assert_eq!(imitation_migration_prob(10.0, 5.0, &bounds(1.0, 1.0), &p), 0.25);
    }

    #[test]
    fn gain_below_threshold_is_ignored() {
        let p = ProtocolParams {
            lambda: 1.0,
            ..Default::default()
        };
        assert_eq!(imitation_migration_prob(10.0, 9.5, &bounds(1.0, 1.0), &p), 0.0);
        assert_eq!(imitation_migration_prob(10.0, 9.0, &bounds(1.0, 1.0), &p), 0.0);
        let open = ProtocolParams {
            use_nu_threshold: false,
            ..p
        };
        assert!(imitation_migration_prob(10.0, 9.5, &bounds(1.0, 1.0), &open) > 0.0);
    }

    #[test]
    fn damping_divides_by_elasticity() {
        let mut p = ProtocolParams {
            lambda: 0.5,
            use_nu_threshold: false,
            ..Default::default()
        };
        let damped = imitation_migration_prob(10.0, 5.0, &bounds(4.0, 0.0), &p);
        p.elasticity_damping = false;
        let undamped = imitation_migration_prob(10.0, 5.0, &bounds(4.0, 0.0), &p);
        assert_eq!(damped * 4.0, undamped);
    }

    #[test]
    fn exploration_probability_clamps() {
        let b = bounds(1.0, 0.0);
        // scale = 1 * 2 * 1 / (1 * 1) = 2
        assert_eq!(exploration_migration_prob(10.0, 1.0, &b, 2, 1, 1.0), 1.0);
        // scale = 0.5 * 2 / 10 = 0.1
        assert!((exploration_migration_prob(10.0, 5.0, &b, 2, 10, 0.5) - 0.05).abs() < 1e-15);
        assert_eq!(exploration_migration_prob(5.0, 6.0, &b, 2, 10, 0.5), 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(ProtocolParams::default().validate().is_ok());
        let bad = ProtocolParams {
            lambda: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("combined".parse::<Protocol>().unwrap(), Protocol::Combined);
        assert!("greedy".parse::<Protocol>().is_err());
    }
}
