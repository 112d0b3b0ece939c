//! Simulation of concurrent imitation dynamics in atomic congestion games.
//!
//! A [`CongestionGame`] describes resources, strategies and player classes;
//! a [`GameState`] stores how many players use each strategy. The
//! [`dynamics`] module runs imitation, exploration and sequential protocols
//! and [`analysis`] checks equilibrium notions and potential accounting.

pub mod analysis;
pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod generators;
pub mod latency;
pub mod paths;
pub mod state;

pub use bounds::ElasticityBounds;
pub use error::{Error, Result};
pub use game::{Averages, CongestionGame, GameKind, PlayerClass};
pub use latency::LatencyFunction;
pub use state::GameState;
