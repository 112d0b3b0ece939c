use serde::{Deserialize, Serialize};

use super::{sequential_imitation_step, MigrationVector, Protocol, ProtocolParams, RoundEngine, StreamRng};
use crate::analysis::{self, EquilibriumParams, PotentialDecomposition};
use crate::bounds::ElasticityBounds;
use crate::error::Result;
use crate::game::CongestionGame;
use crate::state::GameState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    ImitationStable,
    Nash,
    Approx(EquilibriumParams),
    RoundLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub stop: StopCondition,
    /// Thresholds used for the per-round unsatisfied fraction.
    pub report: EquilibriumParams,
    /// Check the potential decomposition bound on every round.
    pub audit: bool,
    /// Keep every migration vector in the trace.
    pub keep_migrations: bool,
}

impl RunOptions {
    pub fn new(stop: StopCondition, report: EquilibriumParams) -> Self {
        RunOptions {
            stop,
            report,
            audit: false,
            keep_migrations: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub potential: f64,
    pub l_av: f64,
    pub l_av_plus: f64,
    pub max_used_latency: f64,
    pub migrations: usize,
    pub unsat_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Row 0 describes the initial state; row `r` the state after round `r`.
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    pub rounds: usize,
    pub final_state: GameState,
    pub migrations: Vec<MigrationVector>,
    pub decompositions: Vec<PotentialDecomposition>,
}

fn row(
    game: &CongestionGame,
    x: &GameState,
    round: usize,
    migrations: usize,
    report: &EquilibriumParams,
) -> TraceRow {
    let avg = game.averages(x);
    TraceRow {
        round,
        potential: game.potential(x),
        l_av: avg.l_av,
        l_av_plus: avg.l_av_plus,
        max_used_latency: game.max_used_latency(x),
        migrations,
        unsat_fraction: analysis::unsatisfied_players(game, x, report) as f64 / game.n() as f64,
    }
}

pub(crate) fn stop_reached(
    game: &CongestionGame,
    bounds: &ElasticityBounds,
    params: &ProtocolParams,
    stop: &StopCondition,
    x: &GameState,
) -> bool {
    match stop {
        StopCondition::ImitationStable => {
            let nu = if params.use_nu_threshold && params.protocol != Protocol::Sequential {
                bounds.nu
            } else {
                0.0
            };
            analysis::is_imitation_stable(game, x, nu)
        }
        StopCondition::Nash => analysis::is_nash(game, x),
        StopCondition::Approx(eq) => analysis::is_approx_equilibrium(game, x, eq),
        StopCondition::RoundLimit => false,
    }
}

/// Iterates the selected protocol from `x0` until the stop condition holds
/// or `params.round_limit` rounds have run.
pub fn run(
    game: &CongestionGame,
    bounds: &ElasticityBounds,
    x0: &GameState,
    params: &ProtocolParams,
    options: &RunOptions,
) -> Result<Trace> {
    let engine = RoundEngine::new(game, bounds, params)?;
    let mut x = x0.clone();
    let mut rows = vec![row(game, &x, 0, 0, &options.report)];
    let mut migrations = Vec::new();
    let mut decompositions = Vec::new();
    let mut round = 0;
    let converged;

    loop {
        if stop_reached(game, bounds, params, &options.stop, &x) {
            converged = true;
            break;
        }
        if round == params.round_limit {
            converged = options.stop == StopCondition::RoundLimit;
            break;
        }
        round += 1;
        let mv = if params.protocol == Protocol::Sequential {
            let mut rng = StreamRng::new(params.seed, round as u64, u64::MAX);
            let mut mv = MigrationVector::new();
            let mut y = x.clone();
            if let Some((p, q)) = sequential_imitation_step(game, &mut y, &mut rng) {
                mv.add(p, q, 1);
            }
            mv
        } else {
            engine.round(&x, params.protocol, round as u64)?
        };
        if options.audit {
            decompositions.push(analysis::decompose(game, &x, &mv)?);
        }
        x = mv.apply(game, &x)?;
        rows.push(row(game, &x, round, mv.total(), &options.report));
        if options.keep_migrations {
            migrations.push(mv);
        }
    }

    Ok(Trace {
        rows,
        converged,
        rounds: round,
        final_state: x,
        migrations,
        decompositions,
    })
}
