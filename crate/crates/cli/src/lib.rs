//! Experiment driver for the `imitate-dyn` command-line tool: game files,
//! generator specs, configuration, trace files and the experiment commands.

pub mod commands;
pub mod config;
pub mod gamefile;
pub mod genspec;
pub mod trace;

pub use commands::{
    cmd_audit, cmd_extinction, cmd_lowerbound, cmd_poi, cmd_run, cmd_sweep, SweepAxis,
};
pub use config::{with_threads, ExperimentConfig, GameSource, Settings, StopKind};

/// Process exit codes.
pub mod exit {
    /// Converged, or the reported check passed.
    pub const OK: i32 = 0;
    pub const INPUT_ERROR: i32 = 1;
    /// Round limit reached, or the reported check failed.
    pub const NOT_CONVERGED: i32 = 2;
}
