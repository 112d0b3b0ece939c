use std::io::Write;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use imitate_dyn::{
    cmd_audit, cmd_extinction, cmd_lowerbound, cmd_poi, cmd_run, cmd_sweep, exit, with_threads,
    ExperimentConfig, Settings, StopKind, SweepAxis,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "imitate-dyn", version, about = "Imitation dynamics in congestion games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dynamics and write a trace per replicate
    Run(Settings),
    /// Rounds to the stop condition across values of one parameter
    Sweep {
        #[command(flatten)]
        settings: Settings,
        /// n, lambda, epsilon or delta
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Track the smallest load of every resource over many rounds
    Extinction(Settings),
    /// Social cost of imitation-stable states against the fractional optimum
    Poi(Settings),
    /// Sequential imitation on threshold games with invariant checks
    Lowerbound(Settings),
    /// Statistical check of the expected potential drop of one round
    Audit {
        #[command(flatten)]
        settings: Settings,
        /// Replays per audited state
        #[arg(long, default_value_t = 10_000)]
        replays: usize,
    },
}

fn print<T: Serialize>(report: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn code(ok: bool) -> i32 {
    if ok {
        exit::OK
    } else {
        exit::NOT_CONVERGED
    }
}

fn execute(command: Command) -> Result<i32> {
    let (settings, default_stop) = match &command {
        Command::Sweep { settings, .. } => (settings, StopKind::Approx),
        Command::Audit { settings, .. } => (settings, StopKind::Stable),
        Command::Run(s) | Command::Extinction(s) | Command::Poi(s) | Command::Lowerbound(s) => {
            (s, StopKind::Stable)
        }
    };
    let cfg = ExperimentConfig::from_settings(&settings.clone().with_config_file()?, default_stop)?;
    log::debug!("{cfg:?}");
    with_threads(cfg.threads, || match &command {
        Command::Run(_) => {
            let r = cmd_run(&cfg)?;
            print(&r)?;
            Ok(code(r.all_converged))
        }
        Command::Sweep { axis, values, .. } => {
            let r = cmd_sweep(&cfg, *axis, values)?;
            print(&r)?;
            Ok(code(r.rows.iter().all(|row| row.converged == row.replicates)))
        }
        Command::Extinction(_) => {
            let r = cmd_extinction(&cfg)?;
            print(&r)?;
            Ok(code(r.passed))
        }
        Command::Poi(_) => {
            let r = cmd_poi(&cfg)?;
            print(&r)?;
            Ok(code(r.passed))
        }
        Command::Lowerbound(_) => {
            let r = cmd_lowerbound(&cfg)?;
            print(&r)?;
            Ok(code(r.invariant_holds))
        }
        Command::Audit { replays, .. } => {
            let r = cmd_audit(&cfg, *replays)?;
            print(&r)?;
            Ok(code(r.passed))
        }
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("IMITATE_DYN_LOG")).init();
    // clap reports usage errors with status 2, which is reserved for runs
    // that hit the round limit
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INPUT_ERROR as u8 } else { exit::OK as u8 });
        }
    };
    match execute(cli.command) {
        Ok(c) => ExitCode::from(c as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::INPUT_ERROR as u8)
        }
    }
}
