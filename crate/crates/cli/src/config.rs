//! Experiment settings from command-line flags and an optional TOML file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use imitate_core::analysis::EquilibriumParams;
use imitate_core::dynamics::{Protocol, ProtocolParams, StopCondition, DEFAULT_LAMBDA, STRICT_LAMBDA};
use imitate_core::ElasticityBounds;
use serde::Deserialize;

use crate::gamefile::read_game;
use crate::genspec::{GenSpec, Instance};

/// `λ` as a number, or one of the names `default` and `strict`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "LambdaRepr")]
pub struct Lambda(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum LambdaRepr {
    Number(f64),
    Name(String),
}

impl TryFrom<LambdaRepr> for Lambda {
    type Error = anyhow::Error;

    fn try_from(r: LambdaRepr) -> Result<Self> {
        match r {
            LambdaRepr::Number(v) => Ok(Lambda(v)),
            LambdaRepr::Name(s) => s.parse(),
        }
    }
}

impl FromStr for Lambda {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Lambda(DEFAULT_LAMBDA)),
            "strict" => Ok(Lambda(STRICT_LAMBDA)),
            other => other
                .parse()
                .map(Lambda)
                .map_err(|_| anyhow!("lambda must be a number, 'default' or 'strict'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopKind {
    Stable,
    Nash,
    Approx,
    Limit,
}

impl FromStr for StopKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stable" => Ok(StopKind::Stable),
            "nash" => Ok(StopKind::Nash),
            "approx" => Ok(StopKind::Approx),
            "limit" => Ok(StopKind::Limit),
            other => bail!("unknown stop condition '{other}' (stable, nash, approx, limit)"),
        }
    }
}

/// Flags shared by every subcommand. Each may also come from `--config`;
/// flags on the command line win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// TOML file with any of these settings
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Game description file
    #[arg(long)]
    pub game: Option<PathBuf>,
    /// Generator spec, e.g. `linear:a=1/2/4,n=1000`
    #[arg(long = "gen")]
    #[serde(rename = "gen")]
    pub generator: Option<String>,
    /// imitation, exploration, combined or sequential
    #[arg(long)]
    pub protocol: Option<String>,
    /// Damping constant: a number, `default` (1/512) or `strict`
    #[arg(long)]
    pub lambda: Option<Lambda>,
    /// Require imitation gains above the slope bound
    #[arg(long, value_parser = clap::builder::BoolishValueParser::new())]
    pub nu_guard: Option<bool>,
    /// Divide imitation probabilities by the elasticity bound
    #[arg(long, value_parser = clap::builder::BoolishValueParser::new())]
    pub damping: Option<bool>,
    /// stable, nash, approx or limit
    #[arg(long)]
    pub stop: Option<StopKind>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Slack of the approximate equilibrium; defaults to the game's slope bound
    #[arg(long)]
    pub nu: Option<f64>,
    /// Round limit
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Settings {
    /// Fills unset fields from the file named by `--config`, if any.
    pub fn with_config_file(self) -> Result<Settings> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let file: Settings = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(self.or(file))
    }

    pub fn or(self, other: Settings) -> Settings {
        Settings {
            config: self.config.or(other.config),
            game: self.game.or(other.game),
            generator: self.generator.or(other.generator),
            protocol: self.protocol.or(other.protocol),
            lambda: self.lambda.or(other.lambda),
            nu_guard: self.nu_guard.or(other.nu_guard),
            damping: self.damping.or(other.damping),
            stop: self.stop.or(other.stop),
            delta: self.delta.or(other.delta),
            epsilon: self.epsilon.or(other.epsilon),
            nu: self.nu.or(other.nu),
            rounds: self.rounds.or(other.rounds),
            replicates: self.replicates.or(other.replicates),
            seed: self.seed.or(other.seed),
            threads: self.threads.or(other.threads),
            out: self.out.or(other.out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GameSource {
    File(PathBuf),
    Generator(GenSpec),
}

impl GameSource {
    pub fn load(&self) -> Result<Instance> {
        match self {
            GameSource::File(path) => {
                let file = read_game(path)?;
                Ok(Instance {
                    game: file.game,
                    initial: file.state,
                    threshold: None,
                })
            }
            GameSource::Generator(spec) => spec.build().with_context(|| format!("generator '{spec}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: GameSource,
    pub params: ProtocolParams,
    pub stop: StopKind,
    pub delta: f64,
    pub epsilon: f64,
    /// `None` uses the game's `ν`.
    pub nu: Option<f64>,
    pub replicates: usize,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Resolves settings with `default_stop` for commands that have their
    /// own natural stop condition.
    pub fn from_settings(s: &Settings, default_stop: StopKind) -> Result<Self> {
        let source = match (&s.game, &s.generator) {
            (Some(_), Some(_)) => bail!("give either --game or --gen, not both"),
            (Some(path), None) => GameSource::File(path.clone()),
            (None, Some(spec)) => GameSource::Generator(spec.parse()?),
            (None, None) => bail!("a game is required (--game or --gen)"),
        };
        let defaults = ProtocolParams::default();
        let params = ProtocolParams {
            lambda: s.lambda.map_or(defaults.lambda, |l| l.0),
            use_nu_threshold: s.nu_guard.unwrap_or(defaults.use_nu_threshold),
            elasticity_damping: s.damping.unwrap_or(defaults.elasticity_damping),
            protocol: match &s.protocol {
                Some(p) => p.parse::<Protocol>()?,
                None => defaults.protocol,
            },
            seed: s.seed.unwrap_or(defaults.seed),
            round_limit: s.rounds.unwrap_or(defaults.round_limit),
        };
        params.validate()?;
        let cfg = ExperimentConfig {
            source,
            params,
            stop: s.stop.unwrap_or(default_stop),
            delta: s.delta.unwrap_or(0.1),
            epsilon: s.epsilon.unwrap_or(0.1),
            nu: s.nu,
            replicates: s.replicates.unwrap_or(1),
            out: s.out.clone(),
            threads: s.threads,
        };
        if cfg.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        if cfg.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        EquilibriumParams::new(cfg.delta, cfg.epsilon, cfg.nu.unwrap_or(0.0))?;
        Ok(cfg)
    }

    /// A config for `source` with default settings.
    pub fn new(source: GameSource) -> Self {
        ExperimentConfig {
            source,
            params: ProtocolParams::default(),
            stop: StopKind::Stable,
            delta: 0.1,
            epsilon: 0.1,
            nu: None,
            replicates: 1,
            out: None,
            threads: None,
        }
    }

    pub fn equilibrium(&self, bounds: &ElasticityBounds) -> Result<EquilibriumParams> {
        Ok(EquilibriumParams::new(
            self.delta,
            self.epsilon,
            self.nu.unwrap_or(bounds.nu),
        )?)
    }

    pub fn stop_condition(&self, bounds: &ElasticityBounds) -> Result<StopCondition> {
        Ok(match self.stop {
            StopKind::Stable => StopCondition::ImitationStable,
            StopKind::Nash => StopCondition::Nash,
            StopKind::Approx => StopCondition::Approx(self.equilibrium(bounds)?),
            StopKind::Limit => StopCondition::RoundLimit,
        })
    }

    /// Seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.params.seed.wrapping_add(r as u64)
    }

    pub fn out_path(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build()?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}
