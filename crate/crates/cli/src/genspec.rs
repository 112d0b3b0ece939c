//! Generator specifications of the form `name:key=value,key=value`.
//! List values separate their items with `/`, e.g. `linear:a=1/2/4,n=1000`.
//!
//! | name         | keys (defaults)                                       |
//! |--------------|-------------------------------------------------------|
//! | `singleton`  | `m`, `n`, `lo` (1), `hi` (2), `degree` (1), `seed` (0) |
//! | `linear`     | `a`, `n`                                              |
//! | `scaled`     | `a`, `n`, `degree` (1)                                |
//! | `overshoot`  | `c`, `d`, `n`, `x2`                                   |
//! | `lowerbound` | `m`                                                   |
//! | `threshold`  | `n`, `wmax` (10), `tripled` (true), `seed` (0)        |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use imitate_core::generators::{
    build_overshoot_pair, build_sampling_lowerbound, build_threshold_game, linear_singleton,
    random_singleton, scaled_singleton, ThresholdGame, ThresholdGameSpec,
};
use imitate_core::{CongestionGame, GameState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub name: String,
    pub args: BTreeMap<String, String>,
}

impl FromStr for GenSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let name = name.trim();
        if name.is_empty() {
            bail!("generator name missing in '{s}'");
        }
        let mut args = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("expected key=value, got '{item}'"))?;
            if args.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                bail!("key '{}' given twice", k.trim());
            }
        }
        Ok(GenSpec {
            name: name.to_string(),
            args,
        })
    }
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (i, (k, v)) in self.args.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

/// A game together with whatever the builder fixed about the start.
#[derive(Debug, Clone)]
pub struct Instance {
    pub game: CongestionGame,
    /// `None` means a uniformly random start per replicate.
    pub initial: Option<GameState>,
    pub threshold: Option<ThresholdGame>,
}

impl GenSpec {
    pub fn with_arg(&self, key: &str, value: impl ToString) -> GenSpec {
        let mut next = self.clone();
        next.args.insert(key.to_string(), value.to_string());
        next
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.args
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| anyhow!("generator '{}' needs '{key}'", self.name))
    }

    fn parse<T: FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.args.get(key) {
            Some(v) => v.parse().map_err(|_| anyhow!("cannot parse {key}={v}")),
            None => default.ok_or_else(|| anyhow!("generator '{}' needs '{key}'", self.name)),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)?
            .split('/')
            .map(|v| v.trim().parse().map_err(|_| anyhow!("cannot parse '{v}' in {key}")))
            .collect()
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.args.get(key).map(String::as_str) {
            None => Ok(default),
            Some("1" | "true" | "yes" | "on") => Ok(true),
            Some("0" | "false" | "no" | "off") => Ok(false),
            Some(v) => bail!("{key}={v} is not a boolean"),
        }
    }

    pub fn build(&self) -> Result<Instance> {
        let plain = |game: CongestionGame| Instance {
            game,
            initial: None,
            threshold: None,
        };
        let fixed = |(game, state): (CongestionGame, GameState)| Instance {
            game,
            initial: Some(state),
            threshold: None,
        };
        let inst = match self.name.as_str() {
            "singleton" => {
                let (game, _) = random_singleton(
                    self.parse("m", None)?,
                    self.parse("n", None)?,
                    (self.parse("lo", Some(1.0))?, self.parse("hi", Some(2.0))?),
                    self.parse("degree", Some(1))?,
                    self.parse("seed", Some(0))?,
                )?;
                plain(game)
            }
            "linear" => plain(linear_singleton(&self.list("a")?, self.parse("n", None)?)?),
            "scaled" => plain(scaled_singleton(
                &self.list("a")?,
                self.parse("degree", Some(1))?,
                self.parse("n", None)?,
            )?),
            "overshoot" => fixed(build_overshoot_pair(
                self.parse("c", None)?,
                self.parse("d", None)?,
                self.parse("n", None)?,
                self.parse("x2", None)?,
            )?),
            "lowerbound" => fixed(build_sampling_lowerbound(self.parse("m", None)?)?),
            "threshold" => {
                let spec = ThresholdGameSpec::random(
                    self.parse("n", None)?,
                    self.parse("wmax", Some(10))?,
                    self.flag("tripled", true)?,
                    self.parse("seed", Some(0))?,
                );
                let t = build_threshold_game(&spec)?;
                Instance {
                    game: t.game.clone(),
                    initial: Some(t.initial_state.clone()),
                    threshold: Some(t),
                }
            }
            other => bail!("unknown generator '{other}'"),
        };
        Ok(inst)
    }
}

pub fn build(spec: &str) -> Result<Instance> {
    let parsed: GenSpec = spec.parse()?;
    parsed.build().with_context(|| format!("generator '{spec}'"))
}
