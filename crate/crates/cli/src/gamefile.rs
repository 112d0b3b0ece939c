//! Plain-text game description.
//!
//! ```text
//! # two parallel links
//! [edges]
//! poly 0 1        # ℓ(x) = x
//! table 0 3 4 5   # ℓ(0..=n)
//! [strategies]
//! 0
//! 1
//! [players]
//! 3
//! [state]         # optional initial counts per strategy
//! 2 1
//! ```
//!
//! Optional sections: `[kind]` (`singleton`, `network` or `explicit`),
//! `[classes]` with one `players s0 s1 …` line per player class, and
//! `[network]` with `vertices`, `source`, `sink` and one `arc u v` line per
//! edge, in which case the strategies are the enumerated source-sink paths.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use imitate_core::game::{CongestionGame, GameKind, PlayerClass};
use imitate_core::paths::{enumerate_paths, Network, DEFAULT_PATH_CAP};
use imitate_core::{GameState, LatencyFunction};

#[derive(Debug, Clone)]
pub struct GameFile {
    pub game: CongestionGame,
    pub state: Option<GameState>,
}

#[derive(Default)]
struct Sections {
    edges: Option<Vec<(usize, String)>>,
    strategies: Option<Vec<(usize, String)>>,
    players: Option<Vec<(usize, String)>>,
    state: Option<Vec<(usize, String)>>,
    kind: Option<Vec<(usize, String)>>,
    classes: Option<Vec<(usize, String)>>,
    network: Option<Vec<(usize, String)>>,
}

fn numbers<T: std::str::FromStr>(line: usize, text: &str) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| anyhow!("line {line}: cannot parse '{t}'"))
        })
        .collect()
}

fn single_line<'a>(name: &str, lines: &'a [(usize, String)]) -> Result<&'a (usize, String)> {
    match lines {
        [one] => Ok(one),
        _ => bail!("[{name}] must contain exactly one line"),
    }
}

fn parse_latency(line: usize, text: &str) -> Result<LatencyFunction> {
    let (tag, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let values: Vec<f64> = numbers(line, rest)?;
    let f = match tag {
        "poly" => LatencyFunction::polynomial(values),
        "table" => LatencyFunction::table(values),
        other => bail!("line {line}: unknown latency kind '{other}' (expected poly or table)"),
    };
    f.with_context(|| format!("line {line}"))
}

fn parse_network(lines: &[(usize, String)]) -> Result<Network> {
    let (mut vertices, mut source, mut sink) = (None, None, None);
    let mut arcs = Vec::new();
    for (line, text) in lines {
        let mut parts = text.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let vals: Vec<usize> = numbers(*line, &parts.collect::<Vec<_>>().join(" "))?;
        match (key, vals.as_slice()) {
            ("vertices", [v]) => vertices = Some(*v),
            ("source", [v]) => source = Some(*v),
            ("sink", [v]) => sink = Some(*v),
            ("arc", [u, v]) => arcs.push((*u, *v)),
            _ => bail!("line {line}: expected 'vertices n', 'source v', 'sink v' or 'arc u v'"),
        }
    }
    Network::new(
        vertices.ok_or_else(|| anyhow!("[network] needs 'vertices'"))?,
        arcs,
        source.ok_or_else(|| anyhow!("[network] needs 'source'"))?,
        sink.ok_or_else(|| anyhow!("[network] needs 'sink'"))?,
    )
    .map_err(Into::into)
}

impl Sections {
    fn slot(&mut self, name: &str) -> Option<&mut Option<Vec<(usize, String)>>> {
        Some(match name {
            "edges" => &mut self.edges,
            "strategies" => &mut self.strategies,
            "players" => &mut self.players,
            "state" => &mut self.state,
            "kind" => &mut self.kind,
            "classes" => &mut self.classes,
            "network" => &mut self.network,
            _ => return None,
        })
    }
}

pub fn parse_game(text: &str) -> Result<GameFile> {
    let mut sections = Sections::default();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            let slot = sections
                .slot(name)
                .ok_or_else(|| anyhow!("line {line}: unknown section [{name}]"))?;
            if slot.is_some() {
                bail!("line {line}: section [{name}] appears twice");
            }
            *slot = Some(Vec::new());
            current = Some(name.to_string());
            continue;
        }
        match current.as_deref().and_then(|name| sections.slot(name)) {
            Some(Some(lines)) => lines.push((line, content.to_string())),
            _ => bail!("line {line}: content before the first section"),
        }
    }

    let edges = sections
        .edges
        .ok_or_else(|| anyhow!("missing [edges] section"))?
        .iter()
        .map(|(line, text)| parse_latency(*line, text))
        .collect::<Result<Vec<_>>>()?;

    let (strategies, network_kind) = match (&sections.network, &sections.strategies) {
        (Some(_), Some(_)) => bail!("[network] and [strategies] are mutually exclusive"),
        (Some(lines), None) => {
            let net = parse_network(lines)?;
            if net.edges.len() != edges.len() {
                bail!("[network] has {} arcs but [edges] has {} entries", net.edges.len(), edges.len());
            }
            (enumerate_paths(&net, DEFAULT_PATH_CAP)?, true)
        }
        (None, Some(lines)) => (
            lines
                .iter()
                .map(|(line, text)| numbers::<usize>(*line, text))
                .collect::<Result<Vec<_>>>()?,
            false,
        ),
        (None, None) => bail!("missing [strategies] or [network] section"),
    };

    let players = sections
        .players
        .as_deref()
        .map(|lines| {
            let (line, text) = single_line("players", lines)?;
            text.parse::<usize>()
                .map_err(|_| anyhow!("line {line}: player count must be a non-negative integer"))
        })
        .transpose()?;

    let classes = match &sections.classes {
        Some(lines) => {
            let classes = lines
                .iter()
                .map(|(line, text)| {
                    let v: Vec<usize> = numbers(*line, text)?;
                    match v.split_first() {
                        Some((&players, strategies)) if !strategies.is_empty() => Ok(PlayerClass {
                            players,
                            strategies: strategies.to_vec(),
                        }),
                        _ => bail!("line {line}: expected 'players s0 s1 ...'"),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let total: usize = classes.iter().map(|c| c.players).sum();
            if let Some(n) = players {
                if n != total {
                    bail!("[players] says {n} but the classes hold {total}");
                }
            }
            Some(classes)
        }
        None => None,
    };

    let kind = match &sections.kind {
        Some(lines) => match single_line("kind", lines)?.1.as_str() {
            "singleton" => GameKind::Singleton,
            "network" => GameKind::Network,
            "explicit" => GameKind::Explicit,
            other => bail!("unknown game kind '{other}'"),
        },
        None if network_kind => GameKind::Network,
        None => {
            let mut seen = vec![false; edges.len()];
            let singleton = classes.is_none()
                && strategies.iter().all(|s| {
                    s.len() == 1 && s[0] < seen.len() && !std::mem::replace(&mut seen[s[0]], true)
                });
            if singleton {
                GameKind::Singleton
            } else {
                GameKind::Explicit
            }
        }
    };

    let game = match classes {
        Some(classes) => CongestionGame::with_classes(edges, strategies, classes, kind)?,
        None => {
            let n = players.ok_or_else(|| anyhow!("missing [players] section"))?;
            CongestionGame::new(edges, strategies, n, kind)?
        }
    };

    let state = sections
        .state
        .as_deref()
        .map(|lines| {
            let (line, text) = single_line("state", lines)?;
            GameState::new(&game, numbers(*line, text)?).with_context(|| format!("line {line}"))
        })
        .transpose()?;

    Ok(GameFile { game, state })
}

pub fn read_game(path: &Path) -> Result<GameFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_game(&text).with_context(|| format!("parsing {}", path.display()))
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Renders a game, and optionally a state, in the format read by
/// [`parse_game`]. Network games are written with explicit strategies.
pub fn write_game(game: &CongestionGame, state: Option<&GameState>) -> String {
    let mut out = String::new();
    out.push_str("[kind]\n");
    out.push_str(match game.kind() {
        GameKind::Singleton => "singleton\n",
        GameKind::Network => "network\n",
        GameKind::Explicit => "explicit\n",
    });
    out.push_str("[edges]\n");
    for f in game.edges() {
        match f {
            LatencyFunction::Polynomial(c) => writeln!(out, "poly {}", join(c)),
            LatencyFunction::Table(v) => writeln!(out, "table {}", join(v)),
        }
        .expect("writing to a string");
    }
    out.push_str("[strategies]\n");
    for s in game.strategies() {
        writeln!(out, "{}", join(s)).expect("writing to a string");
    }
    if game.is_symmetric() {
        writeln!(out, "[players]\n{}", game.n()).expect("writing to a string");
    } else {
        out.push_str("[classes]\n");
        for c in game.classes() {
            writeln!(out, "{} {}", c.players, join(&c.strategies)).expect("writing to a string");
        }
    }
    if let Some(x) = state {
        writeln!(out, "[state]\n{}", join(x.counts())).expect("writing to a string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let g = parse_game("[edges]\npoly 0 1\npoly 5\n[strategies]\n0\n1\n[players]\n3\n").unwrap();
        assert_eq!(g.game.kind(), GameKind::Singleton);
        assert_eq!(g.game.n(), 3);
        assert!(g.state.is_none());
    }

    #[test]
    fn comments_and_state() {
        let text = "# demo\n[edges]\npoly 0 1 # linear\ntable 0 3 4 5\n\n[strategies]\n0\n1\n[players]\n3\n[state]\n2 1\n";
        let g = parse_game(text).unwrap();
        assert_eq!(g.state.unwrap().counts(), &[2, 1]);
    }

    #[test]
    fn network_section() {
        let text = "[edges]\npoly 0 1\npoly 0 1\npoly 1\npoly 1\npoly 0.5\n[network]\nvertices 4\nsource 0\nsink 3\narc 0 1\narc 2 3\narc 1 3\narc 0 2\narc 1 2\n[players]\n4\n";
        let g = parse_game(text).unwrap();
        assert_eq!(g.game.kind(), GameKind::Network);
        assert_eq!(g.game.strategy_count(), 3);
    }

    #[test]
    fn classes_section() {
        let text = "[edges]\npoly 0 1\npoly 0 2\n[strategies]\n0\n1\n0\n1\n[classes]\n2 0 1\n1 2 3\n";
        let g = parse_game(text).unwrap();
        assert_eq!(g.game.n(), 3);
        assert_eq!(g.game.kind(), GameKind::Explicit);
        assert!(!g.game.is_symmetric());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_game("[edges]\npoly 0 x\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 2"));
        assert!(parse_game("[edges]\npoly 1\n").is_err());
        assert!(parse_game("poly 1\n").is_err());
        assert!(parse_game("[edges]\ncubic 1\n[strategies]\n0\n[players]\n1\n").is_err());
        assert!(parse_game("[edges]\npoly 1\n[strategies]\n0\n[players]\n1\n[edges]\n").is_err());
        assert!(parse_game("[edges]\npoly 1\n[strategies]\n0\n[players]\n2\n[state]\n1\n").is_err());
    }

    #[test]
    fn round_trip() {
        let text = "[edges]\npoly 0.1 1 0.25\ntable 0 0.3 0.7 1.9\n[strategies]\n0\n1\n0 1\n[players]\n3\n[state]\n1 1 1\n";
        let g = parse_game(text).unwrap();
        let written = write_game(&g.game, g.state.as_ref());
        let back = parse_game(&written).unwrap();
        assert_eq!(back.game.edges(), g.game.edges());
        assert_eq!(back.game.strategies(), g.game.strategies());
        assert_eq!(back.state, g.state);
        assert_eq!(write_game(&back.game, back.state.as_ref()), written);
    }
}
