//! Strategy spaces: simple s-t paths of a directed network, and parallel links.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CongestionGame, GameKind};
use crate::latency::LatencyFunction;

pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// A directed multigraph; edge `i` of `edges` is edge id `i` of the game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub vertex_count: usize,
    /// `(tail, head)` per edge id.
    pub edges: Vec<(usize, usize)>,
    pub source: usize,
    pub sink: usize,
}

impl Network {
    pub fn new(
        vertex_count: usize,
        edges: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
    ) -> Result<Self> {
        if source >= vertex_count || sink >= vertex_count {
            return Err(Error::InvalidGame("source or sink out of range".into()));
        }
        if source == sink {
            return Err(Error::InvalidGame("source equals sink".into()));
        }
        if let Some((i, _)) = edges
            .iter()
            .enumerate()
            .find(|(_, (u, v))| *u >= vertex_count || *v >= vertex_count)
        {
            return Err(Error::InvalidGame(format!("edge {i} has an endpoint out of range")));
        }
        Ok(Network {
            vertex_count,
            edges,
            source,
            sink,
        })
    }

    /// `m` parallel links from vertex 0 to vertex 1.
    pub fn parallel_links(m: usize) -> Self {
        Network {
            vertex_count: 2,
            edges: vec![(0, 1); m],
            source: 0,
            sink: 1,
        }
    }
}

/// All simple s-t paths as sorted edge-id sets, in lexicographic order.
/// Walks that use the same edge set collapse into one strategy.
pub fn enumerate_paths(net: &Network, cap: usize) -> Result<Vec<Vec<usize>>> {
    let mut out_edges = vec![Vec::new(); net.vertex_count];
    for (id, &(u, _)) in net.edges.iter().enumerate() {
        out_edges[u].push(id);
    }

    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut on_path = vec![false; net.vertex_count];
    let mut edge_stack: Vec<usize> = Vec::new();
    // (vertex, next out-edge position)
    let mut frames: Vec<(usize, usize)> = vec![(net.source, 0)];
    on_path[net.source] = true;

    while let Some(top) = frames.last_mut() {
        let (v, pos) = *top;
        if pos == out_edges[v].len() {
            frames.pop();
            on_path[v] = false;
            edge_stack.pop();
            continue;
        }
        top.1 += 1;
        let id = out_edges[v][pos];
        let w = net.edges[id].1;
        if on_path[w] {
            continue;
        }
        if w == net.sink {
            if found.len() == cap {
                return Err(Error::PathExplosion { cap });
            }
            let mut path = edge_stack.clone();
            path.push(id);
            found.push(path);
            continue;
        }
        on_path[w] = true;
        edge_stack.push(id);
        frames.push((w, 0));
    }

    if found.is_empty() {
        return Err(Error::EmptyStrategySpace);
    }
    for p in &mut found {
        p.sort_unstable();
    }
    found.sort();
    found.dedup();
    Ok(found)
}

/// Symmetric network congestion game over all simple s-t paths.
pub fn network_game(
    net: &Network,
    latencies: Vec<LatencyFunction>,
    n: usize,
    cap: usize,
) -> Result<CongestionGame> {
    if latencies.len() != net.edges.len() {
        return Err(Error::InvalidGame(format!(
            "{} latency functions for {} edges",
            latencies.len(),
            net.edges.len()
        )));
    }
    let strategies = enumerate_paths(net, cap)?;
    CongestionGame::new(latencies, strategies, n, GameKind::Network)
}

/// Parallel links: strategy `i` is `{edge i}`.
pub fn singleton_game(latencies: Vec<LatencyFunction>, n: usize) -> Result<CongestionGame> {
    let strategies = (0..latencies.len()).map(|e| vec![e]).collect();
    CongestionGame::new(latencies, strategies, n, GameKind::Singleton)
}
