//! Interaction graphs of a conversation and next-speaker node metrics.
//!
//! Two views are built from the same turn sequence: an unweighted undirected
//! graph (who interacted with whom) and a weighted directed graph (who wrote
//! to whom, how many times). Self-addressed turns contribute the node but no
//! edge.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::corpus::{Conversation, UserId};
use crate::error::{Error, Result};

/// Which turns participate in graph construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphScope {
    /// All turns but the last: the final turn is the classification target
    /// and its edge would leak the label.
    #[default]
    ContextOnly,
    /// Every turn.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UndirectedGraph {
    pub nodes: BTreeSet<UserId>,
    /// Canonical unordered pairs: `(min, max)`, never self-loops.
    pub edges: BTreeSet<(UserId, UserId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DirectedWeightedGraph {
    pub nodes: BTreeSet<UserId>,
    /// `(speaker, addressee) -> message count`, weight >= 1.
    pub edges: BTreeMap<(UserId, UserId), u32>,
}

/// Metrics of one node, computed on both graph views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub degree: usize,
    pub out_degree: usize,
    pub weighted_out_degree: u32,
    /// `weighted_out_degree / out_degree`; 0 when the node has no outgoing
    /// edges.
    pub avg_outgoing_weight: f64,
    pub avg_outgoing_weight_rounded: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub closeness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clustering: Option<f64>,
}

impl UndirectedGraph {
    pub fn contains(&self, u: &UserId) -> bool {
        self.nodes.contains(u)
    }

    fn neighbors(&self, u: &UserId) -> BTreeSet<&UserId> {
        self.edges
            .iter()
            .filter_map(|(a, b)| {
                if a == u {
                    Some(b)
                } else if b == u {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Edge-list dump, one `u v` line per edge, for external inspection.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

impl DirectedWeightedGraph {
    /// Edge-list dump, one `u v w` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for ((s, a), w) in &self.edges {
            out.push_str(&format!("{s} {a} {w}\n"));
        }
        out
    }
}

/// Builds both graph views over the turns selected by `scope`.
pub fn build_graphs(conv: &Conversation, scope: GraphScope) -> (UndirectedGraph, DirectedWeightedGraph) {
    let turns = match scope {
        GraphScope::Full => &conv.turns[..],
        GraphScope::ContextOnly => &conv.turns[..conv.turns.len().saturating_sub(1)],
    };

    let mut und = UndirectedGraph::default();
    let mut dir = DirectedWeightedGraph::default();
    for t in turns {
        und.nodes.insert(t.speaker.clone());
        und.nodes.insert(t.addressee.clone());
        dir.nodes.insert(t.speaker.clone());
        dir.nodes.insert(t.addressee.clone());
        if t.speaker == t.addressee {
            continue;
        }
        let (a, b) = if t.speaker <= t.addressee {
            (t.speaker.clone(), t.addressee.clone())
        } else {
            (t.addressee.clone(), t.speaker.clone())
        };
        und.edges.insert((a, b));
        *dir.edges
            .entry((t.speaker.clone(), t.addressee.clone()))
            .or_insert(0) += 1;
    }
    (und, dir)
}

/// Number of undirected edges incident to `u`: how many distinct users the
/// node has interacted with.
pub fn degree_centrality(g: &UndirectedGraph, u: &UserId) -> Result<usize> {
    if !g.nodes.contains(u) {
        return Err(Error::UnknownNode(u.as_str().to_owned()));
    }
    Ok(g.edges.iter().filter(|(a, b)| a == u || b == u).count())
}

/// Mean weight over the node's distinct outgoing edges; 0 when there are
/// none.
pub fn average_outgoing_weight(g: &DirectedWeightedGraph, u: &UserId) -> Result<f64> {
    if !g.nodes.contains(u) {
        return Err(Error::UnknownNode(u.as_str().to_owned()));
    }
    let outgoing: Vec<u32> = g
        .edges
        .iter()
        .filter(|((s, _), _)| s == u)
        .map(|(_, w)| *w)
        .collect();
    if outgoing.is_empty() {
        return Ok(0.0);
    }
    let sum: u32 = outgoing.iter().sum();
    Ok(f64::from(sum) / outgoing.len() as f64)
}

/// Nearest integer with .5 ties rounded up. Defined for non-negative input.
pub fn round_half_up(x: f64) -> u32 {
    debug_assert!(x >= 0.0);
    (x + 0.5).floor() as u32
}

/// True iff one traversal reaches every node.
pub fn is_connected(g: &UndirectedGraph) -> Result<bool> {
    let Some(start) = g.nodes.iter().next() else {
        return Err(Error::EmptyGraph);
    };
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(u) = queue.pop_front() {
        for (a, b) in &g.edges {
            let other = if *a == u {
                b
            } else if *b == u {
                a
            } else {
                continue;
            };
            if seen.insert(other.clone()) {
                queue.push_back(other.clone());
            }
        }
    }
    Ok(seen.len() == g.nodes.len())
}

/// Closeness centrality and local clustering coefficient of `u`.
///
/// Closeness is `(|nodes|-1) / sum of shortest-path distances from u` and
/// requires a connected graph; clustering is realized over possible edges
/// among the neighbors of `u` (0 when fewer than two neighbors).
pub fn auxiliary_metrics(g: &UndirectedGraph, u: &UserId) -> Result<(f64, f64)> {
    if !g.nodes.contains(u) {
        return Err(Error::UnknownNode(u.as_str().to_owned()));
    }

    // BFS distances from u.
    let mut dist: BTreeMap<UserId, usize> = BTreeMap::from([(u.clone(), 0)]);
    let mut queue = VecDeque::from([u.clone()]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        for (a, b) in &g.edges {
            let other = if *a == v {
                b
            } else if *b == v {
                a
            } else {
                continue;
            };
            if !dist.contains_key(other) {
                dist.insert(other.clone(), d + 1);
                queue.push_back(other.clone());
            }
        }
    }
    if dist.len() != g.nodes.len() {
        return Err(Error::DisconnectedGraph);
    }
    let total: usize = dist.values().sum();
    let closeness = if g.nodes.len() == 1 || total == 0 {
        0.0
    } else {
        (g.nodes.len() - 1) as f64 / total as f64
    };

    let neighbors = g.neighbors(u);
    let k = neighbors.len();
    let clustering = if k < 2 {
        0.0
    } else {
        let realized = g
            .edges
            .iter()
            .filter(|(a, b)| neighbors.contains(a) && neighbors.contains(b))
            .count();
        let possible = k * (k - 1) / 2;
        realized as f64 / possible as f64
    };

    Ok((closeness, clustering))
}

/// All metrics of `u` in one pass. Closeness is omitted when the graph is
/// disconnected rather than failing the whole computation.
pub fn node_metrics(
    und: &UndirectedGraph,
    dir: &DirectedWeightedGraph,
    u: &UserId,
) -> Result<NodeMetrics> {
    let degree = degree_centrality(und, u)?;
    let avg = average_outgoing_weight(dir, u)?;
    let outgoing: Vec<u32> = dir
        .edges
        .iter()
        .filter(|((s, _), _)| s == u)
        .map(|(_, w)| *w)
        .collect();
    let (closeness, clustering) = match auxiliary_metrics(und, u) {
        Ok((c, cl)) => (Some(c), Some(cl)),
        Err(Error::DisconnectedGraph) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(NodeMetrics {
        degree,
        out_degree: outgoing.len(),
        weighted_out_degree: outgoing.iter().sum(),
        avg_outgoing_weight: avg,
        avg_outgoing_weight_rounded: round_half_up(avg),
        closeness,
        clustering,
    })
}
