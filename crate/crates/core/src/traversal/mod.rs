//! Path-finding over concept graphs: minimum-weight routes, loopless
//! k-shortest enumeration, bounded path search, seeded walks and lens
//! injection.
//!
//! Weights are fixed-point (millionths) so that equal-cost routes compare
//! exactly and the `(cost, node sequence)` tie-break is total.

mod lens;
mod walk;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ConceptGraph, NodeId};

pub use lens::{inject_lens, AttachRule, LensSpec, LensedGraph};
pub use walk::random_walk;

/// One unit edge weight in fixed-point millionths.
pub const UNIT_WEIGHT: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathTag {
    ShortestPath,
    KShortest,
    RandomWalk,
    FindPaths,
    FullDiversity,
}

/// An ordered, loop-free node sequence taken from a graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub nodes: Vec<NodeId>,
    pub strategy_tag: PathTag,
}

impl ReasoningPath {
    pub fn new(nodes: Vec<NodeId>, strategy_tag: PathTag) -> Self {
        Self { nodes, strategy_tag }
    }

    pub fn length_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn length_hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn node_set(&self) -> BTreeSet<NodeId> {
        self.nodes.iter().copied().collect()
    }

    pub fn is_simple(&self) -> bool {
        self.node_set().len() == self.nodes.len()
    }

    /// Every consecutive pair is an edge of `graph`.
    pub fn follows_edges(&self, graph: &ConceptGraph) -> bool {
        self.nodes.windows(2).all(|w| graph.has_edge(w[0], w[1]))
    }

    pub fn labels<'g>(&self, graph: &'g ConceptGraph) -> Vec<&'g str> {
        self.nodes.iter().filter_map(|&n| graph.label(n)).collect()
    }
}

/// Per-edge weights; anything not overridden costs [`UNIT_WEIGHT`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeWeights {
    overrides: BTreeMap<(NodeId, NodeId), u64>,
}

impl EdgeWeights {
    pub fn unit() -> Self {
        Self::default()
    }

    /// Sets a positive weight expressed in unit-edge multiples.
    pub fn set(&mut self, source: NodeId, target: NodeId, weight: f64) -> Result<()> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidArgument(format!("edge weight {weight} must be positive")));
        }
        let fixed = ((weight * UNIT_WEIGHT as f64).round() as u64).max(1);
        self.overrides.insert((source, target), fixed);
        Ok(())
    }

    pub fn get(&self, source: NodeId, target: NodeId) -> u64 {
        self.overrides
            .get(&(source, target))
            .copied()
            .unwrap_or(UNIT_WEIGHT)
    }

    pub fn path_cost(&self, nodes: &[NodeId]) -> u64 {
        nodes.windows(2).map(|w| self.get(w[0], w[1])).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Out,
    In,
    Both,
}

pub fn get_neighbors(graph: &ConceptGraph, node: NodeId, direction: Direction) -> Result<BTreeSet<NodeId>> {
    ensure_node(graph, node)?;
    Ok(match direction {
        Direction::Out => graph.successors(node).clone(),
        Direction::In => graph.predecessors(node).clone(),
        Direction::Both => graph.undirected_neighbors(node),
    })
}

fn ensure_node(graph: &ConceptGraph, node: NodeId) -> Result<()> {
    if graph.contains(node) {
        Ok(())
    } else {
        Err(Error::UnknownNode(node))
    }
}

#[derive(Default)]
struct Blocked {
    nodes: HashSet<NodeId>,
    edges: HashSet<(NodeId, NodeId)>,
}

/// Reverse Dijkstra: cheapest cost from every node to `target` while avoiding
/// the blocked nodes and edges.
fn costs_to(graph: &ConceptGraph, target: NodeId, weights: &EdgeWeights, blocked: &Blocked) -> HashMap<NodeId, u64> {
    let mut dist = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(target, 0u64);
    heap.push(Reverse((0u64, target)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist.get(&v).is_some_and(|&best| d > best) {
            continue;
        }
        for &u in graph.predecessors(v) {
            if blocked.nodes.contains(&u) || blocked.edges.contains(&(u, v)) {
                continue;
            }
            let nd = d + weights.get(u, v);
            if dist.get(&u).is_none_or(|&cur| nd < cur) {
                dist.insert(u, nd);
                heap.push(Reverse((nd, u)));
            }
        }
    }
    dist
}

/// Cheapest route from `source` to `target`, choosing the lexicographically
/// smallest node sequence among equal-cost routes.
fn best_route(
    graph: &ConceptGraph,
    source: NodeId,
    target: NodeId,
    weights: &EdgeWeights,
    blocked: &Blocked,
) -> Option<(u64, Vec<NodeId>)> {
    if blocked.nodes.contains(&source) {
        return None;
    }
    let dist = costs_to(graph, target, weights, blocked);
    let total = *dist.get(&source)?;
    let mut nodes = vec![source];
    let mut current = source;
    while current != target {
        let remaining = dist[&current];
        // Positive weights make every tight successor strictly closer, so the
        // walk cannot revisit a node.
        current = graph.successors(current).iter().copied().find(|&v| {
            !blocked.nodes.contains(&v)
                && !blocked.edges.contains(&(current, v))
                && dist
                    .get(&v)
                    .is_some_and(|&dv| dv + weights.get(current, v) == remaining)
        })?;
        nodes.push(current);
    }
    Some((total, nodes))
}

/// Minimum-weight simple path, or `None` when `target` is unreachable.
pub fn shortest_path(
    graph: &ConceptGraph,
    source: NodeId,
    target: NodeId,
    weights: Option<&EdgeWeights>,
) -> Result<Option<ReasoningPath>> {
    ensure_node(graph, source)?;
    ensure_node(graph, target)?;
    let unit = EdgeWeights::unit();
    let weights = weights.unwrap_or(&unit);
    Ok(best_route(graph, source, target, weights, &Blocked::default())
        .map(|(_, nodes)| ReasoningPath::new(nodes, PathTag::ShortestPath)))
}

/// Up to `k` loopless paths ordered by `(cost, node sequence)` (Yen's method).
pub fn k_shortest_paths(
    graph: &ConceptGraph,
    source: NodeId,
    target: NodeId,
    k: usize,
    weights: Option<&EdgeWeights>,
) -> Result<Vec<ReasoningPath>> {
    ensure_node(graph, source)?;
    ensure_node(graph, target)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let unit = EdgeWeights::unit();
    let weights = weights.unwrap_or(&unit);

    let Some(first) = best_route(graph, source, target, weights, &Blocked::default()) else {
        return Ok(Vec::new());
    };
    let mut accepted: Vec<(u64, Vec<NodeId>)> = vec![first];
    let mut seen: HashSet<Vec<NodeId>> = HashSet::from([accepted[0].1.clone()]);
    let mut candidates: BTreeSet<(u64, Vec<NodeId>)> = BTreeSet::new();

    while accepted.len() < k {
        let prev = accepted.last().expect("non-empty").1.clone();
        for i in 0..prev.len().saturating_sub(1) {
            let root = &prev[..=i];
            let mut blocked = Blocked::default();
            for (_, p) in &accepted {
                if p.len() > i + 1 && &p[..=i] == root {
                    blocked.edges.insert((p[i], p[i + 1]));
                }
            }
            blocked.nodes.extend(root[..i].iter().copied());
            if let Some((spur_cost, spur)) = best_route(graph, prev[i], target, weights, &blocked) {
                let mut nodes = root[..i].to_vec();
                nodes.extend(spur);
                if !seen.contains(&nodes) {
                    let cost = weights.path_cost(&root[..=i]) + spur_cost;
                    candidates.insert((cost, nodes));
                }
            }
        }
        let Some(next) = candidates.pop_first() else {
            break;
        };
        seen.insert(next.1.clone());
        accepted.push(next);
    }

    Ok(accepted
        .into_iter()
        .map(|(_, nodes)| ReasoningPath::new(nodes, PathTag::KShortest))
        .collect())
}

/// Every simple path of at most `max_hops` hops, ordered by
/// `(hops, node sequence)` and cut to `max_results`.
pub fn find_paths(
    graph: &ConceptGraph,
    source: NodeId,
    target: NodeId,
    max_hops: usize,
    max_results: usize,
) -> Result<Vec<ReasoningPath>> {
    ensure_node(graph, source)?;
    ensure_node(graph, target)?;
    if max_hops == 0 || max_results == 0 {
        return Err(Error::InvalidArgument("max_hops and max_results must be at least 1".into()));
    }
    let mut found = Vec::new();
    let mut stack = vec![source];
    let mut on_path = HashSet::from([source]);
    collect_paths(graph, target, max_hops, &mut stack, &mut on_path, &mut found);
    found.sort_by(|a: &Vec<NodeId>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    found.truncate(max_results);
    Ok(found
        .into_iter()
        .map(|nodes| ReasoningPath::new(nodes, PathTag::FindPaths))
        .collect())
}

fn collect_paths(
    graph: &ConceptGraph,
    target: NodeId,
    max_hops: usize,
    stack: &mut Vec<NodeId>,
    on_path: &mut HashSet<NodeId>,
    found: &mut Vec<Vec<NodeId>>,
) {
    let current = *stack.last().expect("stack holds the source");
    if current == target {
        if stack.len() > 1 {
            found.push(stack.clone());
        }
        return;
    }
    if stack.len() > max_hops {
        return;
    }
    for &next in graph.successors(current) {
        if on_path.insert(next) {
            stack.push(next);
            collect_paths(graph, target, max_hops, stack, on_path, found);
            stack.pop();
            on_path.remove(&next);
        }
    }
}
