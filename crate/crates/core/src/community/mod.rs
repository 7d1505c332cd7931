//! Community structure on the undirected symmetrization of a concept graph:
//! modularity, Louvain partitioning and structural holes between communities.

mod holes;
mod louvain;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ConceptGraph, NodeId};

pub use holes::{structural_holes, StructuralHole};
pub use louvain::louvain;

pub const DEFAULT_RESOLUTION: f64 = 1.0;

/// Node → community assignment with dense ids `0..community_count`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: BTreeMap<NodeId, usize>,
    pub community_count: usize,
}

impl Partition {
    /// Relabels arbitrary community keys densely, in order of first appearance
    /// when nodes are visited by id.
    pub fn from_labels<K: Ord + Copy>(labels: impl IntoIterator<Item = (NodeId, K)>) -> Self {
        let sorted: BTreeMap<NodeId, K> = labels.into_iter().collect();
        let mut dense: BTreeMap<K, usize> = BTreeMap::new();
        let mut assignment = BTreeMap::new();
        for (node, key) in sorted {
            let next = dense.len();
            let id = *dense.entry(key).or_insert(next);
            assignment.insert(node, id);
        }
        Self {
            community_count: dense.len(),
            assignment,
        }
    }

    pub fn singletons(graph: &ConceptGraph) -> Self {
        Self::from_labels(graph.node_ids().map(|n| (n, n)))
    }

    pub fn single(graph: &ConceptGraph) -> Self {
        Self::from_labels(graph.node_ids().map(|n| (n, 0u8)))
    }

    pub fn community_of(&self, node: NodeId) -> Option<usize> {
        self.assignment.get(&node).copied()
    }

    pub fn members(&self, community: usize) -> BTreeSet<NodeId> {
        self.assignment
            .iter()
            .filter(|(_, &c)| c == community)
            .map(|(&n, _)| n)
            .collect()
    }

    /// Every node of `graph` is assigned.
    pub fn check_covers(&self, graph: &ConceptGraph) -> Result<()> {
        match graph.node_ids().find(|n| !self.assignment.contains_key(n)) {
            Some(missing) => Err(Error::IncompletePartition(missing)),
            None => Ok(()),
        }
    }
}

/// Undirected simple edge list: one entry per connected node pair.
pub(crate) fn undirected_pairs(graph: &ConceptGraph) -> BTreeSet<(NodeId, NodeId)> {
    graph
        .edges()
        .filter(|e| e.source != e.target)
        .map(|e| (e.source.min(e.target), e.source.max(e.target)))
        .collect()
}

/// Newman modularity with a resolution parameter, on the symmetrized graph.
/// A graph without edges has modularity 0.
pub fn modularity(graph: &ConceptGraph, partition: &Partition, resolution: f64) -> Result<f64> {
    partition.check_covers(graph)?;
    if resolution.is_nan() || resolution <= 0.0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let pairs = undirected_pairs(graph);
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let m = pairs.len() as f64;
    let mut internal = vec![0.0; partition.community_count];
    let mut degree = vec![0.0; partition.community_count];
    for &(a, b) in &pairs {
        let (ca, cb) = (partition.assignment[&a], partition.assignment[&b]);
        if ca == cb {
            internal[ca] += 1.0;
        }
        degree[ca] += 1.0;
        degree[cb] += 1.0;
    }
    Ok(internal
        .iter()
        .zip(&degree)
        .map(|(l, d)| l / m - resolution * (d / (2.0 * m)).powi(2))
        .sum())
}
