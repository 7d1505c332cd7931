use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Partition;
use crate::error::Result;
use crate::graph::{ConceptGraph, NodeId};

/// A pair of communities joined by few or no relations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralHole {
    pub community_a: usize,
    pub community_b: usize,
    pub inter_edge_count: usize,
    /// `(node in a, node in b)`, best bridge candidates first.
    pub candidate_pairs: Vec<(NodeId, NodeId)>,
}

/// Every community pair `a < b` with at most `max_inter_edges` directed
/// relations between them. Candidate endpoints are ranked by the product of
/// their (undirected) degrees, ties broken by node id.
pub fn structural_holes(
    graph: &ConceptGraph,
    partition: &Partition,
    max_inter_edges: usize,
    top_pairs: usize,
) -> Result<Vec<StructuralHole>> {
    partition.check_covers(graph)?;
    let mut cross: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for u in graph.node_ids() {
        for &v in graph.successors(u) {
            let (cu, cv) = (partition.assignment[&u], partition.assignment[&v]);
            if cu != cv {
                *cross.entry((cu.min(cv), cu.max(cv))).or_default() += 1;
            }
        }
    }
    let degree = |n: NodeId| graph.undirected_neighbors(n).len();
    let members: Vec<Vec<NodeId>> = (0..partition.community_count)
        .map(|c| partition.members(c).into_iter().collect())
        .collect();

    let mut holes = Vec::new();
    for a in 0..partition.community_count {
        for b in (a + 1)..partition.community_count {
            let inter_edge_count = cross.get(&(a, b)).copied().unwrap_or(0);
            if inter_edge_count > max_inter_edges {
                continue;
            }
            let mut pairs: Vec<(usize, NodeId, NodeId)> = members[a]
                .iter()
                .flat_map(|&u| members[b].iter().map(move |&v| (u, v)))
                .map(|(u, v)| (degree(u) * degree(v), u, v))
                .collect();
            pairs.sort_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
            holes.push(StructuralHole {
                community_a: a,
                community_b: b,
                inter_edge_count,
                candidate_pairs: pairs.into_iter().take(top_pairs).map(|(_, u, v)| (u, v)).collect(),
            });
        }
    }
    Ok(holes)
}
