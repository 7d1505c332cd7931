use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ensure_node, PathTag, ReasoningPath};
use crate::error::Result;
use crate::graph::{ConceptGraph, NodeId};

/// Seeded simple random walk along out-edges.
///
/// Stops after `max_hops` hops, at a sink, or when every successor is already
/// on the walk. Successors are drawn uniformly in node-id order, so the same
/// seed always yields the same walk.
pub fn random_walk(graph: &ConceptGraph, start: NodeId, max_hops: usize, seed: u64) -> Result<ReasoningPath> {
    ensure_node(graph, start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![start];
    while nodes.len() <= max_hops {
        let current = *nodes.last().expect("walk starts non-empty");
        let open: Vec<NodeId> = graph
            .successors(current)
            .iter()
            .copied()
            .filter(|n| !nodes.contains(n))
            .collect();
        if open.is_empty() {
            break;
        }
        nodes.push(open[rng.gen_range(0..open.len())]);
    }
    Ok(ReasoningPath::new(nodes, PathTag::RandomWalk))
}
