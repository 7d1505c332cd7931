use std::collections::{BTreeSet, VecDeque};

use super::{ConceptGraph, NodeId};
use crate::error::{Error, Result};

pub const MAX_LABEL_CHARS: usize = 120;

/// Non-empty after trimming, at most [`MAX_LABEL_CHARS`] characters and at
/// least one alphanumeric character.
pub fn is_well_formed(label: &str) -> bool {
    let trimmed = label.trim();
    !trimmed.is_empty()
        && trimmed.chars().count() <= MAX_LABEL_CHARS
        && trimmed.chars().any(char::is_alphanumeric)
}

/// Weakly connected components, each sorted, ordered by smallest member.
pub fn weak_components(graph: &ConceptGraph) -> Vec<Vec<NodeId>> {
    let mut seen = BTreeSet::new();
    let mut components = Vec::new();
    for start in graph.node_ids() {
        if !seen.insert(start) {
            continue;
        }
        let mut component = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in graph.successors(u).iter().chain(graph.predecessors(u)) {
                if seen.insert(*v) {
                    component.push(*v);
                    queue.push_back(*v);
                }
            }
        }
        component.sort();
        components.push(component);
    }
    components
}

/// Removes malformed nodes, then every weak component smaller than
/// `min_component_size`.
pub fn cleanup(graph: &ConceptGraph, min_component_size: usize) -> Result<ConceptGraph> {
    if min_component_size == 0 {
        return Err(Error::InvalidArgument("min_component_size must be at least 1".into()));
    }
    let mut out = graph.clone();
    let malformed: BTreeSet<NodeId> = out
        .nodes()
        .filter(|n| !is_well_formed(&n.canonical_label))
        .map(|n| n.id)
        .collect();
    out.remove_nodes(&malformed);
    let small: BTreeSet<NodeId> = weak_components(&out)
        .into_iter()
        .filter(|c| c.len() < min_component_size)
        .flatten()
        .collect();
    out.remove_nodes(&small);
    Ok(out)
}
