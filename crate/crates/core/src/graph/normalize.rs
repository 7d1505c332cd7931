use std::collections::{BTreeMap, BTreeSet};

use super::{label_similarity, ConceptGraph, ConceptNode, NodeId, RelationEdge};
use crate::error::{Error, Result};

/// Merges surface variants whose token similarity reaches `threshold`.
///
/// Clusters are the transitive closure of pairwise matches over every surface
/// form (label or alias), so a second pass finds nothing new. The cluster keeps
/// its lowest node id; the label with the widest provenance becomes canonical.
/// Relations collapsing onto a single cluster are dropped.
pub fn normalize(graph: &ConceptGraph, threshold: f64) -> Result<ConceptGraph> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "similarity threshold {threshold} outside [0, 1]"
        )));
    }
    let nodes: Vec<&ConceptNode> = graph.nodes().collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();

    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri == rj {
                continue;
            }
            let similar = nodes[i].surface_forms().any(|a| {
                nodes[j]
                    .surface_forms()
                    .any(|b| label_similarity(a, b) >= threshold)
            });
            if similar {
                // Lower index is the lower id: nodes iterate in id order.
                let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                parent[hi] = lo;
            }
        }
    }

    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..nodes.len() {
        let root = find(&mut parent, i);
        clusters.entry(root).or_default().push(i);
    }

    let mut out = graph.empty_like();
    let mut remap: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for members in clusters.values() {
        let id = nodes[members[0]].id;
        let canonical = members
            .iter()
            .map(|&m| nodes[m])
            .max_by(|a, b| {
                a.provenance
                    .len()
                    .cmp(&b.provenance.len())
                    .then(b.id.cmp(&a.id))
            })
            .expect("cluster is non-empty");
        let mut aliases = BTreeSet::new();
        let mut provenance = BTreeSet::new();
        for &m in members {
            let node = nodes[m];
            aliases.extend(node.surface_forms().map(str::to_string));
            provenance.extend(node.provenance.iter().cloned());
            remap.insert(node.id, id);
        }
        aliases.remove(&canonical.canonical_label);
        out.insert_node_raw(ConceptNode {
            id,
            canonical_label: canonical.canonical_label.clone(),
            aliases,
            provenance,
        });
    }

    for edge in graph.edges() {
        let source = remap[&edge.source];
        let target = remap[&edge.target];
        if source == target && edge.source != edge.target {
            continue;
        }
        out.insert_edge_raw(RelationEdge {
            source,
            target,
            ..edge.clone()
        });
    }
    out.finish_raw();
    Ok(out)
}
