use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EdgeWeights;
use crate::error::{Error, Result};
use crate::graph::{tokens, ConceptGraph, EdgeOrigin, NodeId};

/// How a lens node is wired into the graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum AttachRule {
    /// Both directions to the `count` highest out-degree nodes whose label
    /// shares a token with `filter` (every node when `filter` is absent).
    TopOutDegree { count: usize, filter: Option<String> },
    /// `inbound` nodes point at the lens; the lens points at `outbound` nodes.
    Explicit {
        inbound: Vec<NodeId>,
        outbound: Vec<NodeId>,
    },
}

impl Default for AttachRule {
    fn default() -> Self {
        AttachRule::TopOutDegree {
            count: 3,
            filter: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LensSpec {
    pub lens_label: String,
    /// Multiplier in `(0, 1]` applied to lens-incident edges.
    pub bias_weight: f64,
    #[serde(default)]
    pub attach_rule: AttachRule,
}

impl LensSpec {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            lens_label: label.into(),
            bias_weight: 0.4,
            attach_rule: AttachRule::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LensedGraph {
    pub graph: ConceptGraph,
    pub weights: EdgeWeights,
    pub lens_node: NodeId,
}

const LENS_RELATION: &str = "lens";

/// Adds the lens as a fresh node and down-weights every edge touching it so
/// that minimum-weight routes are drawn through it.
pub fn inject_lens(graph: &ConceptGraph, lens: &LensSpec) -> Result<LensedGraph> {
    let label = lens.lens_label.trim();
    if label.is_empty() {
        return Err(Error::EmptyLabel);
    }
    if !(lens.bias_weight > 0.0 && lens.bias_weight <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "lens bias weight {} outside (0, 1]",
            lens.bias_weight
        )));
    }
    let (inbound, outbound) = match &lens.attach_rule {
        AttachRule::Explicit { inbound, outbound } => {
            for &id in inbound.iter().chain(outbound) {
                if !graph.contains(id) {
                    return Err(Error::UnknownNode(id));
                }
            }
            (inbound.clone(), outbound.clone())
        }
        AttachRule::TopOutDegree { count, filter } => {
            let wanted = filter.as_deref().map(tokens);
            let mut ranked: Vec<NodeId> = graph
                .nodes()
                .filter(|n| match &wanted {
                    None => true,
                    Some(w) => n.surface_forms().any(|s| !tokens(s).is_disjoint(w)),
                })
                .map(|n| n.id)
                .collect();
            ranked.sort_by_key(|&id| (std::cmp::Reverse(graph.out_degree(id)), id));
            ranked.truncate(*count);
            (ranked.clone(), ranked)
        }
    };

    let mut out = graph.clone();
    // A fresh node even if some concept already carries the lens label.
    let mut node_label = label.to_string();
    while out.find_by_label(&node_label).is_some() {
        node_label.push_str(" (lens)");
    }
    let lens_node = out.add_node(&node_label)?;
    let mut weights = EdgeWeights::unit();
    let attached: BTreeSet<(NodeId, NodeId)> = inbound
        .iter()
        .map(|&n| (n, lens_node))
        .chain(outbound.iter().map(|&n| (lens_node, n)))
        .collect();
    for (s, t) in attached {
        out.add_relation_with_origin(s, t, LENS_RELATION, Vec::new(), EdgeOrigin::Lens)?;
        weights.set(s, t, lens.bias_weight)?;
    }
    Ok(LensedGraph {
        graph: out,
        weights,
        lens_node,
    })
}
