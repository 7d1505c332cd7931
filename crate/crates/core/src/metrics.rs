//! Behavioral metrics: symbolic and grounded depth, drop rate, collapse and
//! failure rate, hypothesis diversity, and per-run report assembly.
//!
//! Depth is measured in nodes for both symbolic paths and grounded chains.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{jaccard, label_similarity, ConceptGraph, NodeId, DEFAULT_SIMILARITY_THRESHOLD};
use crate::traversal::ReasoningPath;

/// Causal chain of a realized hypothesis, resolved against the graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedChain {
    /// Labels as stated by the hypothesis, unresolved ones included.
    pub nodes: Vec<String>,
    /// Graph nodes that resolved and link to a neighbouring chain element.
    pub mapped_node_ids: Vec<NodeId>,
}

impl GroundedChain {
    /// Chain with `n` synthetic mapped nodes, for metric arithmetic.
    pub fn with_length(n: usize) -> Self {
        Self {
            nodes: (0..n).map(|i| format!("c{i}")).collect(),
            mapped_node_ids: (0..n as u32).map(NodeId).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.mapped_node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapped_node_ids.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkSlack {
    /// Consecutive elements may be linked by an edge in either direction.
    EitherDirection,
    /// Only an edge from the earlier element to the later one counts.
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundingConfig {
    pub similarity_threshold: f64,
    pub slack: LinkSlack,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            slack: LinkSlack::EitherDirection,
        }
    }
}

/// Mean node count over paths; 0 for no paths.
pub fn symbolic_depth(paths: &[ReasoningPath]) -> f64 {
    mean(paths.iter().map(ReasoningPath::length_nodes))
}

/// Mean mapped-node count over chains; 0 for no chains.
pub fn grounded_depth(chains: &[GroundedChain]) -> f64 {
    mean(chains.iter().map(GroundedChain::len))
}

fn mean(values: impl Iterator<Item = usize>) -> f64 {
    let (sum, n) = values.fold((0usize, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// `max(0, 1 - d_ground / d_sym)`. With no symbolic depth the rate is 0 when
/// nothing was grounded either and undefined (`None`) otherwise.
pub fn drop_rate(d_sym: f64, d_ground: f64) -> Option<f64> {
    if d_sym > 0.0 {
        Some((1.0 - d_ground / d_sym).max(0.0))
    } else if d_ground == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Fewer than two grounded nodes: no mechanistic link survived.
pub fn is_collapsed(chain: &GroundedChain) -> bool {
    chain.len() < 2
}

pub fn failure_rate(chains: &[GroundedChain]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::Undefined("failure rate needs at least one hypothesis"));
    }
    let collapsed = chains.iter().filter(|c| is_collapsed(c)).count();
    Ok(collapsed as f64 / chains.len() as f64)
}

/// Mean pairwise Jaccard similarity; lower means more diverse hypotheses.
pub fn diversity_jaccard<T: Ord>(concept_sets: &[BTreeSet<T>]) -> Result<f64> {
    if concept_sets.len() < 2 {
        return Err(Error::Undefined("diversity needs at least two concept sets"));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, a) in concept_sets.iter().enumerate() {
        for b in &concept_sets[i + 1..] {
            total += jaccard(a, b);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Case-folded concept set of a stated causal chain.
pub fn concept_set(chain: &[String]) -> BTreeSet<String> {
    chain
        .iter()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Resolves each label against node labels and aliases using the
/// normalization similarity, then keeps the elements that link to an
/// adjacent element of the chain.
pub fn ground_chain(labels: &[String], graph: &ConceptGraph, config: &GroundingConfig) -> GroundedChain {
    let candidates: Vec<Vec<NodeId>> = labels
        .iter()
        .map(|label| resolve(label, graph, config.similarity_threshold))
        .collect();
    let linked = |a: NodeId, b: NodeId| {
        a != b
            && match config.slack {
                LinkSlack::EitherDirection => graph.has_edge(a, b) || graph.has_edge(b, a),
                LinkSlack::Strict => graph.has_edge(a, b),
            }
    };

    let mut mapped = Vec::new();
    for (i, cands) in candidates.iter().enumerate() {
        let prev = i.checked_sub(1).map(|p| &candidates[p]);
        let next = candidates.get(i + 1);
        let chosen = cands.iter().copied().find(|&c| {
            prev.is_some_and(|p| p.iter().any(|&q| linked(q, c)))
                || next.is_some_and(|n| n.iter().any(|&q| linked(c, q)))
        });
        mapped.extend(chosen);
    }
    GroundedChain {
        nodes: labels.to_vec(),
        mapped_node_ids: mapped,
    }
}

/// Nodes whose best surface form reaches `threshold`, best first.
fn resolve(label: &str, graph: &ConceptGraph, threshold: f64) -> Vec<NodeId> {
    if label.trim().is_empty() {
        return Vec::new();
    }
    let mut scored: Vec<(f64, NodeId)> = graph
        .nodes()
        .filter_map(|n| {
            let best = n
                .surface_forms()
                .map(|s| label_similarity(label, s))
                .fold(0.0, f64::max);
            (best >= threshold).then_some((best, n.id))
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, id)| id).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehavioralReport {
    pub query_id: String,
    pub d_sym: f64,
    pub d_ground: f64,
    /// `None` when undefined (no hypotheses, or grounding without paths).
    pub drop_rate: Option<f64>,
    /// `None` when no hypotheses were produced.
    pub failure_rate: Option<f64>,
    /// `None` with fewer than two hypotheses.
    pub diversity_jaccard: Option<f64>,
    pub bridge_attempted: bool,
    pub n_paths: usize,
    pub n_hypotheses: usize,
    pub n_collapsed: usize,
    /// No hypotheses, or symbolic paths existed but every chain collapsed.
    pub abstention: bool,
}

pub struct ReportInputs<'a> {
    pub query_id: &'a str,
    pub paths: &'a [ReasoningPath],
    pub chains: &'a [GroundedChain],
    pub concept_sets: &'a [BTreeSet<String>],
    pub bridge_attempted: bool,
}

pub fn build_report(inputs: ReportInputs<'_>) -> BehavioralReport {
    let d_sym = symbolic_depth(inputs.paths);
    let d_ground = grounded_depth(inputs.chains);
    let n_hypotheses = inputs.chains.len();
    let n_collapsed = inputs.chains.iter().filter(|c| is_collapsed(c)).count();
    let all_collapsed = n_hypotheses > 0 && n_collapsed == n_hypotheses;
    BehavioralReport {
        query_id: inputs.query_id.to_string(),
        d_sym,
        d_ground,
        drop_rate: if n_hypotheses == 0 { None } else { drop_rate(d_sym, d_ground) },
        failure_rate: failure_rate(inputs.chains).ok(),
        diversity_jaccard: diversity_jaccard(inputs.concept_sets).ok(),
        bridge_attempted: inputs.bridge_attempted,
        n_paths: inputs.paths.len(),
        n_hypotheses,
        n_collapsed,
        abstention: n_hypotheses == 0 || (!inputs.paths.is_empty() && all_collapsed),
    }
}
