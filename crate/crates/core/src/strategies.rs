//! The four reasoning strategies and the greedy diversity filter that feeds
//! the full-diversity strategy.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::community::{Partition, StructuralHole};
use crate::error::{Error, Result};
use crate::graph::{jaccard, tokens, ConceptGraph, NodeId};
use crate::traversal::{k_shortest_paths, random_walk, shortest_path, EdgeWeights, PathTag, ReasoningPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    FullDiversity,
    ShortestPath,
    RandomWalk,
    RagBaseline,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::FullDiversity,
        StrategyKind::ShortestPath,
        StrategyKind::RandomWalk,
        StrategyKind::RagBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::FullDiversity => "full_diversity",
            StrategyKind::ShortestPath => "shortest_path",
            StrategyKind::RandomWalk => "random_walk",
            StrategyKind::RagBaseline => "rag_baseline",
        }
    }

    /// Row label used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            StrategyKind::FullDiversity => "Full (Diversity-Enforced)",
            StrategyKind::ShortestPath => "Shortest Path",
            StrategyKind::RandomWalk => "Random Walks",
            StrategyKind::RagBaseline => "RAG Baseline (No Graph)",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full_diversity" => Ok(StrategyKind::FullDiversity),
            "shortest" | "shortest_path" => Ok(StrategyKind::ShortestPath),
            "walk" | "random_walk" => Ok(StrategyKind::RandomWalk),
            "rag" | "rag_baseline" => Ok(StrategyKind::RagBaseline),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Candidate paths per endpoint pair for full diversity.
    pub k: usize,
    pub overlap_threshold: f64,
    /// Paths kept after the diversity filter.
    pub max_paths: usize,
    pub walk_count: usize,
    pub max_hops: usize,
    pub seed: u64,
    /// Paths shorter than this many nodes are not multi-hop and are dropped.
    pub min_path_nodes: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::FullDiversity,
            k: 5,
            overlap_threshold: 0.30,
            max_paths: 5,
            walk_count: 10,
            max_hops: 6,
            seed: 0,
            min_path_nodes: 3,
        }
    }
}

impl StrategyConfig {
    pub fn for_kind(kind: StrategyKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.overlap_threshold) {
            return Err(Error::InvalidArgument(format!(
                "overlap threshold {} outside [0, 1]",
                self.overlap_threshold
            )));
        }
        if self.k == 0 || self.max_paths == 0 {
            return Err(Error::InvalidArgument("k and max_paths must be at least 1".into()));
        }
        if self.min_path_nodes < 2 {
            return Err(Error::InvalidArgument("min_path_nodes must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicResult {
    pub paths: Vec<ReasoningPath>,
    pub endpoint_pairs: Vec<(NodeId, NodeId)>,
    pub bridge_attempted: bool,
}

/// Greedy scan keeping a candidate only if its node-set Jaccard similarity
/// with every path kept so far is at most `overlap_threshold`.
pub fn select_diverse(candidates: &[ReasoningPath], overlap_threshold: f64, max_keep: usize) -> Vec<ReasoningPath> {
    let mut kept: Vec<(ReasoningPath, BTreeSet<NodeId>)> = Vec::new();
    for candidate in candidates {
        if kept.len() >= max_keep {
            break;
        }
        let set = candidate.node_set();
        if kept.iter().all(|(_, k)| jaccard(&set, k) <= overlap_threshold) {
            kept.push((candidate.clone(), set));
        }
    }
    kept.into_iter().map(|(p, _)| p).collect()
}

/// Whether any pair spans two communities.
pub fn spans_communities(pairs: &[(NodeId, NodeId)], partition: &Partition) -> bool {
    pairs.iter().any(|&(a, b)| match (partition.community_of(a), partition.community_of(b)) {
        (Some(ca), Some(cb)) => ca != cb,
        _ => false,
    })
}

/// Candidates scanned when the plain shortest route is too short to count as
/// multi-hop.
const SHORTEST_SCAN: usize = 16;

pub fn run_strategy(
    graph: &ConceptGraph,
    endpoints: &[(NodeId, NodeId)],
    config: &StrategyConfig,
    partition: &Partition,
    weights: Option<&EdgeWeights>,
) -> Result<SymbolicResult> {
    config.validate()?;
    for &(s, t) in endpoints {
        for id in [s, t] {
            if !graph.contains(id) {
                return Err(Error::UnknownNode(id));
            }
        }
    }
    if config.kind == StrategyKind::RagBaseline {
        return Ok(SymbolicResult {
            paths: Vec::new(),
            endpoint_pairs: endpoints.to_vec(),
            bridge_attempted: false,
        });
    }
    if endpoints.is_empty() {
        return Err(Error::InvalidArgument("strategy needs at least one endpoint pair".into()));
    }
    let long_enough = |p: &ReasoningPath| p.length_nodes() >= config.min_path_nodes;

    let paths = match config.kind {
        StrategyKind::ShortestPath => {
            let mut out = Vec::new();
            for &(s, t) in endpoints {
                let direct = shortest_path(graph, s, t, weights)?;
                let chosen = match direct {
                    Some(p) if long_enough(&p) => Some(p),
                    Some(_) => k_shortest_paths(graph, s, t, SHORTEST_SCAN, weights)?
                        .into_iter()
                        .find(|p| long_enough(p)),
                    None => None,
                };
                out.extend(chosen.map(|p| ReasoningPath::new(p.nodes, PathTag::ShortestPath)));
            }
            out
        }
        StrategyKind::FullDiversity => {
            let mut candidates = Vec::new();
            for &(s, t) in endpoints {
                candidates.extend(
                    k_shortest_paths(graph, s, t, config.k, weights)?
                        .into_iter()
                        .filter(|p| long_enough(p))
                        .map(|p| ReasoningPath::new(p.nodes, PathTag::FullDiversity)),
                );
            }
            select_diverse(&candidates, config.overlap_threshold, config.max_paths)
        }
        StrategyKind::RandomWalk => {
            let mut out = Vec::new();
            for i in 0..config.walk_count {
                let start = endpoints[i % endpoints.len()].0;
                let walk = random_walk(graph, start, config.max_hops, walk_seed(config.seed, i))?;
                if long_enough(&walk) {
                    out.push(walk);
                }
            }
            out
        }
        StrategyKind::RagBaseline => unreachable!("handled above"),
    };

    Ok(SymbolicResult {
        paths,
        endpoint_pairs: endpoints.to_vec(),
        bridge_attempted: spans_communities(endpoints, partition),
    })
}

fn walk_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "beyond", "by", "can", "could", "do", "does", "during",
    "e", "emerge", "exist", "for", "from", "g", "give", "how", "if", "in", "into", "is", "it", "its",
    "of", "on", "or", "rather", "than", "that", "the", "their", "these", "this", "those", "to", "via",
    "what", "whether", "which", "while", "why", "with",
];

/// Content tokens of a query, stop words removed, in first-occurrence order.
pub fn query_terms(query: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    query
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

pub(crate) fn term_matches(term: &str, token: &str) -> bool {
    if term == token {
        return true;
    }
    let (short, long) = if term.len() <= token.len() { (term, token) } else { (token, term) };
    short.len() >= 4 && long.starts_with(short)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Query-matching nodes considered, by degree.
    pub top_n: usize,
    pub max_pairs: usize,
    /// Bridge candidates taken from structural holes.
    pub hole_pairs: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            top_n: 6,
            max_pairs: 6,
            hole_pairs: 2,
        }
    }
}

/// Query-relevant endpoint pairs: reachable pairs among the best-connected
/// nodes matching query terms, followed by structural-hole bridge candidates.
pub fn select_endpoints(
    graph: &ConceptGraph,
    query: &str,
    holes: &[StructuralHole],
    config: &EndpointConfig,
) -> Vec<(NodeId, NodeId)> {
    let terms = query_terms(query);
    let degree = |n: NodeId| graph.undirected_neighbors(n).len();
    let mut matched: Vec<NodeId> = graph
        .nodes()
        .filter(|n| {
            n.surface_forms()
                .flat_map(tokens)
                .any(|tok| terms.iter().any(|t| term_matches(t, &tok)))
        })
        .map(|n| n.id)
        .collect();
    if matched.len() < 2 {
        matched = graph.node_ids().collect();
    }
    matched.sort_by_key(|&n| (std::cmp::Reverse(degree(n)), n));
    matched.truncate(config.top_n);

    let mut ranked: Vec<(usize, NodeId, NodeId)> = matched
        .iter()
        .flat_map(|&u| matched.iter().filter(move |&&v| v != u).map(move |&v| (u, v)))
        .map(|(u, v)| (degree(u) + degree(v), u, v))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut pairs = Vec::new();
    for (_, u, v) in ranked {
        if pairs.len() >= config.max_pairs {
            break;
        }
        if matches!(shortest_path(graph, u, v, None), Ok(Some(_))) {
            pairs.push((u, v));
        }
    }
    for hole in holes.iter().take(config.hole_pairs) {
        if let Some(&pair) = hole.candidate_pairs.first() {
            if !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
    }
    pairs
}
