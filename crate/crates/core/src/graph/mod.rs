//! Query-local concept graph: canonical concepts joined by evidenced, directed
//! relations, plus the construction passes that clean it up.

mod cleanup;
mod normalize;
mod similarity;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cleanup::{cleanup, is_well_formed, weak_components, MAX_LABEL_CHARS};
pub use normalize::normalize;
pub use similarity::{jaccard, label_similarity, tokens};

/// Default token-Jaccard threshold for merging surface variants.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.85;
/// Components smaller than this are dropped by [`cleanup`].
pub const DEFAULT_MIN_COMPONENT_SIZE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Evidence {
    pub doc_id: String,
    pub span: String,
}

impl Evidence {
    pub fn new(doc_id: impl Into<String>, span: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            span: span.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrigin {
    Extraction,
    Densification,
    Lens,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub id: NodeId,
    pub canonical_label: String,
    pub aliases: BTreeSet<String>,
    pub provenance: BTreeSet<String>,
}

impl ConceptNode {
    /// Canonical label followed by every alias.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_label.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub relation_label: String,
    pub evidence: Vec<Evidence>,
    pub origin: EdgeOrigin,
}

impl RelationEdge {
    pub fn key(&self) -> EdgeKey {
        EdgeKey {
            source: self.source,
            target: self.target,
            label: self.relation_label.clone(),
        }
    }
}

/// Identity of a relation: duplicate `(source, target, label)` triples merge.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub source: NodeId,
    pub target: NodeId,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Fold case when matching labels in [`ConceptGraph::add_concept`].
    pub case_insensitive: bool,
    pub allow_self_loops: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            case_insensitive: true,
            allow_self_loops: false,
        }
    }
}

/// Directed concept graph for a single query run.
#[derive(Clone, Debug, Default)]
pub struct ConceptGraph {
    query_id: String,
    options: GraphOptions,
    next_id: u32,
    nodes: BTreeMap<NodeId, ConceptNode>,
    edges: BTreeMap<EdgeKey, RelationEdge>,
    label_index: HashMap<String, NodeId>,
    out_adj: BTreeMap<NodeId, BTreeSet<NodeId>>,
    in_adj: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

static EMPTY: BTreeSet<NodeId> = BTreeSet::new();

impl ConceptGraph {
    pub fn new(query_id: impl Into<String>) -> Self {
        Self::with_options(query_id, GraphOptions::default())
    }

    pub fn with_options(query_id: impl Into<String>, options: GraphOptions) -> Self {
        Self {
            query_id: query_id.into(),
            options,
            ..Default::default()
        }
    }

    /// Same query and options, no content.
    pub(crate) fn empty_like(&self) -> Self {
        Self {
            query_id: self.query_id.clone(),
            options: self.options,
            next_id: self.next_id,
            ..Default::default()
        }
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn options(&self) -> GraphOptions {
        self.options
    }

    fn label_key(&self, label: &str) -> String {
        let trimmed = label.trim();
        if self.options.case_insensitive {
            trimmed.to_lowercase()
        } else {
            trimmed.to_string()
        }
    }

    /// Inserts a concept, or returns the node already holding this label.
    /// Aliases and provenance are unioned into an existing node.
    pub fn add_concept<A, P>(&mut self, label: &str, aliases: A, provenance: P) -> Result<NodeId>
    where
        A: IntoIterator,
        A::Item: Into<String>,
        P: IntoIterator,
        P::Item: Into<String>,
    {
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::EmptyLabel);
        }
        let key = self.label_key(label);
        let id = match self.label_index.get(&key) {
            Some(&id) => id,
            None => {
                let id = NodeId(self.next_id);
                self.next_id += 1;
                self.nodes.insert(
                    id,
                    ConceptNode {
                        id,
                        canonical_label: label.to_string(),
                        aliases: BTreeSet::new(),
                        provenance: BTreeSet::new(),
                    },
                );
                self.label_index.insert(key, id);
                id
            }
        };
        for alias in aliases {
            let alias: String = alias.into();
            let alias = alias.trim().to_string();
            if alias.is_empty() {
                continue;
            }
            let key = self.label_key(&alias);
            match self.label_index.get(&key) {
                Some(&owner) if owner != id => continue,
                Some(_) => {}
                None => {
                    self.label_index.insert(key, id);
                }
            }
            let node = self.nodes.get_mut(&id).expect("node just resolved");
            if alias != node.canonical_label {
                node.aliases.insert(alias);
            }
        }
        let node = self.nodes.get_mut(&id).expect("node just resolved");
        node.provenance.extend(provenance.into_iter().map(Into::into));
        Ok(id)
    }

    /// Shorthand for a concept with no aliases or provenance.
    pub fn add_node(&mut self, label: &str) -> Result<NodeId> {
        self.add_concept(label, std::iter::empty::<String>(), std::iter::empty::<String>())
    }

    /// Adds an extraction-origin relation.
    pub fn add_relation(
        &mut self,
        source: NodeId,
        target: NodeId,
        label: &str,
        evidence: Vec<Evidence>,
    ) -> Result<EdgeKey> {
        self.add_relation_with_origin(source, target, label, evidence, EdgeOrigin::Extraction)
    }

    pub fn add_relation_with_origin(
        &mut self,
        source: NodeId,
        target: NodeId,
        label: &str,
        evidence: Vec<Evidence>,
        origin: EdgeOrigin,
    ) -> Result<EdgeKey> {
        for id in [source, target] {
            if !self.nodes.contains_key(&id) {
                return Err(Error::UnknownNode(id));
            }
        }
        if source == target && !self.options.allow_self_loops {
            return Err(Error::InvalidArgument(format!("self-loop on {source}")));
        }
        if evidence.is_empty() && origin != EdgeOrigin::Lens {
            return Err(Error::InvalidArgument(format!(
                "{origin:?} relation {source}->{target} needs evidence"
            )));
        }
        let key = EdgeKey {
            source,
            target,
            label: label.trim().to_string(),
        };
        match self.edges.get_mut(&key) {
            Some(edge) => merge_evidence(&mut edge.evidence, evidence),
            None => {
                let mut merged = Vec::with_capacity(evidence.len());
                merge_evidence(&mut merged, evidence);
                self.edges.insert(
                    key.clone(),
                    RelationEdge {
                        source,
                        target,
                        relation_label: key.label.clone(),
                        evidence: merged,
                        origin,
                    },
                );
                self.out_adj.entry(source).or_default().insert(target);
                self.in_adj.entry(target).or_default().insert(source);
            }
        }
        Ok(key)
    }

    /// Drops the given nodes and every edge touching them.
    pub fn remove_nodes(&mut self, doomed: &BTreeSet<NodeId>) {
        if doomed.is_empty() {
            return;
        }
        self.nodes.retain(|id, _| !doomed.contains(id));
        self.edges
            .retain(|k, _| !doomed.contains(&k.source) && !doomed.contains(&k.target));
        self.reindex();
    }

    fn reindex(&mut self) {
        self.label_index.clear();
        self.out_adj.clear();
        self.in_adj.clear();
        for node in self.nodes.values() {
            let id = node.id;
            let key = self.label_key(&node.canonical_label);
            self.label_index.insert(key, id);
        }
        let alias_keys: Vec<(String, NodeId)> = self
            .nodes
            .values()
            .flat_map(|n| n.aliases.iter().map(move |a| (a.clone(), n.id)))
            .map(|(a, id)| (self.label_key(&a), id))
            .collect();
        for (key, id) in alias_keys {
            self.label_index.entry(key).or_insert(id);
        }
        for k in self.edges.keys() {
            self.out_adj.entry(k.source).or_default().insert(k.target);
            self.in_adj.entry(k.target).or_default().insert(k.source);
        }
        if let Some(max) = self.nodes.keys().next_back() {
            self.next_id = self.next_id.max(max.0 + 1);
        }
    }

    pub(crate) fn insert_node_raw(&mut self, node: ConceptNode) {
        self.nodes.insert(node.id, node);
    }

    pub(crate) fn insert_edge_raw(&mut self, edge: RelationEdge) {
        match self.edges.get_mut(&edge.key()) {
            Some(existing) => merge_evidence(&mut existing.evidence, edge.evidence),
            None => {
                self.edges.insert(edge.key(), edge);
            }
        }
    }

    pub(crate) fn finish_raw(&mut self) {
        self.reindex();
    }

    pub fn node(&self, id: NodeId) -> Option<&ConceptNode> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn label(&self, id: NodeId) -> Option<&str> {
        self.nodes.get(&id).map(|n| n.canonical_label.as_str())
    }

    /// Looks a label or alias up under the graph's case policy.
    pub fn find_by_label(&self, label: &str) -> Option<NodeId> {
        self.label_index.get(&self.label_key(label)).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ConceptNode> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = &RelationEdge> {
        self.edges.values()
    }

    pub fn edge(&self, key: &EdgeKey) -> Option<&RelationEdge> {
        self.edges.get(key)
    }

    pub fn successors(&self, id: NodeId) -> &BTreeSet<NodeId> {
        self.out_adj.get(&id).unwrap_or(&EMPTY)
    }

    pub fn predecessors(&self, id: NodeId) -> &BTreeSet<NodeId> {
        self.in_adj.get(&id).unwrap_or(&EMPTY)
    }

    pub fn has_edge(&self, source: NodeId, target: NodeId) -> bool {
        self.successors(source).contains(&target)
    }

    /// Distinct neighbours ignoring direction.
    pub fn undirected_neighbors(&self, id: NodeId) -> BTreeSet<NodeId> {
        self.successors(id)
            .union(self.predecessors(id))
            .copied()
            .filter(|&n| n != id)
            .collect()
    }

    pub fn out_degree(&self, id: NodeId) -> usize {
        self.successors(id).len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn evidence_count(&self) -> usize {
        self.edges.values().map(|e| e.evidence.len()).sum()
    }
}

/// `(node_count, edge_count)`.
pub fn graph_stats(graph: &ConceptGraph) -> (usize, usize) {
    (graph.node_count(), graph.edge_count())
}

fn merge_evidence(into: &mut Vec<Evidence>, incoming: Vec<Evidence>) {
    for ev in incoming {
        if !into.contains(&ev) {
            into.push(ev);
        }
    }
}

impl PartialEq for ConceptGraph {
    fn eq(&self, other: &Self) -> bool {
        self.query_id == other.query_id
            && self.options == other.options
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    query_id: String,
    #[serde(default)]
    options: GraphOptions,
    nodes: Vec<ConceptNode>,
    edges: Vec<RelationEdge>,
}

impl Serialize for ConceptGraph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GraphRepr {
            query_id: self.query_id.clone(),
            options: self.options,
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.values().cloned().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConceptGraph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = GraphRepr::deserialize(deserializer)?;
        let mut graph = ConceptGraph::with_options(repr.query_id, repr.options);
        for node in repr.nodes {
            if graph.nodes.contains_key(&node.id) {
                return Err(D::Error::custom(format!("duplicate node id {}", node.id)));
            }
            graph.insert_node_raw(node);
        }
        for edge in repr.edges {
            for id in [edge.source, edge.target] {
                if !graph.nodes.contains_key(&id) {
                    return Err(D::Error::custom(format!("edge references unknown node {id}")));
                }
            }
            graph.insert_edge_raw(edge);
        }
        graph.finish_raw();
        Ok(graph)
    }
}
