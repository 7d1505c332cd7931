//! Best-effort ingestion of traces written by other implementations. Field
//! names are matched against a list of likely spellings; anything not
//! consumed is reported back as unmapped.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::{recompute_report, GraphStage, TraceRecord};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{ConceptGraph, EdgeOrigin, Evidence, GraphOptions, NodeId};
use crate::metrics::{ground_chain, GroundedChain, GroundingConfig};
use crate::pipeline::{Hypothesis, Query, StanceCounts};
use crate::traversal::{PathTag, ReasoningPath};

const QUERY_ID_KEYS: &[&str] = &["query_id", "qid", "id", "query_name"];
const QUERY_KEYS: &[&str] = &["query", "question", "query_text", "user_query"];
const GRAPH_KEYS: &[&str] = &["graph", "concept_graph", "knowledge_graph", "kg"];
const NODE_KEYS: &[&str] = &["nodes", "concepts", "entities", "vertices"];
const EDGE_KEYS: &[&str] = &["edges", "links", "relations", "triples", "triplets"];
const STATS_KEYS: &[&str] = &["graph_stats", "stats", "statistics", "graph_statistics"];
const PATH_KEYS: &[&str] = &["symbolic_paths", "reasoning_paths", "symbolic_chains", "paths", "symbolic_hypotheses"];
const HYPOTHESIS_KEYS: &[&str] = &["hypotheses", "final_hypotheses", "generated_hypotheses"];
const GROUNDED_KEYS: &[&str] = &["grounded_chains", "grounded_realizations", "realized_chains", "grounded_paths"];
const METRIC_KEYS: &[&str] = &["metrics", "report", "behavioral_metrics", "evaluation"];

/// Metric values as stored by the foreign trace, for comparison with the
/// recomputed report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StoredMetrics {
    pub d_sym: Option<f64>,
    pub d_ground: Option<f64>,
    pub drop_rate: Option<f64>,
    pub diversity_jaccard: Option<f64>,
    pub bridge_attempted: Option<bool>,
    pub graph_stats: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct AdaptedTrace {
    pub record: TraceRecord,
    pub stored: StoredMetrics,
    pub unmapped_fields: Vec<String>,
}

impl AdaptedTrace {
    /// Node and edge counts of the imported graph, if one was present.
    pub fn graph_stats(&self) -> Option<(usize, usize)> {
        self.record
            .final_graph()
            .map(|g| (g.node_count(), g.edge_count()))
            .filter(|&(n, _)| n > 0)
    }
}

struct Cursor<'a> {
    obj: &'a Map<String, Value>,
    used: BTreeSet<&'a str>,
}

impl<'a> Cursor<'a> {
    fn new(obj: &'a Map<String, Value>) -> Self {
        Self {
            obj,
            used: BTreeSet::new(),
        }
    }

    fn take(&mut self, keys: &[&str]) -> Option<&'a Value> {
        for (k, v) in self.obj {
            if keys.iter().any(|key| k.eq_ignore_ascii_case(key)) && !v.is_null() {
                self.used.insert(k.as_str());
                return Some(v);
            }
        }
        None
    }

    fn rest(&self, prefix: &str) -> Vec<String> {
        self.obj
            .keys()
            .filter(|k| !self.used.contains(k.as_str()))
            .map(|k| if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") })
            .collect()
    }
}

fn number(v: &Value) -> Option<f64> {
    v.as_f64().or_else(|| v.as_str().and_then(|s| s.trim().trim_end_matches('%').parse().ok()))
}

fn label_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Object(o) => ["label", "name", "concept", "canonical_label", "text", "id"]
            .iter()
            .find_map(|k| o.get(*k).and_then(label_of)),
        _ => None,
    }
}

/// A chain given as a list, an object holding a list, or an arrow string.
fn chain_of(v: &Value) -> Option<Vec<String>> {
    match v {
        Value::Array(xs) => xs.iter().map(label_of).collect(),
        Value::String(s) => Some(
            s.split('→')
                .flat_map(|part| part.split("->"))
                .map(|p| p.trim().to_string())
                .filter(|p| !p.is_empty())
                .collect(),
        ),
        Value::Object(o) => ["path", "nodes", "chain", "causal_chain", "grounded_chain", "concepts"]
            .iter()
            .find_map(|k| o.get(*k).and_then(chain_of)),
        _ => None,
    }
}

struct Importer {
    graph: ConceptGraph,
    by_key: BTreeMap<String, NodeId>,
    next_external: u32,
}

impl Importer {
    fn node(&mut self, key: &str, label: &str) -> Result<NodeId> {
        if let Some(&id) = self.by_key.get(key) {
            return Ok(id);
        }
        let before = self.graph.node_count();
        let id = self.graph.add_node(label)?;
        if self.graph.node_count() > before {
            self.next_external = self.next_external.max(id.0 + 1);
        }
        self.by_key.insert(key.to_string(), id);
        self.by_key.entry(label.to_string()).or_insert(id);
        Ok(id)
    }

    /// Graph node for a label, or a fresh id outside the graph.
    fn lookup(&mut self, label: &str) -> (NodeId, bool) {
        if let Some(&id) = self.by_key.get(label) {
            return (id, true);
        }
        if let Some(id) = self.graph.find_by_label(label) {
            return (id, true);
        }
        let id = NodeId(self.next_external);
        self.next_external += 1;
        self.by_key.insert(label.to_string(), id);
        (id, false)
    }
}

fn import_graph(value: &Value, unmapped: &mut Vec<String>) -> Result<Importer> {
    let mut imp = Importer {
        graph: ConceptGraph::with_options(
            "",
            GraphOptions {
                case_insensitive: false,
                allow_self_loops: true,
            },
        ),
        by_key: BTreeMap::new(),
        next_external: 0,
    };
    let Some(obj) = value.as_object() else {
        unmapped.push("graph (not an object)".into());
        return Ok(imp);
    };
    let mut cur = Cursor::new(obj);
    for node in cur.take(NODE_KEYS).and_then(Value::as_array).into_iter().flatten() {
        let Some(label) = label_of(node) else {
            unmapped.push("graph.nodes[] (unlabelled entry)".into());
            continue;
        };
        let key = node.get("id").and_then(label_of).unwrap_or_else(|| label.clone());
        imp.node(&key, &label)?;
    }
    let mut implicit = 0usize;
    for edge in cur.take(EDGE_KEYS).and_then(Value::as_array).into_iter().flatten() {
        let (s, r, t) = match edge {
            Value::Array(xs) if xs.len() == 3 => (label_of(&xs[0]), label_of(&xs[1]), label_of(&xs[2])),
            Value::Object(o) => {
                let field = |keys: &[&str]| keys.iter().find_map(|k| o.get(*k).and_then(label_of));
                (
                    field(&["source", "from", "head", "subject", "src"]),
                    field(&["relation", "label", "type", "predicate", "rel"]),
                    field(&["target", "to", "tail", "object", "dst"]),
                )
            }
            _ => (None, None, None),
        };
        let (Some(s), Some(t)) = (s, t) else {
            unmapped.push("graph.edges[] (endpoints not recognised)".into());
            continue;
        };
        let before = imp.graph.node_count();
        let si = imp.node(&s, &s)?;
        let ti = imp.node(&t, &t)?;
        implicit += imp.graph.node_count() - before;
        let doc = edge.get("doc_id").or_else(|| edge.get("source_doc")).and_then(label_of);
        let evidence = Evidence::new(doc.unwrap_or_else(|| "imported".into()), edge.get("evidence").and_then(label_of).unwrap_or_default());
        imp.graph
            .add_relation_with_origin(si, ti, r.as_deref().unwrap_or("related to"), vec![evidence], EdgeOrigin::Extraction)?;
    }
    if implicit > 0 {
        unmapped.push(format!("graph.edges ({implicit} endpoints absent from the node list were added)"));
    }
    unmapped.extend(cur.rest("graph"));
    Ok(imp)
}

fn import_hypothesis(v: &Value, unmapped: &mut Vec<String>, index: usize) -> Option<Hypothesis> {
    let obj = v.as_object()?;
    let mut cur = Cursor::new(obj);
    let statement = cur
        .take(&["statement", "hypothesis", "text", "title"])
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let causal_chain = cur.take(&["causal_chain", "chain", "mechanism", "causal_path"]).and_then(chain_of).unwrap_or_default();
    let evidence_summary = cur
        .take(&["evidence_summary", "evidence", "rationale"])
        .map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string))
        .unwrap_or_default();
    let scores = cur.take(&["scores", "ratings"]).and_then(Value::as_object).cloned().unwrap_or_default();
    let mut score = |name: &str| {
        let long = format!("{name}_score");
        scores
            .get(name)
            .or_else(|| scores.get(&long))
            .or_else(|| cur.take(&[name, long.as_str()]))
            .and_then(number)
            .map(|x| x.clamp(0.0, 1.0))
    };
    let (novelty, feasibility, testability) = (score("novelty"), score("feasibility"), score("testability"));
    if novelty.is_none() || feasibility.is_none() || testability.is_none() {
        unmapped.push(format!("hypotheses[{index}] (missing scores, recorded as 0)"));
    }
    unmapped.extend(cur.rest(&format!("hypotheses[{index}]")));
    Some(Hypothesis {
        uncertainty_markers: crate::pipeline::synthesis::uncertainty_markers(&statement),
        statement,
        causal_chain,
        evidence_summary,
        novelty_score: novelty.unwrap_or(0.0),
        feasibility_score: feasibility.unwrap_or(0.0),
        testability_score: testability.unwrap_or(0.0),
        stance_counts: StanceCounts::default(),
        evidence: Vec::new(),
    })
}

/// Maps one foreign trace document onto the native record.
pub fn adapt_released(value: &Value, fallback_id: &str) -> Result<AdaptedTrace> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::InvalidTrace("released trace root is not an object".into()))?;
    let mut cur = Cursor::new(obj);
    let mut unmapped = Vec::new();

    let query_id = cur.take(QUERY_ID_KEYS).and_then(label_of).unwrap_or_else(|| fallback_id.to_string());
    let query_text = cur.take(QUERY_KEYS).and_then(label_of).unwrap_or_default();
    let mut record = TraceRecord::new(&Query::new(query_id.clone(), query_text), &RunConfig::default());

    let mut imp = match cur.take(GRAPH_KEYS) {
        Some(g) => import_graph(g, &mut unmapped)?,
        None => import_graph(&Value::Object(Map::new()), &mut Vec::new())?,
    };
    let mut stored = StoredMetrics::default();
    if let Some(stats) = cur.take(STATS_KEYS).and_then(Value::as_object) {
        let get = |keys: &[&str]| keys.iter().find_map(|k| stats.get(*k).and_then(Value::as_u64)).map(|x| x as usize);
        if let (Some(n), Some(e)) = (get(&["nodes", "num_nodes", "node_count", "n_nodes"]), get(&["edges", "num_edges", "edge_count", "n_edges"])) {
            stored.graph_stats = Some((n, e));
        }
    }

    let mut missing_labels = 0usize;
    for (i, p) in cur.take(PATH_KEYS).and_then(Value::as_array).into_iter().flatten().enumerate() {
        let Some(labels) = chain_of(p) else {
            unmapped.push(format!("symbolic_paths[{i}] (unrecognised shape)"));
            continue;
        };
        let nodes = labels
            .iter()
            .map(|l| {
                let (id, found) = imp.lookup(l);
                missing_labels += usize::from(!found);
                id
            })
            .collect();
        record.symbolic.paths.push(ReasoningPath::new(nodes, PathTag::FullDiversity));
    }
    if missing_labels > 0 {
        unmapped.push(format!("symbolic_paths ({missing_labels} labels not in the graph)"));
    }

    for (i, h) in cur.take(HYPOTHESIS_KEYS).and_then(Value::as_array).into_iter().flatten().enumerate() {
        match import_hypothesis(h, &mut unmapped, i) {
            Some(h) => record.hypotheses.push(h),
            None => unmapped.push(format!("hypotheses[{i}] (not an object)")),
        }
    }

    let grounding = GroundingConfig::default();
    record.grounded_chains = match cur.take(GROUNDED_KEYS).and_then(Value::as_array) {
        Some(chains) => chains
            .iter()
            .map(|c| {
                let labels = chain_of(c).unwrap_or_default();
                let mapped = labels.iter().map(|l| imp.lookup(l).0).collect();
                GroundedChain {
                    nodes: labels,
                    mapped_node_ids: mapped,
                }
            })
            .collect(),
        None => record
            .hypotheses
            .iter()
            .map(|h| ground_chain(&h.causal_chain, &imp.graph, &grounding))
            .collect(),
    };

    if let Some(m) = cur.take(METRIC_KEYS).and_then(Value::as_object) {
        let mut mc = Cursor::new(m);
        stored.d_sym = mc
            .take(&["avg_symbolic_depth", "symbolic_depth", "d_sym", "sym_depth", "avg_sym_depth", "dsym"])
            .and_then(number);
        stored.d_ground = mc
            .take(&["avg_grounded_depth", "grounded_depth", "d_ground", "ground_depth", "avg_ground_depth", "dground"])
            .and_then(number);
        stored.drop_rate = mc.take(&["drop_rate", "drop", "depth_drop"]).and_then(number);
        stored.diversity_jaccard = mc.take(&["diversity_jaccard", "jaccard", "mean_jaccard"]).and_then(number);
        stored.bridge_attempted = mc.take(&["bridge_attempted", "bridge"]).and_then(|v| {
            v.as_bool()
                .or_else(|| v.as_str().map(|s| s.eq_ignore_ascii_case("yes") || s.eq_ignore_ascii_case("true")))
        });
        unmapped.extend(mc.rest("metrics"));
    }
    if let Some(bridge) = stored.bridge_attempted {
        record.symbolic.bridge_attempted = bridge;
    }

    unmapped.extend(cur.rest(""));
    let graph = std::mem::replace(&mut imp.graph, ConceptGraph::new(""));
    let mut graph_json = serde_json::to_value(&graph)?;
    graph_json["query_id"] = Value::String(query_id);
    record.snapshot(GraphStage::Imported, &serde_json::from_value(graph_json)?);
    record.report = Some(recompute_report(&record));
    Ok(AdaptedTrace {
        record,
        stored,
        unmapped_fields: unmapped,
    })
}

/// Released traces under `path`: a single JSON file, or every JSON file in
/// a directory and its immediate subdirectories, sorted by path.
pub fn released_trace_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(path)? {
        let p = entry?.path();
        if p.is_dir() {
            for inner in std::fs::read_dir(&p)? {
                let q = inner?.path();
                if q.extension().is_some_and(|x| x == "json") {
                    out.push(q);
                }
            }
        } else if p.extension().is_some_and(|x| x == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_released(path: &Path) -> Result<AdaptedTrace> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::MalformedTrace {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let fallback = if stem == "trace" {
        path.parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
            .unwrap_or(stem)
    } else {
        stem
    };
    adapt_released(&value, fallback)
}
