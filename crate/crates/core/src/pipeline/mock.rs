//! Deterministic offline clients backed by a fixture corpus with gold
//! annotations.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::client::{ClientError, ClientMode, ClientSuite, LanguageModel, LlmRequest, Retriever, SearchRequest};
use super::stages::Extraction;
use super::Document;
use crate::error::{Error, Result};
use crate::graph::tokens;
use crate::strategies::{query_terms, term_matches};

const CONTROVERSY_TERMS: &[&str] = &["controversy", "controversial", "limitation", "limitations"];

macro_rules! bundled {
    ($($id:literal),*) => {
        &[$((
            include_str!(concat!("../../fixtures/corpus/", $id, ".json")),
            include_str!(concat!("../../fixtures/corpus/", $id, ".gold.json")),
        )),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!("d01", "d02", "d03", "d04", "d05", "d06", "d07", "d08", "d09", "d10", "d11", "d12");
const BUNDLED_DENSIFY: &str = include_str!("../../fixtures/corpus/densify.gold.json");

/// Documents plus gold extraction and densification annotations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureCorpus {
    pub documents: Vec<Document>,
    pub extractions: BTreeMap<String, Extraction>,
    pub densify: Value,
}

impl FixtureCorpus {
    /// The synthetic microbiome/neurodevelopment corpus shipped with the crate.
    pub fn bundled() -> Self {
        let mut corpus = FixtureCorpus {
            densify: serde_json::from_str(BUNDLED_DENSIFY).expect("bundled densify fixture"),
            ..Default::default()
        };
        for (doc, gold) in BUNDLED {
            let doc: Document = serde_json::from_str(doc).expect("bundled document");
            let gold: Extraction = serde_json::from_str(gold).expect("bundled gold");
            corpus.extractions.insert(doc.doc_id.clone(), gold);
            corpus.documents.push(doc);
        }
        corpus
    }

    /// Reads `NAME.json` documents with optional `NAME.gold.json` sidecars
    /// and an optional `densify.gold.json`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut corpus = FixtureCorpus {
            densify: json!({"relations": []}),
            ..Default::default()
        };
        let mut names: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        names.sort();
        for path in names {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name == "densify.gold.json" {
                corpus.densify = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
                continue;
            }
            if name.ends_with(".gold.json") {
                continue;
            }
            let doc: Document = serde_json::from_str(&std::fs::read_to_string(&path)?)
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
            let gold = path.with_file_name(name.replace(".json", ".gold.json"));
            if gold.exists() {
                let extraction: Extraction = serde_json::from_str(&std::fs::read_to_string(&gold)?)?;
                corpus.extractions.insert(doc.doc_id.clone(), extraction);
            }
            corpus.documents.push(doc);
        }
        Ok(corpus)
    }

    pub fn suite(self) -> ClientSuite {
        self.suite_with(Realizer::default())
    }

    pub fn suite_with(self, realizer: Realizer) -> ClientSuite {
        let corpus = Arc::new(self);
        ClientSuite::uniform(
            Arc::new(MockLanguageModel {
                corpus: corpus.clone(),
                realizer,
            }),
            Arc::new(FixtureRetriever { corpus }),
            ClientMode::Mock,
        )
    }
}

/// Ranks fixture documents by how many expression terms their text
/// contains; documents matching nothing are not returned.
#[derive(Clone, Debug)]
pub struct FixtureRetriever {
    pub corpus: Arc<FixtureCorpus>,
}

fn expression_terms(expression: &str) -> Vec<String> {
    expression
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !matches!(*t, "AND" | "OR" | "NOT"))
        .map(str::to_lowercase)
        .collect()
}

impl Retriever for FixtureRetriever {
    fn search(&self, _call_id: &str, request: &SearchRequest) -> std::result::Result<Vec<Document>, ClientError> {
        let mut terms = expression_terms(&request.expression);
        let controversy = terms.iter().any(|t| CONTROVERSY_TERMS.contains(&t.as_str()));
        terms.retain(|t| !CONTROVERSY_TERMS.contains(&t.as_str()));
        let mut scored: Vec<(usize, &Document)> = self
            .corpus
            .documents
            .iter()
            .filter_map(|d| {
                let text = format!("{} {}", d.full_text(), d.retrieval_keywords.join(" "));
                let doc_tokens = tokens(&text);
                if controversy && !doc_tokens.iter().any(|t| CONTROVERSY_TERMS.contains(&t.as_str())) {
                    return None;
                }
                let hits = terms
                    .iter()
                    .filter(|t| doc_tokens.iter().any(|tok| term_matches(t, tok)))
                    .count();
                (hits > 0 || terms.is_empty()).then_some((hits, d))
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.doc_id.cmp(&b.1.doc_id)));
        Ok(scored.into_iter().take(request.limit).map(|(_, d)| d.clone()).collect())
    }
}

/// How the mock synthesis client turns a reasoning path into a stated
/// causal chain. It is a deliberately limited verbalizer: it keeps the
/// chain only up to the last node that still bears on the query, and at
/// most `max_chain_nodes` nodes of that.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realizer {
    pub max_chain_nodes: usize,
    pub anchor_to_query: bool,
}

impl Default for Realizer {
    fn default() -> Self {
        Self {
            max_chain_nodes: 5,
            anchor_to_query: true,
        }
    }
}

impl Realizer {
    /// Same labels, no loss.
    pub fn faithful() -> Self {
        Self {
            max_chain_nodes: usize::MAX,
            anchor_to_query: false,
        }
    }

    pub fn realize(&self, query: &str, labels: &[String]) -> Vec<String> {
        let mut chain = labels.to_vec();
        if self.anchor_to_query && !chain.is_empty() {
            let terms = query_terms(query);
            let relevant = |label: &String| {
                tokens(label)
                    .iter()
                    .any(|tok| terms.iter().any(|t| term_matches(t, tok)))
            };
            let last = chain.iter().skip(1).rposition(relevant).map_or(0, |i| i + 1);
            chain.truncate(last + 1);
        }
        chain.truncate(self.max_chain_nodes);
        chain
    }
}

/// Answers every language-model role from the fixture and the payload.
#[derive(Clone, Debug)]
pub struct MockLanguageModel {
    pub corpus: Arc<FixtureCorpus>,
    pub realizer: Realizer,
}

impl LanguageModel for MockLanguageModel {
    fn complete(&self, _call_id: &str, request: &LlmRequest) -> std::result::Result<String, ClientError> {
        let payload = request
            .payload()
            .ok_or_else(|| ClientError::Failure("mock client expects a JSON payload".into()))?;
        let out = match payload["task"].as_str().unwrap_or_default() {
            "refine" => return Ok(query_terms(payload["query"].as_str().unwrap_or_default()).join(" AND ")),
            "extract" => {
                let doc_id = payload["doc_id"].as_str().unwrap_or_default();
                let gold = self.corpus.extractions.get(doc_id).cloned().unwrap_or_default();
                serde_json::to_value(gold).expect("extraction serializes")
            }
            "densify" => self.corpus.densify.clone(),
            "explore" => default_exploration(&payload),
            "synthesize" => self.synthesize(&payload),
            other => return Err(ClientError::Failure(format!("mock client has no task `{other}`"))),
        };
        Ok(out.to_string())
    }
}

impl MockLanguageModel {
    fn synthesize(&self, payload: &Value) -> Value {
        let query = payload["query"].as_str().unwrap_or_default();
        let n = payload["n"].as_u64().unwrap_or(3) as usize;
        let paths = payload["paths"].as_array().cloned().unwrap_or_default();
        let hypotheses: Vec<Value> = if paths.is_empty() {
            payload["documents"]
                .as_array()
                .into_iter()
                .flatten()
                .take(n)
                .map(|doc| {
                    let title = doc["title"].as_str().unwrap_or_default();
                    let chain: Vec<String> = tokens(title).into_iter().filter(|t| t.len() > 3).take(3).collect();
                    json!({
                        "statement": format!("Findings summarized in \"{title}\" may bear on the question."),
                        "causal_chain": chain,
                        "evidence_summary": format!("Drawn from the text of {}.", doc["doc_id"].as_str().unwrap_or_default()),
                        "scores": {"novelty": 0.4, "feasibility": 0.8, "testability": 0.6},
                        "evidence": [{"doc_id": doc["doc_id"]}],
                    })
                })
                .collect()
        } else {
            paths
                .iter()
                .take(n)
                .map(|p| {
                    let labels: Vec<String> = serde_json::from_value(p["labels"].clone()).unwrap_or_default();
                    let chain = self.realizer.realize(query, &labels);
                    let hops = chain.len().saturating_sub(1) as f64;
                    let statement = match chain.as_slice() {
                        [] => "No mechanism could be stated.".to_string(),
                        [only] => format!("Evidence is insufficient to link {only} mechanistically to the question."),
                        [first, last] => format!("{first} may directly influence {last}."),
                        [first, mid @ .., last] => format!("{first} may influence {last} through {}.", mid.join(", then ")),
                    };
                    json!({
                        "statement": statement,
                        "causal_chain": chain,
                        "evidence_summary": format!("Supported by {} document(s) along the path.", p["evidence_docs"].as_array().map_or(0, Vec::len)),
                        "scores": {
                            "novelty": (0.5 + 0.08 * hops).min(0.95),
                            "feasibility": (0.9 - 0.05 * hops).max(0.3),
                            "testability": (0.85 - 0.04 * hops).max(0.3),
                        },
                        "evidence": p["evidence_docs"].clone(),
                    })
                })
                .collect()
        };
        json!({ "hypotheses": hypotheses })
    }
}

/// Centrality, then the first endpoint's neighbors and paths, then the
/// structural holes, then stop.
fn default_exploration(payload: &Value) -> Value {
    let turn = payload["turn"].as_u64().unwrap_or(0);
    let first = payload["endpoints"].get(0);
    let source = first.and_then(|p| p.get(0)).cloned();
    let target = first.and_then(|p| p.get(1)).cloned();
    match (turn, source, target) {
        (0, _, _) => json!({"tool": "centrality", "args": {"top": 5}}),
        (1, Some(s), _) => json!({"tool": "get_neighbors", "args": {"node": s, "direction": "out"}}),
        (2, Some(s), Some(t)) => json!({"tool": "find_paths", "args": {"source": s, "target": t, "max_hops": 4, "max_results": 3}}),
        (1..=3, _, _) => json!({"tool": "structural_holes", "args": {"top": 3}}),
        _ => json!({"tool": "stop"}),
    }
}

/// Replays a fixed list of agent actions, then stops.
#[derive(Clone, Debug, Default)]
pub struct ScriptedAgent {
    script: Vec<Value>,
}

impl ScriptedAgent {
    pub fn new(script: Vec<Value>) -> Self {
        Self { script }
    }
}

impl LanguageModel for ScriptedAgent {
    fn complete(&self, _call_id: &str, request: &LlmRequest) -> std::result::Result<String, ClientError> {
        let turn = request.payload().and_then(|p| p["turn"].as_u64()).unwrap_or(0) as usize;
        Ok(self
            .script
            .get(turn)
            .cloned()
            .unwrap_or_else(|| json!({"tool": "stop"}))
            .to_string())
    }
}
