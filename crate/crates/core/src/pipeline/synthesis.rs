//! Hypothesis realization: the synthesis client turns reasoning paths into
//! hypotheses, which are parsed, validated and clamped here.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use super::client::{build_request, parse_json_object, ClientKind, Journal, LanguageModel};
use super::explore::{ExplorationRecord, ToolOutcome};
use super::{prompts, Document, EvidenceRef, Hypothesis, LlmSettings, Stance, StanceCounts};
use crate::error::{Error, Result};
use crate::graph::ConceptGraph;
use crate::trace::TraceEvent;
use crate::traversal::ReasoningPath;

const EXCERPT_CHARS: usize = 400;

const UNCERTAINTY_PHRASES: &[&str] = &[
    "may", "might", "could", "possibly", "potentially", "plausibly", "speculative", "uncertain",
    "insufficient evidence", "remains unclear",
];

pub struct SynthesisInput<'a> {
    pub query: &'a str,
    pub graph: &'a ConceptGraph,
    pub paths: &'a [ReasoningPath],
    pub exploration: Option<&'a ExplorationRecord>,
    pub corpus: &'a [Document],
    /// Per-document stance tallies from extraction, used when the
    /// synthesis client cites evidence without a stance.
    pub stances: &'a BTreeMap<String, StanceCounts>,
    pub n: usize,
}

/// Document ids supporting any edge of the path, sorted.
pub fn path_evidence(graph: &ConceptGraph, path: &ReasoningPath) -> Vec<String> {
    let mut docs = BTreeSet::new();
    for w in path.nodes.windows(2) {
        for e in graph.edges().filter(|e| e.source == w[0] && e.target == w[1]) {
            docs.extend(e.evidence.iter().map(|ev| ev.doc_id.clone()));
        }
    }
    docs.into_iter().collect()
}

fn excerpt(text: &str) -> String {
    text.chars().take(EXCERPT_CHARS).collect()
}

pub fn synthesis_payload(input: &SynthesisInput<'_>) -> Value {
    let paths: Vec<Value> = input
        .paths
        .iter()
        .map(|p| {
            json!({
                "labels": p.labels(input.graph),
                "evidence_docs": path_evidence(input.graph, p),
            })
        })
        .collect();
    let exploration: Vec<Value> = input
        .exploration
        .map(|r| {
            r.calls
                .iter()
                .filter_map(|c| match &c.outcome {
                    ToolOutcome::Ok { output } => Some(json!({"tool": c.tool, "args": c.args, "result": output})),
                    ToolOutcome::Error { .. } => None,
                })
                .collect()
        })
        .unwrap_or_default();
    let documents: Vec<Value> = input
        .corpus
        .iter()
        .map(|d| json!({"doc_id": d.doc_id, "title": d.title, "excerpt": excerpt(&d.abstract_or_body)}))
        .collect();
    json!({
        "task": "synthesize",
        "query": input.query,
        "n": input.n,
        "paths": paths,
        "exploration": exploration,
        "documents": documents,
    })
}

pub fn synthesize_hypotheses(
    input: &SynthesisInput<'_>,
    client: &dyn LanguageModel,
    llm: &LlmSettings,
    journal: &mut Journal,
) -> Result<Vec<Hypothesis>> {
    if input.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let request = build_request(&llm.model, llm.temperature, prompts::SYNTHESIS, &synthesis_payload(input));
    let raw = journal.complete(client, ClientKind::Synthesis, "synthesize", request)?;
    let items = match parse_json_object(&raw) {
        Some(Value::Object(mut obj)) => match obj.remove("hypotheses") {
            Some(Value::Array(items)) => items,
            _ => Vec::new(),
        },
        _ => Vec::new(),
    };
    if items.is_empty() {
        journal.event(TraceEvent::UnparseableOutput {
            stage: "synthesis".into(),
            call_id: "synthesize".into(),
        });
        return Ok(Vec::new());
    }

    let known_docs: BTreeSet<&str> = input.corpus.iter().map(|d| d.doc_id.as_str()).collect();
    let mut out = Vec::new();
    for (index, item) in items.into_iter().enumerate() {
        if out.len() == input.n {
            journal.event(TraceEvent::HypothesisDropped {
                index,
                reason: format!("beyond the requested {}", input.n),
            });
            continue;
        }
        match parse_item(&item, out.len(), &known_docs, input.stances, journal) {
            Ok(h) => out.push(h),
            Err(reason) => journal.event(TraceEvent::HypothesisDropped { index, reason }),
        }
    }
    Ok(out)
}

fn parse_item(
    item: &Value,
    position: usize,
    known_docs: &BTreeSet<&str>,
    stances: &BTreeMap<String, StanceCounts>,
    journal: &mut Journal,
) -> std::result::Result<Hypothesis, String> {
    let statement = item
        .get("statement")
        .or_else(|| item.get("hypothesis"))
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or("missing statement")?
        .to_string();
    let causal_chain = match item.get("causal_chain") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(xs)) => xs
            .iter()
            .map(|x| x.as_str().map(|s| s.trim().to_string()).ok_or("causal_chain holds a non-string"))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        Some(_) => return Err("causal_chain is not a list".into()),
    };
    let evidence_summary = item
        .get("evidence_summary")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();

    let mut score = |field: &str| -> std::result::Result<f64, String> {
        let raw = item
            .get("scores")
            .and_then(|s| s.get(field))
            .or_else(|| item.get(format!("{field}_score")))
            .and_then(Value::as_f64)
            .ok_or_else(|| format!("missing {field} score"))?;
        let clamped = raw.clamp(0.0, 1.0);
        if clamped != raw {
            journal.event(TraceEvent::ScoreClamped {
                hypothesis: position,
                field: field.to_string(),
                original: raw,
                clamped,
            });
        }
        Ok(clamped)
    };
    let novelty_score = score("novelty")?;
    let feasibility_score = score("feasibility")?;
    let testability_score = score("testability")?;

    let mut evidence = Vec::new();
    let mut stance_counts = StanceCounts::default();
    for ev in item.get("evidence").and_then(Value::as_array).into_iter().flatten() {
        let (doc_id, stance) = match ev {
            Value::String(id) => (id.clone(), None),
            Value::Object(o) => (
                o.get("doc_id").and_then(Value::as_str).unwrap_or_default().to_string(),
                o.get("stance").and_then(|s| serde_json::from_value::<Stance>(s.clone()).ok()),
            ),
            _ => continue,
        };
        if !known_docs.contains(doc_id.as_str()) {
            journal.event(TraceEvent::EvidenceDropped {
                hypothesis: position,
                doc_id,
            });
            continue;
        }
        if evidence.iter().any(|e: &EvidenceRef| e.doc_id == doc_id) {
            continue;
        }
        let stance = stance.unwrap_or_else(|| stances.get(&doc_id).map_or(Stance::Neutral, StanceCounts::dominant));
        stance_counts.add(stance);
        evidence.push(EvidenceRef { doc_id, stance });
    }

    Ok(Hypothesis {
        uncertainty_markers: uncertainty_markers(&statement),
        statement,
        causal_chain,
        evidence_summary,
        novelty_score,
        feasibility_score,
        testability_score,
        stance_counts,
        evidence,
    })
}

/// Hedging phrases present in a statement, in list order.
pub fn uncertainty_markers(statement: &str) -> Vec<String> {
    let lower = statement.to_lowercase();
    let words: BTreeSet<&str> = lower.split(|c: char| !c.is_alphanumeric()).collect();
    UNCERTAINTY_PHRASES
        .iter()
        .filter(|p| if p.contains(' ') { lower.contains(*p) } else { words.contains(*p) })
        .map(|p| p.to_string())
        .collect()
}
