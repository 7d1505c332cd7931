//! Corpus and graph construction stages: refinement, retrieval, extraction
//! with the verbatim-span guard, and densification with the no-new-entity
//! guard.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::client::{build_request, parse_json_object, ClientKind, Journal, LanguageModel, Retriever, SearchRequest};
use super::{prompts, Document, LlmSettings, Stance, StanceCounts};
use crate::error::{Error, Result};
use crate::graph::{ConceptGraph, EdgeOrigin, Evidence};
use crate::trace::TraceEvent;

/// Appended to the refined expression for the controversy-targeted query.
pub const CONTROVERSY_SUFFIX: &str = "AND (controversy OR limitation)";

pub fn refine_query(query: &str, client: &dyn LanguageModel, llm: &LlmSettings, journal: &mut Journal) -> Result<String> {
    if query.trim().is_empty() {
        return Err(Error::InvalidArgument("query must not be empty".into()));
    }
    let payload = json!({"task": "refine", "query": query.trim()});
    let request = build_request(&llm.model, llm.temperature, prompts::REFINEMENT, &payload);
    let text = journal.complete(client, ClientKind::Refinement, "refine", request)?;
    let expression = text
        .lines()
        .map(|l| l.trim().trim_matches('`').trim())
        .find(|l| !l.is_empty())
        .unwrap_or_default()
        .to_string();
    if expression.is_empty() {
        return Err(Error::Client {
            stage: "refinement".into(),
            message: "empty search expression".into(),
        });
    }
    Ok(expression)
}

#[derive(Clone, Copy, Debug)]
pub struct RetrievalSettings {
    pub max_papers: usize,
    pub controversy_augment: bool,
    pub controversy_fraction: f64,
}

/// Primary results first, then controversy results in their reserved slots,
/// then any remaining primary results; de-duplicated by `doc_id`.
pub fn retrieve(
    expression: &str,
    client: &dyn Retriever,
    settings: RetrievalSettings,
    journal: &mut Journal,
) -> Result<Vec<Document>> {
    let max = settings.max_papers;
    if max == 0 {
        return Err(Error::InvalidArgument("max_papers must be at least 1".into()));
    }
    let reserved = if settings.controversy_augment {
        ((max as f64) * settings.controversy_fraction).round() as usize
    } else {
        0
    }
    .min(max);

    let primary = journal.search(
        client,
        "retrieve:primary",
        SearchRequest {
            expression: expression.to_string(),
            limit: max,
        },
    )?;
    let secondary = if reserved > 0 {
        journal.search(
            client,
            "retrieve:controversy",
            SearchRequest {
                expression: format!("{expression} {CONTROVERSY_SUFFIX}"),
                limit: reserved,
            },
        )?
    } else {
        Vec::new()
    };

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |doc: &Document, out: &mut Vec<Document>| {
        if out.len() < max && !doc.doc_id.trim().is_empty() && seen.insert(doc.doc_id.clone()) {
            out.push(doc.clone());
        }
    };
    let secondary: Vec<&Document> = secondary.iter().take(reserved).collect();
    let mut primary_iter = primary.iter();
    while out.len() + secondary.len() < max {
        match primary_iter.next() {
            Some(doc) => push(doc, &mut out),
            None => break,
        }
    }
    for doc in secondary {
        push(doc, &mut out);
    }
    for doc in primary_iter {
        push(doc, &mut out);
    }
    if out.is_empty() {
        journal.event(TraceEvent::RetrievalEmpty {
            expression: expression.to_string(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptMention {
    pub label: String,
    pub span: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationMention {
    pub source: String,
    pub target: String,
    pub relation: String,
    pub span: String,
    #[serde(default)]
    pub stance: Option<Stance>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    #[serde(default)]
    pub concepts: Vec<ConceptMention>,
    #[serde(default)]
    pub relations: Vec<RelationMention>,
}

fn is_verbatim(span: &str, text: &str) -> bool {
    let span = span.trim();
    !span.is_empty() && text.contains(span)
}

/// Runs the extraction client on one document and keeps only items whose
/// spans occur verbatim in the document text.
pub fn extract_concepts(
    document: &Document,
    client: &dyn LanguageModel,
    llm: &LlmSettings,
    journal: &mut Journal,
) -> Result<Extraction> {
    let text = document.full_text();
    if document.abstract_or_body.trim().is_empty() {
        return Ok(Extraction::default());
    }
    let payload = json!({
        "task": "extract",
        "doc_id": document.doc_id,
        "title": document.title,
        "text": document.abstract_or_body,
    });
    let request = build_request(&llm.model, llm.temperature, prompts::EXTRACTION, &payload);
    let call_id = format!("extract:{}", document.doc_id);
    let raw = journal.complete(client, ClientKind::Extraction, &call_id, request)?;
    let proposed: Extraction = match parse_json_object(&raw).map(serde_json::from_value) {
        Some(Ok(e)) => e,
        _ => {
            journal.event(TraceEvent::UnparseableOutput {
                stage: "extraction".into(),
                call_id,
            });
            return Ok(Extraction::default());
        }
    };

    let reject = |journal: &mut Journal, item: String, reason: &str| {
        journal.event(TraceEvent::FabricationRejected {
            doc_id: document.doc_id.clone(),
            item,
            reason: reason.to_string(),
        });
    };

    let mut out = Extraction::default();
    let mut known = BTreeSet::new();
    for mut concept in proposed.concepts {
        if concept.label.trim().is_empty() {
            reject(journal, format!("concept `{}`", concept.label), "empty label");
        } else if !is_verbatim(&concept.span, &text) {
            reject(journal, format!("concept `{}`", concept.label), "span not found in document");
        } else {
            concept.span = concept.span.trim().to_string();
            known.insert(concept.label.trim().to_lowercase());
            known.extend(concept.aliases.iter().map(|a| a.trim().to_lowercase()));
            out.concepts.push(concept);
        }
    }
    for mut rel in proposed.relations {
        let item = format!("relation `{}` -> `{}`", rel.source, rel.target);
        let src = rel.source.trim().to_lowercase();
        let dst = rel.target.trim().to_lowercase();
        if !is_verbatim(&rel.span, &text) {
            reject(journal, item, "span not found in document");
        } else if !known.contains(&src) || !known.contains(&dst) {
            reject(journal, item, "endpoint is not an extracted concept");
        } else if src == dst {
            reject(journal, item, "self-referential relation");
        } else {
            rel.span = rel.span.trim().to_string();
            out.relations.push(rel);
        }
    }
    Ok(out)
}

/// Builds the raw graph from per-document extractions in `doc_id` order.
pub fn assemble_graph(query_id: &str, extractions: &BTreeMap<String, Extraction>) -> Result<ConceptGraph> {
    let mut graph = ConceptGraph::new(query_id);
    for (doc_id, extraction) in extractions {
        for concept in &extraction.concepts {
            graph.add_concept(&concept.label, concept.aliases.iter().cloned(), [doc_id.clone()])?;
        }
        for rel in &extraction.relations {
            let (Some(s), Some(t)) = (graph.find_by_label(&rel.source), graph.find_by_label(&rel.target)) else {
                continue;
            };
            if s == t {
                continue;
            }
            let label = if rel.relation.trim().is_empty() { "related to" } else { &rel.relation };
            graph.add_relation(s, t, label, vec![Evidence::new(doc_id.clone(), rel.span.clone())])?;
        }
    }
    Ok(graph)
}

/// Per-document stance tallies over extracted relations; unlabeled
/// relations count as neutral.
pub fn stance_index(extractions: &BTreeMap<String, Extraction>) -> BTreeMap<String, StanceCounts> {
    extractions
        .iter()
        .map(|(doc_id, e)| {
            let mut counts = StanceCounts::default();
            for rel in &e.relations {
                counts.add(rel.stance.unwrap_or(Stance::Neutral));
            }
            (doc_id.clone(), counts)
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensifyProposal {
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub relation: String,
    pub doc_id: String,
    pub span: String,
}

#[derive(Deserialize)]
struct DensifyOutput {
    #[serde(default)]
    relations: Vec<DensifyProposal>,
}

/// Adds client-proposed relations between existing nodes only. The node
/// set is never touched, whatever the client returns.
pub fn densify(
    graph: &ConceptGraph,
    corpus: &[Document],
    client: &dyn LanguageModel,
    llm: &LlmSettings,
    journal: &mut Journal,
) -> Result<ConceptGraph> {
    let mut out = graph.clone();
    if graph.node_count() < 2 {
        return Ok(out);
    }
    let concepts: Vec<&str> = graph.nodes().map(|n| n.canonical_label.as_str()).collect();
    let documents: Vec<_> = corpus
        .iter()
        .map(|d| json!({"doc_id": d.doc_id, "text": d.full_text()}))
        .collect();
    let payload = json!({"task": "densify", "concepts": concepts, "documents": documents});
    let request = build_request(&llm.model, llm.temperature, prompts::DENSIFICATION, &payload);
    let raw = journal.complete(client, ClientKind::Extraction, "densify", request)?;
    let proposals = match parse_json_object(&raw).map(serde_json::from_value::<DensifyOutput>) {
        Some(Ok(o)) => o.relations,
        _ => {
            journal.event(TraceEvent::UnparseableOutput {
                stage: "densification".into(),
                call_id: "densify".into(),
            });
            return Ok(out);
        }
    };

    let texts: BTreeMap<&str, String> = corpus.iter().map(|d| (d.doc_id.as_str(), d.full_text())).collect();
    for p in proposals {
        let mut reject = |reason: String| {
            journal.event(TraceEvent::DensificationRejected {
                source: p.source.clone(),
                target: p.target.clone(),
                reason,
            })
        };
        let source = graph.find_by_label(&p.source);
        let target = graph.find_by_label(&p.target);
        let (s, t) = match (source, target) {
            (Some(s), Some(t)) => (s, t),
            (None, _) => {
                reject(format!("unknown entity `{}`", p.source));
                continue;
            }
            (_, None) => {
                reject(format!("unknown entity `{}`", p.target));
                continue;
            }
        };
        if s == t {
            reject("self-referential relation".into());
            continue;
        }
        match texts.get(p.doc_id.as_str()) {
            None => reject(format!("unknown document `{}`", p.doc_id)),
            Some(text) if !is_verbatim(&p.span, text) => reject("span not found in document".into()),
            Some(_) => {
                let label = if p.relation.trim().is_empty() { "related to" } else { &p.relation };
                out.add_relation_with_origin(
                    s,
                    t,
                    label,
                    vec![Evidence::new(p.doc_id.clone(), p.span.trim())],
                    EdgeOrigin::Densification,
                )?;
            }
        }
    }
    debug_assert_eq!(out.node_count(), graph.node_count());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::client::{ClientError, LlmRequest};
    use crate::pipeline::DocumentSource;

    struct Fixed(String);

    impl LanguageModel for Fixed {
        fn complete(&self, _: &str, _: &LlmRequest) -> Result<String, ClientError> {
            Ok(self.0.clone())
        }
    }

    struct Docs(Vec<Document>);

    impl Retriever for Docs {
        fn search(&self, _: &str, req: &SearchRequest) -> Result<Vec<Document>, ClientError> {
            let controversy = req.expression.contains("controversy");
            Ok(self
                .0
                .iter()
                .filter(|d| !controversy || d.retrieval_keywords.iter().any(|k| k == "controversy"))
                .take(req.limit)
                .cloned()
                .collect())
        }
    }

    fn doc(id: &str, body: &str) -> Document {
        Document {
            doc_id: id.into(),
            title: format!("title {id}"),
            abstract_or_body: body.into(),
            source: DocumentSource::LocalFixture,
            retrieval_keywords: vec![],
        }
    }

    fn settings(max: usize, augment: bool) -> RetrievalSettings {
        RetrievalSettings {
            max_papers: max,
            controversy_augment: augment,
            controversy_fraction: 0.3,
        }
    }

    fn llm() -> LlmSettings {
        LlmSettings {
            model: "m".into(),
            temperature: 0.0,
        }
    }

    fn rejections(journal: &Journal) -> usize {
        journal
            .events
            .iter()
            .filter(|e| matches!(e, TraceEvent::FabricationRejected { .. }))
            .count()
    }

    #[test]
    fn refine_rejects_empty_query() {
        let mut j = Journal::new();
        assert!(refine_query("  ", &Fixed("x".into()), &llm(), &mut j).is_err());
        assert!(j.exchanges.is_empty());
    }

    #[test]
    fn refine_takes_first_line() {
        let mut j = Journal::new();
        let e = refine_query("q", &Fixed("\n`a AND b`\nnotes".into()), &llm(), &mut j).unwrap();
        assert_eq!(e, "a AND b");
        assert_eq!(j.exchanges.len(), 1);
    }

    #[test]
    fn retrieve_small_corpus_returns_all() {
        let docs = Docs((0..3).map(|i| doc(&format!("d{i}"), "x")).collect());
        let got = retrieve("x", &docs, settings(10, false), &mut Journal::new()).unwrap();
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn retrieve_caps_deterministically() {
        let docs = Docs((0..15).map(|i| doc(&format!("d{i:02}"), "x")).collect());
        let a = retrieve("x", &docs, settings(10, false), &mut Journal::new()).unwrap();
        let b = retrieve("x", &docs, settings(10, false), &mut Journal::new()).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
    }

    #[test]
    fn controversy_slots_admit_tagged_docs() {
        let mut all: Vec<Document> = (0..15).map(|i| doc(&format!("d{i:02}"), "x")).collect();
        all[14].retrieval_keywords = vec!["controversy".into()];
        let got = retrieve("x", &Docs(all), settings(10, true), &mut Journal::new()).unwrap();
        assert_eq!(got.len(), 10);
        assert!(got.iter().any(|d| d.doc_id == "d14"));
        let ids: BTreeSet<_> = got.iter().map(|d| &d.doc_id).collect();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn empty_retrieval_logs_event() {
        let mut j = Journal::new();
        let got = retrieve("x", &Docs(vec![]), settings(10, true), &mut j).unwrap();
        assert!(got.is_empty());
        assert!(j.events.iter().any(|e| matches!(e, TraceEvent::RetrievalEmpty { .. })));
    }

    #[test]
    fn off_document_span_is_rejected() {
        let d = doc("d1", "Dysbiosis increases permeability.");
        let out = r#"{"concepts": [
            {"label": "dysbiosis", "span": "Dysbiosis increases permeability."},
            {"label": "permeability", "span": "Dysbiosis increases permeability."},
            {"label": "unicorns", "span": "Unicorns cause everything."}],
          "relations": [{"source": "dysbiosis", "target": "permeability", "relation": "increases",
                         "span": "Dysbiosis increases permeability."}]}"#;
        let mut j = Journal::new();
        let e = extract_concepts(&d, &Fixed(out.into()), &llm(), &mut j).unwrap();
        assert_eq!(e.concepts.len(), 2);
        assert_eq!(e.relations.len(), 1);
        assert_eq!(rejections(&j), 1);
    }

    #[test]
    fn relation_to_unextracted_concept_is_rejected() {
        let d = doc("d1", "A causes B.");
        let out = r#"{"concepts": [{"label": "A", "span": "A causes B."}],
          "relations": [{"source": "A", "target": "B", "relation": "causes", "span": "A causes B."}]}"#;
        let mut j = Journal::new();
        let e = extract_concepts(&d, &Fixed(out.into()), &llm(), &mut j).unwrap();
        assert!(e.relations.is_empty());
        assert_eq!(rejections(&j), 1);
    }

    #[test]
    fn empty_document_yields_nothing() {
        let mut j = Journal::new();
        let e = extract_concepts(&doc("d1", ""), &Fixed("{}".into()), &llm(), &mut j).unwrap();
        assert_eq!(e, Extraction::default());
        assert!(j.exchanges.is_empty());
    }

    #[test]
    fn unparseable_extraction_is_logged() {
        let mut j = Journal::new();
        let e = extract_concepts(&doc("d1", "text"), &Fixed("sorry".into()), &llm(), &mut j).unwrap();
        assert_eq!(e, Extraction::default());
        assert!(matches!(j.events[0], TraceEvent::UnparseableOutput { .. }));
    }

    fn two_node_graph() -> (ConceptGraph, Vec<Document>) {
        let mut g = ConceptGraph::new("q");
        let a = g.add_node("alpha").unwrap();
        let b = g.add_node("beta").unwrap();
        let c = g.add_node("gamma").unwrap();
        g.add_relation(a, b, "r", vec![Evidence::new("d1", "alpha beta")]).unwrap();
        let _ = c;
        (g, vec![doc("d1", "alpha beta. Gamma follows beta.")])
    }

    #[test]
    fn densify_adds_edge_between_existing_nodes() {
        let (g, corpus) = two_node_graph();
        let out = r#"{"relations": [{"source": "Beta", "target": "gamma", "relation": "precedes",
                       "doc_id": "d1", "span": "Gamma follows beta."}]}"#;
        let dense = densify(&g, &corpus, &Fixed(out.into()), &llm(), &mut Journal::new()).unwrap();
        assert_eq!(dense.edge_count(), 2);
        assert_eq!(dense.node_count(), g.node_count());
        let e = dense.edges().find(|e| e.relation_label == "precedes").unwrap();
        assert_eq!(e.origin, EdgeOrigin::Densification);
    }

    #[test]
    fn densify_drops_novel_entities() {
        let (g, corpus) = two_node_graph();
        let out = r#"{"relations": [
            {"source": "beta", "target": "delta", "doc_id": "d1", "span": "Gamma follows beta."},
            {"source": "beta", "target": "gamma", "doc_id": "d1", "span": "made up"},
            {"source": "beta", "target": "gamma", "doc_id": "d9", "span": "Gamma follows beta."}]}"#;
        let mut j = Journal::new();
        let dense = densify(&g, &corpus, &Fixed(out.into()), &llm(), &mut j).unwrap();
        assert_eq!(dense, g);
        assert_eq!(j.events.len(), 3);
    }

    #[test]
    fn assemble_merges_case_variants() {
        let mut ex = BTreeMap::new();
        ex.insert(
            "d1".to_string(),
            Extraction {
                concepts: vec![
                    ConceptMention {
                        label: "Neuroinflammation".into(),
                        span: "s".into(),
                        aliases: vec![],
                    },
                    ConceptMention {
                        label: "autism".into(),
                        span: "s".into(),
                        aliases: vec![],
                    },
                ],
                relations: vec![RelationMention {
                    source: "neuroinflammation".into(),
                    target: "Autism".into(),
                    relation: "contributes to".into(),
                    span: "s".into(),
                    stance: Some(Stance::Contradict),
                }],
            },
        );
        let g = assemble_graph("q", &ex).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 1));
        assert_eq!(stance_index(&ex)["d1"].contradict, 1);
    }
}
