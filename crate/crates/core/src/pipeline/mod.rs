//! End-to-end query execution. Every external call goes through a client in
//! [`ClientSuite`]; every guard that matters is enforced here, not in the
//! prompts.

mod client;
pub mod explore;
pub mod live;
pub mod mock;
pub mod prompts;
pub mod recorded;
pub mod stages;
pub mod synthesis;

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use client::{
    build_request, parse_json_object, ClientError, ClientKind, ClientMode, ClientSuite, Exchange, Journal,
    LanguageModel, LlmRequest, Message, Retriever, Role, SearchRequest,
};
pub use explore::{explore, ExplorationRecord, ExploreContext, ToolCall, ToolOutcome};
pub use mock::{FixtureCorpus, FixtureRetriever, MockLanguageModel, Realizer, ScriptedAgent};
pub use recorded::RecordedClient;
pub use stages::{densify, extract_concepts, refine_query, retrieve, Extraction, RetrievalSettings};
pub use synthesis::{synthesize_hypotheses, SynthesisInput};

use crate::community::{louvain, structural_holes};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{cleanup, normalize, ConceptGraph};
use crate::metrics::{build_report, concept_set, ground_chain, BehavioralReport, ReportInputs};
use crate::strategies::{query_terms, run_strategy, select_endpoints, StrategyKind, SymbolicResult};
use crate::trace::{GraphStage, RunStatus, TraceEvent, TraceRecord};
use crate::traversal::{inject_lens, EdgeWeights};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentSource {
    ScholarlyApi,
    WebSearch,
    LocalFixture,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub abstract_or_body: String,
    pub source: DocumentSource,
    #[serde(default)]
    pub retrieval_keywords: Vec<String>,
}

impl Document {
    /// Title and body; the text spans are checked against.
    pub fn full_text(&self) -> String {
        format!("{}\n{}", self.title, self.abstract_or_body)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Support,
    Contradict,
    Neutral,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StanceCounts {
    pub support: usize,
    pub contradict: usize,
    pub neutral: usize,
}

impl StanceCounts {
    pub fn add(&mut self, stance: Stance) {
        match stance {
            Stance::Support => self.support += 1,
            Stance::Contradict => self.contradict += 1,
            Stance::Neutral => self.neutral += 1,
        }
    }

    /// Most frequent label; ties and empty tallies resolve to neutral.
    pub fn dominant(&self) -> Stance {
        if self.support > self.contradict && self.support > self.neutral {
            Stance::Support
        } else if self.contradict > self.support && self.contradict > self.neutral {
            Stance::Contradict
        } else {
            Stance::Neutral
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRef {
    pub doc_id: String,
    pub stance: Stance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub statement: String,
    /// Empty when the realizer abstained.
    pub causal_chain: Vec<String>,
    pub evidence_summary: String,
    pub novelty_score: f64,
    pub feasibility_score: f64,
    pub testability_score: f64,
    pub stance_counts: StanceCounts,
    pub evidence: Vec<EvidenceRef>,
    pub uncertainty_markers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    pub model: String,
    pub temperature: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }

    /// Identifier derived from the first content terms of the text.
    pub fn adhoc(text: impl Into<String>) -> Self {
        let text = text.into();
        let terms = query_terms(&text);
        let id = if terms.is_empty() {
            "query".to_string()
        } else {
            terms.iter().take(5).cloned().collect::<Vec<_>>().join("-")
        };
        Self { id, text }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub graph: ConceptGraph,
    pub symbolic: SymbolicResult,
    pub hypotheses: Vec<Hypothesis>,
    /// Absent when a stage aborted the run.
    pub report: Option<BehavioralReport>,
    pub trace: TraceRecord,
}

fn now_ms(deterministic: bool) -> u64 {
    if deterministic {
        return 0;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Runs one query from refinement to report. All state is local to this
/// call. A stage failure still returns the partial trace, marked aborted.
pub fn run_query(query: &Query, config: &RunConfig, clients: &ClientSuite) -> Result<RunOutput> {
    config.validate()?;
    if query.text.trim().is_empty() {
        return Err(Error::InvalidArgument("query must not be empty".into()));
    }
    let mut record = TraceRecord::new(query, config);
    record.timestamps.started_ms = now_ms(config.deterministic);
    let mut journal = Journal::new();
    let mut stage = "refinement";
    let mut final_graph = ConceptGraph::new(&query.id);

    match execute(query, config, clients, &mut record, &mut journal, &mut stage, &mut final_graph) {
        Ok(()) => record.status = RunStatus::Completed,
        Err(e) => {
            let missing_call = match &e {
                Error::MissingExchange(id) => Some(id.clone()),
                _ => None,
            };
            journal.event(TraceEvent::StageFailed {
                stage: stage.to_string(),
                message: e.to_string(),
            });
            record.status = RunStatus::Aborted {
                stage: stage.to_string(),
                message: e.to_string(),
                missing_call,
            };
        }
    }
    record.exchanges = journal.exchanges;
    record.events = journal.events;
    record.timestamps.finished_ms = now_ms(config.deterministic);
    let record = record.canonical()?;
    Ok(RunOutput {
        graph: final_graph,
        symbolic: record.symbolic.clone(),
        hypotheses: record.hypotheses.clone(),
        report: record.report.clone(),
        trace: record,
    })
}

fn settings(model: &str, config: &RunConfig) -> LlmSettings {
    LlmSettings {
        model: model.to_string(),
        temperature: config.temperature,
    }
}

#[allow(clippy::too_many_arguments)]
fn execute(
    query: &Query,
    config: &RunConfig,
    clients: &ClientSuite,
    record: &mut TraceRecord,
    journal: &mut Journal,
    stage: &mut &'static str,
    final_graph: &mut ConceptGraph,
) -> Result<()> {
    let models = &config.models;
    *stage = "refinement";
    let expression = refine_query(&query.text, &*clients.refinement, &settings(&models.refinement, config), journal)?;
    record.boolean_expression = Some(expression.clone());

    *stage = "retrieval";
    let mut corpus = retrieve(
        &expression,
        &*clients.retrieval,
        RetrievalSettings {
            max_papers: config.max_papers,
            controversy_augment: config.controversy_augment,
            controversy_fraction: config.controversy_fraction,
        },
        journal,
    )?;
    corpus.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    record.corpus = corpus.clone();

    let rag = config.strategy.kind == StrategyKind::RagBaseline;
    let mut graph = ConceptGraph::new(&query.id);
    let mut weights: Option<EdgeWeights> = None;
    let mut symbolic = SymbolicResult::default();

    if rag {
        journal.event(TraceEvent::StageSkipped {
            stage: "graph construction".into(),
            reason: "rag baseline reasons over corpus text only".into(),
        });
    } else if !corpus.is_empty() {
        *stage = "extraction";
        let mut extractions = BTreeMap::new();
        for doc in &corpus {
            let e = extract_concepts(doc, &*clients.extraction, &settings(&models.extraction, config), journal)?;
            extractions.insert(doc.doc_id.clone(), e);
        }
        record.evidence_stances = stages::stance_index(&extractions);
        graph = stages::assemble_graph(&query.id, &extractions)?;
        record.snapshot(GraphStage::Extraction, &graph);

        *stage = "normalization";
        graph = normalize(&graph, config.similarity_threshold)?;
        record.snapshot(GraphStage::Normalization, &graph);

        *stage = "densification";
        graph = densify(&graph, &corpus, &*clients.extraction, &settings(&models.extraction, config), journal)?;
        record.snapshot(GraphStage::Densification, &graph);

        *stage = "cleanup";
        graph = cleanup(&graph, config.min_component_size)?;
        record.snapshot(GraphStage::Cleanup, &graph);
    }

    if !rag && !graph.is_empty() {
        *stage = "communities";
        let partition = louvain(&graph, config.resolution, config.seed)?;
        let holes = structural_holes(&graph, &partition, config.max_inter_edges, config.top_pairs)?;
        record.partition = Some(partition.clone());
        record.structural_holes = holes.clone();

        if let Some(lens) = &config.lens {
            *stage = "lens";
            let lensed = inject_lens(&graph, lens)?;
            graph = lensed.graph;
            weights = Some(lensed.weights);
            record.snapshot(GraphStage::Lens, &graph);
        }

        let endpoints = select_endpoints(&graph, &query.text, &holes, &config.endpoints);
        *stage = "exploration";
        let ctx = ExploreContext {
            graph: &graph,
            holes: &holes,
            query: &query.text,
            endpoints: &endpoints,
        };
        let exploration = explore(
            &ctx,
            &*clients.exploration,
            &settings(&models.exploration, config),
            config.max_turns,
            journal,
        )?;
        record.exploration = Some(exploration);

        *stage = "strategy";
        if endpoints.is_empty() {
            journal.event(TraceEvent::StageSkipped {
                stage: "strategy".into(),
                reason: "no connected endpoint pairs".into(),
            });
        } else {
            symbolic = run_strategy(&graph, &endpoints, &config.strategy, &partition, weights.as_ref())?;
        }
    }
    record.symbolic = symbolic.clone();

    let hypotheses = if corpus.is_empty() || (!rag && symbolic.paths.is_empty()) {
        journal.event(TraceEvent::StageSkipped {
            stage: "synthesis".into(),
            reason: if corpus.is_empty() { "empty corpus" } else { "no symbolic paths" }.into(),
        });
        Vec::new()
    } else {
        *stage = "synthesis";
        let input = SynthesisInput {
            query: &query.text,
            graph: &graph,
            paths: &symbolic.paths,
            exploration: record.exploration.as_ref(),
            corpus: &corpus,
            stances: &record.evidence_stances,
            n: config.n_hypotheses,
        };
        synthesize_hypotheses(&input, &*clients.synthesis, &settings(&models.synthesis, config), journal)?
    };
    record.hypotheses = hypotheses.clone();

    *stage = "grounding";
    let chains: Vec<_> = hypotheses
        .iter()
        .map(|h| ground_chain(&h.causal_chain, &graph, &config.grounding))
        .collect();
    let concept_sets: Vec<_> = hypotheses.iter().map(|h| concept_set(&h.causal_chain)).collect();
    let report = build_report(ReportInputs {
        query_id: &query.id,
        paths: &symbolic.paths,
        chains: &chains,
        concept_sets: &concept_sets,
        bridge_attempted: symbolic.bridge_attempted,
    });
    if report.abstention {
        journal.event(TraceEvent::Abstention {
            reason: if report.n_hypotheses == 0 {
                "no hypotheses were realized".into()
            } else {
                "every grounded chain collapsed".into()
            },
        });
    }
    record.grounded_chains = chains;
    record.report = Some(report);
    *final_graph = graph;
    Ok(())
}

#[cfg(test)]
mod tests;
