//! The audited run record: schema, canonical writer, reader, replay and
//! cross-run comparison.

pub mod adapter;
mod canonical;
pub mod compare;
pub mod replay;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use canonical::to_canonical_string;
pub use compare::{compare_runs, metrics_table, ComparisonRow, ComparisonTable, DropMode, MetricsRow, MetricsTable};
pub use adapter::{adapt_released, load_released, released_trace_files, AdaptedTrace, StoredMetrics};
pub use replay::{diff_values, recompute_report, replay, ReplayOutcome};

use crate::community::{Partition, StructuralHole};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::ConceptGraph;
use crate::metrics::{BehavioralReport, GroundedChain};
use crate::pipeline::{Document, Exchange, ExplorationRecord, Hypothesis, Query, StanceCounts};
use crate::strategies::SymbolicResult;

pub const SCHEMA_VERSION: &str = "mechsynth-trace/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    RetrievalEmpty { expression: String },
    FabricationRejected { doc_id: String, item: String, reason: String },
    DensificationRejected { source: String, target: String, reason: String },
    UnparseableOutput { stage: String, call_id: String },
    ToolError { turn: usize, message: String },
    ScoreClamped { hypothesis: usize, field: String, original: f64, clamped: f64 },
    HypothesisDropped { index: usize, reason: String },
    EvidenceDropped { hypothesis: usize, doc_id: String },
    StageSkipped { stage: String, reason: String },
    StageFailed { stage: String, message: String },
    Abstention { reason: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    #[default]
    Completed,
    Aborted {
        stage: String,
        message: String,
        missing_call: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphStage {
    Extraction,
    Normalization,
    Densification,
    Cleanup,
    Lens,
    /// Graph supplied by an ingested foreign trace.
    Imported,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub stage: GraphStage,
    pub graph: ConceptGraph,
}

/// Wall-clock milliseconds; zeroed under deterministic runs and ignored by
/// every comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_ms: u64,
    pub finished_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub schema_version: String,
    pub query_id: String,
    pub query: String,
    pub config: RunConfig,
    pub status: RunStatus,
    pub boolean_expression: Option<String>,
    pub exchanges: Vec<Exchange>,
    pub corpus: Vec<Document>,
    /// Per-document stance tallies reported by extraction.
    pub evidence_stances: BTreeMap<String, StanceCounts>,
    pub graph_snapshots: Vec<GraphSnapshot>,
    pub partition: Option<Partition>,
    pub structural_holes: Vec<StructuralHole>,
    pub exploration: Option<ExplorationRecord>,
    pub symbolic: SymbolicResult,
    pub hypotheses: Vec<Hypothesis>,
    pub grounded_chains: Vec<GroundedChain>,
    pub report: Option<BehavioralReport>,
    pub events: Vec<TraceEvent>,
    pub timestamps: Timestamps,
}

impl TraceRecord {
    pub fn new(query: &Query, config: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            query_id: query.id.clone(),
            query: query.text.clone(),
            config: config.clone(),
            status: RunStatus::Completed,
            boolean_expression: None,
            exchanges: Vec::new(),
            corpus: Vec::new(),
            evidence_stances: BTreeMap::new(),
            graph_snapshots: Vec::new(),
            partition: None,
            structural_holes: Vec::new(),
            exploration: None,
            symbolic: SymbolicResult::default(),
            hypotheses: Vec::new(),
            grounded_chains: Vec::new(),
            report: None,
            events: Vec::new(),
            timestamps: Timestamps::default(),
        }
    }

    pub fn snapshot(&mut self, stage: GraphStage, graph: &ConceptGraph) {
        self.graph_snapshots.push(GraphSnapshot {
            stage,
            graph: graph.clone(),
        });
    }

    /// The graph paths were searched on: the last snapshot taken.
    pub fn final_graph(&self) -> Option<&ConceptGraph> {
        self.graph_snapshots.last().map(|s| &s.graph)
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self.status, RunStatus::Aborted { .. })
    }

    pub fn fabrication_rejections(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::FabricationRejected { .. }))
            .count()
    }

    /// Checks the invariants a trace must satisfy before it is written.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion(self.schema_version.clone()));
        }
        let docs: BTreeSet<&str> = self.corpus.iter().map(|d| d.doc_id.as_str()).collect();
        if docs.len() != self.corpus.len() {
            return Err(Error::InvalidTrace("duplicate doc_id in corpus".into()));
        }
        for (i, h) in self.hypotheses.iter().enumerate() {
            for ev in &h.evidence {
                if !docs.contains(ev.doc_id.as_str()) {
                    return Err(Error::InvalidTrace(format!(
                        "hypothesis {i} cites `{}`, which is not in the corpus",
                        ev.doc_id
                    )));
                }
            }
            for (field, v) in [
                ("novelty", h.novelty_score),
                ("feasibility", h.feasibility_score),
                ("testability", h.testability_score),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidTrace(format!("hypothesis {i} {field} score {v} outside [0, 1]")));
                }
            }
        }
        if self.grounded_chains.len() != self.hypotheses.len() && self.report.is_some() {
            return Err(Error::InvalidTrace("one grounded chain per hypothesis expected".into()));
        }
        Ok(())
    }

    /// The record as it reads back after a canonical write: floats rounded
    /// to six decimals.
    pub fn canonical(&self) -> Result<Self> {
        let text = to_canonical_string(&serde_json::to_value(self)?);
        Ok(serde_json::from_str(&text)?)
    }
}

/// Writes canonical JSON: sorted keys, floats with six decimals.
pub fn write_trace<W: Write>(record: &TraceRecord, mut sink: W) -> Result<()> {
    record.validate()?;
    let text = to_canonical_string(&serde_json::to_value(record)?);
    sink.write_all(text.as_bytes())?;
    sink.flush()?;
    Ok(())
}

pub fn trace_bytes(record: &TraceRecord) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_trace(record, &mut out)?;
    Ok(out)
}

fn malformed(e: serde_json::Error) -> Error {
    Error::MalformedTrace {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

pub fn read_trace<R: Read>(mut source: R) -> Result<TraceRecord> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(malformed)?;
    match value.get("schema_version").and_then(|v| v.as_str()) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => return Err(Error::SchemaVersion(other.to_string())),
        None => return Err(Error::SchemaVersion("<missing>".into())),
    }
    serde_json::from_str(&text).map_err(malformed)
}

pub fn read_trace_file(path: &std::path::Path) -> Result<TraceRecord> {
    read_trace(std::fs::File::open(path)?)
}

pub fn write_trace_file(record: &TraceRecord, path: &std::path::Path) -> Result<()> {
    let bytes = trace_bytes(record)?;
    std::fs::write(path, bytes)?;
    Ok(())
}
