use serde_json::Value;

use super::{RunStatus, TraceRecord};
use crate::error::{Error, Result};
use crate::metrics::{build_report, concept_set, BehavioralReport, ReportInputs};
use crate::pipeline::{run_query, Query, RecordedClient};

#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub report: Option<BehavioralReport>,
    /// Dotted paths of every field whose recomputed value differs.
    pub divergences: Vec<String>,
    pub record: TraceRecord,
}

/// Re-executes the run with clients answering from the stored exchanges and
/// lists every field that comes out differently. Timestamps are ignored.
pub fn replay(record: &TraceRecord) -> Result<ReplayOutcome> {
    let suite = RecordedClient::suite(&record.exchanges);
    let query = Query::new(record.query_id.clone(), record.query.clone());
    let mut fresh = run_query(&query, &record.config, &suite)?.trace;
    if let RunStatus::Aborted {
        missing_call: Some(call),
        ..
    } = &fresh.status
    {
        return Err(Error::MissingExchange(call.clone()));
    }
    fresh.timestamps = record.timestamps;
    let stored = serde_json::to_value(record.canonical()?)?;
    let divergences = diff_values(&stored, &serde_json::to_value(&fresh)?);
    Ok(ReplayOutcome {
        report: fresh.report.clone(),
        divergences,
        record: fresh,
    })
}

/// Paths at which two JSON values differ, in key order.
pub fn diff_values(a: &Value, b: &Value) -> Vec<String> {
    let mut out = Vec::new();
    diff_into(a, b, String::new(), &mut out);
    out
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn diff_into(a: &Value, b: &Value, path: String, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for key in keys {
                let p = join(&path, key);
                match (x.get(key), y.get(key)) {
                    (Some(u), Some(v)) => diff_into(u, v, p, out),
                    _ => out.push(p),
                }
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                out.push(path.clone());
            }
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                diff_into(u, v, format!("{path}[{i}]"), out);
            }
        }
        _ if a != b => out.push(path),
        _ => {}
    }
}

/// The report implied by the raw paths, chains and hypotheses in a trace.
pub fn recompute_report(record: &TraceRecord) -> BehavioralReport {
    let concept_sets: Vec<_> = record.hypotheses.iter().map(|h| concept_set(&h.causal_chain)).collect();
    build_report(ReportInputs {
        query_id: &record.query_id,
        paths: &record.symbolic.paths,
        chains: &record.grounded_chains,
        concept_sets: &concept_sets,
        bridge_attempted: record.symbolic.bridge_attempted,
    })
}
