//! ReAct-style exploration: the agent names a tool, the engine computes the
//! result from the graph, and both are appended to the record.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::client::{build_request, parse_json_object, ClientKind, Journal, LanguageModel};
use super::{prompts, LlmSettings};
use crate::community::StructuralHole;
use crate::error::{Error, Result};
use crate::graph::{ConceptGraph, NodeId};
use crate::trace::TraceEvent;
use crate::traversal::{find_paths, get_neighbors, Direction};

const MAX_TOOL_HOPS: usize = 8;
const MAX_TOOL_RESULTS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ToolOutcome {
    Ok { output: Value },
    Error { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub turn: usize,
    pub tool: String,
    pub args: Value,
    pub outcome: ToolOutcome,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplorationRecord {
    pub calls: Vec<ToolCall>,
    pub turns_used: usize,
    pub stopped_by_agent: bool,
}

pub struct ExploreContext<'a> {
    pub graph: &'a ConceptGraph,
    pub holes: &'a [StructuralHole],
    pub query: &'a str,
    pub endpoints: &'a [(NodeId, NodeId)],
}

pub fn explore(
    ctx: &ExploreContext<'_>,
    agent: &dyn LanguageModel,
    llm: &LlmSettings,
    max_turns: usize,
    journal: &mut Journal,
) -> Result<ExplorationRecord> {
    if max_turns == 0 {
        return Err(Error::InvalidArgument("max_turns must be at least 1".into()));
    }
    let label = |n: NodeId| ctx.graph.label(n).unwrap_or_default().to_string();
    let endpoints: Vec<[String; 2]> = ctx.endpoints.iter().map(|&(a, b)| [label(a), label(b)]).collect();
    let mut record = ExplorationRecord::default();

    for turn in 0..max_turns {
        let history: Vec<Value> = record
            .calls
            .iter()
            .map(|c| json!({"tool": c.tool, "args": c.args, "result": c.outcome}))
            .collect();
        let payload = json!({
            "task": "explore",
            "query": ctx.query,
            "endpoints": endpoints,
            "turn": turn,
            "max_turns": max_turns,
            "history": history,
        });
        let request = build_request(&llm.model, llm.temperature, prompts::EXPLORATION, &payload);
        let raw = journal.complete(agent, ClientKind::Exploration, &format!("explore:{turn}"), request)?;
        record.turns_used = turn + 1;

        let Some(action) = parse_json_object(&raw) else {
            push_error(&mut record, journal, turn, "invalid", Value::Null, "response is not a JSON object".into());
            continue;
        };
        let tool = action
            .get("tool")
            .or_else(|| action.get("action"))
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        if tool == "stop" {
            record.stopped_by_agent = true;
            break;
        }
        let args = action.get("args").cloned().unwrap_or_else(|| json!({}));
        match run_tool(ctx, &tool, &args) {
            Ok(output) => record.calls.push(ToolCall {
                turn,
                tool,
                args,
                outcome: ToolOutcome::Ok { output },
            }),
            Err(message) => push_error(&mut record, journal, turn, &tool, args, message),
        }
    }
    Ok(record)
}

fn push_error(record: &mut ExplorationRecord, journal: &mut Journal, turn: usize, tool: &str, args: Value, message: String) {
    journal.event(TraceEvent::ToolError {
        turn,
        message: message.clone(),
    });
    record.calls.push(ToolCall {
        turn,
        tool: if tool.is_empty() { "invalid".into() } else { tool.into() },
        args,
        outcome: ToolOutcome::Error { message },
    });
}

/// Node by label or alias, or by its `n<id>` display form.
fn resolve_node(graph: &ConceptGraph, name: &str) -> std::result::Result<NodeId, String> {
    if let Some(id) = graph.find_by_label(name) {
        return Ok(id);
    }
    name.strip_prefix('n')
        .and_then(|n| n.parse::<u32>().ok())
        .map(NodeId)
        .filter(|&id| graph.contains(id))
        .ok_or_else(|| format!("unknown node `{name}`"))
}

fn str_arg<'v>(args: &'v Value, key: &str) -> std::result::Result<&'v str, String> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string argument `{key}`"))
}

fn count_arg(args: &Value, key: &str, default: usize, cap: usize) -> std::result::Result<usize, String> {
    match args.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 => Ok((n as usize).min(cap)),
            _ => Err(format!("argument `{key}` must be a positive integer")),
        },
    }
}

fn run_tool(ctx: &ExploreContext<'_>, tool: &str, args: &Value) -> std::result::Result<Value, String> {
    let graph = ctx.graph;
    let label = |n: NodeId| graph.label(n).unwrap_or_default().to_string();
    match tool {
        "get_neighbors" => {
            let node = resolve_node(graph, str_arg(args, "node")?)?;
            let direction = match args.get("direction").and_then(Value::as_str).unwrap_or("out") {
                "out" => Direction::Out,
                "in" => Direction::In,
                "both" => Direction::Both,
                other => return Err(format!("unknown direction `{other}`")),
            };
            let neighbors = get_neighbors(graph, node, direction).map_err(|e| e.to_string())?;
            Ok(json!({
                "node": label(node),
                "neighbors": neighbors.into_iter().map(label).collect::<Vec<_>>(),
            }))
        }
        "find_paths" => {
            let source = resolve_node(graph, str_arg(args, "source")?)?;
            let target = resolve_node(graph, str_arg(args, "target")?)?;
            let hops = count_arg(args, "max_hops", 4, MAX_TOOL_HOPS)?;
            let results = count_arg(args, "max_results", 5, MAX_TOOL_RESULTS)?;
            let paths = find_paths(graph, source, target, hops, results).map_err(|e| e.to_string())?;
            let paths: Vec<Vec<String>> = paths
                .iter()
                .map(|p| p.nodes.iter().map(|&n| label(n)).collect())
                .collect();
            Ok(json!({ "paths": paths }))
        }
        "centrality" => {
            let top = count_arg(args, "top", 5, MAX_TOOL_RESULTS)?;
            let mut ranked: Vec<(usize, NodeId)> = graph
                .node_ids()
                .map(|n| (graph.undirected_neighbors(n).len(), n))
                .collect();
            ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let ranked: Vec<Value> = ranked
                .into_iter()
                .take(top)
                .map(|(d, n)| json!({"node": label(n), "degree": d}))
                .collect();
            Ok(json!({ "ranking": ranked }))
        }
        "structural_holes" => {
            let top = count_arg(args, "top", 3, MAX_TOOL_RESULTS)?;
            let holes: Vec<Value> = ctx
                .holes
                .iter()
                .take(top)
                .map(|h| {
                    json!({
                        "communities": [h.community_a, h.community_b],
                        "inter_edges": h.inter_edge_count,
                        "candidates": h.candidate_pairs.iter().map(|&(a, b)| [label(a), label(b)]).collect::<Vec<_>>(),
                    })
                })
                .collect();
            Ok(json!({ "holes": holes }))
        }
        "" => Err("missing tool name".into()),
        other => Err(format!("unknown tool `{other}`")),
    }
}
