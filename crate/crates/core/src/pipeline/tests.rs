use super::*;
use crate::graph::EdgeOrigin;
use crate::strategies::{StrategyConfig, StrategyKind};
use crate::trace::{compare_runs, trace_bytes, DropMode, GraphStage, RunStatus, TraceEvent};
use crate::traversal::LensSpec;

const Q6: &str = "What new mechanistic explanations could link gut microbiome dysregulation to neurodevelopmental disorders beyond the current dominant theories?";

fn config(kind: StrategyKind) -> RunConfig {
    RunConfig {
        strategy: StrategyConfig::for_kind(kind),
        deterministic: true,
        ..RunConfig::default()
    }
}

fn run_with(query: &Query, config: &RunConfig) -> RunOutput {
    run_query(query, config, &FixtureCorpus::bundled().suite()).unwrap()
}

fn q6() -> Query {
    Query::new("Q6", Q6)
}

#[test]
fn mock_run_is_byte_identical_across_repeats() {
    let c = config(StrategyKind::FullDiversity);
    let a = run_with(&q6(), &c);
    let b = run_with(&q6(), &c);
    assert_eq!(trace_bytes(&a.trace).unwrap(), trace_bytes(&b.trace).unwrap());
    let report = a.report.unwrap();
    assert!(report.d_sym > 0.0);
    assert_eq!(report.n_hypotheses, 3);
    assert_eq!(a.trace.status, RunStatus::Completed);
}

#[test]
fn trace_records_every_graph_stage() {
    let out = run_with(&q6(), &config(StrategyKind::FullDiversity));
    let stages: Vec<GraphStage> = out.trace.graph_snapshots.iter().map(|s| s.stage).collect();
    assert_eq!(
        stages,
        [GraphStage::Extraction, GraphStage::Normalization, GraphStage::Densification, GraphStage::Cleanup]
    );
    assert!(out.trace.partition.is_some());
    assert!(out.trace.exploration.as_ref().is_some_and(|e| !e.calls.is_empty()));
    assert_eq!(out.trace.final_graph(), Some(&out.graph));
}

#[test]
fn empty_retrieval_abstains_without_error() {
    let out = run_with(&Query::new("QX", "lattice gauge quark confinement"), &config(StrategyKind::FullDiversity));
    let report = out.report.unwrap();
    assert_eq!(report.n_hypotheses, 0);
    assert!(report.abstention);
    assert_eq!(report.drop_rate, None);
    assert!(out.trace.events.iter().any(|e| matches!(e, TraceEvent::RetrievalEmpty { .. })));
    assert!(out.trace.events.iter().any(|e| matches!(e, TraceEvent::Abstention { .. })));
    assert_eq!(out.trace.status, RunStatus::Completed);
}

#[test]
fn rag_baseline_has_no_paths_but_hypotheses() {
    let out = run_with(&q6(), &config(StrategyKind::RagBaseline));
    assert!(out.symbolic.paths.is_empty());
    assert!(out.trace.graph_snapshots.is_empty());
    let report = out.report.unwrap();
    assert!(report.n_hypotheses > 0);
    assert_eq!(report.d_ground, 0.0);
    assert_eq!(report.failure_rate, Some(1.0));
}

#[test]
fn queries_share_no_state() {
    let c = config(StrategyKind::ShortestPath);
    let other = Query::new("BIO-2", "What mechanistic pathways link neuroinflammation, microglial activation, and cognitive decline during aging?");
    let alone = trace_bytes(&run_with(&q6(), &c).trace).unwrap();
    let other_alone = trace_bytes(&run_with(&other, &c).trace).unwrap();
    let suite = FixtureCorpus::bundled().suite();
    let first = run_query(&q6(), &c, &suite).unwrap();
    let second = run_query(&other, &c, &suite).unwrap();
    let third = run_query(&q6(), &c, &suite).unwrap();
    assert_eq!(trace_bytes(&first.trace).unwrap(), alone);
    assert_eq!(trace_bytes(&second.trace).unwrap(), other_alone);
    assert_eq!(trace_bytes(&third.trace).unwrap(), alone);
}

#[test]
fn guards_hold_on_every_strategy() {
    for kind in StrategyKind::ALL {
        let out = run_with(&q6(), &config(kind));
        let corpus: BTreeMap<&str, &Document> = out.trace.corpus.iter().map(|d| (d.doc_id.as_str(), d)).collect();
        for snap in &out.trace.graph_snapshots {
            for e in snap.graph.edges().filter(|e| e.origin != EdgeOrigin::Lens) {
                for ev in &e.evidence {
                    let doc = corpus[ev.doc_id.as_str()];
                    assert!(doc.full_text().contains(&ev.span), "{kind:?}: span not verbatim in {}", ev.doc_id);
                }
            }
        }
        // the fixture's novel-entity proposal must never enter the graph
        assert!(out.graph.find_by_label("butyrate").is_none());
        for h in &out.hypotheses {
            for s in [h.novelty_score, h.feasibility_score, h.testability_score] {
                assert!((0.0..=1.0).contains(&s));
            }
            assert!(h.evidence.iter().all(|e| corpus.contains_key(e.doc_id.as_str())));
        }
        out.trace.validate().unwrap();
    }
}

#[test]
fn densification_rejection_is_recorded() {
    let out = run_with(&q6(), &config(StrategyKind::FullDiversity));
    assert!(out
        .trace
        .events
        .iter()
        .any(|e| matches!(e, TraceEvent::DensificationRejected { source, .. } if source == "butyrate")));
    assert!(out.graph.edges().any(|e| e.origin == EdgeOrigin::Densification));
}

#[test]
fn lens_node_enters_graph_and_routes() {
    let mut c = config(StrategyKind::ShortestPath);
    c.lens = Some(LensSpec::new("information theory"));
    let out = run_with(&q6(), &c);
    assert_eq!(out.trace.graph_snapshots.last().unwrap().stage, GraphStage::Lens);
    let lens = out.graph.find_by_label("information theory").expect("lens node");
    assert!(out.graph.edges().any(|e| e.origin == EdgeOrigin::Lens));
    assert!(out.symbolic.paths.iter().any(|p| p.nodes.contains(&lens)));
}

#[test]
fn missing_exchange_aborts_with_call_id() {
    let out = run_query(&q6(), &config(StrategyKind::FullDiversity), &RecordedClient::suite(&[])).unwrap();
    match &out.trace.status {
        RunStatus::Aborted { stage, missing_call, .. } => {
            assert_eq!(stage, "refinement");
            assert_eq!(missing_call.as_deref(), Some("refine"));
        }
        other => panic!("expected abort, got {other:?}"),
    }
    assert!(out.report.is_none());
}

#[test]
fn blank_query_rejected() {
    assert!(run_query(&Query::new("Q", "  "), &RunConfig::default(), &FixtureCorpus::bundled().suite()).is_err());
}

#[test]
fn faithful_realizer_loses_no_depth() {
    let suite = FixtureCorpus::bundled().suite_with(Realizer::faithful());
    let out = run_query(&q6(), &config(StrategyKind::FullDiversity), &suite).unwrap();
    let report = out.report.unwrap();
    assert_eq!(report.n_collapsed, 0);
    for (h, c) in out.hypotheses.iter().zip(&out.trace.grounded_chains) {
        assert_eq!(h.causal_chain.len(), c.len());
    }
}

/// The comparison harness over the whole fixture and several seeds.
pub(crate) fn fixture_comparison(seeds: u64, mode: DropMode) -> crate::trace::ComparisonTable {
    let corpus = FixtureCorpus::bundled();
    let max_papers = corpus.documents.len();
    let mut records = Vec::new();
    for kind in StrategyKind::ALL {
        for seed in 0..seeds {
            let mut c = config(kind);
            c.seed = seed;
            c.strategy.seed = seed;
            c.max_papers = max_papers;
            records.push(run_query(&q6(), &c, &corpus.clone().suite()).unwrap().trace);
        }
    }
    compare_runs(&records, &StrategyKind::ALL, mode)
}

#[test]
fn fixture_shows_strategy_ordering() {
    for mode in [DropMode::PerRun, DropMode::RatioOfMeans] {
        let t = fixture_comparison(50, mode);
        let drop = |k| t.row(k).unwrap().drop_pct.unwrap();
        assert!(drop(StrategyKind::ShortestPath) < drop(StrategyKind::FullDiversity), "{}", t.to_text());
        assert!(drop(StrategyKind::FullDiversity) < drop(StrategyKind::RandomWalk), "{}", t.to_text());
        assert_eq!(t.row(StrategyKind::RagBaseline).unwrap().d_ground, 0.0);
    }
}
