//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use mechsynth::community::{louvain, modularity, Partition};
use mechsynth::graph::{jaccard, ConceptGraph, EdgeOrigin, Evidence, NodeId};
use mechsynth::metrics::{drop_rate, failure_rate, GroundedChain};
use mechsynth::pipeline::{
    run_query, ClientError, ClientMode, ClientSuite, FixtureCorpus, FixtureRetriever, LanguageModel, LlmRequest,
    MockLanguageModel, Query, Realizer,
};
use mechsynth::queries::{bundled_queries, find_query};
use mechsynth::strategies::{select_diverse, StrategyConfig, StrategyKind};
use mechsynth::trace::{
    compare_runs, load_released, read_trace, released_trace_files, replay, trace_bytes, DropMode, TraceRecord,
};
use mechsynth::traversal::{k_shortest_paths, EdgeWeights, LensSpec, PathTag, ReasoningPath};
use mechsynth::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1, 2

fn criterion_1() -> Outcome {
    let table5 = [
        ("Q1", 4.8, 4.67, 0.03),
        ("Q2", 3.6, 4.67, 0.00),
        ("Q3", 3.4, 0.0, 1.00),
        ("Q4", 4.0, 0.0, 1.00),
        ("Q5", 3.4, 0.0, 1.00),
        ("Q6", 3.2, 4.33, 0.00),
    ];
    let mut got = Vec::new();
    for (q, sym, ground, expected) in table5 {
        let r = drop_rate(sym, ground).ok_or_else(|| format!("{q}: drop undefined"))?;
        check((r - expected).abs() <= 0.005, || format!("{q}: {r:.4} vs {expected}"))?;
        got.push(format!("{r:.2}"));
    }
    Ok(format!("drop rates ({})", got.join(", ")))
}

fn criterion_2() -> Outcome {
    let chains = |lens: &[usize]| lens.iter().map(|&n| GroundedChain::with_length(n)).collect::<Vec<_>>();
    let cases: [(&[usize], f64); 3] = [(&[3, 3, 1, 0], 0.5), (&[2, 3, 5, 4], 0.0), (&[0, 1, 1, 0], 1.0)];
    for (lens, expected) in cases {
        let f = failure_rate(&chains(lens)).map_err(|e| e.to_string())?;
        check(f == expected, || format!("{lens:?}: {f} vs {expected}"))?;
    }
    Ok("[3,3,1,0]->0.5, all>=2->0.0, all<2->1.0".into())
}

// ---------------------------------------------------------------- 3

fn random_digraph(rng: &mut ChaCha8Rng, max_nodes: usize) -> (ConceptGraph, Vec<NodeId>) {
    let n = rng.gen_range(2..=max_nodes);
    let mut g = ConceptGraph::new("acceptance");
    let ids: Vec<NodeId> = (0..n).map(|i| g.add_node(&format!("v{i}")).unwrap()).collect();
    let density = rng.gen_range(0.15..0.6);
    for &a in &ids {
        for &b in &ids {
            if a != b && rng.gen_bool(density) {
                g.add_relation(a, b, "r", vec![Evidence::new("d", "s")]).unwrap();
            }
        }
    }
    (g, ids)
}

fn enumerate_simple(g: &ConceptGraph, source: NodeId, target: NodeId, w: &EdgeWeights) -> Vec<(u64, Vec<NodeId>)> {
    fn dfs(g: &ConceptGraph, target: NodeId, path: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let last = *path.last().unwrap();
        if last == target {
            out.push(path.clone());
            return;
        }
        for &n in g.successors(last) {
            if !path.contains(&n) {
                path.push(n);
                dfs(g, target, path, out);
                path.pop();
            }
        }
    }
    let mut paths = Vec::new();
    if source != target {
        dfs(g, target, &mut vec![source], &mut paths);
    }
    let mut costed: Vec<(u64, Vec<NodeId>)> = paths.into_iter().map(|p| (w.path_cost(&p), p)).collect();
    costed.sort();
    costed
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut nonempty = 0;
    for case in 0..500 {
        let (g, ids) = random_digraph(&mut rng, 8);
        let mut w = EdgeWeights::unit();
        let weighted = rng.gen_bool(0.5);
        if weighted {
            for e in g.edges() {
                let choice = [0.5, 1.0, 1.0, 2.0, 3.0][rng.gen_range(0..5)];
                w.set(e.source, e.target, choice).unwrap();
            }
        }
        let s = ids[rng.gen_range(0..ids.len())];
        let mut t = ids[rng.gen_range(0..ids.len())];
        if t == s {
            t = ids[(ids.iter().position(|&x| x == s).unwrap() + 1) % ids.len()];
        }
        let k = rng.gen_range(1..=8);
        let got: Vec<Vec<NodeId>> = k_shortest_paths(&g, s, t, k, weighted.then_some(&w))
            .map_err(|e| format!("case {case}: {e}"))?
            .into_iter()
            .map(|p| p.nodes)
            .collect();
        let expected: Vec<Vec<NodeId>> = enumerate_simple(&g, s, t, &w).into_iter().take(k).map(|(_, p)| p).collect();
        check(got == expected, || format!("case {case}: {got:?} vs oracle {expected:?}"))?;
        nonempty += usize::from(!expected.is_empty());
    }
    Ok(format!("500 digraphs, exact match ({nonempty} with reachable pairs)"))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..1000 {
        let count = rng.gen_range(0..15);
        let candidates: Vec<ReasoningPath> = (0..count)
            .map(|_| {
                let len = rng.gen_range(2..7);
                let mut nodes: Vec<NodeId> = Vec::new();
                while nodes.len() < len {
                    let n = NodeId(rng.gen_range(0..12));
                    if !nodes.contains(&n) {
                        nodes.push(n);
                    }
                }
                ReasoningPath::new(nodes, PathTag::FullDiversity)
            })
            .collect();
        let threshold = [0.0, 0.1, 0.3, 0.5, 0.8, 1.0][rng.gen_range(0..6)];
        let kept = select_diverse(&candidates, threshold, usize::MAX);
        let sets: Vec<BTreeSet<NodeId>> = kept.iter().map(|p| p.node_set()).collect();
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                check(jaccard(&sets[i], &sets[j]) <= threshold, || format!("case {case}: kept pair overlaps"))?;
            }
        }
        // subsequence, and every skipped candidate conflicts with an earlier kept one
        let mut next = 0;
        let mut kept_so_far: Vec<BTreeSet<NodeId>> = Vec::new();
        for c in &candidates {
            let set = c.node_set();
            if next < kept.len() && kept[next] == *c {
                kept_so_far.push(set);
                next += 1;
            } else {
                check(kept_so_far.iter().any(|k| jaccard(&set, k) > threshold), || {
                    format!("case {case}: a compatible candidate was dropped")
                })?;
            }
        }
        check(next == kept.len(), || format!("case {case}: output is not a subsequence"))?;
    }
    Ok("1000 candidate lists: bounded overlap, subsequence, greedy-maximal".into())
}

// ---------------------------------------------------------------- 5

fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, blocks: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=blocks {
            cur.push(b);
            go(i + 1, n, cur, blocks.max(b + 1), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), 0, &mut out);
    out
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut partitions: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    let mut worst = f64::INFINITY;
    for case in 0..200 {
        let (g, ids) = random_digraph(&mut rng, 8);
        if g.edge_count() == 0 {
            continue;
        }
        let all = partitions.entry(ids.len()).or_insert_with(|| set_partitions(ids.len()));
        let best = all
            .iter()
            .map(|labels| {
                let p = Partition::from_labels(ids.iter().copied().zip(labels.iter().copied()));
                modularity(&g, &p, 1.0).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let seed = rng.gen_range(0..10_000);
        let q = modularity(&g, &louvain(&g, 1.0, seed).map_err(|e| e.to_string())?, 1.0).unwrap();
        check(q >= 0.95 * best - 1e-12, || format!("case {case}: q={q:.4} best={best:.4}"))?;
        if best > 1e-9 {
            worst = worst.min(q / best);
        }
    }

    let mut g = ConceptGraph::new("cliques");
    let ids: Vec<NodeId> = ["a0", "a1", "a2", "b0", "b1", "b2"].iter().map(|l| g.add_node(l).unwrap()).collect();
    for (a, b) in [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)] {
        g.add_relation(ids[a], ids[b], "r", vec![Evidence::new("d", "s")]).unwrap();
    }
    let p = louvain(&g, 1.0, 0).map_err(|e| e.to_string())?;
    let c = |i: usize| p.community_of(ids[i]).unwrap();
    check(
        p.community_count == 2 && c(0) == c(1) && c(1) == c(2) && c(3) == c(4) && c(4) == c(5) && c(0) != c(3),
        || format!("two-clique partition not recovered: {:?}", p.assignment),
    )?;
    Ok(format!("200 graphs, worst ratio to optimum {worst:.3}; two cliques recovered"))
}

// ---------------------------------------------------------------- 6

fn mock_config(kind: StrategyKind, seed: u64) -> RunConfig {
    RunConfig {
        strategy: StrategyConfig {
            seed,
            ..StrategyConfig::for_kind(kind)
        },
        seed,
        deterministic: true,
        ..RunConfig::default()
    }
}

fn q6() -> Query {
    find_query("Q6").unwrap().query()
}

fn criterion_6() -> Outcome {
    for kind in StrategyKind::ALL {
        let config = mock_config(kind, 17);
        let a = run_query(&q6(), &config, &FixtureCorpus::bundled().suite()).map_err(|e| e.to_string())?;
        let b = run_query(&q6(), &config, &FixtureCorpus::bundled().suite()).map_err(|e| e.to_string())?;
        let (x, y) = (trace_bytes(&a.trace).unwrap(), trace_bytes(&b.trace).unwrap());
        check(x == y, || format!("{}: traces differ", kind.as_str()))?;
    }
    Ok("four strategies, byte-identical traces".into())
}

// ---------------------------------------------------------------- 7

/// Answers like the fixture model, then appends fabricated material.
struct Adversary {
    inner: MockLanguageModel,
    case: usize,
}

const PHANTOM: &str = "phantom";
const ADV_REL: &str = "adv-";

impl LanguageModel for Adversary {
    fn complete(&self, call_id: &str, request: &LlmRequest) -> Result<String, ClientError> {
        let reply = self.inner.complete(call_id, request)?;
        let payload = request.payload().unwrap_or_default();
        let c = self.case;
        match payload["task"].as_str() {
            Some("extract") => {
                let mut v: Value = serde_json::from_str(&reply).unwrap();
                let doc_text = payload["text"].as_str().or(payload["document"].as_str()).unwrap_or_default().to_string();
                let real: Vec<Value> = v["concepts"].as_array().cloned().unwrap_or_default();
                let real_label = |i: usize| real.get(i % real.len().max(1)).and_then(|x| x["label"].as_str()).unwrap_or("gut microbiome").to_string();
                let real_span = real.first().and_then(|x| x["span"].as_str()).unwrap_or_default().to_string();
                let concepts = v["concepts"].as_array_mut().unwrap();
                // a new concept with an invented sentence
                concepts.push(json!({"label": format!("{PHANTOM} factor {c}"), "span": format!("Phantom factor {c} drives every disorder.")}));
                // a real-looking label whose span is a paraphrase
                concepts.push(json!({"label": format!("{PHANTOM} receptor {c}"), "span": format!("{} (paraphrased)", real_span.trim_end_matches('.'))}));
                // an off-document span stitched from two documents
                concepts.push(json!({"label": format!("{PHANTOM} pathway {c}"), "span": format!("{real_span} Circulating lipopolysaccharide triggers neural collapse.")}));
                let relations = v["relations"].as_array_mut().unwrap();
                // known endpoints, invented sentence
                relations.push(json!({"source": real_label(c), "target": real_label(c + 1), "relation": format!("{ADV_REL}a{c}"), "span": "This sentence appears in no document."}));
                // known endpoints, case-mangled span
                relations.push(json!({"source": real_label(c + 1), "target": real_label(c + 2), "relation": format!("{ADV_REL}b{c}"), "span": real_span.to_uppercase()}));
                // verbatim span, unknown endpoint
                relations.push(json!({"source": real_label(c), "target": format!("{PHANTOM} target {c}"), "relation": format!("{ADV_REL}c{c}"), "span": real_span}));
                // self reference
                relations.push(json!({"source": real_label(c), "target": real_label(c), "relation": format!("{ADV_REL}d{c}"), "span": real_span}));
                if !doc_text.is_empty() {
                    // truncated sentence fragment that is still not a full verbatim quote
                    relations.push(json!({"source": real_label(c), "target": real_label(c + 3), "relation": format!("{ADV_REL}e{c}"), "span": format!("{doc_text} extra")}));
                }
                Ok(v.to_string())
            }
            Some("densify") => {
                let mut v: Value = serde_json::from_str(&reply).unwrap();
                let rel = v["relations"].as_array_mut().unwrap();
                rel.push(json!({"source": format!("{PHANTOM} metabolite {c}"), "target": "neurodevelopmental disorders", "relation": format!("{ADV_REL}f{c}"), "doc_id": "d10", "span": "Autism spectrum disorder is the most studied of the neurodevelopmental disorders."}));
                rel.push(json!({"source": "gut microbiome", "target": "neuroinflammation", "relation": format!("{ADV_REL}g{c}"), "doc_id": "d01", "span": "The gut microbiome directly inflames the brain."}));
                rel.push(json!({"source": "gut microbiome", "target": "neuroinflammation", "relation": format!("{ADV_REL}h{c}"), "doc_id": format!("d9{c}"), "span": "The gut microbiome produces short-chain fatty acids during early development."}));
                rel.push(json!({"source": "gut microbiome", "target": "synaptic pruning", "relation": format!("{ADV_REL}i{c}"), "doc_id": "d07", "span": "The gut microbiome produces short-chain fatty acids during early development."}));
                Ok(v.to_string())
            }
            _ => Ok(reply),
        }
    }
}

fn criterion_7() -> Outcome {
    let corpus = Arc::new(FixtureCorpus::bundled());
    let queries = bundled_queries();
    let mut rejections = 0;
    for case in 0..100 {
        let model = Arc::new(Adversary {
            inner: MockLanguageModel {
                corpus: corpus.clone(),
                realizer: Realizer::default(),
            },
            case,
        });
        let suite = ClientSuite::uniform(model, Arc::new(FixtureRetriever { corpus: corpus.clone() }), ClientMode::Mock);
        let query = if case % 4 == 0 { queries[case % queries.len()].query() } else { q6() };
        let kind = StrategyKind::ALL[case % 4];
        let out = run_query(&query, &mock_config(kind, case as u64), &suite).map_err(|e| e.to_string())?;
        let docs: BTreeMap<&str, String> = out.trace.corpus.iter().map(|d| (d.doc_id.as_str(), d.full_text())).collect();
        for snap in &out.trace.graph_snapshots {
            for n in snap.graph.nodes() {
                check(!n.surface_forms().any(|s| s.contains(PHANTOM)), || format!("case {case}: fabricated concept `{}` leaked", n.canonical_label))?;
            }
            for e in snap.graph.edges() {
                check(!e.relation_label.starts_with(ADV_REL), || format!("case {case}: fabricated relation `{}` leaked", e.relation_label))?;
                if e.origin == EdgeOrigin::Lens {
                    continue;
                }
                for ev in &e.evidence {
                    let text = docs.get(ev.doc_id.as_str()).ok_or_else(|| format!("case {case}: evidence cites unknown {}", ev.doc_id))?;
                    check(text.contains(ev.span.trim()), || format!("case {case}: non-verbatim span in graph"))?;
                }
            }
        }
        for h in &out.hypotheses {
            check(h.causal_chain.iter().all(|l| !l.contains(PHANTOM)), || format!("case {case}: fabricated concept in hypothesis"))?;
        }
        rejections += out.trace.fabrication_rejections();
    }
    Ok(format!("100 adversarial runs, 0 leaked items, {rejections} fabrication rejections logged"))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let queries = bundled_queries();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut divergent = 0;
    for case in 0..100 {
        let kind = StrategyKind::ALL[rng.gen_range(0..4)];
        let query = if rng.gen_bool(0.6) { q6() } else { queries[rng.gen_range(0..queries.len())].query() };
        let mut config = mock_config(kind, rng.gen_range(0..1_000_000));
        config.strategy.k = rng.gen_range(1..8);
        config.strategy.overlap_threshold = [0.1, 0.3, 0.5][rng.gen_range(0..3)];
        config.max_papers = rng.gen_range(3..=12);
        if rng.gen_bool(0.25) {
            config.lens = Some(LensSpec::new("information theory"));
        }
        let record = run_query(&query, &config, &FixtureCorpus::bundled().suite()).map_err(|e| e.to_string())?.trace;
        let bytes = trace_bytes(&record).map_err(|e| format!("case {case}: {e}"))?;
        let back: TraceRecord = read_trace(bytes.as_slice()).map_err(|e| format!("case {case}: {e}"))?;
        check(back == record.canonical().unwrap(), || format!("case {case}: read(write(r)) != r"))?;
        check(trace_bytes(&back).unwrap() == bytes, || format!("case {case}: rewrite not byte-identical"))?;
        let outcome = replay(&back).map_err(|e| format!("case {case}: {e}"))?;
        if !outcome.divergences.is_empty() {
            divergent += 1;
            return Err(format!("case {case}: replay diverged at {:?}", outcome.divergences));
        }
    }
    Ok(format!("100 traces round-tripped, {divergent} replay divergences"))
}

// ---------------------------------------------------------------- 9

const TABLE2: [(&str, usize, usize); 6] = [
    ("Q1", 169, 220),
    ("Q2", 147, 146),
    ("Q3", 210, 259),
    ("Q4", 146, 205),
    ("Q5", 124, 196),
    ("Q6", 141, 227),
];
const TABLE5_DROP: [f64; 6] = [0.03, 0.00, 1.00, 1.00, 1.00, 0.00];

fn released_dir() -> Option<PathBuf> {
    if let Some(dir) = std::env::var_os("MECHSYNTH_RELEASED_TRACES") {
        return Some(PathBuf::from(dir));
    }
    let local = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../released-traces");
    local.is_dir().then_some(local)
}

fn criterion_9() -> Outcome {
    let dir = released_dir().ok_or_else(|| {
        "released Q1-Q6 traces not available (set MECHSYNTH_RELEASED_TRACES or add ./released-traces); \
         the public trace repository is unreachable from this environment"
            .to_string()
    })?;
    let files = released_trace_files(&dir).map_err(|e| e.to_string())?;
    let mut adapted = BTreeMap::new();
    for f in &files {
        match load_released(f) {
            Ok(a) => {
                adapted.insert(a.record.query_id.to_uppercase(), a);
            }
            Err(e) => eprintln!("  {}: {e}", f.display()),
        }
    }
    let mut problems = Vec::new();
    for ((q, nodes, edges), expected_drop) in TABLE2.iter().zip(TABLE5_DROP) {
        let Some(a) = adapted.get(*q) else {
            problems.push(format!("{q}: no trace"));
            continue;
        };
        if !a.unmapped_fields.is_empty() {
            println!("  {q} unmapped: {}", a.unmapped_fields.join(", "));
        }
        match a.graph_stats() {
            Some((n, e)) if (n, e) == (*nodes, *edges) => {}
            other => problems.push(format!("{q}: graph {other:?} vs ({nodes}, {edges})")),
        }
        match a.record.report.as_ref().and_then(|r| r.drop_rate) {
            Some(d) if (d - expected_drop).abs() <= 0.01 => {}
            other => problems.push(format!("{q}: drop {other:?} vs {expected_drop}")),
        }
    }
    if problems.is_empty() {
        Ok("Q1-Q6 released traces match Tables 2 and 5".into())
    } else {
        Err(problems.join("; "))
    }
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let corpus = FixtureCorpus::bundled();
    let max_papers = corpus.documents.len();
    let mut records = Vec::new();
    for kind in StrategyKind::ALL {
        for seed in 0..50 {
            let mut config = mock_config(kind, seed);
            config.max_papers = max_papers;
            records.push(run_query(&q6(), &config, &corpus.clone().suite()).map_err(|e| e.to_string())?.trace);
        }
    }
    let mut summary = Vec::new();
    for mode in [DropMode::PerRun, DropMode::RatioOfMeans] {
        let t = compare_runs(&records, &StrategyKind::ALL, mode);
        let drop = |k: StrategyKind| t.row(k).and_then(|r| r.drop_pct).unwrap_or(f64::NAN);
        let (s, f, w) = (drop(StrategyKind::ShortestPath), drop(StrategyKind::FullDiversity), drop(StrategyKind::RandomWalk));
        check(s < f && f < w, || format!("{mode:?}: shortest {s:.1} / full {f:.1} / walk {w:.1}\n{}", t.to_text()))?;
        let rag = t.row(StrategyKind::RagBaseline).map(|r| r.d_ground);
        check(rag == Some(0.0), || format!("rag grounded depth {rag:?}"))?;
        summary.push(format!("{mode:?} {s:.1} < {f:.1} < {w:.1}"));
    }
    Ok(format!("drop %: {}; rag grounded depth 0", summary.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 drop-rate arithmetic", criterion_1),
        ("2 collapse/failure rules", criterion_2),
        ("3 k-shortest oracle", criterion_3),
        ("4 diversity guarantee", criterion_4),
        ("5 louvain quality", criterion_5),
        ("6 determinism", criterion_6),
        ("7 fabrication guards", criterion_7),
        ("8 trace round-trip and replay", criterion_8),
        ("9 released-trace ingestion", criterion_9),
        ("10 strategy ordering", criterion_10),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.2}s): {why}");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
