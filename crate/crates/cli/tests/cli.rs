use std::path::Path;
use std::process::Command;

use mechsynth_cli::{run_cli, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(std::iter::once("mechsynth").chain(args.iter().copied()), &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn mock_runs(dir: &Path, strategies: &[&str]) {
    let mut args = vec!["run", "--query-id", "Q6", "--deterministic", "--out", path(dir)];
    for s in strategies {
        args.extend(["--strategy", s]);
    }
    let o = cli(&args);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
}

#[test]
fn mock_run_writes_trace_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["full"]);
    for f in ["Q6.full_diversity.trace.json", "Q6.full_diversity.report.json", "metrics.csv", "summary.txt"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    mock_runs(a.path(), &["walk"]);
    mock_runs(b.path(), &["walk"]);
    for f in ["Q6.random_walk.trace.json", "Q6.random_walk.report.json", "metrics.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn parallel_matches_sequential() {
    let seq = tempfile::tempdir().unwrap();
    let par = tempfile::tempdir().unwrap();
    let base = ["run", "--query-id", "Q6", "--query-id", "BIO-2", "--strategy", "shortest", "--strategy", "full", "--deterministic"];
    let mut a: Vec<&str> = base.to_vec();
    a.extend(["--out", path(seq.path())]);
    let mut b: Vec<&str> = base.to_vec();
    b.extend(["--out", path(par.path()), "--parallel"]);
    assert_eq!(cli(&a).code, EXIT_OK);
    assert_eq!(cli(&b).code, EXIT_OK);
    for f in ["Q6.shortest_path.trace.json", "BIO-2.full_diversity.trace.json", "summary.txt"] {
        assert_eq!(std::fs::read(seq.path().join(f)).unwrap(), std::fs::read(par.path().join(f)).unwrap());
    }
}

#[test]
fn live_mode_without_credentials_fails_before_running() {
    if std::env::var_os("OPENAI_API_KEY").is_some() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("live");
    let o = cli(&["run", "--query-id", "Q1", "--mode", "live", "--out", path(&out)]);
    assert_eq!(o.code, EXIT_FAILURE);
    assert!(o.stderr.contains("credentials"));
    assert!(!out.exists());
}

#[test]
fn lens_flag_puts_lens_edges_in_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--query-id", "Q6", "--lens", "information theory", "--deterministic", "--out", path(dir.path())]);
    assert_eq!(o.code, EXIT_OK);
    let trace = std::fs::read_to_string(dir.path().join("Q6.full_diversity.trace.json")).unwrap();
    assert!(trace.contains("\"origin\": \"lens\""));
}

#[test]
fn abstention_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "lattice gauge quark confinement", "--deterministic", "--out", path(dir.path())]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.contains("ABSTAINED"));
}

#[test]
fn run_without_query_is_usage_error() {
    assert_eq!(cli(&["run"]).code, EXIT_USAGE);
    assert_eq!(cli(&["run", "--query-id", "Q99"]).code, EXIT_USAGE);
}

#[test]
fn recorded_mode_reproduces_trace() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["shortest"]);
    let source = dir.path().join("Q6.shortest_path.trace.json");
    let again = dir.path().join("again");
    let o = cli(&[
        "run", "--query-id", "Q6", "--strategy", "shortest", "--mode", "recorded", "--exchanges", path(&source),
        "--deterministic", "--out", path(&again),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(&source).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(again.join("Q6.shortest_path.trace.json")).unwrap()).unwrap();
    assert_eq!(a["report"], b["report"]);
    assert_eq!(b["config"]["mode"], "recorded");
}

#[test]
fn eval_single_trace_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["full"]);
    let csv = dir.path().join("eval.csv");
    let o = cli(&["eval", path(&dir.path().join("Q6.full_diversity.trace.json")), "--csv", path(&csv)]);
    assert_eq!(o.code, EXIT_OK);
    assert_eq!(o.stdout.lines().count(), 2);
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 2);
}

#[test]
fn eval_matches_library_metrics() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["walk"]);
    let trace = dir.path().join("Q6.random_walk.trace.json");
    let o = cli(&["eval", path(&trace)]);
    let record = mechsynth::trace::read_trace_file(&trace).unwrap();
    assert_eq!(o.stdout, mechsynth::trace::metrics_table(&[record]).to_text());
}

#[test]
fn eval_without_arguments_is_usage_error() {
    assert_eq!(cli(&["eval"]).code, EXIT_USAGE);
}

#[test]
fn eval_names_malformed_trace_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["full"]);
    let bad = dir.path().join("broken.json");
    std::fs::write(&bad, "{\"schema_version\": \"mechsynth-trace/1\", ").unwrap();
    let o = cli(&["eval", path(dir.path())]);
    assert_eq!(o.code, EXIT_FAILURE);
    assert!(o.stderr.contains("broken.json"));
    assert!(o.stdout.contains("Q6"));
}

#[test]
fn compare_four_groups_gives_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["full", "shortest", "walk", "rag"]);
    let csv = dir.path().join("table.csv");
    let o = cli(&["compare", path(dir.path()), "--csv", path(&csv)]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Method,Runs,Symbolic Depth,Grounded Depth,Drop (%),Failure (%)");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("RAG Baseline (No Graph),1,0.00,0.00,"));
    assert!(lines[4].ends_with(",100.0"));
}

#[test]
fn compare_one_group_warns_about_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["shortest"]);
    let o = cli(&["compare", path(dir.path()), "--drop-mode", "ratio-of-means"]);
    assert_eq!(o.code, EXIT_OK);
    assert_eq!(o.stdout.lines().filter(|l| l.starts_with("warning:")).count(), 3);
    assert!(o.stdout.contains("Shortest Path"));
}

#[test]
fn compare_skips_corrupted_trace() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["full"]);
    std::fs::write(dir.path().join("zz.json"), "not json").unwrap();
    let o = cli(&["compare", path(dir.path())]);
    assert_eq!(o.code, EXIT_FAILURE);
    assert!(o.stderr.contains("zz.json"));
    assert!(o.stdout.contains("Full (Diversity-Enforced)"));
}

#[test]
fn replay_of_own_trace_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["full"]);
    let o = cli(&["replay", path(&dir.path().join("Q6.full_diversity.trace.json"))]);
    assert_eq!(o.code, EXIT_OK, "{}{}", o.stdout, o.stderr);
    assert!(o.stdout.contains("replay matches"));
}

#[test]
fn replay_flags_corrupted_report() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["full"]);
    let trace = dir.path().join("Q6.full_diversity.trace.json");
    let mut value: serde_json::Value = serde_json::from_slice(&std::fs::read(&trace).unwrap()).unwrap();
    value["report"]["drop_rate"] = serde_json::json!(0.5);
    std::fs::write(&trace, serde_json::to_string(&value).unwrap()).unwrap();
    let o = cli(&["replay", path(&trace)]);
    assert_eq!(o.code, EXIT_FAILURE);
    assert!(o.stdout.contains("report.drop_rate"));
}

#[test]
fn replay_reports_missing_exchange() {
    let dir = tempfile::tempdir().unwrap();
    mock_runs(dir.path(), &["full"]);
    let trace = dir.path().join("Q6.full_diversity.trace.json");
    let mut value: serde_json::Value = serde_json::from_slice(&std::fs::read(&trace).unwrap()).unwrap();
    value["exchanges"].as_array_mut().unwrap().retain(|e| e["call_id"] != "refine");
    std::fs::write(&trace, serde_json::to_string(&value).unwrap()).unwrap();
    let o = cli(&["replay", path(&trace)]);
    assert_eq!(o.code, EXIT_FAILURE);
    assert!(o.stderr.contains("`refine`"));
}

#[test]
fn replay_foreign_trace_goes_through_adapter() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("Q1.json");
    let foreign = serde_json::json!({
        "query": "Can synaptic plasticity inform catastrophic forgetting?",
        "graph": {"nodes": ["a", "b", "c"], "edges": [["a", "r", "b"], ["b", "r", "c"]]},
        "paths": [["a", "b", "c"]],
        "hypotheses": [{"statement": "a drives c", "causal_chain": ["a", "b", "c"],
                        "scores": {"novelty": 0.5, "feasibility": 0.5, "testability": 0.5}}],
        "run_id": "xyz",
    });
    std::fs::write(&file, foreign.to_string()).unwrap();
    let o = cli(&["replay", path(&file)]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stdout.contains("graph: 3 nodes, 2 edges"));
    assert!(o.stdout.contains("\"drop_rate\": 0.000000"));
    assert!(o.stdout.contains("run_id"));
}

#[test]
fn queries_lists_bundled_sets() {
    assert_eq!(cli(&["queries"]).stdout.lines().count(), 20);
    assert_eq!(cli(&["queries", "--set", "core"]).stdout.lines().count(), 6);
}

#[test]
fn binary_reports_help_and_usage_errors() {
    let bin = env!("CARGO_BIN_EXE_mechsynth");
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("replay"));
    let bad = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
}
