use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attncausal::io::{pag_from_json, trace_from_json, AttentionBundle};
use attncausal::pag::Mark;
use serde_json::Value;

fn bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attncausal"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn write_bundle(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn chain_preset_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["synth", "--preset", "chain"], dir.path());
    assert!(out.status.success());
    for f in ["chain.json", "chain.truth/head0.pag.json", "chain.truth/head0.dot"] {
        assert_eq!(read(dir.path().join(f)), read(golden(&format!("expected/chain_synth/{f}"))), "{f}");
    }
}

#[test]
fn chain_discovery_dot_has_only_chain_edges() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["--n-eff", "20", "discover", golden("expected/chain_synth/chain.json").to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dot = read(dir.path().join("chain/head0.dot"));
    let edges: Vec<&str> = dot.lines().filter(|l| l.contains("--")).collect();
    assert_eq!(edges.len(), 2);
    assert!(edges[0].trim_start().starts_with("0 -- 1 "));
    assert!(edges[1].trim_start().starts_with("1 -- 2 "));
    for f in ["head0.dot", "head0.pag.json", "head0.trace.json"] {
        assert_eq!(read(dir.path().join("chain").join(f)), read(golden(&format!("expected/chain_discover/{f}"))), "{f}");
    }
}

#[test]
fn one_token_bundle_gives_single_node() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_bundle(
        dir.path(),
        "one.json",
        r#"{"format_version": 1, "sequence_id": "one", "n": 1, "heads": [{"head_index": 0, "matrix": [[1.0]]}]}"#,
    );
    let out = bin(&["discover", &input], &dir.path().join("o"));
    assert!(out.status.success());
    let g = pag_from_json(&read(dir.path().join("o/one/head0.pag.json"))).unwrap();
    assert_eq!(g.n(), 1);
    assert!(g.edges().is_empty());
    let t = trace_from_json(&read(dir.path().join("o/one/head0.trace.json"))).unwrap();
    assert!(t.records.is_empty());
    assert_eq!(t.tests_performed, 0);
}

#[test]
fn malformed_row_fails_with_row_in_message() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_bundle(
        dir.path(),
        "bad.json",
        r#"{"format_version": 1, "sequence_id": "bad", "n": 2, "heads": [{"head_index": 0, "matrix": [[1.0, 0.0], [0.7, 0.7]]}]}"#,
    );
    let good = golden("expected/chain_synth/chain.json");
    let out = bin(&["discover", &bad, good.to_str().unwrap()], &dir.path().join("o"));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 1") && err.contains("bad.json"), "{err}");
    // the valid bundle is still processed
    assert!(dir.path().join("o/chain/head0.dot").exists());
}

#[test]
fn json_errors_report_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_bundle(dir.path(), "broken.json", "{\n  \"format_version\": 1,\n  \"n\": x\n}");
    let out = bin(&["discover", &bad], &dir.path().join("o"));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.json") && err.contains("line 3"), "{err}");
}

#[test]
fn score_trace_fixture_is_ln2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["score", "--trace", golden("trace_ln2.json").to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&read(dir.path().join("score.json"))).unwrap();
    let r = v["traces"][0]["scores"]["all"]["r_score"].as_f64().unwrap();
    assert!((r - std::f64::consts::LN_2).abs() < 1e-9);
}

#[test]
fn degenerate_head_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_bundle(
        dir.path(),
        "one.json",
        r#"{"format_version": 1, "sequence_id": "one", "n": 1, "heads": [{"head_index": 0, "matrix": [[1.0]]}]}"#,
    );
    let out = bin(&["score", &input], &dir.path().join("o"));
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&read(dir.path().join("o/score.json"))).unwrap();
    let head = &v["sequences"][0]["heads"][0]["scores"]["all"];
    assert_eq!(head["degenerate"], Value::Bool(true));
    assert_eq!(head["r_score"].as_f64(), Some(0.0));
}

#[test]
fn sequence_score_is_mean_of_eight_heads() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin(&["synth", "--kind", "noisy", "--heads", "8", "--n", "8"], &dir.path().join("s")).status.success());
    let input = dir.path().join("s/synth-0.json");
    let out = bin(&["--ablation", "score", input.to_str().unwrap()], &dir.path().join("o"));
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&read(dir.path().join("o/score.json"))).unwrap();
    let seq = &v["sequences"][0];
    for f in ["cond0", "cond1", "cond01", "all"] {
        let heads = seq["heads"].as_array().unwrap();
        assert_eq!(heads.len(), 8);
        let mean = heads.iter().map(|h| h["scores"][f]["r_score"].as_f64().unwrap()).sum::<f64>() / 8.0;
        let score = seq["sequence_scores"][f]["score"].as_f64().unwrap();
        assert!((score - mean).abs() < 1e-12, "{f}");
    }
    let csv = read(dir.path().join("o/head_scores.csv"));
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn latent_synth_truth_has_bidirected_edge() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "10", "synth", "--latents", "1", "--n", "7", "--heads", "1", "--density", "0.35"];
    assert!(bin(&args, dir.path()).status.success());
    let bundle = AttentionBundle::from_json(&read(dir.path().join("synth-0.json"))).unwrap();
    assert_eq!(bundle.n, 6);
    let g = pag_from_json(&read(dir.path().join("synth-0.truth/head0.pag.json"))).unwrap();
    assert!(g.edges().iter().any(|e| e.mark_a == Mark::Arrow && e.mark_b == Mark::Arrow));
}

#[test]
fn synth_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        assert!(bin(&["--seed", seed, "synth", "--kind", "noisy", "--count", "2"], &dir.path().join(sub)).status.success());
        (read(dir.path().join(sub).join("synth-0.json")), read(dir.path().join(sub).join("synth-1.json")))
    };
    let a = run("3", "a");
    assert_eq!(a, run("3", "b"));
    assert_ne!(a, run("4", "c"));
}

#[test]
fn prune_and_ngram_match_golden_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path();
    let scores = golden("prune_scores.csv");
    let outcomes = golden("prune_outcomes.csv");
    let out = bin(
        &["prune", "--scores", scores.to_str().unwrap(), "--outcomes", outcomes.to_str().unwrap(), "--percentiles", "25,50,75"],
        &o.join("p"),
    );
    assert!(out.status.success());
    assert_eq!(read(o.join("p/masks.json")), read(golden("expected/masks_asc.json")));
    assert_eq!(read(o.join("p/curve.csv")), read(golden("expected/curve.csv")));
    let out = bin(&["--order", "desc", "prune", "--scores", scores.to_str().unwrap(), "--percentiles", "50"], &o.join("d"));
    assert!(out.status.success());
    assert_eq!(read(o.join("d/masks.json")), read(golden("expected/masks_desc.json")));

    let abc = golden("ngram_abc.json");
    let out = bin(
        &["ngram", "--train", abc.to_str().unwrap(), "--probe", abc.to_str().unwrap(), "--ell", "3", "--n", "2"],
        &o.join("n"),
    );
    assert!(out.status.success());
    assert_eq!(read(o.join("n/ngram.csv")), read(golden("expected/ngram_abc.csv")));
}

#[test]
fn ngram_invalid_pair_is_reported_but_others_written() {
    let dir = tempfile::tempdir().unwrap();
    let two = golden("ngram_two.json");
    let out = bin(&["ngram", "--train", two.to_str().unwrap(), "--ell", "3", "--n", "1,3"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n 3"));
    // each sequence probes the other one only
    assert_eq!(
        read(dir.path().join("ngram.csv")),
        "ell,n,mean,probes_used,train_used,skipped_probe,skipped_train\n3,1,1.0,2,2,0,0\n"
    );
}

#[test]
fn invalid_global_options_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let chain = golden("expected/chain_synth/chain.json");
    assert_eq!(bin(&["--bins", "1", "discover", chain.to_str().unwrap()], dir.path()).status.code(), Some(2));
    assert_eq!(bin(&["--alpha", "1.5", "discover", chain.to_str().unwrap()], dir.path()).status.code(), Some(2));
    assert!(!bin(&["--filter", "cond7", "discover", chain.to_str().unwrap()], dir.path()).status.success());
}
