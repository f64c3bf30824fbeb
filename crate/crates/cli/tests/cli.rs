use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn hook() -> PathBuf {
    fixtures().join("line_tracer.py")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracecorpus")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn err_record(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.lines().last().expect("error line")).expect("json error record")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn mutate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = fixtures().join("seeds");
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for (out, workers) in [(&a, "1"), (&b, "4")] {
        let o =
            run(&["mutate", "--seed-dir", p(&seeds), "--n", "20", "--rng", "7", "--workers", workers, "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(!fs::read(&a).unwrap().is_empty());

    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("a.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["root"], 7);
    assert_eq!(manifest["counts"]["seeds"], 20);
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 40);

    let c = dir.path().join("c.jsonl");
    run(&["mutate", "--seed-dir", p(&seeds), "--n", "20", "--rng", "8", "--out", p(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn evaluate_gold_against_itself_is_perfect() {
    let gold = fixtures().join("desk_records.jsonl");
    for exact in [false, true] {
        let mut args = vec!["evaluate", "--pred", p(&gold), "--gold", p(&gold)];
        if exact {
            args.push("--exact");
        }
        let table = ok_json(&args);
        for col in tracecorpus::metrics::REPORT_COLUMNS {
            assert_eq!(table[col], 1.0, "{col}");
        }
        assert_eq!(table["Examples"], 5);
        assert_eq!(table["Output Examples"], 3);
    }
}

#[test]
fn evaluate_scores_a_wrong_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.jsonl");
    let pred = dir.path().join("pred.jsonl");
    fs::write(
        &gold,
        r#"{"id":"e","tier":"CODENETMUT","input_tokens":"[CODENETMUT] [1] x = 1 [2] y = 2","target_tokens":"[LINE] [1] [STATE] x : 1 [STATEEND] [LINE] [2] [STATE] x : 1 [DICTSEP] y : 2 [STATEEND]","stdout":"3\n","problem_id":"p"}"#,
    )
    .unwrap();
    fs::write(
        &pred,
        r#"{"example_id":"e","predicted_tokens":"[LINE] [1] [STATE] x : 1 [STATEEND] [LINE] [2] [STATE] x : 1 [DICTSEP] y : 3 [STATEEND]","predicted_stdout":"3"}"#,
    )
    .unwrap();
    let t = ok_json(&["evaluate", "--pred", p(&pred), "--gold", p(&gold)]);
    assert_eq!(t["Output Acc."], 1.0);
    assert_eq!(t["Trace Acc."], 0.0);
    assert_eq!(t["Line Precision"], 0.5);
    assert_eq!(t["Identifier Recall"], 2.0 / 3.0);
}

#[test]
fn stats_match_hand_counts() {
    let s = ok_json(&["stats", p(&fixtures().join("desk_records.jsonl"))]);
    let expect = [("SingleLine", 2, 2.0, 1.0, 1.5), ("Tutorial", 1, 4.0, 7.0, 2.0), ("CodeNetMut", 2, 5.0, 3.5, 1.5)];
    for (tier, n, code, trace, state) in expect {
        assert_eq!(s[tier]["Examples"], n, "{tier}");
        assert_eq!(s[tier]["Avg Code Len"], code, "{tier}");
        assert_eq!(s[tier]["Avg Trace Len"], trace, "{tier}");
        assert_eq!(s[tier]["Avg State Num"], state, "{tier}");
    }
}

#[test]
fn exit_codes_and_error_records() {
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(err_record(&out)["error"], "usage");

    let out = run(&["stats", "/nonexistent/records.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(err_record(&out)["error"], "data");

    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "trace",
        "--seed-dir",
        p(&fixtures().join("seeds")),
        "--hook",
        "/nonexistent/hook.py",
        "--out",
        p(&dir.path().join("t.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(err_record(&out)["exit_code"], 3);

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{not json\n").unwrap();
    let out = run(&["stats", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));

    assert!(run(&["--help"]).status.success());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "rng_seed = 7\nmutants_per_seed = 3\n").unwrap();
    let seeds = fixtures().join("seeds");
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    run(&["mutate", "--config", p(&cfg), "--seed-dir", p(&seeds), "--out", p(&a)]);
    run(&["mutate", "--seed-dir", p(&seeds), "--rng", "7", "--n", "3", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(read_lines(&a).len() <= 60);

    fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let out = run(&["mutate", "--config", p(&cfg), "--seed-dir", p(&seeds), "--out", p(&a)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mutate_trace_build_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = fixtures().join("seeds");
    let mutants = dir.path().join("m.jsonl");
    let traced = dir.path().join("t.jsonl");
    let out_dir = dir.path().join("ds");
    assert!(run(&["mutate", "--seed-dir", p(&seeds), "--n", "3", "--rng", "1", "--out", p(&mutants)]).status.success());
    let o =
        run(&["trace", "--seed-dir", p(&seeds), "--mutants", p(&mutants), "--hook", p(&hook()), "--out", p(&traced)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_lines(&traced);
    assert!(rows.iter().filter(|r| r["origin"] == "seed").count() == 20);
    assert!(rows.iter().all(|r| r["trace"]["status"] == "ok"));

    let o =
        run(&["build-dataset", "--codenetmut", p(&traced), "--rng", "5", "--stage", "S3", "--out-dir", p(&out_dir)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let test = read_lines(&out_dir.join("test.jsonl"));
    let train = read_lines(&out_dir.join("train.jsonl"));
    assert!(!test.is_empty());
    assert!(test.iter().all(|r| r["meta"]["origin"] != "mutant"));
    let problems = |rows: &[Value]| {
        rows.iter().map(|r| r["problem_id"].as_str().unwrap().to_string()).collect::<std::collections::BTreeSet<_>>()
    };
    assert!(problems(&train).is_disjoint(&problems(&test)));
    assert!(train.iter().all(|r| r["input_tokens"].as_str().unwrap().starts_with("[CODENETMUT] ")));

    let manifest: Value = serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["counts"]["train_problems"], 8);
    assert_eq!(manifest["split_hashes"].as_object().unwrap().len(), 3);
}

#[test]
fn search_eval_in_oracle_and_prediction_modes() {
    let corpus = fixtures().join("search_corpus.jsonl");
    let r = ok_json(&["search-eval", "--corpus", p(&corpus), "--hook", p(&hook())]);
    assert_eq!(r["MAP"], 1.0);
    assert_eq!(r["queries"], 20);

    // every program predicted to print the same thing: ties fall back to id order
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.jsonl");
    let lines: Vec<String> = read_lines(&corpus)
        .iter()
        .map(|r| serde_json::json!({"function_id": r["function_id"], "output": "0\n"}).to_string())
        .collect();
    fs::write(&preds, lines.join("\n")).unwrap();
    let r = ok_json(&["search-eval", "--corpus", p(&corpus), "--predictions", p(&preds)]);
    assert!(r["MAP"].as_f64().unwrap() < 1.0);
    assert_eq!(r["outputs"], "predicted");
}

#[test]
fn rank_eval_reports_pass_at_k() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("r.jsonl");
    fs::write(
        &f,
        r#"{"problem_id":"a","expected_output":"42","solutions":[{"id":"s1","output":"41","is_correct":false},{"id":"s2","output":"42","is_correct":true},{"id":"s3","output":"x","is_correct":false}]}
{"problem_id":"b","expected_output":"ok","solutions":[{"id":"s1","output":"no","is_correct":false},{"id":"s2","output":"ok","is_correct":false}]}
"#,
    )
    .unwrap();
    let r = ok_json(&["rank-eval", "--instances", p(&f), "--top-m", "2", "--k", "1,2"]);
    assert_eq!(r["pass@1"], 0.25);
    assert_eq!(r["pass@2"], 0.5);
    let out = run(&["rank-eval", "--instances", p(&f), "--top-m", "2", "--k", "3"]);
    assert_eq!(out.status.code(), Some(2));
}
