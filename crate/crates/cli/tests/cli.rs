//! End-to-end tests of the `trait-alloc` binary.

use std::fs;
use std::process::{Command, Output};

use trait_alloc::stats::chi_square_gof;
use trait_alloc::TraitAllocation;

const MODEL_A: &str = r#"{"theta": [[0.5]]}"#;
// Paintbox with dust weight 0.1 and block weights (0.5, 0.4).
const EPPF: &str = r#"{"theta": [[0.3333333333333333], [0.2857142857142857]], "dust_rates": [0.1], "constraint": "partition"}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trait-alloc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn model_file(dir: &tempfile::TempDir, json: &str) -> String {
    let path = dir.path().join("m.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sample_is_reproducible_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = model_file(
        &dir,
        r#"{"theta": [[0.3, 0.2], [0.5]], "dust_rates": [0.4]}"#,
    );
    let args = [
        "sample", "--model", &m, "--n", "4", "--draws", "100", "--seed", "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<String> = stdout(&a).lines().map(String::from).collect();
    assert_eq!(lines.len(), 100);
    for line in &lines {
        let t = TraitAllocation::parse_with_horizon(line, 4).unwrap();
        assert_eq!(&t.to_string(), line);
    }
    let other = run(&[
        "sample", "--model", &m, "--n", "4", "--draws", "100", "--seed", "8",
    ]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn sample_output_does_not_depend_on_jobs() {
    let one = run(&[
        "sample", "--model", EPPF, "--n", "4", "--draws", "300", "--seed", "3",
    ]);
    let four = run(&[
        "sample", "--model", EPPF, "--n", "4", "--draws", "300", "--seed", "3", "--jobs", "4",
    ]);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn model_a_single_index_support() {
    let o = run(&[
        "sample", "--model", MODEL_A, "--n", "1", "--draws", "4", "--seed", "11",
    ]);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().all(|l| l == "∅" || l == "{{1}}"), "{out}");
}

#[test]
fn zero_draws_is_empty() {
    let o = run(&["sample", "--model", MODEL_A, "--n", "3", "--draws", "0"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
}

#[test]
fn constrained_samples_are_partitions() {
    let o = run(&[
        "sample", "--model", EPPF, "--n", "5", "--draws", "200", "--seed", "1",
    ]);
    assert_eq!(code(&o), 0);
    for line in stdout(&o).lines() {
        let t = TraitAllocation::parse_with_horizon(line, 5).unwrap();
        assert!(t.classify().partition, "{line}");
    }
}

#[test]
fn sample_formats() {
    let csv = stdout(&run(&[
        "sample", "--model", MODEL_A, "--n", "2", "--draws", "3", "--format", "csv",
    ]));
    assert!(csv.starts_with("draw,allocation\n"));
    assert_eq!(csv.lines().count(), 4);
    let json = stdout(&run(&[
        "sample", "--model", MODEL_A, "--n", "2", "--draws", "3", "--format", "json",
    ]));
    for line in json.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let t: TraitAllocation = serde_json::from_value(v["traits"].clone()).unwrap();
        assert_eq!(t.to_string(), v["allocation"].as_str().unwrap());
    }
}

#[test]
fn retry_exhaustion_exits_3_per_draw() {
    let o = run(&[
        "sample",
        "--model",
        r#"{"theta": [[0.01], [0.01]]}"#,
        "--constraint",
        "vertex",
        "--n",
        "3",
        "--draws",
        "5",
        "--max-retries",
        "1",
    ]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(
        err.contains("draw 0:") && err.contains("retries exhausted"),
        "{err}"
    );
}

#[test]
fn prob_matches_closed_form_and_oracle() {
    let o = run(&["prob", "--model", MODEL_A, "{{1,2}}"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 0.25);
    let o = run(&[
        "prob", "--model", MODEL_A, "{{1,2}}", "--oracle", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["probability"], 0.25);
    assert_eq!(v["oracle"], 0.25);
    assert_eq!(v["difference"], 0.0);
}

#[test]
fn prob_constrained_oracle_agrees() {
    let o = run(&[
        "prob",
        "--model",
        EPPF,
        "{{1,3},{2}}",
        "--oracle",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["probability"].as_f64().unwrap() > 0.0);
    assert!(v["difference"].as_f64().unwrap() < 1e-9);
}

#[test]
fn prob_rejects_index_beyond_horizon() {
    let o = run(&["prob", "--model", MODEL_A, "{{1,3}}", "--n", "2"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn prob_outside_constraint_is_zero() {
    let o = run(&["prob", "--model", EPPF, "{{1,1}}", "--n", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn invalid_models_exit_1() {
    for m in [
        r#"{"theta": [[0.7, 0.5]]}"#,
        r#"{"theta": [[0.5]], "rates": [1.0]}"#,
        r#"{"theta": [[-0.1]]}"#,
    ] {
        assert_eq!(code(&run(&["sample", "--model", m, "--n", "1"])), 1, "{m}");
    }
    assert_eq!(
        code(&run(&[
            "sample",
            "--model",
            "/nonexistent.json",
            "--n",
            "1"
        ])),
        1
    );
    assert_eq!(
        code(&run(&[
            "sample", "--model", MODEL_A, "--n", "1", "--caps", "1,2"
        ])),
        1
    );
    assert_eq!(code(&run(&["nonsense"])), 1);
}

#[test]
fn enumerate_dumps_a_normalized_table() {
    let o = run(&["enumerate", "--model", MODEL_A, "--n", "2"]);
    assert_eq!(
        stdout(&o),
        "allocation,probability,exact\n∅,0.25,true\n\"{{1,2}}\",0.25,true\n{{1}},0.25,true\n{{2}},0.25,true\n"
    );
    let o = run(&["enumerate", "--model", EPPF, "--n", "3", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let text = v.to_string();
    // Partitions of [3].
    assert_eq!(text.matches("\"allocation\"").count(), 5, "{text}");
}

fn check(args: &[&str]) -> (i32, serde_json::Value) {
    let mut all = vec!["check", "--draws", "20000"];
    all.extend_from_slice(args);
    let o = run(&all);
    (code(&o), serde_json::from_str(&stdout(&o)).unwrap())
}

fn property<'a>(report: &'a serde_json::Value, name: &str) -> &'a serde_json::Value {
    report["properties"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == name)
        .unwrap_or_else(|| panic!("no property {name}"))
}

#[test]
fn check_passes_on_model_a() {
    let (c, r) = check(&["--model", MODEL_A]);
    assert_eq!(c, 0, "{r:#}");
    assert_eq!(r["pass"], true);
    for name in [
        "ordering_consistency",
        "oracle_exchangeability",
        "formula_exchangeability",
        "etpf_factorization",
        "formula_vs_oracle",
        "sampler_calibration",
        "rejection_equivalence",
        "uniform_ordering",
    ] {
        assert_eq!(property(&r, name)["pass"], true, "{name}");
    }
}

#[test]
fn check_eppf_reports_partition_closure() {
    let (c, r) = check(&["--model", EPPF, "--jobs", "2"]);
    assert_eq!(c, 0, "{r:#}");
    assert_eq!(property(&r, "partition_closure")["pass"], true);
    assert_eq!(property(&r, "cetpf_vs_oracle")["pass"], true);
}

#[test]
fn check_report_does_not_depend_on_jobs() {
    let a = run(&["check", "--model", EPPF, "--draws", "5000", "--jobs", "1"]);
    let b = run(&["check", "--model", EPPF, "--draws", "5000", "--jobs", "3"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn check_reports_corrupted_model() {
    let (c, r) = check(&["--model", r#"{"theta": [[0.7, 0.5]]}"#]);
    assert_eq!(c, 1);
    assert_eq!(r["model_valid"], false);
    assert_eq!(property(&r, "model_validation")["pass"], false);
}

#[test]
fn check_failure_exits_2() {
    // Caps too small for the model make the exhaustive properties fail.
    let (c, r) = check(&["--model", r#"{"theta": [[0.5], [0.5]]}"#, "--caps", "1,1,0"]);
    assert_eq!(c, 2);
    assert_eq!(r["pass"], false);
    assert_eq!(r["model_valid"], true);
}

#[test]
fn graph_two_vertices_repeat_the_only_edge() {
    let o = run(&["graph", "edges", "--weights", "1,1", "--edges", "5"]);
    assert_eq!(code(&o), 0);
    let expected: String = std::iter::once("edge_index,vertex_a,vertex_b,weight\n".to_string())
        .chain((1..=5).map(|i| format!("{i},1,2,1\n")))
        .collect();
    assert_eq!(stdout(&o), expected);
}

#[test]
fn graph_single_edge_frequencies_follow_pairwise_products() {
    let seeds = 1500u64;
    let mut counts = [0u64; 3];
    for seed in 0..seeds {
        let o = run(&[
            "graph",
            "edges",
            "--weights",
            "0.5,0.3,0.2",
            "--edges",
            "1",
            "--seed",
            &seed.to_string(),
        ]);
        let row = stdout(&o).lines().nth(1).unwrap().to_string();
        let i = match row.as_str() {
            "1,1,2,1" => 0,
            "1,1,3,1" => 1,
            "1,2,3,1" => 2,
            other => panic!("unexpected edge {other}"),
        };
        counts[i] += 1;
    }
    let law = [15.0 / 31.0, 10.0 / 31.0, 6.0 / 31.0];
    let c = chi_square_gof(&counts, &law);
    assert!(c.p_value > 1e-3, "{counts:?} p {}", c.p_value);
}

#[test]
fn graph_rejects_degenerate_weights() {
    assert_eq!(
        code(&run(&["graph", "edges", "--weights", "1", "--edges", "2"])),
        1
    );
    assert_eq!(
        code(&run(&[
            "graph",
            "edges",
            "--weights",
            "1,0",
            "--edges",
            "2"
        ])),
        1
    );
}

#[test]
fn graph_growth_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    let o = run(&[
        "graph",
        "growth",
        "--weights",
        "1,1",
        "--n-max",
        "0",
        "--out",
        empty.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(&empty).unwrap(), "n,vertices,edges\n");

    let curve = dir.path().join("curve.csv");
    let args = [
        "graph",
        "growth",
        "--power-law",
        "40,1.2",
        "--n-max",
        "30",
        "--step",
        "10",
        "--seed",
        "5",
        "--out",
        curve.to_str().unwrap(),
    ];
    run(&args);
    let text = fs::read_to_string(&curve).unwrap();
    let rows: Vec<Vec<usize>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        [0, 10, 20, 30]
    );
    assert!(rows.windows(2).all(|w| w[0][1] <= w[1][1]));
    run(&args);
    assert_eq!(fs::read_to_string(&curve).unwrap(), text);
}

#[test]
fn graph_encode_uses_lexicographic_vertex_ids() {
    let o = run(&[
        "graph",
        "encode",
        "{{1,2,4},{1,3},{2},{3},{4}}",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["stats"]["degrees"], serde_json::json!([3, 2, 1, 1, 1]));
    assert_eq!(code(&run(&["graph", "encode", "{{1,1}}"])), 1);
}
