mod common;

use common::*;
use serde_json::{json, Value};

const SENTENCES: [(&str, &str, &str); 4] = [
    ("s1", "Take off your shoes at the entrance.", "culture-specific"),
    ("s2", "Use the purification basin at a shrine.", "culture-specific"),
    ("s3", "Turn off the alarm in the morning.", "general"),
    ("s4", "Wait for the train at the station.", "general"),
];

const PLANTED: [[f64; 4]; 4] = [
    [0.1, 0.2, 0.05, 0.95],
    [0.0, 0.1, 0.0, 0.9],
    [0.9, 0.9, 0.9, 0.9],
    [0.8, 0.85, 0.8, 0.8],
];

fn planted_fixture(ws: &Workspace, broken: Option<usize>) -> String {
    let set = custom_set();
    let records: Vec<_> = SENTENCES
        .iter()
        .zip(PLANTED)
        .enumerate()
        .map(|(i, ((_, text, _), values))| {
            let response = if broken == Some(i) {
                "I'd rather not put numbers on this.".to_owned()
            } else {
                format!("Here you go:\n{}", scores_json(&set, &values))
            };
            generality_fixture(text, &set, &response, None)
        })
        .collect();
    ws.fixture("fixture.jsonl", &records)
}

fn score_args<'a>(ws: &'a Workspace, input: &'a str, fixture: &'a str, out: &'a str) -> Vec<String> {
    [
        "score", "--input", input, "--mode", "custom", "--target", "Japan", "--cultures",
        "China,Republic of Korea,United States of America,Japan", "--backend", "scripted",
        "--fixture", fixture, "--out", out, "--exp-dir",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([ws.arg("exp")])
    .collect()
}

fn run(args: &[String]) -> std::process::Output {
    cci(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn score_is_deterministic_and_resumable() {
    let ws = Workspace::new();
    let input = ws.sentences("in.jsonl", &SENTENCES);
    let fixture = planted_fixture(&ws, None);

    let first = run(&score_args(&ws, &input, &fixture, &ws.arg("a.jsonl")));
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert_eq!(backend_calls(&first), 12);

    // An empty fixture would fail any backend call, so a clean second run proves the cache served it.
    let empty = ws.fixture("empty.jsonl", &[]);
    let second = run(&score_args(&ws, &input, &empty, &ws.arg("b.jsonl")));
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    assert_eq!(backend_calls(&second), 0);
    assert_eq!(
        std::fs::read(ws.path("a.jsonl")).unwrap(),
        std::fs::read(ws.path("b.jsonl")).unwrap()
    );

    let lines = read_lines(&ws.path("a.jsonl"));
    assert_eq!(lines.len(), 4);
    let ids: Vec<&str> = lines.iter().map(|l| l["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["s1", "s2", "s3", "s4"]);
    assert_eq!(lines[0]["n_runs"], 3);
    assert_eq!(lines[0]["breakdown"]["Japan"], 0.95);
    assert!((lines[0]["cci"].as_f64().unwrap() - (0.95 - 0.35 / 3.0)).abs() < 1e-12);
    assert_eq!(lines[2]["cci"], 0.0);
    assert_eq!(lines[2]["cci_log"], 0.0);
}

#[test]
fn one_unparseable_item_is_a_partial_failure() {
    let ws = Workspace::new();
    let input = ws.sentences("in.jsonl", &SENTENCES);
    let fixture = planted_fixture(&ws, Some(3));
    let out = run(&score_args(&ws, &input, &fixture, &ws.arg("out.jsonl")));
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    let lines = read_lines(&ws.path("out.jsonl"));
    assert_eq!(lines.len(), 4);
    assert!(lines[..3].iter().all(|l| l.get("cci").is_some()));
    assert_eq!(lines[3]["id"], "s4");
    assert!(lines[3]["error"].as_str().unwrap().contains("after 4 attempt"));
    // the default retry budget: 3 runs for each good item, 4 attempts for the bad one
    assert_eq!(backend_calls(&out), 9 + 4);
}

#[test]
fn all_items_failing_is_a_total_failure() {
    let ws = Workspace::new();
    let input = ws.sentences("in.jsonl", &SENTENCES);
    let empty = ws.fixture("empty.jsonl", &[]);
    let out = run(&score_args(&ws, &input, &empty, &ws.arg("out.jsonl")));
    assert_eq!(code(&out), 4);
    assert!(read_lines(&ws.path("out.jsonl")).iter().all(|l| l.get("error").is_some()));
}

#[test]
fn config_errors_exit_with_their_own_code() {
    let ws = Workspace::new();
    let input = ws.sentences("in.jsonl", &SENTENCES);
    let fixture = planted_fixture(&ws, None);
    let base = ["score", "--input", &input, "--backend", "scripted", "--fixture", &fixture];

    let cases: Vec<Vec<&str>> = vec![
        // global mode with a target outside the 19-country list
        vec!["--mode", "global", "--target", "Narnia"],
        vec!["--mode", "custom", "--target", "Japan"],
        vec!["--mode", "custom", "--target", "Japan", "--cultures", "China,Brazil"],
        vec!["--target", "Japan", "--runs", "0"],
        vec!["--mode", "global"],
    ];
    for extra in cases {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        let out = cci(&args);
        assert_eq!(code(&out), 2, "{extra:?}: {}", stderr(&out));
        assert!(stderr(&out).contains("config error"));
    }

    let missing_fixture = cci(&["score", "--input", &input, "--target", "Japan", "--backend", "scripted"]);
    assert_eq!(code(&missing_fixture), 2);
    let no_endpoint = cci(&["score", "--input", &input, "--target", "Japan", "--model", "m"]);
    assert_eq!(code(&no_endpoint), 2);

    std::fs::write(ws.path("bad.toml"), "runz = 3\n").unwrap();
    let unknown_key = cci(&["score", "--input", &input, "--config", &ws.arg("bad.toml")]);
    assert_eq!(code(&unknown_key), 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let ws = Workspace::new();
    let input = ws.sentences("in.jsonl", &SENTENCES[..1]);
    planted_fixture(&ws, None);
    // relative paths in the file resolve against the file's directory
    std::fs::write(
        ws.path("exp.toml"),
        r#"
mode = "custom"
target = "Japan"
cultures = ["China", "Republic of Korea", "United States of America", "Japan"]
n_runs = 2
exp_dir = "cache-dir"

[backend]
backend = "scripted"
fixture = "fixture.jsonl"
"#,
    )
    .unwrap();
    let from_file = cci(&["score", "--config", &ws.arg("exp.toml"), "--input", &input, "--out", &ws.arg("f.jsonl")]);
    assert_eq!(code(&from_file), 0, "{}", stderr(&from_file));
    assert_eq!(read_lines(&ws.path("f.jsonl"))[0]["n_runs"], 2);
    assert!(ws.path("cache-dir/cache.jsonl").exists());

    let overridden = cci(&[
        "score", "--config", &ws.arg("exp.toml"), "--input", &input, "--runs", "1", "--out",
        &ws.arg("g.jsonl"),
    ]);
    assert_eq!(code(&overridden), 0, "{}", stderr(&overridden));
    assert_eq!(read_lines(&ws.path("g.jsonl"))[0]["n_runs"], 1);
    assert_eq!(backend_calls(&overridden), 0);
}

#[test]
fn baseline_method_uses_the_neighbor_rule() {
    let ws = Workspace::new();
    let input = ws.sentences("in.jsonl", &SENTENCES[..2]);
    let records = vec![
        baseline_fixture(SENTENCES[0].1, "Japan", true, r#"{"score": 0.85}"#),
        baseline_fixture(SENTENCES[1].1, "Japan", true, r#"{"score": 1.02}"#),
        baseline_fixture(SENTENCES[0].1, "Japan", false, r#"{"score": 0.1}"#),
    ];
    let fixture = ws.fixture("fx.jsonl", &records);
    let out = cci(&[
        "score", "--input", &input, "--method", "baseline", "--neighbor-instruction", "--target",
        "Japan", "--backend", "scripted", "--fixture", &fixture, "--exp-dir", &ws.arg("exp"),
        "--out", &ws.arg("out.jsonl"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines = read_lines(&ws.path("out.jsonl"));
    assert_eq!(lines[0], json!({"id": "s1", "baseline_score": 0.85}));
    // within tolerance above 1.0, clamped
    assert_eq!(lines[1], json!({"id": "s2", "baseline_score": 1.0}));
}

#[test]
fn evaluate_reports_separability() {
    let ws = Workspace::new();
    let input = ws.sentences("in.jsonl", &SENTENCES);
    let fixture = planted_fixture(&ws, None);
    assert_eq!(code(&run(&score_args(&ws, &input, &fixture, &ws.arg("scores.jsonl")))), 0);

    let out = cci(&[
        "evaluate", "--scores", &ws.arg("scores.jsonl"), "--labels", &input, "--out",
        &ws.arg("report.json"), "--roc-csv", &ws.arg("roc.csv"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = read_lines(&ws.path("report.json")).remove(0);
    assert_eq!(report["field"], "cci");
    assert_eq!(report["auc"], 1.0);
    assert_eq!(report["n_positive"], 2);
    let delta = report["c_median"].as_f64().unwrap() - report["g_median"].as_f64().unwrap();
    assert_eq!(report["delta"].as_f64().unwrap(), delta);
    assert!(stderr(&out).contains("AUC"));
    let csv = std::fs::read_to_string(ws.path("roc.csv")).unwrap();
    assert!(csv.starts_with("fpr,tpr,threshold\n"));

    let log = cci(&[
        "evaluate", "--scores", &ws.arg("scores.jsonl"), "--labels", &input, "--field", "cci_log",
    ]);
    assert_eq!(code(&log), 0, "{}", stderr(&log));
    let report: Value = serde_json::from_slice(&log.stdout).unwrap();
    assert_eq!(report["field"], "cci_log");

    let one_class = ws.sentences(
        "labels.jsonl",
        &SENTENCES.map(|(id, text, _)| (id, text, "general")),
    );
    let empty_class = cci(&["evaluate", "--scores", &ws.arg("scores.jsonl"), "--labels", &one_class]);
    assert_eq!(code(&empty_class), 4);
    assert!(stderr(&empty_class).contains("positive"));

    let partial = ws.sentences("partial.jsonl", &SENTENCES[..3]);
    let missing = cci(&["evaluate", "--scores", &ws.arg("scores.jsonl"), "--labels", &partial]);
    assert_eq!(code(&missing), 4);
    assert!(stderr(&missing).contains("no label for scored item \"s4\""));
}

fn scores_file(ws: &Workspace, scores: &[(&str, f64)]) -> String {
    let values: Vec<Value> = scores.iter().map(|(id, s)| json!({"id": id, "cci": s})).collect();
    write_lines(&ws.path("scores.jsonl"), &values);
    ws.arg("scores.jsonl")
}

#[test]
fn stratify_matches_hand_counts() {
    let ws = Workspace::new();
    // bins: <=0.1 {a,b,c}, (0.3,0.4] {d}, (0.5,0.6] {e,f}, (0.9,1.0] {g}
    let scores = scores_file(
        &ws,
        &[("a", -0.4), ("b", 0.0), ("c", 0.1), ("d", 0.35), ("e", 0.55), ("f", 0.6), ("g", 1.0)],
    );
    let correct = [true, false, true, true, false, false, true];
    let preds: Vec<Value> = ["a", "b", "c", "d", "e", "f", "g"]
        .iter()
        .zip(correct)
        .map(|(id, ok)| json!({"id": id, "correct": {"qwen": ok, "llama": true}}))
        .collect();
    write_lines(&ws.path("preds.jsonl"), &preds);

    let out = cci(&[
        "stratify", "--scores", &scores, "--predictions", &ws.arg("preds.jsonl"), "--out",
        &ws.arg("table.json"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = read_lines(&ws.path("table.json")).remove(0);
    let rows = table["bins"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    let counts: Vec<u64> = rows.iter().map(|r| r["n_items"].as_u64().unwrap()).collect();
    assert_eq!(counts, [3, 0, 0, 1, 0, 2, 0, 0, 0, 1]);
    assert_eq!(rows[0]["range"], "CCI ≤ 0.1");
    assert_eq!(rows[0]["accuracy_by_model"]["qwen"], 2.0 / 3.0);
    assert_eq!(rows[5]["accuracy_by_model"]["qwen"], 0.0);
    assert_eq!(rows[1]["accuracy_by_model"]["qwen"], Value::Null);
    assert_eq!(table["overall"]["accuracy_by_model"]["qwen"], 4.0 / 7.0);
    assert_eq!(table["overall"]["accuracy_by_model"]["llama"], 1.0);
    let rendered = stderr(&out);
    assert!(rendered.contains("Overall Accuracy"));
    assert!(rendered.lines().any(|l| l.starts_with("CCI ≤ 0.1") && l.split('|').nth(1).map(str::trim) == Some("3")));
}

#[test]
fn stratify_requires_a_complete_join() {
    let ws = Workspace::new();
    let scores = scores_file(&ws, &[("a", 0.2), ("b", 0.5)]);

    write_lines(&ws.path("p1.jsonl"), &[json!({"id": "a", "correct": {"m": true}})]);
    let missing = cci(&["stratify", "--scores", &scores, "--predictions", &ws.arg("p1.jsonl")]);
    assert_eq!(code(&missing), 4);
    assert!(stderr(&missing).contains("\"b\""));

    write_lines(
        &ws.path("p2.jsonl"),
        &[
            json!({"id": "a", "correct": {"m": true}}),
            json!({"id": "b", "correct": {"m": true}}),
            json!({"id": "z", "correct": {"m": false}}),
        ],
    );
    let orphan = cci(&["stratify", "--scores", &scores, "--predictions", &ws.arg("p2.jsonl")]);
    assert_eq!(code(&orphan), 4);
    assert!(stderr(&orphan).contains("have no score"));
}

#[test]
fn generate_is_cached_and_labeled() {
    let ws = Workspace::new();
    let prompt = cci_core::gateway::render_generation_prompt(cci_core::gateway::GenerationKind::Cultural);
    let response = r#"```json
[{"text": "Bow when greeting."}, {"text": "  "}, {"text": "Eat osechi at New Year."}]
```"#;
    let fixture = ws.fixture(
        "gen.jsonl",
        &[cci_core::gateway::FixtureRecord::for_prompt(&prompt, None, response)],
    );
    let args = |out: &str| {
        vec![
            "generate".to_owned(), "--kind".into(), "cultural".into(), "--backend".into(),
            "scripted".into(), "--fixture".into(), fixture.clone(), "--exp-dir".into(),
            ws.arg("exp"), "--out".into(), ws.arg(out),
        ]
    };
    let first = run(&args("g1.jsonl"));
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert!(stderr(&first).contains("short-output"));
    assert!(stderr(&first).contains("dropped"));
    let lines = read_lines(&ws.path("g1.jsonl"));
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["id"], "gen-cultural-0001");
    assert_eq!(lines[1]["text"], "Eat osechi at New Year.");
    assert_eq!(lines[0]["label"], "culture-specific");
    assert_eq!(lines[0]["provenance"]["reviewed"], false);
    assert_eq!(lines[0]["provenance"]["generator_model"], "scripted");

    std::thread::sleep(std::time::Duration::from_millis(1100));
    let second = run(&args("g2.jsonl"));
    assert_eq!(code(&second), 0);
    assert_eq!(
        std::fs::read(ws.path("g1.jsonl")).unwrap(),
        std::fs::read(ws.path("g2.jsonl")).unwrap()
    );
}

#[test]
fn cache_inspect_reports_counts_read_only() {
    let ws = Workspace::new();
    let input = ws.sentences("in.jsonl", &SENTENCES);
    let fixture = planted_fixture(&ws, None);
    assert_eq!(code(&run(&score_args(&ws, &input, &fixture, &ws.arg("s.jsonl")))), 0);

    // a torn final line, as left by a crash mid-write
    let cache_path = ws.path("exp/cache.jsonl");
    let mut bytes = std::fs::read(&cache_path).unwrap();
    let before = bytes.clone();
    let torn = br#"{"key":"abc","response_te"#;
    bytes.extend_from_slice(torn);
    std::fs::write(&cache_path, &bytes).unwrap();

    let out = cci(&["cache", "inspect", "--exp-dir", &ws.arg("exp")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["records"], 12);
    assert_eq!(report["corrupted_lines"], json!([13]));
    assert_eq!(std::fs::read(&cache_path).unwrap().len(), before.len() + torn.len());
}

#[test]
fn benchmark_inputs_are_scored() {
    let ws = Workspace::new();
    let items = [
        json!({"q_id": 7, "question": "What do you eat at New Year?", "choice0": "osechi", "choice1": "turkey", "choice2": "cake", "choice3": "tacos", "choice4": "pie", "label": 0}),
    ];
    write_lines(&ws.path("jcqa.jsonl"), &items);
    let set = custom_set();
    let text = "What do you eat at New Year? osechi";
    let fixture = ws.fixture(
        "fx.jsonl",
        &[generality_fixture(text, &set, &scores_json(&set, &[0.1, 0.1, 0.1, 1.0]), None)],
    );
    let out = cci(&[
        "score", "--input", &ws.arg("jcqa.jsonl"), "--input-format", "jcqa", "--mode", "custom",
        "--target", "Japan", "--cultures", "China,Republic of Korea,United States of America,Japan",
        "--backend", "scripted", "--fixture", &fixture, "--exp-dir", &ws.arg("exp"),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let line: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(line["id"], "7");
    assert!((line["cci"].as_f64().unwrap() - 0.9).abs() < 1e-12);
}
