mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use value_lens::exit::exit_code;
use value_lens::value_spec::parse_spec;

const CLOCK: &str = "2024-05-01T00:00:00Z";

fn valuelens(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_valuelens"))
        .current_dir(dir)
        .args(args)
        .env_remove("VALUELENS_CONFIG")
        .env_remove("VALUELENS_API_KEY")
        .env("VALUELENS_MOCK_CONCEPTUALIZER", fixtures().join("conceptualizer_response.md"))
        .env("VALUELENS_FIXED_CLOCK", CLOCK)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_code(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    let v: serde_json::Value = serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {stderr}"));
    let code = v["error"]["code"].as_str().unwrap().to_string();
    assert_eq!(out.status.code(), Some(exit_code(&code)), "{stderr}");
    code
}

fn f(rel: &str) -> String {
    fixtures().join(rel).to_string_lossy().into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn conceptualize_reproduces_fixture_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "spec.json");
    ok(&valuelens(
        dir.path(),
        &[
            "conceptualize",
            "--sources",
            &f("sources"),
            "--theory",
            "Schwartz refined theory of basic values",
            "--out",
            &out,
        ],
    ));
    let written = std::fs::read_to_string(&out).unwrap();
    assert_eq!(parse_spec(&written).unwrap(), fixture_spec());
    assert_eq!(written, std::fs::read_to_string(fixtures().join("schwartz_spec.json")).unwrap());
}

#[test]
fn conceptualize_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = valuelens(
        dir.path(),
        &["conceptualize", "--sources", &p(dir.path(), "empty"), "--out", &p(dir.path(), "s.json")],
    );
    assert_eq!(error_code(&out), "empty-sources");

    let bad_out = dir.path().join("no").join("such").join("dir").join("spec.json");
    let out =
        valuelens(dir.path(), &["conceptualize", "--sources", &f("sources"), "--out", &bad_out.to_string_lossy()]);
    assert_eq!(error_code(&out), "io-error");
}

#[test]
fn detect_single_text_prints_tag_matches() {
    let dir = tempfile::tempdir().unwrap();
    let text = "We owe our heritage to the ancestors, and we protect wildlife.";
    let stdout = ok(&valuelens(dir.path(), &["detect", "--spec", &f("schwartz_spec.json"), "--text", text]));
    let expected: Vec<String> = expected_mock_detection(&fixture_spec(), text).into_iter().collect();
    assert_eq!(stdout.lines().collect::<Vec<_>>(), expected);
    assert_eq!(expected, ["Tradition", "Universalism: nature"]);

    std::fs::write(dir.path().join("one.txt"), text).unwrap();
    let from_file = ok(&valuelens(dir.path(), &["detect", "--spec", &f("schwartz_spec.json"), "--input", "one.txt"]));
    assert_eq!(from_file, stdout);
}

#[test]
fn detect_missing_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = valuelens(dir.path(), &["detect", "--spec", "nope.json", "--text", "hello"]);
    assert_eq!(error_code(&out), "missing-file");
}

fn first_rows(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let take = |src: &str, dst: &str| {
        let text = std::fs::read_to_string(fixtures().join("corpus").join(src)).unwrap();
        let lines: Vec<&str> = text.lines().take(n + 1).collect();
        let path = dir.join(dst);
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        path
    };
    (take("sentences.tsv", "s.tsv"), take("labels.tsv", "l.tsv"))
}

#[test]
fn ten_row_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (sentences, labels) = first_rows(d, 10);
    let (s, l) = (sentences.to_string_lossy().into_owned(), labels.to_string_lossy().into_owned());
    ok(&valuelens(d, &["detect", "--spec", &f("schwartz_spec.json"), "--input", &s, "--out", "pred.jsonl"]));
    assert_eq!(std::fs::read_to_string(d.join("pred.jsonl")).unwrap().lines().count(), 10);
    assert!(d.join("pred.jsonl.meta.json").exists());

    ok(&valuelens(
        d,
        &["intensity", "--spec", &f("schwartz_spec.json"), "--pred", "pred.jsonl", "--texts", &s, "--out", "an.jsonl"],
    ));
    let analyzed = std::fs::read_to_string(d.join("an.jsonl")).unwrap();
    assert_eq!(analyzed.lines().count(), 10);
    for line in analyzed.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for a in v["annotations"].as_array().unwrap() {
            assert_eq!(a["level"], "Mild support");
        }
    }

    let stdout = ok(&valuelens(
        d,
        &[
            "evaluate",
            "--gold",
            &l,
            "--sentences",
            &s,
            "--pred",
            "pred.jsonl",
            "--report",
            "r.json",
            "--format",
            "json",
        ],
    ));
    assert!(stdout.starts_with("micro P"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["examples"], 10);
    assert_eq!(report["fingerprint"]["spec_version"], 1);

    // Same inputs, same bytes.
    let before = std::fs::read(d.join("pred.jsonl")).unwrap();
    ok(&valuelens(
        d,
        &["detect", "--spec", &f("schwartz_spec.json"), "--input", &s, "--out", "pred.jsonl", "--parallelism", "3"],
    ));
    assert_eq!(std::fs::read(d.join("pred.jsonl")).unwrap(), before);
}

#[test]
fn intensity_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (sentences, _) = first_rows(d, 3);
    let s = sentences.to_string_lossy().into_owned();
    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    ok(&valuelens(
        d,
        &["intensity", "--spec", &f("schwartz_spec.json"), "--pred", "empty.jsonl", "--texts", &s, "--out", "an.jsonl"],
    ));
    assert_eq!(std::fs::read_to_string(d.join("an.jsonl")).unwrap(), "");

    std::fs::write(d.join("stray.jsonl"), "{\"text_id\":\"ghost\",\"detected\":[]}\n").unwrap();
    let out = valuelens(
        d,
        &[
            "intensity",
            "--spec",
            &f("schwartz_spec.json"),
            "--pred",
            "stray.jsonl",
            "--texts",
            &s,
            "--out",
            "an2.jsonl",
        ],
    );
    assert_eq!(error_code(&out), "id-mismatch");
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    std::fs::write(dir.join(name), content).unwrap();
    p(dir, name)
}

#[test]
fn evaluate_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Two texts over three of the values, counted by hand:
    // e1 Tradition tp, Hedonism fp; e2 Tradition tp, Hedonism fn. Micro P = R = F1 = 2/3.
    let s = write(d, "s.tsv", "Text-ID\tText\ne1\tfirst\ne2\tsecond\n");
    let l = write(d, "l.tsv", "Text-ID\tTradition\tHedonism\tFace\ne1\t1\t0\t0\ne2\t1\t1\t0\n");
    let pred = write(d, "p.jsonl", "{\"text_id\":\"e1\",\"detected\":[\"Tradition\",\"Hedonism\"]}\n{\"text_id\":\"e2\",\"detected\":[\"Tradition\"]}\n");
    ok(&valuelens(
        d,
        &["evaluate", "--gold", &l, "--sentences", &s, "--pred", &pred, "--report", "r.json", "--format", "json"],
    ));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert!((r["micro"]["f1"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);

    let perfect = write(d, "perfect.jsonl", "{\"text_id\":\"e1\",\"detected\":[\"Tradition\"]}\n{\"text_id\":\"e2\",\"detected\":[\"Hedonism\",\"Tradition\"]}\n");
    ok(&valuelens(
        d,
        &["evaluate", "--gold", &l, "--sentences", &s, "--pred", &perfect, "--report", "r.md", "--format", "md"],
    ));
    let md = std::fs::read_to_string(d.join("r.md")).unwrap();
    assert!(md.contains("| Micro | 1.000 | 1.000 | 1.000 |"), "{md}");

    let partial = write(d, "partial.jsonl", "{\"text_id\":\"e1\",\"detected\":[\"Tradition\"]}\n");
    let out = valuelens(d, &["evaluate", "--gold", &l, "--sentences", &s, "--pred", &partial, "--report", "x.md"]);
    assert_eq!(error_code(&out), "id-mismatch");
    ok(&valuelens(
        d,
        &["evaluate", "--gold", &l, "--sentences", &s, "--pred", &partial, "--report", "x.md", "--missing-as-empty"],
    ));
}

#[test]
fn critic_filtered_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = write(d, "s.tsv", "Text-ID\tText\ne1\tfirst\n");
    let l = write(d, "l.tsv", "Text-ID\tTradition\tHedonism\ne1\t1\t0\n");
    let pred = write(d, "p.jsonl", "{\"text_id\":\"e1\",\"detected\":[\"Hedonism\",\"Tradition\"]}\n");
    let analyzed = write(
        d,
        "a.jsonl",
        "{\"text_id\":\"e1\",\"detected\":[\"Hedonism\",\"Tradition\"],\"annotations\":[{\"value\":\"Hedonism\",\"level\":\"No values\",\"justification\":\"j\"},{\"value\":\"Tradition\",\"level\":\"Strong support\",\"justification\":\"j\"}],\"no_values\":false}\n",
    );
    let stdout = ok(&valuelens(
        d,
        &[
            "evaluate",
            "--gold",
            &l,
            "--sentences",
            &s,
            "--pred",
            &pred,
            "--report",
            "r.json",
            "--format",
            "json",
            "--analyzed",
            &analyzed,
            "--critic-report",
            "c.json",
        ],
    ));
    assert!(stdout.contains("critic-filtered micro F1 1.000"), "{stdout}");
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert!((r["micro"]["precision"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(r.get("intensity_levels").is_none());

    let c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("c.json")).unwrap()).unwrap();
    let levels = c["intensity_levels"].as_array().unwrap();
    assert_eq!(levels.len(), 7);
    assert_eq!(levels[0], serde_json::json!({"level": "Strong support", "count": 1}));
    assert_eq!(levels[6], serde_json::json!({"level": "No values", "count": 1}));
}

#[test]
fn bad_config_exits_with_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", "{\"api_key\": \"secret\"}");
    let out = valuelens(dir.path(), &["--config", &cfg, "detect", "--spec", &f("schwartz_spec.json"), "--text", "x"]);
    assert_eq!(error_code(&out), "configuration-error");
}

#[test]
fn live_without_credential_is_auth_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_valuelens"))
        .current_dir(dir.path())
        .args(["detect", "--spec", &f("schwartz_spec.json"), "--text", "x"])
        .env_remove("VALUELENS_API_KEY")
        .env_remove("VALUELENS_CONFIG")
        .env("VALUELENS_BACKEND", "live")
        .env("VALUELENS_BASE_URL", "http://127.0.0.1:9")
        .output()
        .unwrap();
    assert_eq!(error_code(&out), "auth-error");
}
