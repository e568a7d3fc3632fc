//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use chrono::{TimeZone, Utc};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use value_lens::evaluation::DatasetExample;
use value_lens::value_spec::{parse_spec, Provenance, SpecItem, ValueDefinition};
use value_lens::{DetectionLabel, ValueTheorySpec, SCHWARTZ_VALUES};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn fixture_spec() -> ValueTheorySpec {
    parse_spec(&std::fs::read_to_string(fixtures().join("schwartz_spec.json")).unwrap()).unwrap()
}

/// Per-value and aggregate scores computed the long way.
#[derive(Debug)]
pub struct OracleScores {
    pub per_value: Vec<[f64; 3]>,
    pub micro: [f64; 3],
    pub macro_avg: [f64; 3],
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Visits every (example, value) pair and classifies it, then scores with
/// F1 = 2tp / (2tp + fp + fn).
pub fn brute_force_metrics(values: &[&str], gold: &[DatasetExample], pred: &[DetectionLabel]) -> OracleScores {
    let mut per_value = Vec::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0u64, 0u64, 0u64);
    for v in values {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for g in gold {
            let p = pred.iter().find(|p| p.text_id == g.text_id).expect("prediction for every gold row");
            let in_gold = g.gold.iter().any(|x| x == v);
            let in_pred = p.detected.iter().any(|x| x == v);
            match (in_gold, in_pred) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        per_value.push([ratio(tp, tp + fp), ratio(tp, tp + fn_), ratio(2 * tp, 2 * tp + fp + fn_)]);
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
    }
    let n = values.len() as f64;
    let mut macro_avg = [0.0; 3];
    for row in &per_value {
        for k in 0..3 {
            macro_avg[k] += row[k] / n;
        }
    }
    let micro = [
        ratio(tp_all, tp_all + fp_all),
        ratio(tp_all, tp_all + fn_all),
        ratio(2 * tp_all, 2 * tp_all + fp_all + fn_all),
    ];
    OracleScores { per_value, micro, macro_avg }
}

pub fn random_label_set(rng: &mut StdRng, values: &[&str]) -> BTreeSet<String> {
    let density: f64 = rng.gen_range(0.0..0.4);
    values.iter().filter(|_| rng.gen_bool(density)).map(|s| s.to_string()).collect()
}

pub fn random_case(rng: &mut StdRng) -> (Vec<DatasetExample>, Vec<DetectionLabel>) {
    let n = rng.gen_range(0..=50);
    let mut gold = Vec::with_capacity(n);
    let mut pred = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("t{i}");
        gold.push(DatasetExample {
            text_id: id.clone(),
            text: String::new(),
            gold: random_label_set(rng, &SCHWARTZ_VALUES),
        });
        pred.push(DetectionLabel {
            text_id: id,
            detected: random_label_set(rng, &SCHWARTZ_VALUES),
            raw_response: String::new(),
        });
    }
    pred.shuffle(rng);
    (gold, pred)
}

const WORDS: &[&str] = &[
    "care",
    "order",
    "Zukunft",
    "respeto",
    "\"quoted\"",
    "back\\slash",
    "naïve",
    "emoji 🌱",
    "tab\there",
    "a/b",
    "{brace}",
    "line\nbreak",
    "ünïcödé",
    "über",
    "x",
    "long-hyphenated-word",
    "1984",
    "ok?",
    "&amp;",
    "<tag>",
];

fn phrase(rng: &mut StdRng, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn items(rng: &mut StdRng, max: usize, single_line: bool) -> Vec<SpecItem> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for _ in 0..rng.gen_range(1..=max) {
        let mut text = phrase(rng, 4);
        if single_line {
            text = text.replace(['\n', '\t'], " ");
        }
        let text = text.trim().to_string();
        if seen.insert(text.clone()) {
            let provenance = if rng.gen_bool(0.5) { Provenance::Generated } else { Provenance::Expert };
            out.push(SpecItem { text, provenance });
        }
    }
    out
}

/// A valid spec with 1..=25 values, odd characters and optional timestamps.
pub fn random_spec(rng: &mut StdRng) -> ValueTheorySpec {
    let n = rng.gen_range(1..=25);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let base = phrase(rng, 2).replace(['\n', '\t', ':'], " ");
        let base = base.split_whitespace().collect::<Vec<_>>().join(" ");
        let name = if rng.gen_bool(0.4) {
            format!("{base} {i}: {}", phrase(rng, 1).replace(['\n', '\t', ':'], ""))
        } else {
            format!("{base} {i}")
        };
        let name = name.split_whitespace().collect::<Vec<_>>().join(" ");
        values.push(ValueDefinition {
            name,
            description: phrase(rng, 12),
            grouping: if rng.gen_bool(0.2) { String::new() } else { phrase(rng, 2) },
            tags: items(rng, 5, true),
            examples: items(rng, 3, false),
        });
    }
    let ts =
        |rng: &mut StdRng| rng.gen_bool(0.7).then(|| Utc.timestamp_opt(rng.gen_range(0..4_000_000_000), 0).unwrap());
    ValueTheorySpec {
        theory_name: phrase(rng, 3),
        source_documents: (0..rng.gen_range(0..4)).map(|_| phrase(rng, 2)).collect(),
        version: rng.gen_range(1..10_000),
        created: ts(rng),
        modified: ts(rng),
        values,
    }
}

/// Names the mock detector should report: tags found as case-insensitive
/// substrings, listed in spec order.
pub fn expected_mock_detection(spec: &ValueTheorySpec, text: &str) -> BTreeSet<String> {
    let lower = text.to_lowercase();
    spec.values
        .iter()
        .filter(|v| v.tags.iter().any(|t| lower.contains(&t.text.to_lowercase())))
        .map(|v| v.name.clone())
        .collect()
}
