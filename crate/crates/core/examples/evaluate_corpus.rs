//! Score the mock detector on the 100-text fixture corpus and print the
//! markdown report next to the published comparison scores.
//!
//! ```bash
//! cargo run --example evaluate_corpus
//! ```

use std::path::Path;

use value_lens::detection::default_template;
use value_lens::evaluation::{
    compute_metrics, import_dataset, render_report, run_batch, BatchOptions, PipelineConfig, ReferenceScores,
    ReportFormat, DEFAULT_GOLD_THRESHOLD,
};
use value_lens::value_spec::parse_spec;
use value_lens::{Gateway, LlmRole, RoleId, TextInput, UnknownNamePolicy};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let spec = parse_spec(&std::fs::read_to_string(fixtures.join("schwartz_spec.json"))?)?;
    let taxonomy = spec.taxonomy()?;

    let dataset = import_dataset(
        &fixtures.join("corpus/sentences.tsv"),
        &fixtures.join("corpus/labels.tsv"),
        &taxonomy,
        DEFAULT_GOLD_THRESHOLD,
    )?;
    println!("{} examples, {} label columns matched", dataset.examples.len(), dataset.columns.len());

    // Only text reaches the detector; gold labels stay here.
    let inputs: Vec<TextInput> = dataset.examples.iter().map(|e| e.input()).collect();
    let gateway = Gateway::mock();
    let template = default_template();
    let detector = LlmRole::mock(RoleId::Detector);
    let pipeline = PipelineConfig {
        gateway: &gateway,
        spec: &spec,
        detection_template: &template,
        detector: &detector,
        critic: None,
        policy: UnknownNamePolicy::Strict,
    };
    let outcome = run_batch(&inputs, &pipeline, &BatchOptions::with_parallelism(4))?;
    let labels: Vec<_> = outcome.results.into_iter().map(|(_, item)| item.label).collect();

    let report = compute_metrics(&taxonomy, &dataset.examples, &labels)?;
    print!("{}", render_report(&report, ReportFormat::Markdown, Some(&ReferenceScores::builtin())));
    Ok(())
}
