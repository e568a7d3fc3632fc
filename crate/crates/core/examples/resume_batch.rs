//! A checkpointed batch that stops halfway and picks up where it left off.
//!
//! ```bash
//! cargo run --example resume_batch
//! ```

use std::path::Path;

use value_lens::evaluation::{read_sentences, run_batch, BatchOptions, PipelineConfig};
use value_lens::value_spec::parse_spec;
use value_lens::{detection, intensity, Gateway, LlmRole, RoleId, UnknownNamePolicy};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let spec = parse_spec(&std::fs::read_to_string(fixtures.join("schwartz_spec.json"))?)?;
    let inputs = read_sentences(&fixtures.join("corpus/sentences.tsv"))?;

    let gateway = Gateway::mock();
    let (dt, it) = (detection::default_template(), intensity::default_template());
    let (detector, critic) = (LlmRole::mock(RoleId::Detector), LlmRole::mock(RoleId::Critic));
    let pipeline = PipelineConfig {
        gateway: &gateway,
        spec: &spec,
        detection_template: &dt,
        detector: &detector,
        critic: Some((&it, &critic)),
        policy: UnknownNamePolicy::Strict,
    };

    let dir = tempfile_dir()?;
    let checkpoint = dir.join("run.checkpoint.jsonl");
    let _ = std::fs::remove_file(&checkpoint);

    let first = run_batch(
        &inputs,
        &pipeline,
        &BatchOptions { parallelism: 4, checkpoint: Some(checkpoint.clone()), max_new: Some(40) },
    )?;
    println!("first run: processed {}, pending {}", first.processed, first.pending);

    let second = run_batch(
        &inputs,
        &pipeline,
        &BatchOptions { parallelism: 4, checkpoint: Some(checkpoint.clone()), max_new: None },
    )?;
    println!(
        "second run: resumed {}, processed {}, complete {}",
        second.resumed,
        second.processed,
        second.is_complete()
    );

    let rated: usize =
        second.results.iter().filter_map(|(_, r)| r.analyzed.as_ref()).map(|a| a.annotations.len()).sum();
    println!("{} texts, {} ratings, checkpoint at {}", second.results.len(), rated, checkpoint.display());
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join("valuelens-resume-example");
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
