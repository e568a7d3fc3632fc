//! Custom prompt templates with `{{placeholder}}` slots and optional
//! `<<<system>>>` / `<<<user>>>` sections.
//!
//! ```bash
//! cargo run --example prompt_templates
//! ```

use value_lens::detection::{build_detection_prompt, PLACEHOLDERS};
use value_lens::template::PromptTemplate;
use value_lens::value_spec::parse_spec;

const TEMPLATE: &str = "<<<system>>>
You label texts with values from this specification:
{{value_spec}}
Answer with a JSON list of value names. An empty list is fine.
<<<user>>>
{{input_text}}
";

fn main() -> anyhow::Result<()> {
    let template = PromptTemplate::new("short-detection", TEMPLATE, PLACEHOLDERS)?;
    println!("placeholders {:?}, hash {}", template.placeholders(), &template.content_hash()[..12]);

    let spec = parse_spec(&std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/schwartz_spec.json"
    ))?)?;
    // Text that looks like a placeholder is inserted as is.
    let request = build_detection_prompt(&template, &spec, "Keep {{input_text}} literal.")?;
    for m in &request.messages {
        let preview: String = m.content.chars().take(70).collect();
        println!("{:?}: {preview}...", m.role);
    }

    // Templates missing a required slot are refused up front.
    match PromptTemplate::new("broken", "Label this: {{input_text}}", PLACEHOLDERS) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
