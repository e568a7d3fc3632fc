//! Value detection on single texts with the deterministic mock detector,
//! which reports every value whose tag appears in the text.
//!
//! ```bash
//! cargo run --example detect
//! ```

use value_lens::detection::{default_template, detect_values, parse_detection};
use value_lens::value_spec::parse_spec;
use value_lens::{Gateway, LlmRole, RoleId, TextInput, UnknownNamePolicy};

fn main() -> anyhow::Result<()> {
    let spec = parse_spec(&std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/schwartz_spec.json"
    ))?)?;
    let gateway = Gateway::mock();
    let detector = LlmRole::mock(RoleId::Detector);
    let template = default_template();

    let texts = [
        TextInput::new("a", "We keep the customs of our ancestors and protect local wildlife."),
        TextInput::new("b", "The quarterly report has twelve pages."),
        TextInput::new("c", "She left her job to follow her own path, craving adventure."),
    ];
    for t in &texts {
        let label = detect_values(&gateway, t, &spec, &template, &detector, UnknownNamePolicy::Strict)?;
        println!("{}: {:?}", t.text_id, label.detected);
    }

    // Model answers are parsed leniently as to layout, strictly as to names.
    let taxonomy = spec.taxonomy()?;
    let answer = "Sure! The text refers to:\n```json\n[\"tradition\", \"UNIVERSALISM:nature\", \"Patriotism\"]\n```";
    match parse_detection(answer, &taxonomy, UnknownNamePolicy::Strict) {
        Ok(p) => println!("strict: {:?}", p.values),
        Err(e) => println!("strict: {e}"),
    }
    let lenient = parse_detection(answer, &taxonomy, UnknownNamePolicy::Lenient)?;
    println!("lenient: {:?}, dropped {:?}", lenient.values, lenient.dropped);
    Ok(())
}
