//! Detection followed by the critic, which rates every detected value on the
//! seven-level scale and justifies the rating.
//!
//! ```bash
//! cargo run --example rate_intensity
//! ```

use value_lens::detection::{default_template as detection_template, detect_values};
use value_lens::intensity::{analyze_intensity, default_template as intensity_template, parse_intensity};
use value_lens::value_spec::parse_spec;
use value_lens::{Gateway, IntensityLevel, LlmRole, RoleId, TextInput, UnknownNamePolicy};

fn main() -> anyhow::Result<()> {
    let spec = parse_spec(&std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/schwartz_spec.json"
    ))?)?;
    let gateway = Gateway::mock();
    let policy = UnknownNamePolicy::Strict;

    for level in IntensityLevel::ALL {
        println!("{:<18} {}", level.label(), level.definition());
    }
    println!();

    for text in
        ["Volunteers cleaned the river to protect wildlife, as our ancestors would have.", "The shop opens at nine."]
    {
        let input = TextInput::new("t", text);
        let label =
            detect_values(&gateway, &input, &spec, &detection_template(), &LlmRole::mock(RoleId::Detector), policy)?;
        let analyzed = analyze_intensity(
            &gateway,
            &input,
            &label,
            &spec,
            &intensity_template(),
            &LlmRole::mock(RoleId::Critic),
            policy,
        )?;
        if analyzed.no_values {
            println!("{text:?}: no values");
        }
        for a in &analyzed.annotations {
            println!("{text:?}: {} -> {} ({})", a.value, a.level, a.justification);
        }
    }

    // A real critic answer; levels are matched case-insensitively.
    let answer = r#"[{"value": "Tradition", "level": "STRONG SUPPORT", "justification": "Ancestral customs are presented as a duty."}]"#;
    let expected = ["Tradition".to_string()].into();
    let ratings = parse_intensity(answer, "t", &expected, &spec.taxonomy()?, policy)?;
    println!("parsed: {:?}", ratings.iter().map(|a| a.level).collect::<Vec<_>>());
    Ok(())
}
