use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ensure_valid, SpecError, SpecItem, ValueTheorySpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionOp {
    AddTag,
    RemoveTag,
    AddExample,
    RemoveExample,
    EditDescription,
}

/// A single expert edit to one value of a spec.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRevision {
    /// Value name; matched case- and whitespace-insensitively.
    pub target: String,
    pub operation: RevisionOp,
    pub payload: String,
    pub author: String,
    pub timestamp: DateTime<Utc>,
}

/// Applies `rev` to a copy of `spec`, bumping the version by one.
///
/// New tags and examples are marked as expert-provided. Revisions that would
/// leave the spec invalid (for example removing a value's last tag) are
/// rejected with [`SpecError::InvalidSpec`].
pub fn apply_revision(spec: &ValueTheorySpec, rev: &ExpertRevision) -> Result<ValueTheorySpec, SpecError> {
    ensure_valid(spec)?;
    let taxonomy = spec.taxonomy()?;
    let target = taxonomy.canonicalize(&rev.target)?.to_string();
    let payload = rev.payload.trim();
    if payload.is_empty() {
        return Err(SpecError::InvalidPayload("payload is empty".into()));
    }

    let mut next = spec.clone();
    let value = next.values.iter_mut().find(|v| v.name == target).expect("canonical name comes from this spec");

    let list = match rev.operation {
        RevisionOp::AddTag | RevisionOp::RemoveTag => Some(&mut value.tags),
        RevisionOp::AddExample | RevisionOp::RemoveExample => Some(&mut value.examples),
        RevisionOp::EditDescription => None,
    };
    match (rev.operation, list) {
        (RevisionOp::AddTag | RevisionOp::AddExample, Some(items)) => {
            if items.iter().any(|i| i.text.trim() == payload) {
                return Err(SpecError::DuplicateElement { value: target, text: payload.to_string() });
            }
            items.push(SpecItem::expert(payload));
        }
        (RevisionOp::RemoveTag | RevisionOp::RemoveExample, Some(items)) => {
            let Some(pos) = items.iter().position(|i| i.text.trim() == payload) else {
                return Err(SpecError::MissingElement { value: target, text: payload.to_string() });
            };
            items.remove(pos);
        }
        _ => value.description = payload.to_string(),
    }

    next.version += 1;
    next.modified = Some(rev.timestamp);
    ensure_valid(&next)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::schwartz_spec;
    use super::super::Provenance;
    use super::*;
    use chrono::TimeZone;

    fn rev(target: &str, operation: RevisionOp, payload: &str) -> ExpertRevision {
        ExpertRevision {
            target: target.into(),
            operation,
            payload: payload.into(),
            author: "expert@example.org".into(),
            timestamp: Utc.with_ymd_and_hms(2025, 5, 2, 9, 30, 0).unwrap(),
        }
    }

    #[test]
    fn add_tag_marks_expert_and_bumps_version() {
        let spec = schwartz_spec();
        let before = spec.clone();
        let next = apply_revision(&spec, &rev("Universalism: nature", RevisionOp::AddTag, "recycling")).unwrap();
        assert_eq!(spec, before);
        assert_eq!(next.version, spec.version + 1);
        let tag = next.value("Universalism: nature").unwrap().tags.last().unwrap();
        assert_eq!(tag.text, "recycling");
        assert_eq!(tag.provenance, Provenance::Expert);
        assert_eq!(next.modified, Some(Utc.with_ymd_and_hms(2025, 5, 2, 9, 30, 0).unwrap()));
    }

    #[test]
    fn remove_absent_tag_is_missing_element() {
        let err = apply_revision(&schwartz_spec(), &rev("Hedonism", RevisionOp::RemoveTag, "nope")).unwrap_err();
        assert_eq!(err.code(), "missing-element");
    }

    #[test]
    fn add_existing_tag_is_duplicate() {
        let err =
            apply_revision(&schwartz_spec(), &rev("Hedonism", RevisionOp::AddTag, "  hedonism tag ")).unwrap_err();
        assert_eq!(err.code(), "duplicate-element");
    }

    #[test]
    fn unknown_target() {
        let err = apply_revision(&schwartz_spec(), &rev("Kindness", RevisionOp::AddTag, "x")).unwrap_err();
        assert_eq!(err.code(), "unknown-value");
    }

    #[test]
    fn removing_last_tag_is_rejected() {
        let err = apply_revision(&schwartz_spec(), &rev("Face", RevisionOp::RemoveTag, "face tag")).unwrap_err();
        assert!(matches!(err, SpecError::InvalidSpec(ref v) if v[0].code() == "no-tags"));
    }

    #[test]
    fn example_and_description_edits() {
        let spec = schwartz_spec();
        let a = apply_revision(&spec, &rev("humility", RevisionOp::AddExample, "I am only a small part of the world."))
            .unwrap();
        let b = apply_revision(&a, &rev("Humility", RevisionOp::RemoveExample, "An example about Humility.")).unwrap();
        let c = apply_revision(&b, &rev("Humility", RevisionOp::EditDescription, "Being humble.")).unwrap();
        assert_eq!(c.version, spec.version + 3);
        let v = c.value("Humility").unwrap();
        assert_eq!(v.description, "Being humble.");
        assert_eq!(v.examples, vec![SpecItem::expert("I am only a small part of the world.")]);
        assert!(apply_revision(&c, &rev("Humility", RevisionOp::EditDescription, "  ")).is_err());
    }

    #[test]
    fn application_is_pure() {
        let spec = schwartz_spec();
        let r = rev("Tradition", RevisionOp::AddTag, "ancestors");
        assert_eq!(apply_revision(&spec, &r).unwrap(), apply_revision(&spec, &r).unwrap());
    }
}
