//! Value-name normalization and the canonical taxonomy.

use std::collections::HashMap;

use super::SpecError;

/// The nineteen refined Schwartz values, in the order used by reports.
pub const SCHWARTZ_VALUES: [&str; 19] = [
    "Self-direction: thought",
    "Self-direction: action",
    "Stimulation",
    "Hedonism",
    "Achievement",
    "Power: dominance",
    "Power: resources",
    "Face",
    "Security: personal",
    "Security: societal",
    "Tradition",
    "Conformity: rules",
    "Conformity: interpersonal",
    "Humility",
    "Benevolence: caring",
    "Benevolence: dependability",
    "Universalism: concern",
    "Universalism: nature",
    "Universalism: tolerance",
];

/// Lowercases, trims, collapses internal whitespace and rewrites every colon
/// as `": "` with no space before it.
pub fn normalize_value_name(raw: &str) -> String {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed.split(':').map(str::trim).collect::<Vec<_>>().join(": ").trim().to_string()
}

/// An ordered set of canonical value names with a normalized lookup index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Taxonomy {
    pub fn new<I, S>(names: I) -> Result<Self, SpecError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(SpecError::EmptyTaxonomy);
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let key = normalize_value_name(name);
            if key.is_empty() {
                return Err(SpecError::EmptyTaxonomy);
            }
            if let Some(prev) = index.insert(key, i) {
                return Err(SpecError::AmbiguousTaxonomy { first: names[prev].clone(), second: name.clone() });
            }
        }
        Ok(Self { names, index })
    }

    pub fn schwartz() -> Self {
        Self::new(SCHWARTZ_VALUES).expect("built-in taxonomy is well formed")
    }

    /// Maps `raw` onto the unique entry with the same normalized form.
    pub fn canonicalize(&self, raw: &str) -> Result<&str, SpecError> {
        self.index
            .get(&normalize_value_name(raw))
            .map(|&i| self.names[i].as_str())
            .ok_or_else(|| SpecError::UnknownValue(raw.to_string()))
    }

    pub fn position(&self, canonical: &str) -> Option<usize> {
        self.index.get(&normalize_value_name(canonical)).copied()
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.names.iter().any(|n| n == canonical)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Free-function form of [`Taxonomy::canonicalize`] for one-off lookups.
pub fn canonicalize_value_name<S: AsRef<str>>(raw: &str, taxonomy: &[S]) -> Result<String, SpecError> {
    let taxonomy = Taxonomy::new(taxonomy.iter().map(|s| s.as_ref().to_string()))?;
    taxonomy.canonicalize(raw).map(str::to_string)
}
