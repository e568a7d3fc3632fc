//! Value detection in text with large language models.
//!
//! The pipeline has two stages. [`conceptualization`] turns reference
//! documents about a value theory into an enriched [`value_spec`] that
//! experts then refine through versioned revisions. [`detection`] labels a
//! text with the values it refers to, and [`intensity`] has a second model
//! rate each detected value on a seven-level scale with a justification.
//! [`evaluation`] scores detections against gold-labelled corpora, and
//! [`service`] exposes curation and analysis over HTTP.
//!
//! Every model call goes through [`llm::Gateway`], which can be backed by a
//! live chat-completions endpoint or by a deterministic mock, optionally
//! behind a persistent response cache.

pub mod cli;
pub mod clock;
pub mod conceptualization;
pub mod config;

pub mod detection;
pub mod evaluation;
pub mod exit;

pub mod intensity;
pub mod json_extract;
pub mod llm;
pub mod service;

pub mod template;
pub mod value_spec;

pub use clock::{Clock, FixedClock, SystemClock};
pub use detection::{DetectionLabel, TextInput, UnknownNamePolicy};
pub use intensity::{AnalyzedText, IntensityAnnotation, IntensityLevel};
pub use llm::{BackendSelector, ChatRequest, Gateway, LlmRole, RoleId};
pub use value_spec::{Taxonomy, ValueTheorySpec, SCHWARTZ_VALUES};
