//! Run configuration: a JSON file plus `VALUELENS_*` environment overrides.
//!
//! Relative paths in the file are resolved against the file's directory. The
//! API credential is never read from the file; it only comes from
//! `VALUELENS_API_KEY`.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::UnknownNamePolicy;
use crate::llm::{
    BackendSelector, Gateway, LiveBackend, LiveConfig, LlmRole, MockBackend, MockScript, ResponseCache, RoleId,
    DEFAULT_BASE_URL, DEFAULT_INFLIGHT_LIMIT, DEFAULT_MODEL_ID, DEFAULT_TEMPERATURE,
};
use crate::template::PromptTemplate;
use crate::value_spec::ValueTheorySpec;
use crate::{conceptualization, detection, intensity};

pub const CONFIG_ENV: &str = "VALUELENS_CONFIG";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("configuration-error: {0}")]
    Invalid(String),
    #[error("configuration-error: {path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("missing-file: {what} {path} does not exist")]
    MissingPath { what: &'static str, path: PathBuf },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Invalid(_) | ConfigError::File { .. } => "configuration-error",
            ConfigError::MissingPath { .. } => "missing-file",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoleConfig {
    pub backend: BackendSelector,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl Default for RoleConfig {
    fn default() -> Self {
        Self {
            backend: BackendSelector::Mock,
            model_id: DEFAULT_MODEL_ID.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplatePaths {
    pub conceptualization: Option<PathBuf>,
    pub detection: Option<PathBuf>,
    pub intensity: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockSettings {
    /// File whose content the mock conceptualizer returns.
    pub conceptualizer_response: Option<PathBuf>,
    /// Detector and critic answer in unparseable prose for texts containing this.
    pub garble_trigger: Option<String>,
    pub max_latency_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceSettings {
    pub bind: String,
    pub results_dir: PathBuf,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into(), results_dir: PathBuf::from("valuelens-results") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub conceptualizer: RoleConfig,
    pub detector: RoleConfig,
    pub critic: RoleConfig,
    pub base_url: String,
    pub parallelism: usize,
    pub inflight_limit: usize,
    pub cache_path: Option<PathBuf>,
    pub templates: TemplatePaths,
    pub spec_path: Option<PathBuf>,
    pub unknown_names: UnknownNamePolicy,
    pub mock: MockSettings,
    pub service: ServiceSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            conceptualizer: RoleConfig::default(),
            detector: RoleConfig::default(),
            critic: RoleConfig::default(),
            base_url: DEFAULT_BASE_URL.to_string(),
            parallelism: 4,
            inflight_limit: DEFAULT_INFLIGHT_LIMIT,
            cache_path: None,
            templates: TemplatePaths::default(),
            spec_path: None,
            unknown_names: UnknownNamePolicy::Strict,
            mock: MockSettings::default(),
            service: ServiceSettings::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p.as_mut() {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError::File { path: path.to_path_buf(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if raw.get("api_key").is_some() {
            return Err(err("api_key is not accepted in the config file; set VALUELENS_API_KEY".into()));
        }
        let mut cfg: RunConfig = serde_json::from_value(raw).map_err(|e| err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.cache_path,
            &mut cfg.spec_path,
            &mut cfg.templates.conceptualization,
            &mut cfg.templates.detection,
            &mut cfg.templates.intensity,
            &mut cfg.mock.conceptualizer_response,
        ] {
            resolve(base, p);
        }
        if cfg.service.results_dir.is_relative() {
            cfg.service.results_dir = base.join(&cfg.service.results_dir);
        }
        Ok(cfg)
    }

    /// Loads `explicit`, else the file named by `VALUELENS_CONFIG`, else the
    /// defaults; then applies environment overrides and validates.
    pub fn load(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        let from_env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let mut cfg = match explicit.map(Path::to_path_buf).or(from_env) {
            Some(p) => Self::from_file(&p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `VALUELENS_BACKEND`, `VALUELENS_MODEL` and `VALUELENS_TEMPERATURE`
    /// apply to every role; `VALUELENS_<ROLE>_BACKEND` and so on to one.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: String| ConfigError::Invalid(format!("{key}: {msg}"));
        for (prefix, role) in [
            ("", None),
            ("CONCEPTUALIZER_", Some(RoleId::Conceptualizer)),
            ("DETECTOR_", Some(RoleId::Detector)),
            ("CRITIC_", Some(RoleId::Critic)),
        ] {
            let roles: Vec<&mut RoleConfig> = match role {
                None => vec![&mut self.conceptualizer, &mut self.detector, &mut self.critic],
                Some(RoleId::Conceptualizer) => vec![&mut self.conceptualizer],
                Some(RoleId::Detector) => vec![&mut self.detector],
                Some(RoleId::Critic) => vec![&mut self.critic],
            };
            let backend_key = format!("VALUELENS_{prefix}BACKEND");
            let model_key = format!("VALUELENS_{prefix}MODEL");
            let temp_key = format!("VALUELENS_{prefix}TEMPERATURE");
            let backend = get(&backend_key)
                .map(|v| v.parse::<BackendSelector>().map_err(|e| bad(&backend_key, e)))
                .transpose()?;
            let model = get(&model_key);
            let temperature = get(&temp_key)
                .map(|v| v.trim().parse::<f64>().map_err(|e| bad(&temp_key, e.to_string())))
                .transpose()?;
            for r in roles {
                if let Some(b) = backend {
                    r.backend = b;
                }
                if let Some(m) = &model {
                    r.model_id = m.clone();
                }
                if let Some(t) = temperature {
                    r.temperature = t;
                }
            }
        }
        if let Some(v) = get("VALUELENS_BASE_URL") {
            self.base_url = v;
        }
        if let Some(v) = get("VALUELENS_PARALLELISM") {
            self.parallelism = v.trim().parse().map_err(|e| bad("VALUELENS_PARALLELISM", format!("{e}")))?;
        }
        if let Some(v) = get("VALUELENS_CACHE") {
            self.cache_path = Some(PathBuf::from(v));
        }
        if let Some(v) = get("VALUELENS_SPEC") {
            self.spec_path = Some(PathBuf::from(v));
        }
        if let Some(v) = get("VALUELENS_MOCK_CONCEPTUALIZER") {
            self.mock.conceptualizer_response = Some(PathBuf::from(v));
        }
        if let Some(v) = get("VALUELENS_MOCK_GARBLE") {
            self.mock.garble_trigger = Some(v);
        }
        if let Some(v) = get("VALUELENS_UNKNOWN_NAMES") {
            self.unknown_names = match v.trim().to_ascii_lowercase().as_str() {
                "strict" => UnknownNamePolicy::Strict,
                "lenient" => UnknownNamePolicy::Lenient,
                other => {
                    return Err(bad("VALUELENS_UNKNOWN_NAMES", format!("expected strict or lenient, got {other:?}")))
                }
            };
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, r) in
            [("conceptualizer", &self.conceptualizer), ("detector", &self.detector), ("critic", &self.critic)]
        {
            if !(0.0..=2.0).contains(&r.temperature) {
                return Err(ConfigError::Invalid(format!("{name} temperature {} outside [0, 2]", r.temperature)));
            }
            if r.model_id.trim().is_empty() {
                return Err(ConfigError::Invalid(format!("{name} model_id is empty")));
            }
            if r.backend.is_cached() && self.cache_path.is_none() {
                return Err(ConfigError::Invalid(format!("{name} uses a cached backend but cache_path is not set")));
            }
        }
        if self.parallelism == 0 || self.inflight_limit == 0 {
            return Err(ConfigError::Invalid("parallelism and inflight_limit must be at least 1".into()));
        }
        for (what, p) in [
            ("spec", &self.spec_path),
            ("conceptualization template", &self.templates.conceptualization),
            ("detection template", &self.templates.detection),
            ("intensity template", &self.templates.intensity),
            ("mock conceptualizer response", &self.mock.conceptualizer_response),
        ] {
            if let Some(path) = p.as_ref().filter(|p| !p.exists()) {
                return Err(ConfigError::MissingPath { what, path: path.clone() });
            }
        }
        if let Some(dir) = self.cache_path.as_ref().and_then(|p| p.parent()).filter(|d| !d.as_os_str().is_empty()) {
            if !dir.is_dir() {
                return Err(ConfigError::MissingPath { what: "cache directory", path: dir.to_path_buf() });
            }
        }
        Ok(())
    }

    pub fn role(&self, id: RoleId) -> LlmRole {
        let r = match id {
            RoleId::Conceptualizer => &self.conceptualizer,
            RoleId::Detector => &self.detector,
            RoleId::Critic => &self.critic,
        };
        LlmRole {
            role_id: id,
            model_id: r.model_id.clone(),
            temperature: r.temperature,
            backend: r.backend,
            max_tokens: r.max_tokens,
        }
    }

    fn uses_live(&self) -> bool {
        [&self.conceptualizer, &self.detector, &self.critic].iter().any(|r| r.backend.is_live())
    }

    pub fn build_gateway(&self) -> Result<Gateway, ConfigError> {
        let mut mock = MockBackend::new();
        if let Some(path) = &self.mock.conceptualizer_response {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::File { path: path.clone(), message: e.to_string() })?;
            mock = mock.with_script(RoleId::Conceptualizer, MockScript::always(text));
        }
        if let Some(trigger) = &self.mock.garble_trigger {
            mock = mock.with_garble_trigger(trigger.clone());
        }
        if self.mock.max_latency_ms > 0 {
            mock = mock.with_simulated_latency(Duration::from_millis(self.mock.max_latency_ms));
        }
        let mut gateway = Gateway::new(Arc::new(mock)).with_inflight_limit(self.inflight_limit);
        if self.uses_live() {
            let live = LiveBackend::new(LiveConfig::from_env(self.base_url.clone()))
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            gateway = gateway.with_live(Arc::new(live));
        }
        if let Some(path) = &self.cache_path {
            let cache = ResponseCache::open(path)
                .map_err(|e| ConfigError::File { path: path.clone(), message: e.to_string() })?;
            gateway = gateway.with_cache(Arc::new(cache));
        }
        Ok(gateway)
    }

    fn load_template(
        path: &Option<PathBuf>,
        required: &[&str],
        fallback: fn() -> PromptTemplate,
    ) -> Result<PromptTemplate, ConfigError> {
        match path {
            Some(p) => PromptTemplate::load(p, required)
                .map_err(|e| ConfigError::File { path: p.clone(), message: e.to_string() }),
            None => Ok(fallback()),
        }
    }

    pub fn conceptualization_template(&self) -> Result<PromptTemplate, ConfigError> {
        Self::load_template(
            &self.templates.conceptualization,
            conceptualization::PLACEHOLDERS,
            conceptualization::default_template,
        )
    }

    pub fn detection_template(&self) -> Result<PromptTemplate, ConfigError> {
        Self::load_template(&self.templates.detection, detection::PLACEHOLDERS, detection::default_template)
    }

    pub fn intensity_template(&self) -> Result<PromptTemplate, ConfigError> {
        Self::load_template(&self.templates.intensity, intensity::PLACEHOLDERS, intensity::default_template)
    }

    /// The spec at `explicit`, else at the configured `spec_path`.
    pub fn load_spec(&self, explicit: Option<&Path>) -> Result<ValueTheorySpec, ConfigError> {
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| self.spec_path.clone())
            .ok_or_else(|| ConfigError::Invalid("no spec given; pass --spec or set spec_path".into()))?;
        let text = std::fs::read_to_string(&path)
            .map_err(|_| ConfigError::MissingPath { what: "spec", path: path.clone() })?;
        crate::value_spec::parse_spec(&text).map_err(|e| ConfigError::File { path, message: e.to_string() })
    }
}
