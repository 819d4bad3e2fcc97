//! TOML run configuration.
//!
//! Every key is optional. Stage tables (`[enumerate]`, `[conjecture]`,
//! `[prove]`, `[autoformalize]`) hold the stage constants; `[roles.*]`
//! tables pick the model and provider for each role and override the
//! stage-level model settings they map to:
//!
//! | role             | stage fields it sets                      |
//! |------------------|-------------------------------------------|
//! | `conjecturer`    | `enumerate.model`, `conjecture.model`     |
//! | `prover`         | `prove.prover`                            |
//! | `judge`          | `autoformalize.judge`                     |
//! | `autoformalizer` | `autoformalize.models` (array of tables)  |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoformalize::AutoformalizeConfig;
use crate::conjecture::ConjectureConfig;
use crate::enumerate::EnumerationConfig;
use crate::kb::NamespaceMatch;
use crate::lean::ToolchainConfig;
use crate::llm::ProviderConfig;
use crate::llm::BackendConfig;
use crate::prove::ProveConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSettings {
    pub base_url: String,
    #[serde(default = "yes")]
    pub native_tools: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleConfig {
    pub provider: String,
    #[serde(flatten)]
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Roles {
    pub conjecturer: Option<RoleConfig>,
    pub prover: Option<RoleConfig>,
    pub judge: Option<RoleConfig>,
    pub autoformalizer: Vec<RoleConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbedderConfig {
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Http {
        provider: String,
        model: String,
        dim: usize,
    },
}

fn default_dim() -> usize {
    crate::kb::HashEmbedder::default().dim
}

fn default_seed() -> u64 {
    crate::kb::HashEmbedder::default().seed
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hash {
            dim: default_dim(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KbSettings {
    pub index: Option<PathBuf>,
    pub embedder: EmbedderConfig,
    pub namespace_match: NamespaceMatch,
    /// Replaces the built-in namespace allowlist when set.
    pub allowlist: Option<Vec<String>>,
}

impl Default for KbSettings {
    fn default() -> Self {
        Self {
            index: None,
            embedder: EmbedderConfig::default(),
            namespace_match: NamespaceMatch::FirstComponent,
            allowlist: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxSettings {
    /// Runner command; the built-in local Python runner when unset.
    pub command: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub benchmark: String,
    pub cutoff: NaiveDate,
    pub similarity_threshold: f64,
    /// Include wall-clock timings in report rows. Replay runs leave them out
    /// so reports stay byte-identical.
    pub timings: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            benchmark: "benchmark".into(),
            cutoff: NaiveDate::from_ymd_opt(2024, 6, 30).expect("valid date"),
            similarity_threshold: 0.90,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcpConfig {
    pub jobs: usize,
    pub runs_dir: PathBuf,
    pub providers: BTreeMap<String, ProviderSettings>,
    pub roles: Roles,
    pub enumerate: EnumerationConfig,
    pub conjecture: ConjectureConfig,
    pub prove: ProveConfig,
    pub autoformalize: AutoformalizeConfig,
    pub lean: ToolchainConfig,
    pub sandbox: SandboxSettings,
    pub kb: KbSettings,
    pub eval: EvalSettings,
}

impl Default for EcpConfig {
    fn default() -> Self {
        Self {
            jobs: 4,
            runs_dir: PathBuf::from("runs"),
            providers: BTreeMap::new(),
            roles: Roles::default(),
            enumerate: EnumerationConfig::default(),
            conjecture: ConjectureConfig::default(),
            prove: ProveConfig::default(),
            autoformalize: AutoformalizeConfig::default(),
            lean: ToolchainConfig::default(),
            sandbox: SandboxSettings::default(),
            kb: KbSettings::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl EcpConfig {
    /// Parse, apply role overrides and validate.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut config: EcpConfig = toml::from_str(text)?;
        config.apply_roles();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    fn apply_roles(&mut self) {
        if let Some(r) = &self.roles.conjecturer {
            self.enumerate.model = r.backend.clone();
            self.conjecture.model = r.backend.clone();
        }
        if let Some(r) = &self.roles.prover {
            self.prove.prover = r.backend.clone();
        }
        if let Some(r) = &self.roles.judge {
            self.autoformalize.judge = r.backend.clone();
        }
        if !self.roles.autoformalizer.is_empty() {
            self.autoformalize.models = self.roles.autoformalizer.iter().map(|r| r.backend.clone()).collect();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        let positive = [
            ("enumerate.coder_max_attempt", self.enumerate.coder_max_attempt),
            ("enumerate.max_turns", self.enumerate.max_turns),
            ("conjecture.conjecturing_attempt", self.conjecture.conjecturing_attempt),
            ("prove.k", self.prove.k),
            ("autoformalize.T", self.autoformalize.t),
            ("autoformalize.models", self.autoformalize.models.len()),
        ];
        if let Some((key, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{key} must be at least 1"));
        }
        let timeouts = [
            ("enumerate.sandbox_timeout_s", self.enumerate.sandbox_timeout_s),
            ("conjecture.compile_timeout_s", self.conjecture.compile_timeout_s),
            ("prove.verify_timeout_s", self.prove.verify_timeout_s),
            ("autoformalize.compile_timeout_s", self.autoformalize.compile_timeout_s),
        ];
        if let Some((key, _)) = timeouts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return bad(format!("{key} must be a positive number of seconds"));
        }
        for (key, t) in [
            ("conjecture.echo_threshold", self.conjecture.echo_threshold),
            ("eval.similarity_threshold", self.eval.similarity_threshold),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("{key} must be in (0, 1]"));
            }
        }
        for b in self.backends() {
            b.validate().map_err(|e| ConfigError::Invalid(format!("model {}: {e}", b.model_id)))?;
        }
        self.model_providers().map(|_| ())
    }

    fn backends(&self) -> Vec<&BackendConfig> {
        let mut v = vec![&self.enumerate.model, &self.conjecture.model, &self.prove.prover, &self.autoformalize.judge];
        v.extend(self.autoformalize.models.iter());
        v
    }

    /// Provider for each model id named in `[roles]`. A model may not be
    /// bound to two providers.
    pub fn model_providers(&self) -> Result<BTreeMap<String, ProviderConfig>, ConfigError> {
        let mut out: BTreeMap<String, ProviderConfig> = BTreeMap::new();
        let roles = [&self.roles.conjecturer, &self.roles.prover, &self.roles.judge]
            .into_iter()
            .flatten()
            .chain(self.roles.autoformalizer.iter());
        for role in roles {
            let settings = self.providers.get(&role.provider).ok_or_else(|| {
                ConfigError::Invalid(format!("model {} uses undefined provider '{}'", role.backend.model_id, role.provider))
            })?;
            let provider = ProviderConfig {
                name: role.provider.clone(),
                base_url: settings.base_url.clone(),
                native_tools: settings.native_tools,
            };
            match out.get(&role.backend.model_id) {
                Some(existing) if existing.name != provider.name => {
                    return Err(ConfigError::Invalid(format!(
                        "model {} is bound to providers '{}' and '{}'",
                        role.backend.model_id, existing.name, provider.name
                    )))
                }
                _ => {
                    out.insert(role.backend.model_id.clone(), provider);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_roles() {
        let c = EcpConfig::from_toml("").unwrap();
        assert_eq!(c.enumerate.coder_max_attempt, 3);
        assert_eq!(c.conjecture.conjecturing_attempt, 5);
        assert_eq!(c.prove.k, 32);
        assert_eq!(c.autoformalize.t, 5);

        let text = r#"
            jobs = 2
            [providers.openai]
            base_url = "https://api.example.com/v1"
            [roles.conjecturer]
            provider = "openai"
            model_id = "gpt-5-mini"
            reasoning_effort = "medium"
            [[roles.autoformalizer]]
            provider = "openai"
            model_id = "a"
            [[roles.autoformalizer]]
            provider = "openai"
            model_id = "b"
            [prove]
            k = 8
        "#;
        let c = EcpConfig::from_toml(text).unwrap();
        assert_eq!(c.conjecture.model.model_id, "gpt-5-mini");
        assert_eq!(c.enumerate.model.model_id, "gpt-5-mini");
        assert_eq!(c.conjecture.model.top_p, 0.95);
        assert_eq!(c.autoformalize.models.len(), 2);
        assert_eq!(c.prove.k, 8);
        assert_eq!(c.model_providers().unwrap()["a"].base_url, "https://api.example.com/v1");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(EcpConfig::from_toml("[prove]\nk = 0").is_err());
        assert!(EcpConfig::from_toml("jobz = 3").is_err());
        assert!(EcpConfig::from_toml("[roles.prover]\nprovider = \"nowhere\"\nmodel_id = \"p\"").is_err());
        assert!(EcpConfig::from_toml("[conjecture]\necho_threshold = 1.5").is_err());
        assert!(EcpConfig::from_toml("[conjecture.model]\ntop_p = 0.0").is_err());
    }
}
