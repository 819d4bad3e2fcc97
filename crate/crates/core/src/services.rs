//! Wiring of backends for replay, record and live runs.
//!
//! A fixture directory has this layout:
//!
//! ```text
//! <dir>/config.toml           run configuration (optional)
//! <dir>/corpus.jsonl          tasks
//! <dir>/llm/<digest>.json     recorded chat replies
//! <dir>/sandbox/<digest>.json recorded sandbox results
//! <dir>/lean/mock_table.json  Lean verdict table
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::config::{EcpConfig, EmbedderConfig};
use crate::kb::{Embedder, HashEmbedder, HttpEmbedder};
use crate::lean::mock::load_table;
use crate::lean::{CachedVerifier, LeanError, LeanToolchain, MockVerifier, RecordingVerifier};
use crate::llm::{ChatBackend, FixtureStore, Gateway, HttpBackend, LlmError, ModelRouter, Transport, UreqTransport};
use crate::pipeline::Services;
use crate::prompts::PromptSet;
use crate::sandbox::{LocalPythonSandbox, ProcessSandbox, ReplaySandbox, SandboxClient};

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Lean(#[from] LeanError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureLayout {
    pub root: PathBuf,
}

impl FixtureLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }

    pub fn llm(&self) -> PathBuf {
        self.root.join("llm")
    }

    pub fn sandbox(&self) -> PathBuf {
        self.root.join("sandbox")
    }

    pub fn lean_table(&self) -> PathBuf {
        self.root.join("lean").join("mock_table.json")
    }
}

/// Services that answer only from fixtures. Nothing here touches the
/// network, a Python interpreter or a Lean toolchain.
pub fn replay_services(layout: &FixtureLayout, prompts: PromptSet) -> Result<Services, SetupError> {
    let table_path = layout.lean_table();
    let lean = if table_path.exists() {
        MockVerifier::from_file(&table_path)?
    } else {
        MockVerifier::default()
    };
    Ok(Services {
        llm: Arc::new(Gateway::replay(Arc::new(FixtureStore::open(layout.llm())))),
        sandbox: Arc::new(ReplaySandbox::replay(layout.sandbox())),
        lean: Arc::new(lean),
        prompts,
    })
}

/// Chat backend routing each configured model to its provider's HTTP API.
pub fn http_router(config: &EcpConfig, transport: Arc<dyn Transport>) -> Result<ModelRouter, SetupError> {
    let mut router = ModelRouter::new();
    for (model, provider) in config.model_providers()? {
        router = router.route(model, Arc::new(HttpBackend::from_env(provider, transport.clone())?));
    }
    Ok(router)
}

pub fn live_sandbox(config: &EcpConfig) -> Arc<dyn SandboxClient> {
    match &config.sandbox.command {
        Some(cmd) => Arc::new(ProcessSandbox::new(cmd.clone())),
        None => Arc::new(LocalPythonSandbox::new("python3")),
    }
}

/// Live services, optionally recording every exchange into `record`.
pub struct LiveServices {
    pub services: Services,
    recorder: Option<(Arc<RecordingVerifier<CachedVerifier<LeanToolchain>>>, PathBuf)>,
}

impl LiveServices {
    pub fn new(config: &EcpConfig, record: Option<&FixtureLayout>, prompts: PromptSet) -> Result<Self, SetupError> {
        let transport: Arc<dyn Transport> = Arc::new(UreqTransport::new(Duration::from_secs(600)));
        let upstream: Arc<dyn ChatBackend> = Arc::new(http_router(config, transport)?);
        let toolchain = CachedVerifier::new(LeanToolchain::new(config.lean.clone())?);
        let sandbox = live_sandbox(config);
        Ok(match record {
            None => Self {
                services: Services {
                    llm: Arc::new(Gateway::live(upstream)),
                    sandbox,
                    lean: Arc::new(toolchain),
                    prompts,
                },
                recorder: None,
            },
            Some(layout) => {
                let table = match layout.lean_table() {
                    p if p.exists() => load_table(&p)?,
                    _ => Default::default(),
                };
                let recorder = Arc::new(RecordingVerifier::with_table(toolchain, table));
                Self {
                    services: Services {
                        llm: Arc::new(Gateway::record(upstream, Arc::new(FixtureStore::open(layout.llm())))),
                        sandbox: Arc::new(ReplaySandbox::recording(layout.sandbox(), sandbox)),
                        lean: recorder.clone(),
                        prompts,
                    },
                    recorder: Some((recorder, layout.lean_table())),
                }
            }
        })
    }

    /// Persist the recorded Lean verdict table, if recording.
    pub fn finish(&self) -> Result<(), LeanError> {
        match &self.recorder {
            Some((rec, path)) => rec.save(path),
            None => Ok(()),
        }
    }
}

pub fn embedder(config: &EcpConfig) -> Result<Box<dyn Embedder>, SetupError> {
    Ok(match &config.kb.embedder {
        EmbedderConfig::Hash { dim, seed } => Box::new(HashEmbedder { dim: *dim, seed: *seed }),
        EmbedderConfig::Http { provider, model, dim } => {
            let settings = config.providers.get(provider).ok_or_else(|| {
                crate::config::ConfigError::Invalid(format!("embedder uses undefined provider '{provider}'"))
            })?;
            let key_var = crate::llm::api_key_env(provider);
            let key = std::env::var(&key_var).map_err(|_| LlmError::InvalidRequest(format!("{key_var} is not set")))?;
            let transport: Arc<dyn Transport> = Arc::new(UreqTransport::new(Duration::from_secs(120)));
            Box::new(HttpEmbedder::new(settings.base_url.clone(), model.clone(), *dim, key, transport))
        }
    })
}

/// Configuration for a run: an explicit file wins, then the fixture
/// directory's `config.toml`, then defaults.
pub fn resolve_config(explicit: Option<&Path>, layout: Option<&FixtureLayout>) -> Result<EcpConfig, crate::config::ConfigError> {
    if let Some(p) = explicit {
        return EcpConfig::load(p);
    }
    if let Some(l) = layout {
        if l.config().exists() {
            return EcpConfig::load(&l.config());
        }
    }
    Ok(EcpConfig::default())
}
