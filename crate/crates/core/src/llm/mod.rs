//! Chat-completion backends and tool-calling transcripts.
//!
//! Every pipeline stage talks to models through [`ChatBackend`]. The
//! [`Gateway`] backend runs live, records, or replays from a fixture store
//! keyed by the digest of the canonicalized request; [`ScriptedBackend`]
//! drives unit tests.

mod backend;
mod extract;
mod fixtures;
mod gateway;
mod tool_loop;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{ModelRouter, ScriptedBackend};
pub use extract::{fenced_blocks, last_fenced_block, parse_fenced_tool_call, FencedBlock};
pub use fixtures::{FixtureFile, FixtureMeta, FixtureStore};
pub use gateway::{
    api_key_env, redact, Gateway, GatewayMode, HttpBackend, HttpRequest, HttpResponse, ProviderConfig, RetryPolicy, Transport,
    TransportError, UreqTransport,
};
pub use tool_loop::{run_tool_loop, LoopError, ToolExecutor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolName {
    RunEnumeration,
    CheckLean,
}

impl ToolName {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::RunEnumeration => "run_enumeration",
            ToolName::CheckLean => "check_lean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "run_enumeration" => Some(ToolName::RunEnumeration),
            "check_lean" => Some(ToolName::CheckLean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: ToolName,
    /// Tool payload: program text for `run_enumeration`, Lean text for
    /// `check_lean`.
    pub arguments: String,
    pub call_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call: Option<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            tool_call: None,
            tool_call_id: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn assistant_tool_call(content: impl Into<String>, call: ToolCall) -> Self {
        Self {
            tool_call: Some(call),
            ..Self::plain(Role::Assistant, content)
        }
    }

    pub fn tool_response(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            tool_call_id: Some(call_id.into()),
            ..Self::plain(Role::Tool, content)
        }
    }

    /// Role/field consistency: tool messages reference a call, and only
    /// assistant messages carry calls.
    pub fn is_well_formed(&self) -> bool {
        (self.role != Role::Tool || self.tool_call_id.is_some())
            && (self.tool_call.is_none() || self.role == Role::Assistant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    None,
    Medium,
}

/// Decoding parameters for one model role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub model_id: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub reasoning_effort: Option<ReasoningEffort>,
}

impl BackendConfig {
    /// Defaults used for proof sampling.
    pub fn prover(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            temperature: 1.0,
            top_p: 0.95,
            max_tokens: 4096,
            reasoning_effort: None,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(LlmError::InvalidRequest("temperature must be non-negative".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LlmError::InvalidRequest("top_p must be in (0, 1]".into()));
        }
        Ok(())
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self::prover("default")
    }
}

/// One request to a backend. `sample_index` distinguishes independent
/// samples of the same prompt so that each has its own fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub config: BackendConfig,
    #[serde(default)]
    pub tools: Vec<ToolName>,
    #[serde(default)]
    pub sample_index: u32,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>, config: BackendConfig) -> Self {
        Self {
            messages,
            config,
            tools: Vec::new(),
            sample_index: 0,
        }
    }

    pub fn with_tools(mut self, tools: &[ToolName]) -> Self {
        self.tools = tools.to_vec();
        self
    }

    pub fn with_sample(mut self, index: u32) -> Self {
        self.sample_index = index;
        self
    }

    /// Content digest: SHA-256 of the canonical JSON encoding. Prompt text is
    /// hashed byte for byte.
    pub fn digest(&self) -> String {
        crate::digest::digest_of(self)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match self.messages.first() {
            None => return Err(LlmError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::System => {
                return Err(LlmError::InvalidRequest("first message must be the system prompt".into()))
            }
            _ => {}
        }
        self.config.validate()
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("token budget exhausted before any output")]
    BudgetExhausted,
    #[error("malformed backend reply: {0}")]
    MalformedReply(String),
    #[error("missing fixture for request digest {digest}")]
    MissingFixture { digest: String },
    #[error("fixture digest collision at {digest}")]
    DigestCollision { digest: String },
    #[error("fixture store: {0}")]
    Store(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("credentials: {0}")]
    Credentials(String),
    #[error("scripted backend: {0}")]
    Scripted(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// A chat-completion backend.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, LlmError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, LlmError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, LlmError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Natural,
    ToolBudget,
    TokenBudget,
    Error,
}

/// The conversation of one stage. The system prompt is kept apart from the
/// message list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub system: String,
    pub messages: Vec<ChatMessage>,
    pub finished: bool,
    pub finish_reason: FinishReason,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("message {0} is malformed for its role")]
    Malformed(usize),
    #[error("message {0} answers no pending tool call")]
    OrphanResponse(usize),
    #[error("tool call at message {0} is followed by something other than its response")]
    Unanswered(usize),
}

impl Transcript {
    pub fn new(system: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            messages: Vec::new(),
            finished: false,
            finish_reason: FinishReason::Natural,
        }
    }

    /// Full message list for a backend request.
    pub fn request_messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(self.messages.len() + 1);
        out.push(ChatMessage::system(self.system.clone()));
        out.extend(self.messages.iter().cloned());
        out
    }

    pub fn finish(&mut self, reason: FinishReason) {
        self.finished = true;
        self.finish_reason = reason;
    }

    /// Every tool call is immediately followed by its response; at most the
    /// final message may be an unanswered call.
    pub fn validate(&self) -> Result<(), TranscriptError> {
        let mut pending: Option<(usize, &str)> = None;
        for (i, m) in self.messages.iter().enumerate() {
            if !m.is_well_formed() {
                return Err(TranscriptError::Malformed(i));
            }
            match (pending, m.role) {
                (Some((_, id)), Role::Tool) if m.tool_call_id.as_deref() == Some(id) => pending = None,
                (Some((at, _)), _) => return Err(TranscriptError::Unanswered(at)),
                (None, Role::Tool) => return Err(TranscriptError::OrphanResponse(i)),
                (None, _) => {}
            }
            if let Some(call) = &m.tool_call {
                pending = Some((i, call.call_id.as_str()));
            }
        }
        Ok(())
    }

    /// Number of assistant messages so far.
    pub fn assistant_turns(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Assistant).count()
    }
}
