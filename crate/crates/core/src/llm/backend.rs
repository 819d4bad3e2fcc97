use std::sync::atomic::{AtomicUsize, Ordering};

use super::{ChatBackend, ChatMessage, ChatRequest, LlmError};

type ReplyFn = dyn Fn(&ChatRequest) -> Result<ChatMessage, LlmError> + Send + Sync;

/// A backend whose replies are computed by a closure over the request.
/// Used by tests and by the fixture generator as a stand-in model.
pub struct ScriptedBackend {
    reply: Box<ReplyFn>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(reply: impl Fn(&ChatRequest) -> Result<ChatMessage, LlmError> + Send + Sync + 'static) -> Self {
        Self {
            reply: Box::new(reply),
            calls: AtomicUsize::new(0),
        }
    }

    /// Replies chosen by how many assistant turns the request already has.
    /// Past the end of the script the last reply repeats.
    pub fn by_turn(replies: Vec<ChatMessage>) -> Self {
        assert!(!replies.is_empty(), "script needs at least one reply");
        Self::new(move |req| {
            let turn = req.messages.iter().filter(|m| m.role == super::Role::Assistant).count();
            Ok(replies[turn.min(replies.len() - 1)].clone())
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, LlmError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.reply)(request)
    }
}

/// Dispatches on `config.model_id`, with an optional fallback for models
/// that have no dedicated backend.
#[derive(Default)]
pub struct ModelRouter {
    routes: std::collections::HashMap<String, std::sync::Arc<dyn ChatBackend>>,
    fallback: Option<std::sync::Arc<dyn ChatBackend>>,
}

impl ModelRouter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(mut self, model_id: impl Into<String>, backend: std::sync::Arc<dyn ChatBackend>) -> Self {
        self.routes.insert(model_id.into(), backend);
        self
    }

    pub fn fallback(mut self, backend: std::sync::Arc<dyn ChatBackend>) -> Self {
        self.fallback = Some(backend);
        self
    }
}

impl ChatBackend for ModelRouter {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, LlmError> {
        self.routes
            .get(&request.config.model_id)
            .or(self.fallback.as_ref())
            .ok_or_else(|| LlmError::InvalidRequest(format!("no backend for model '{}'", request.config.model_id)))?
            .complete(request)
    }
}
