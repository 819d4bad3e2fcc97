//! Live, record and replay backends.
//!
//! [`HttpBackend`] speaks the OpenAI-compatible chat-completions protocol
//! through an injected [`Transport`]; [`Gateway`] layers the fixture store on
//! top of any upstream backend.

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::{
    parse_fenced_tool_call, ChatBackend, ChatMessage, ChatRequest, FixtureStore, LlmError, ReasoningEffort, Role,
    ToolCall, ToolName,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// The only place network I/O happens.
pub trait Transport: Send + Sync {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent }
    }
}

impl Transport for UreqTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut req = self.agent.post(&request.url);
        for (k, v) in &request.headers {
            req = req.header(k, v);
        }
        let mut resp = req
            .content_type("application/json")
            .send(request.body.as_bytes())
            .map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// Environment variable holding the API key for `provider`.
pub fn api_key_env(provider: &str) -> String {
    let upper: String = provider
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    format!("ECP_API_KEY_{upper}")
}

/// Replace every occurrence of `secret` in `text`.
pub fn redact(text: &str, secret: Option<&str>) -> String {
    match secret {
        Some(s) if !s.is_empty() => text.replace(s, "[REDACTED]"),
        _ => text.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    pub base_url: String,
    /// Whether the provider supports native tool calls. When false, tools are
    /// described in the prompt and calls are parsed from fenced blocks.
    #[serde(default = "default_true")]
    pub native_tools: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based): base * 2^attempt.
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }
}

pub struct HttpBackend {
    provider: ProviderConfig,
    transport: Arc<dyn Transport>,
    api_key: String,
    retry: RetryPolicy,
}

impl HttpBackend {
    /// Reads the key from the provider's environment variable.
    pub fn from_env(provider: ProviderConfig, transport: Arc<dyn Transport>) -> Result<Self, LlmError> {
        let var = api_key_env(&provider.name);
        let api_key = std::env::var(&var).map_err(|_| LlmError::Credentials(format!("{var} is not set")))?;
        Ok(Self::new(provider, transport, api_key))
    }

    pub fn new(provider: ProviderConfig, transport: Arc<dyn Transport>, api_key: impl Into<String>) -> Self {
        Self {
            provider,
            transport,
            api_key: api_key.into(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn http_request(&self, request: &ChatRequest) -> HttpRequest {
        HttpRequest {
            url: format!("{}/chat/completions", self.provider.base_url.trim_end_matches('/')),
            headers: vec![("Authorization".into(), format!("Bearer {}", self.api_key))],
            body: request_body(request, self.provider.native_tools).to_string(),
        }
    }

    fn send_once(&self, http: &HttpRequest) -> Result<HttpResponse, LlmError> {
        let resp = self
            .transport
            .post(http)
            .map_err(|e| LlmError::Transport(redact(&e.0, Some(&self.api_key))))?;
        if resp.status >= 400 {
            return Err(LlmError::Http {
                status: resp.status,
                body: redact(&resp.body, Some(&self.api_key)),
            });
        }
        Ok(resp)
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, LlmError> {
        request.validate()?;
        let http = self.http_request(request);
        let mut attempt = 0;
        let resp = loop {
            match self.send_once(&http) {
                Ok(r) => break r,
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    log::warn!("{}: {e}; retry {} of {}", self.provider.name, attempt + 1, self.retry.max_retries);
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        parse_reply(&resp.body, request)
    }
}

fn tool_schema(tool: ToolName) -> Value {
    let (description, param) = match tool {
        ToolName::RunEnumeration => ("Run a Python program and return the lines it prints.", "code"),
        ToolName::CheckLean => ("Compile Lean 4 source and return the diagnostics.", "code"),
    };
    json!({
        "type": "function",
        "function": {
            "name": tool.as_str(),
            "description": description,
            "parameters": {
                "type": "object",
                "properties": { param: { "type": "string" } },
                "required": [param],
            },
        },
    })
}

fn message_json(m: &ChatMessage, native_tools: bool) -> Value {
    let role = match m.role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
        Role::Tool if native_tools => "tool",
        Role::Tool => "user",
    };
    let mut v = json!({ "role": role, "content": m.content });
    if native_tools {
        if let Some(call) = &m.tool_call {
            v["tool_calls"] = json!([{
                "id": call.call_id,
                "type": "function",
                "function": {
                    "name": call.tool.as_str(),
                    "arguments": json!({ "code": call.arguments }).to_string(),
                },
            }]);
        }
        if let Some(id) = &m.tool_call_id {
            v["tool_call_id"] = json!(id);
        }
    }
    v
}

/// OpenAI-compatible request body.
pub(crate) fn request_body(request: &ChatRequest, native_tools: bool) -> Value {
    let c = &request.config;
    let mut body = json!({
        "model": c.model_id,
        "messages": request.messages.iter().map(|m| message_json(m, native_tools)).collect::<Vec<_>>(),
        "temperature": c.temperature,
        "top_p": c.top_p,
        "max_tokens": c.max_tokens,
    });
    if let Some(effort) = c.reasoning_effort {
        body["reasoning_effort"] = json!(match effort {
            ReasoningEffort::None => "none",
            ReasoningEffort::Medium => "medium",
        });
    }
    if native_tools && !request.tools.is_empty() {
        body["tools"] = Value::Array(request.tools.iter().map(|t| tool_schema(*t)).collect());
    }
    body
}

fn fallback_call_id(request: &ChatRequest) -> String {
    let turn = request.messages.iter().filter(|m| m.role == Role::Assistant).count();
    format!("call_{turn}")
}

/// Parse a chat-completions response body into one assistant message.
pub(crate) fn parse_reply(body: &str, request: &ChatRequest) -> Result<ChatMessage, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::MalformedReply(e.to_string()))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::MalformedReply("no choices".into()))?;
    let msg = choice
        .get("message")
        .ok_or_else(|| LlmError::MalformedReply("choice without message".into()))?;
    let content = msg.get("content").and_then(Value::as_str).unwrap_or("").to_string();
    let finish = choice.get("finish_reason").and_then(Value::as_str).unwrap_or("");

    if let Some(call) = msg.get("tool_calls").and_then(|c| c.get(0)) {
        let f = call
            .get("function")
            .ok_or_else(|| LlmError::MalformedReply("tool call without function".into()))?;
        let name = f.get("name").and_then(Value::as_str).unwrap_or("");
        let tool = ToolName::parse(name)
            .filter(|t| request.tools.contains(t))
            .ok_or_else(|| LlmError::MalformedReply(format!("call to unoffered tool '{name}'")))?;
        let raw = f.get("arguments").and_then(Value::as_str).unwrap_or("");
        let arguments = match serde_json::from_str::<Value>(raw) {
            Ok(Value::Object(o)) => o
                .get("code")
                .and_then(Value::as_str)
                .ok_or_else(|| LlmError::MalformedReply("tool arguments lack 'code'".into()))?
                .to_string(),
            _ => raw.to_string(),
        };
        let call_id = call
            .get("id")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| fallback_call_id(request));
        return Ok(ChatMessage::assistant_tool_call(content, ToolCall { tool, arguments, call_id }));
    }
    if content.trim().is_empty() {
        return Err(if finish == "length" {
            LlmError::BudgetExhausted
        } else {
            LlmError::MalformedReply("empty reply".into())
        });
    }
    if !request.tools.is_empty() {
        if let Some(call) = parse_fenced_tool_call(&content, &request.tools, &fallback_call_id(request)) {
            return Ok(ChatMessage::assistant_tool_call(content, call));
        }
    }
    Ok(ChatMessage::assistant(content))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

/// Fixture-aware backend. In replay mode the upstream is never touched.
pub struct Gateway {
    mode: GatewayMode,
    upstream: Option<Arc<dyn ChatBackend>>,
    store: Option<Arc<FixtureStore>>,
}

impl Gateway {
    pub fn live(upstream: Arc<dyn ChatBackend>) -> Self {
        Self {
            mode: GatewayMode::Live,
            upstream: Some(upstream),
            store: None,
        }
    }

    /// Serve existing fixtures and record new ones from `upstream`.
    pub fn record(upstream: Arc<dyn ChatBackend>, store: Arc<FixtureStore>) -> Self {
        Self {
            mode: GatewayMode::Record,
            upstream: Some(upstream),
            store: Some(store),
        }
    }

    pub fn replay(store: Arc<FixtureStore>) -> Self {
        Self {
            mode: GatewayMode::Replay,
            upstream: None,
            store: Some(store),
        }
    }

    /// Replay with an upstream attached anyway; used to assert it is never called.
    pub fn replay_with_upstream(store: Arc<FixtureStore>, upstream: Arc<dyn ChatBackend>) -> Self {
        Self {
            upstream: Some(upstream),
            ..Self::replay(store)
        }
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    pub fn store(&self) -> Option<&FixtureStore> {
        self.store.as_deref()
    }

    fn upstream(&self) -> Result<&dyn ChatBackend, LlmError> {
        self.upstream
            .as_deref()
            .ok_or_else(|| LlmError::InvalidRequest("gateway has no upstream backend".into()))
    }
}

impl ChatBackend for Gateway {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, LlmError> {
        request.validate()?;
        match self.mode {
            GatewayMode::Live => self.upstream()?.complete(request),
            GatewayMode::Replay => {
                let store = self.store.as_ref().expect("replay gateway has a store");
                store.lookup(request)?.ok_or_else(|| LlmError::MissingFixture {
                    digest: request.digest(),
                })
            }
            GatewayMode::Record => {
                let store = self.store.as_ref().expect("record gateway has a store");
                if let Some(reply) = store.lookup(request)? {
                    return Ok(reply);
                }
                let reply = self.upstream()?.complete(request)?;
                store.record(request, &reply)?;
                Ok(reply)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    use super::*;
    use crate::llm::BackendConfig;

    struct Canned {
        replies: Mutex<Vec<Result<HttpResponse, TransportError>>>,
        seen: Mutex<Vec<HttpRequest>>,
    }

    impl Canned {
        fn new(mut replies: Vec<Result<HttpResponse, TransportError>>) -> Arc<Self> {
            replies.reverse();
            Arc::new(Self {
                replies: Mutex::new(replies),
                seen: Mutex::new(Vec::new()),
            })
        }
    }

    impl Transport for Canned {
        fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
            self.seen.lock().unwrap().push(request.clone());
            self.replies.lock().unwrap().pop().expect("unexpected request")
        }
    }

    fn ok(body: Value) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse {
            status: 200,
            body: body.to_string(),
        })
    }

    fn text_reply(text: &str) -> Value {
        json!({"choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]})
    }

    fn provider() -> ProviderConfig {
        ProviderConfig {
            name: "test".into(),
            base_url: "http://localhost:0/v1/".into(),
            native_tools: true,
        }
    }

    fn fast() -> RetryPolicy {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(1),
        }
    }

    fn request() -> ChatRequest {
        ChatRequest::new(
            vec![ChatMessage::system("sys"), ChatMessage::user("hi")],
            BackendConfig::prover("m"),
        )
    }

    #[test]
    fn builds_openai_body() {
        let t = Canned::new(vec![ok(text_reply("hello"))]);
        let b = HttpBackend::new(provider(), t.clone(), "sk-secret");
        let req = request().with_tools(&[ToolName::RunEnumeration]);
        assert_eq!(b.complete(&req).unwrap(), ChatMessage::assistant("hello"));
        let seen = t.seen.lock().unwrap();
        assert_eq!(seen[0].url, "http://localhost:0/v1/chat/completions");
        let body: Value = serde_json::from_str(&seen[0].body).unwrap();
        assert_eq!(body["max_tokens"], 4096);
        assert_eq!(body["top_p"], 0.95);
        assert_eq!(body["tools"][0]["function"]["name"], "run_enumeration");
        assert!(!seen[0].body.contains("sk-secret"));
    }

    #[test]
    fn retries_5xx_and_transport_but_not_4xx() {
        let t = Canned::new(vec![
            Err(TransportError("reset".into())),
            Ok(HttpResponse { status: 503, body: "busy".into() }),
            ok(text_reply("fine")),
        ]);
        let b = HttpBackend::new(provider(), t.clone(), "k").with_retry(fast());
        assert_eq!(b.complete(&request()).unwrap().content, "fine");
        assert_eq!(t.seen.lock().unwrap().len(), 3);

        let t = Canned::new(vec![Ok(HttpResponse { status: 400, body: "bad key k".into() })]);
        let b = HttpBackend::new(provider(), t.clone(), "k").with_retry(fast());
        match b.complete(&request()) {
            Err(LlmError::Http { status: 400, body }) => assert_eq!(body, "bad [REDACTED]ey [REDACTED]"),
            other => panic!("{other:?}"),
        }
        assert_eq!(t.seen.lock().unwrap().len(), 1);

        let t = Canned::new((0..4).map(|_| Err(TransportError("down".into()))).collect());
        let b = HttpBackend::new(provider(), t.clone(), "zz").with_retry(fast());
        assert!(matches!(b.complete(&request()), Err(LlmError::Transport(_))));
        assert_eq!(t.seen.lock().unwrap().len(), 4);
    }

    #[test]
    fn native_and_fenced_tool_calls() {
        let req = request().with_tools(&[ToolName::RunEnumeration]);
        let native = json!({"choices": [{"message": {"content": null, "tool_calls": [{
            "id": "abc", "type": "function",
            "function": {"name": "run_enumeration", "arguments": "{\"code\": \"print(1)\"}"}}]}}]});
        let m = parse_reply(&native.to_string(), &req).unwrap();
        let call = m.tool_call.unwrap();
        assert_eq!((call.tool, call.arguments.as_str(), call.call_id.as_str()), (ToolName::RunEnumeration, "print(1)", "abc"));

        let fenced = text_reply("Let me check.\n```python\nprint(2)\n```");
        let m = parse_reply(&fenced.to_string(), &req).unwrap();
        assert_eq!(m.tool_call.unwrap().call_id, "call_0");

        let unoffered = json!({"choices": [{"message": {"tool_calls": [{"id": "x",
            "function": {"name": "check_lean", "arguments": "{}"}}]}}]});
        assert!(matches!(parse_reply(&unoffered.to_string(), &req), Err(LlmError::MalformedReply(_))));
    }

    #[test]
    fn budget_and_malformed() {
        let req = request();
        let cut = json!({"choices": [{"message": {"content": ""}, "finish_reason": "length"}]});
        assert!(matches!(parse_reply(&cut.to_string(), &req), Err(LlmError::BudgetExhausted)));
        assert!(matches!(parse_reply("not json", &req), Err(LlmError::MalformedReply(_))));
        assert!(matches!(parse_reply("{}", &req), Err(LlmError::MalformedReply(_))));
    }

    struct Counting(AtomicUsize);

    impl ChatBackend for Counting {
        fn complete(&self, _: &ChatRequest) -> Result<ChatMessage, LlmError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(ChatMessage::assistant("live"))
        }
    }

    #[test]
    fn record_then_replay_without_upstream() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(FixtureStore::open(dir.path()));
        let up = Arc::new(Counting(AtomicUsize::new(0)));
        let rec = Gateway::record(up.clone(), store.clone());
        assert_eq!(rec.complete(&request()).unwrap().content, "live");
        assert_eq!(rec.complete(&request()).unwrap().content, "live");
        assert_eq!(up.0.load(Ordering::SeqCst), 1);

        let replay = Gateway::replay_with_upstream(Arc::new(FixtureStore::open(dir.path())), up.clone());
        assert_eq!(replay.complete(&request()).unwrap().content, "live");
        let other = request().with_sample(3);
        match replay.complete(&other) {
            Err(LlmError::MissingFixture { digest }) => assert_eq!(digest, other.digest()),
            r => panic!("{r:?}"),
        }
        assert_eq!(up.0.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn key_env_names() {
        assert_eq!(api_key_env("openai"), "ECP_API_KEY_OPENAI");
        assert_eq!(api_key_env("deep-seek"), "ECP_API_KEY_DEEP_SEEK");
        assert_eq!(redact("token abc", None), "token abc");
    }
}
