#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use ecp_core::lean::{Diagnostic, LeanError, LeanVerdict, LeanVerifier};
use ecp_core::llm::{ChatMessage, ToolCall, ToolName};
use ecp_core::problem::ProblemMetadata;
use ecp_core::sandbox::{SandboxClient, SandboxError, SandboxRequest, SandboxResult, SandboxStatus, SCHEMA_VERSION};
use ecp_core::AnswerConstructionTask;

/// Verifier deciding each check with a closure over the source.
pub struct FnVerifier<F>(pub F);

impl<F: Fn(&str) -> LeanVerdict + Send + Sync> LeanVerifier for FnVerifier<F> {
    fn check(&self, source: &str, _timeout: Duration) -> Result<LeanVerdict, LeanError> {
        Ok((self.0)(source))
    }
}

pub fn fails(msg: &str) -> LeanVerdict {
    LeanVerdict::failed(vec![Diagnostic::error(1, 0, msg)])
}

/// Sandbox answering with a closure, counting runs.
pub struct FnSandbox<F> {
    pub f: F,
    pub runs: AtomicUsize,
}

impl<F> FnSandbox<F> {
    pub fn new(f: F) -> Self {
        Self { f, runs: AtomicUsize::new(0) }
    }

    pub fn runs(&self) -> usize {
        self.runs.load(Ordering::SeqCst)
    }
}

impl<F: Fn(&SandboxRequest) -> SandboxResult + Send + Sync> SandboxClient for FnSandbox<F> {
    fn run(&self, request: &SandboxRequest) -> Result<SandboxResult, SandboxError> {
        self.runs.fetch_add(1, Ordering::SeqCst);
        Ok((self.f)(request))
    }
}

pub fn sandbox_result(status: SandboxStatus, answers: &[&str]) -> SandboxResult {
    SandboxResult {
        v: SCHEMA_VERSION,
        status,
        answers: answers.iter().map(|s| s.to_string()).collect(),
        truncated: false,
        stderr_excerpt: String::new(),
        wall_time_s: if status == SandboxStatus::Timeout { 60.0 } else { 0.1 },
        exit_code: (status == SandboxStatus::RuntimeError).then_some(1),
    }
}

pub fn tool_call(code: &str, id: &str) -> ChatMessage {
    ChatMessage::assistant_tool_call(
        "",
        ToolCall {
            tool: ToolName::RunEnumeration,
            arguments: code.into(),
            call_id: id.into(),
        },
    )
}

pub fn lean_reply(body: &str) -> ChatMessage {
    ChatMessage::assistant(format!("```lean\n{body}\n```"))
}

pub const CUBIC_FORMAL: &str = "import Mathlib\n\nabbrev cubic_answer : Set (ℕ × ℕ) := sorry\n\ntheorem cubic (x y : ℕ) (hx : 0 < x) (hy : 0 < y) :\n    x ^ 3 + y ^ 3 = x ^ 2 + 42 * x * y + y ^ 2 ↔ (x, y) ∈ cubic_answer := by\n  sorry\n";

pub const CUBIC_ECHO: &str = "{(x, y) : ℕ × ℕ | x ^ 3 + y ^ 3 = x ^ 2 + 42 * x * y + y ^ 2}";
pub const CUBIC_SET: &str = "{(1, 7), (7, 1), (22, 22)}";

pub fn cubic_task() -> AnswerConstructionTask {
    AnswerConstructionTask::new(
        "cubic".into(),
        "Find all pairs of positive integers with x^3 + y^3 = x^2 + 42xy + y^2.".into(),
        CUBIC_FORMAL.into(),
        "cubic_answer".into(),
        "Set (ℕ × ℕ)".into(),
        Some("{(7, 1), (1, 7), (22, 22)}".into()),
        ProblemMetadata::default(),
    )
    .unwrap()
}
