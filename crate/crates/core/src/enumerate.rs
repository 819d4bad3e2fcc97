//! Enumerate stage: the model writes a search program, the sandbox runs it,
//! and failures are fed back until a run prints answers or the attempt
//! budget is spent.

use serde::{Deserialize, Serialize};

use crate::llm::{
    last_fenced_block, BackendConfig, ChatBackend, ChatMessage, ChatRequest, FinishReason, LlmError, ToolName,
    Transcript,
};
use crate::problem::AnswerConstructionTask;
use crate::prompts::PromptSet;
use crate::sandbox::{SandboxClient, SandboxRequest, SandboxResult, SandboxStatus};
use crate::stage::StageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnumerationConfig {
    pub coder_max_attempt: usize,
    pub sandbox_timeout_s: f64,
    pub max_answers: usize,
    pub max_output_bytes: usize,
    pub memory_mb: u64,
    pub max_turns: usize,
    pub model: BackendConfig,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        Self {
            coder_max_attempt: 3,
            sandbox_timeout_s: crate::sandbox::DEFAULT_TIMEOUT_S,
            max_answers: crate::sandbox::DEFAULT_MAX_ANSWERS,
            max_output_bytes: crate::sandbox::DEFAULT_MAX_OUTPUT_BYTES,
            memory_mb: crate::sandbox::DEFAULT_MEMORY_MB,
            max_turns: 8,
            model: BackendConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnumerationStatus {
    Ok,
    Empty,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub program: Option<String>,
    pub result: Option<SandboxResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationOutput {
    pub answers: Vec<String>,
    pub attempts_used: usize,
    pub status: EnumerationStatus,
    pub attempts: Vec<AttemptRecord>,
    pub transcript: Transcript,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no program found in the reply")]
pub struct NoProgram;

/// The tool-call payload if there is one, else the last fenced block.
pub fn extract_program(message: &ChatMessage) -> Result<String, NoProgram> {
    if let Some(call) = &message.tool_call {
        if call.tool == ToolName::RunEnumeration && !call.arguments.trim().is_empty() {
            return Ok(call.arguments.clone());
        }
    }
    last_fenced_block(&message.content, None)
        .map(|b| b.body)
        .filter(|b| !b.trim().is_empty())
        .ok_or(NoProgram)
}

/// Order-preserving deduplication.
pub fn dedup_answers(lines: &[String]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    lines.iter().filter(|l| seen.insert(l.as_str())).cloned().collect()
}

pub fn task_prompt(prompts: &PromptSet, task: &AnswerConstructionTask) -> String {
    prompts.render(
        "enumerate_task",
        &[
            ("informal", &task.informal_statement),
            ("formal", task.formal_statement.trim_end()),
            ("answer_type", &task.answer_type),
            ("answer_name", &task.answer_name),
        ],
    )
}

pub fn enumerate(
    task: &AnswerConstructionTask,
    backend: &dyn ChatBackend,
    sandbox: &dyn SandboxClient,
    prompts: &PromptSet,
    config: &EnumerationConfig,
) -> Result<EnumerationOutput, StageError<EnumerationOutput>> {
    let timeout = format!("{}", config.sandbox_timeout_s);
    let cap = config.max_answers.to_string();
    let system = prompts.render("enumerate_system", &[("timeout_s", &timeout), ("max_answers", &cap)]);
    let mut out = EnumerationOutput {
        answers: Vec::new(),
        attempts_used: 0,
        status: EnumerationStatus::Exhausted,
        attempts: Vec::new(),
        transcript: Transcript::new(system),
    };
    out.transcript.messages.push(ChatMessage::user(task_prompt(prompts, task)));
    let tools = [ToolName::RunEnumeration];
    let mut last_ok_but_empty = false;

    for _turn in 0..config.max_turns {
        if out.attempts_used == config.coder_max_attempt {
            break;
        }
        let request = ChatRequest::new(out.transcript.request_messages(), config.model.clone()).with_tools(&tools);
        let reply = match backend.complete(&request) {
            Ok(r) => r,
            Err(e) => {
                let reason = if matches!(e, LlmError::BudgetExhausted) {
                    FinishReason::TokenBudget
                } else {
                    FinishReason::Error
                };
                out.transcript.finish(reason);
                return Err(StageError::new(e, out));
            }
        };
        let call_id = reply.tool_call.as_ref().map(|c| c.call_id.clone());
        let program = extract_program(&reply);
        out.transcript.messages.push(reply);
        out.attempts_used += 1;
        let attempt = out.attempts_used;

        let program = match program {
            Ok(p) => p,
            Err(NoProgram) => {
                out.attempts.push(AttemptRecord {
                    attempt,
                    program: None,
                    result: None,
                });
                last_ok_but_empty = false;
                let fb = prompts.render("enumerate_retry", &[("feedback", "No program was found in your reply.")]);
                push_feedback(&mut out.transcript, call_id, fb);
                continue;
            }
        };

        let mut req = SandboxRequest::new(program.clone());
        req.timeout_s = config.sandbox_timeout_s;
        req.max_answers = config.max_answers;
        req.max_output_bytes = config.max_output_bytes;
        req.memory_mb = config.memory_mb;
        let result = match sandbox.run(&req) {
            Ok(r) => r,
            Err(e) => {
                out.attempts.push(AttemptRecord {
                    attempt,
                    program: Some(program),
                    result: None,
                });
                out.transcript.finish(FinishReason::Error);
                return Err(StageError::new(e, out));
            }
        };
        let rendered = result.render();
        let success = result.status == SandboxStatus::Ok && !result.answers.is_empty();
        last_ok_but_empty = result.status == SandboxStatus::Ok && result.answers.is_empty();
        let answers = dedup_answers(&result.answers);
        out.attempts.push(AttemptRecord {
            attempt,
            program: Some(program),
            result: Some(result),
        });
        if success {
            push_feedback(&mut out.transcript, call_id, rendered);
            out.answers = answers;
            out.status = EnumerationStatus::Ok;
            out.transcript.finish(FinishReason::Natural);
            return Ok(out);
        }
        let fb = if out.attempts_used < config.coder_max_attempt {
            prompts.render("enumerate_retry", &[("feedback", &rendered)])
        } else {
            rendered
        };
        push_feedback(&mut out.transcript, call_id, fb);
    }

    out.status = if last_ok_but_empty {
        EnumerationStatus::Empty
    } else {
        EnumerationStatus::Exhausted
    };
    out.transcript.finish(FinishReason::ToolBudget);
    Ok(out)
}

/// Tool responses answer native calls; fenced-block programs get a user turn.
fn push_feedback(transcript: &mut Transcript, call_id: Option<String>, text: String) {
    let msg = match call_id {
        Some(id) => ChatMessage::tool_response(id, text),
        None => ChatMessage::user(text),
    };
    transcript.messages.push(msg);
}
