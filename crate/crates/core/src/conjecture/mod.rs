//! Conjecture stage: turn the task (and enumeration hints, if any) into a
//! closed-form Lean expression that is legal and compiles.

pub(crate) mod triviality;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use triviality::{lcs_len, triviality_check, TrivialityReason, TrivialityVerdict, DEFAULT_ECHO_THRESHOLD};

use crate::enumerate::EnumerationOutput;
use crate::lean::{render_diagnostics, Diagnostic, LeanVerifier};
use crate::llm::{last_fenced_block, BackendConfig, ChatBackend, ChatMessage, ChatRequest, FinishReason, Transcript};
use crate::problem::{render_answer_check, AnswerConstructionTask, CandidateAnswer, Compiled, Provenance};
use crate::prompts::PromptSet;
use crate::stage::StageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConjectureConfig {
    pub conjecturing_attempt: usize,
    pub echo_threshold: f64,
    pub compile_timeout_s: f64,
    pub model: BackendConfig,
}

impl Default for ConjectureConfig {
    fn default() -> Self {
        Self {
            conjecturing_attempt: 5,
            echo_threshold: DEFAULT_ECHO_THRESHOLD,
            compile_timeout_s: 60.0,
            model: BackendConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum RoundResult {
    Accepted,
    NoExpression,
    Illegal { reason: TrivialityReason, echo_overlap: f64 },
    CompileError { diagnostics: Vec<Diagnostic> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureRound {
    pub round: usize,
    pub expression: Option<String>,
    #[serde(flatten)]
    pub result: RoundResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureOutput {
    /// Present only when some round passed both gates.
    pub candidate: Option<CandidateAnswer>,
    pub rounds_used: usize,
    pub hints_used: bool,
    pub rounds: Vec<ConjectureRound>,
    pub transcript: Transcript,
}

/// The proposed expression in a reply: the last Lean (or untagged) fenced
/// block, or a one-line reply. A block holding the whole `abbrev` yields its
/// body.
pub fn extract_expression(message: &ChatMessage, answer_name: &str) -> Option<String> {
    let text = match last_fenced_block(&message.content, Some(&["lean", "lean4"])) {
        Some(b) => b.body,
        None if !message.content.trim().contains('\n') => message.content.clone(),
        None => return None,
    };
    let expr = match crate::lean::source::placeholder_body(&text, answer_name) {
        Ok(body) => body.to_string(),
        Err(_) => text,
    };
    let expr = expr.trim();
    (!expr.is_empty()).then(|| expr.to_string())
}

fn hints_block(prompts: &PromptSet, enumeration: Option<&EnumerationOutput>) -> Option<String> {
    let e = enumeration.filter(|e| !e.answers.is_empty())?;
    Some(prompts.render("conjecture_hints", &[("answers", &e.answers.join("\n"))]))
}

pub fn task_prompt(prompts: &PromptSet, task: &AnswerConstructionTask, hints: Option<&str>) -> String {
    prompts.render(
        "conjecture_task",
        &[
            ("informal", &task.informal_statement),
            ("formal", task.formal_statement.trim_end()),
            ("hints", hints.unwrap_or("")),
            ("answer_name", &task.answer_name),
        ],
    )
}

/// Up to `conjecturing_attempt` propose-check rounds. Exhausting the budget
/// is not an error: the output simply carries no candidate.
pub fn conjecture(
    task: &AnswerConstructionTask,
    enumeration: Option<&EnumerationOutput>,
    backend: &dyn ChatBackend,
    lean: &dyn LeanVerifier,
    prompts: &PromptSet,
    config: &ConjectureConfig,
) -> Result<ConjectureOutput, StageError<ConjectureOutput>> {
    let system = prompts.render(
        "conjecture_system",
        &[("answer_name", &task.answer_name), ("answer_type", &task.answer_type)],
    );
    let hints = hints_block(prompts, enumeration);
    let mut out = ConjectureOutput {
        candidate: None,
        rounds_used: 0,
        hints_used: hints.is_some(),
        rounds: Vec::new(),
        transcript: Transcript::new(system),
    };
    out.transcript
        .messages
        .push(ChatMessage::user(task_prompt(prompts, task, hints.as_deref())));
    let timeout = Duration::from_secs_f64(config.compile_timeout_s);

    for round in 1..=config.conjecturing_attempt {
        let request = ChatRequest::new(out.transcript.request_messages(), config.model.clone());
        let reply = match backend.complete(&request) {
            Ok(r) => r,
            Err(e) => {
                out.transcript.finish(FinishReason::Error);
                return Err(StageError::new(e, out));
            }
        };
        out.rounds_used = round;
        let expression = extract_expression(&reply, &task.answer_name);
        out.transcript.messages.push(reply);

        let (result, feedback) = match &expression {
            None => (
                RoundResult::NoExpression,
                "No expression was found. Put the expression in a ```lean fenced block.".to_string(),
            ),
            Some(expr) => {
                let verdict = triviality_check(task, expr, config.echo_threshold);
                if !verdict.legal {
                    (
                        RoundResult::Illegal {
                            reason: verdict.reason,
                            echo_overlap: verdict.echo_overlap,
                        },
                        illegal_feedback(verdict.reason),
                    )
                } else {
                    let source = match render_answer_check(task, expr) {
                        Ok(s) => s,
                        Err(e) => {
                            out.transcript.finish(FinishReason::Error);
                            return Err(StageError::new(e, out));
                        }
                    };
                    let compiled = match lean.check(&source, timeout) {
                        Ok(v) => v,
                        Err(e) => {
                            out.transcript.finish(FinishReason::Error);
                            return Err(StageError::new(e, out));
                        }
                    };
                    if compiled.success {
                        let provenance = Provenance {
                            stage: "conjecture".into(),
                            model_id: config.model.model_id.clone(),
                            attempt: round as u32,
                        };
                        let mut cand =
                            CandidateAnswer::new(expr.clone(), provenance).expect("legal expressions are non-empty");
                        cand.compiled = Compiled::Yes;
                        out.rounds.push(ConjectureRound {
                            round,
                            expression,
                            result: RoundResult::Accepted,
                        });
                        out.candidate = Some(cand);
                        out.transcript.finish(FinishReason::Natural);
                        return Ok(out);
                    }
                    let text = format!(
                        "It does not compile as the body of `{}`:\n{}",
                        task.answer_name,
                        render_diagnostics(&compiled.diagnostics)
                    );
                    (
                        RoundResult::CompileError {
                            diagnostics: compiled.diagnostics,
                        },
                        text,
                    )
                }
            }
        };
        out.rounds.push(ConjectureRound {
            round,
            expression: expression.clone(),
            result,
        });
        if round < config.conjecturing_attempt {
            let retry = prompts.render(
                "conjecture_retry",
                &[("expression", expression.as_deref().unwrap_or("")), ("feedback", &feedback)],
            );
            out.transcript.messages.push(ChatMessage::user(retry));
        }
    }
    out.transcript.finish(FinishReason::ToolBudget);
    Ok(out)
}

fn illegal_feedback(reason: TrivialityReason) -> String {
    match reason {
        TrivialityReason::EchoesPredicate => {
            "It restates the problem's condition instead of giving the answer explicitly.".into()
        }
        TrivialityReason::ContainsSorry => "It contains `sorry`.".into(),
        TrivialityReason::ContainsChoice => "It uses a choice operator instead of an explicit value.".into(),
        TrivialityReason::ReferencesHypotheses => "It refers to the theorem's hypotheses.".into(),
        TrivialityReason::Ok => String::new(),
    }
}
