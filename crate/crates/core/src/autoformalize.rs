//! Autoformalization: draft a formal statement, compile it, feed back
//! diagnostics with knowledge-base suggestions, and accept once it compiles
//! and a judge model approves. Several models may be tried; the first
//! acceptance in configuration order wins.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::digest::sha256_hex;
use crate::kb::{render_suggestions, suggest, Embedder, KbIndex};
use crate::lean::source::find_placeholder;
use crate::lean::{render_diagnostics, LeanVerdict, LeanVerifier};
use crate::llm::{last_fenced_block, BackendConfig, ChatBackend, ChatMessage, ChatRequest, LlmError};
use crate::par;
use crate::problem::{split_ground_truth, AnswerConstructionTask, DatasetRecord, ProblemMetadata};
use crate::prompts::PromptSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoformalizeConfig {
    /// Iteration budget per model.
    #[serde(rename = "T")]
    pub t: usize,
    pub models: Vec<BackendConfig>,
    pub judge: BackendConfig,
    pub few_shot: usize,
    pub compile_timeout_s: f64,
    pub suggestions_per_list: usize,
    /// Run all models concurrently instead of stopping at the first acceptance.
    pub parallel_models: bool,
}

impl Default for AutoformalizeConfig {
    fn default() -> Self {
        Self {
            t: 5,
            models: vec![BackendConfig::default()],
            judge: BackendConfig::default(),
            few_shot: 3,
            compile_timeout_s: 60.0,
            suggestions_per_list: 5,
            parallel_models: false,
        }
    }
}

/// An informal problem awaiting formalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformalProblem {
    pub id: String,
    pub informal: String,
    #[serde(default)]
    pub solution: Option<String>,
    #[serde(default, skip_serializing)]
    pub metadata: Option<Value>,
}

impl InformalProblem {
    fn problem_metadata(&self) -> ProblemMetadata {
        let get = |k: &str| {
            self.metadata
                .as_ref()
                .and_then(|m| m.get(k))
                .and_then(Value::as_str)
                .unwrap_or("")
                .to_string()
        };
        ProblemMetadata {
            source: get("source"),
            domain_tag: get("domain"),
            difficulty: get("difficulty"),
            created_after: chrono::NaiveDate::parse_from_str(&get("created_after"), "%Y-%m-%d").ok(),
            answer_type_tag: get("answer_type_tag"),
            shape_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub approve: bool,
    pub feedback: String,
}

pub const UNPARSEABLE_JUDGE: &str = "unparseable judge reply";

/// The last JSON object in `text` that has a boolean `approve` field.
pub fn parse_judge_reply(text: &str) -> JudgeVerdict {
    let starts: Vec<usize> = text.match_indices('{').map(|(i, _)| i).collect();
    for &start in starts.iter().rev() {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        let Some(Ok(Value::Object(obj))) = stream.next() else { continue };
        let Some(approve) = obj.get("approve").and_then(Value::as_bool) else { continue };
        let mut feedback = obj.get("feedback").and_then(Value::as_str).unwrap_or("").trim().to_string();
        if !approve && feedback.is_empty() {
            feedback = "rejected without feedback".into();
        }
        return JudgeVerdict { approve, feedback };
    }
    JudgeVerdict {
        approve: false,
        feedback: UNPARSEABLE_JUDGE.into(),
    }
}

pub fn judge(
    informal: &str,
    formal: &str,
    backend: &dyn ChatBackend,
    prompts: &PromptSet,
    config: &BackendConfig,
) -> Result<JudgeVerdict, LlmError> {
    let request = ChatRequest::new(
        vec![
            ChatMessage::system(prompts.get("judge_system")),
            ChatMessage::user(prompts.render("judge_task", &[("informal", informal), ("formal", formal.trim_end())])),
        ],
        config.clone(),
    );
    Ok(parse_judge_reply(&backend.complete(&request)?.content))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub draft_digest: Option<String>,
    pub compile: Option<LeanVerdict>,
    pub judge: Option<JudgeVerdict>,
    /// Why the draft was not compiled (no Lean block, malformed shape).
    pub rejected_before_compile: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTrace {
    pub model_id: String,
    pub iterations: Vec<IterationTrace>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accepted {
    pub record: DatasetRecord,
    pub model_id: String,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormalizationResult {
    pub id: String,
    pub accepted: Option<Accepted>,
    pub trace: Vec<ModelTrace>,
}

impl FormalizationResult {
    /// Whether any draft compiled (the middle stage of the funnel).
    pub fn compiled_any(&self) -> bool {
        self.trace
            .iter()
            .flat_map(|m| &m.iterations)
            .any(|it| it.compile.as_ref().is_some_and(|c| c.success))
    }
}

/// Input/compiled/accepted counts over a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub input: usize,
    pub compiled: usize,
    pub accepted: usize,
}

impl Funnel {
    pub fn of(results: &[FormalizationResult]) -> Self {
        Self {
            input: results.len(),
            compiled: results.iter().filter(|r| r.compiled_any()).count(),
            accepted: results.iter().filter(|r| r.accepted.is_some()).count(),
        }
    }
}

/// Optional retrieval context for unknown-identifier errors.
pub struct Retrieval<'a> {
    pub index: &'a KbIndex,
    pub embedder: &'a dyn Embedder,
}

fn build_task(problem: &InformalProblem, draft: &str) -> Result<DatasetRecord, String> {
    let answer_name = format!("{}_answer", problem.id);
    let span = find_placeholder(draft, &answer_name).map_err(|e| e.to_string())?;
    let answer_type = draft[span.ty.clone()].trim().to_string();
    let (formal, body) = split_ground_truth(draft, &answer_name).map_err(|e| e.to_string())?;
    let truth = (body.trim() != "sorry").then(|| body.trim().to_string());
    let task = AnswerConstructionTask::new(
        problem.id.clone(),
        problem.informal.clone(),
        formal,
        answer_name,
        answer_type,
        truth,
        problem.problem_metadata(),
    )
    .map_err(|e| e.to_string())?;
    Ok(DatasetRecord {
        task,
        informal_solution: problem.solution.clone(),
        extra: Default::default(),
        extra_metadata: Default::default(),
    })
}

fn task_prompt(problem: &InformalProblem, prompts: &PromptSet, few_shot: usize) -> String {
    let mut examples = String::new();
    for shot in prompts.few_shot(few_shot) {
        examples.push_str("Example.\n");
        examples.push_str(shot.trim_end());
        examples.push_str("\n\n");
    }
    let solution = problem
        .solution
        .as_deref()
        .map(|s| format!("\nReference solution:\n{s}\n"))
        .unwrap_or_default();
    prompts.render(
        "autoformalize_task",
        &[
            ("examples", &examples),
            ("id", &problem.id),
            ("informal", &problem.informal),
            ("solution", &solution),
        ],
    )
}

#[allow(clippy::too_many_arguments)]
fn run_model(
    problem: &InformalProblem,
    model: &BackendConfig,
    backend: &dyn ChatBackend,
    lean: &dyn LeanVerifier,
    retrieval: Option<&Retrieval<'_>>,
    prompts: &PromptSet,
    config: &AutoformalizeConfig,
) -> (ModelTrace, Option<Accepted>) {
    let mut trace = ModelTrace {
        model_id: model.model_id.clone(),
        iterations: Vec::new(),
        error: None,
    };
    let mut messages = vec![
        ChatMessage::system(prompts.get("autoformalize_system")),
        ChatMessage::user(task_prompt(problem, prompts, config.few_shot)),
    ];
    let timeout = Duration::from_secs_f64(config.compile_timeout_s);
    for iteration in 1..=config.t {
        let reply = match backend.complete(&ChatRequest::new(messages.clone(), model.clone())) {
            Ok(r) => r,
            Err(e) => {
                trace.error = Some(e.to_string());
                return (trace, None);
            }
        };
        let draft = last_fenced_block(&reply.content, Some(&["lean", "lean4"])).map(|b| b.body);
        messages.push(reply);
        let mut it = IterationTrace {
            iteration,
            draft_digest: draft.as_deref().map(sha256_hex),
            compile: None,
            judge: None,
            rejected_before_compile: None,
        };
        let feedback = match draft.as_deref().ok_or("No Lean code block was found.".to_string()).and_then(|d| {
            build_task(problem, d).map(|r| (d, r))
        }) {
            Err(why) => {
                it.rejected_before_compile = Some(why.clone());
                why
            }
            Ok((draft, record)) => {
                let verdict = match lean.check(draft, timeout) {
                    Ok(v) => v,
                    Err(e) => {
                        trace.iterations.push(it);
                        trace.error = Some(e.to_string());
                        return (trace, None);
                    }
                };
                it.compile = Some(verdict.clone());
                if !verdict.success {
                    let mut text = format!("The Lean compiler reported:\n{}\n", render_diagnostics(&verdict.diagnostics));
                    if let Some(r) = retrieval {
                        match suggest(r.index, r.embedder, &verdict.diagnostics, config.suggestions_per_list) {
                            Ok(s) if !s.is_empty() => {
                                text.push('\n');
                                text.push_str(&render_suggestions(&s));
                            }
                            Ok(_) => {}
                            Err(e) => log::warn!("retrieval failed: {e}"),
                        }
                    }
                    text
                } else {
                    match judge(&problem.informal, draft, backend, prompts, &config.judge) {
                        Err(e) => {
                            trace.iterations.push(it);
                            trace.error = Some(e.to_string());
                            return (trace, None);
                        }
                        Ok(j) if j.approve => {
                            it.judge = Some(j);
                            trace.iterations.push(it);
                            let accepted = Accepted {
                                record,
                                model_id: model.model_id.clone(),
                                iteration,
                            };
                            return (trace, Some(accepted));
                        }
                        Ok(j) => {
                            let text = format!("A reviewer rejected the formalization:\n{}\n", j.feedback);
                            it.judge = Some(j);
                            text
                        }
                    }
                }
            }
        };
        trace.iterations.push(it);
        if iteration < config.t {
            messages.push(ChatMessage::user(
                prompts.render("autoformalize_retry", &[("feedback", &feedback)]),
            ));
        }
    }
    (trace, None)
}

pub fn autoformalize(
    problem: &InformalProblem,
    backend: &dyn ChatBackend,
    lean: &dyn LeanVerifier,
    retrieval: Option<&Retrieval<'_>>,
    prompts: &PromptSet,
    config: &AutoformalizeConfig,
) -> FormalizationResult {
    let mut result = FormalizationResult {
        id: problem.id.clone(),
        accepted: None,
        trace: Vec::new(),
    };
    if config.parallel_models {
        let runs = par::map(&config.models, |m| {
            run_model(problem, m, backend, lean, retrieval, prompts, config)
        });
        for (trace, accepted) in runs {
            result.trace.push(trace);
            if result.accepted.is_none() {
                result.accepted = accepted;
            }
        }
    } else {
        for m in &config.models {
            let (trace, accepted) = run_model(problem, m, backend, lean, retrieval, prompts, config);
            result.trace.push(trace);
            if accepted.is_some() {
                result.accepted = accepted;
                break;
            }
        }
    }
    result
}
