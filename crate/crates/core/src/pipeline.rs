//! Per-task orchestration of the stages, for ECP and the CoT baseline.
//!
//! ECP runs enumerate → conjecture → equivalence → prove. CoT skips
//! enumeration and conjectures without hints. A candidate is proved only
//! once the cascade shows it equal to the ground truth (or when the task has
//! no ground truth to check against), so end-to-end success always refers
//! to the same run's candidate.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::config::EcpConfig;
use crate::conjecture::{conjecture, ConjectureOutput};
use crate::digest::sha256_hex;
use crate::enumerate::{enumerate, EnumerationOutput};
use crate::eval::{evaluate_equivalence, Equivalence, EquivalenceCheck, Method, ProofSummary, ReportError, ReportRow, RunReport, Timings};
use crate::lean::LeanVerifier;
use crate::llm::ChatBackend;
use crate::par;
use crate::problem::{substitute_answer, AnswerConstructionTask};
use crate::prompts::PromptSet;
use crate::prove::{prove, ProofOutcome};
use crate::runlog::RunLog;
use crate::sandbox::SandboxClient;

/// The external services a run talks to.
#[derive(Clone)]
pub struct Services {
    pub llm: Arc<dyn ChatBackend>,
    pub sandbox: Arc<dyn SandboxClient>,
    pub lean: Arc<dyn LeanVerifier>,
    pub prompts: PromptSet,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskRun {
    pub task_id: String,
    pub method: Method,
    pub enumeration: Option<EnumerationOutput>,
    pub conjecture: Option<ConjectureOutput>,
    pub candidate: Option<String>,
    pub equivalence: Equivalence,
    pub equivalence_tactic: Option<String>,
    pub proof: Option<ProofOutcome>,
    pub stage_error: Option<String>,
    pub timings: Timings,
}

impl TaskRun {
    fn new(task: &AnswerConstructionTask, method: Method) -> Self {
        Self {
            task_id: task.id.clone(),
            method,
            enumeration: None,
            conjecture: None,
            candidate: None,
            equivalence: Equivalence::Unchecked,
            equivalence_tactic: None,
            proof: None,
            stage_error: None,
            timings: Timings::default(),
        }
    }

    pub fn row(&self, k: usize, with_timings: bool) -> ReportRow {
        ReportRow {
            task_id: self.task_id.clone(),
            method: self.method,
            candidate: self.candidate.clone(),
            candidate_digest: self.candidate.as_deref().map(sha256_hex),
            equivalence: self.equivalence,
            proof: self.proof.as_ref().map(|p| ProofSummary::of(p, k)),
            stage_error: self.stage_error.clone(),
            review: None,
            timings: with_timings.then(|| self.timings.clone()),
        }
    }
}

#[derive(Serialize)]
struct StageLog<'a, T> {
    output: &'a T,
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    equivalence: Option<&'a EquivalenceCheck>,
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

fn secs(start: Instant) -> Option<f64> {
    Some(start.elapsed().as_secs_f64())
}

/// Run one task end to end. Stage failures are recorded on the returned
/// value rather than propagated.
pub fn solve_task(
    task: &AnswerConstructionTask,
    method: Method,
    services: &Services,
    config: &EcpConfig,
    runlog: Option<&RunLog>,
) -> TaskRun {
    let mut run = TaskRun::new(task, method);
    let write = |stage: &str, value: serde_json::Value| {
        if let Some(log) = runlog {
            log.write_stage(&task.id, stage, &value);
        }
    };

    if method == Method::Ecp {
        let start = Instant::now();
        let result = enumerate(task, &*services.llm, &*services.sandbox, &services.prompts, &config.enumerate);
        run.timings.enumerate_s = secs(start);
        match result {
            Ok(out) => {
                write("enumerate", json(&StageLog { output: &out, error: None, equivalence: None }));
                run.enumeration = Some(out);
            }
            Err(e) => {
                let msg = format!("enumerate: {}", e.cause);
                write("enumerate", json(&StageLog { output: &e.partial, error: Some(&msg), equivalence: None }));
                run.enumeration = Some(e.partial);
                run.stage_error = Some(msg);
                return run;
            }
        }
    }

    let start = Instant::now();
    let result = conjecture(
        task,
        run.enumeration.as_ref(),
        &*services.llm,
        &*services.lean,
        &services.prompts,
        &config.conjecture,
    );
    run.timings.conjecture_s = secs(start);
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            let msg = format!("conjecture: {}", e.cause);
            write("conjecture", json(&StageLog { output: &e.partial, error: Some(&msg), equivalence: None }));
            run.conjecture = Some(e.partial);
            run.stage_error = Some(msg);
            return run;
        }
    };
    run.candidate = out.candidate.as_ref().map(|c| c.expression.clone());

    let mut check = None;
    if let (Some(expr), Some(_)) = (&run.candidate, &task.ground_truth) {
        let timeout = Duration::from_secs_f64(config.prove.verify_timeout_s);
        match evaluate_equivalence(task, expr, &*services.lean, config.prove.cascade_mode, timeout) {
            Ok(c) => {
                run.equivalence = if c.equivalent { Equivalence::Equivalent } else { Equivalence::NotEquivalent };
                run.equivalence_tactic = c.winning_tactic.clone();
                check = Some(c);
            }
            Err(e) => run.stage_error = Some(format!("equivalence: {e}")),
        }
    }
    write(
        "conjecture",
        json(&StageLog {
            output: &out,
            error: run.stage_error.as_deref(),
            equivalence: check.as_ref(),
        }),
    );
    run.conjecture = Some(out);
    if run.stage_error.is_some() {
        return run;
    }

    let provable = match run.equivalence {
        Equivalence::Equivalent => true,
        Equivalence::Unchecked => task.ground_truth.is_none(),
        Equivalence::NotEquivalent => false,
    };
    let Some(expr) = run.candidate.clone().filter(|_| provable) else {
        return run;
    };
    let theorem = match substitute_answer(task, &expr) {
        Ok(t) => t,
        Err(e) => {
            run.stage_error = Some(format!("prove: {e}"));
            return run;
        }
    };
    let start = Instant::now();
    let outcome = prove(&theorem, &*services.llm, &*services.lean, &services.prompts, &config.prove);
    run.timings.prove_s = secs(start);
    write("prove", json(&outcome));
    if let Some(e) = &outcome.error {
        run.stage_error = Some(format!("prove: {e}"));
    }
    run.proof = Some(outcome);
    run
}

/// Solve every task on a pool of `jobs` workers. Results are in task order.
pub fn solve_all(
    tasks: &[AnswerConstructionTask],
    method: Method,
    services: &Services,
    config: &EcpConfig,
    runlog: Option<&RunLog>,
    jobs: usize,
) -> Vec<TaskRun> {
    par::with_pool(jobs, || par::map(tasks, |t| solve_task(t, method, services, config, runlog)))
}

pub fn build_report(
    run_id: &str,
    config: &EcpConfig,
    total: usize,
    runs: &[TaskRun],
) -> Result<RunReport, ReportError> {
    let rows = runs.iter().map(|r| r.row(config.prove.k, config.eval.timings)).collect();
    RunReport::new(run_id, config.eval.benchmark.clone(), total, rows)
}
