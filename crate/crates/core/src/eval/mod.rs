//! Dataset tooling, metrics and reports.

pub mod dedup;
pub mod metrics;
pub mod references;
pub mod report;

use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::lean::{cascade_prove, CascadeMode, LeanError, LeanVerifier, TacticCascade};
use crate::problem::{render_equivalence_goal, AnswerConstructionTask, DatasetRecord, TaskError};

pub use dedup::{dedup, dedup_texts, normalize_text, DedupConfig, DedupError, DedupOutcome, DedupPass, RemovedGroup};
pub use metrics::{construction_accuracy, end_to_end_accuracy, percent, union_accuracy, Method, MethodResult, SolvedKind};
pub use report::{Equivalence, ProofSummary, ReportError, ReportFormat, ReportRow, ReviewLabel, RunReport, Timings};

/// Records created strictly after `cutoff`; undated records are excluded.
pub fn split_after_cutoff(records: &[DatasetRecord], cutoff: NaiveDate) -> Vec<DatasetRecord> {
    records
        .iter()
        .filter(|r| r.task.metadata.created_after.is_some_and(|d| d > cutoff))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    pub equivalent: bool,
    pub winning_tactic: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum EquivalenceError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Lean(#[from] LeanError),
}

/// Whether the tactic cascade proves `candidate` equal to the ground truth.
pub fn evaluate_equivalence(
    task: &AnswerConstructionTask,
    candidate: &str,
    lean: &dyn LeanVerifier,
    mode: CascadeMode,
    timeout: Duration,
) -> Result<EquivalenceCheck, EquivalenceError> {
    let goal = render_equivalence_goal(task, candidate, None)?;
    let outcome = cascade_prove(lean, &goal, &TacticCascade::default(), mode, timeout)?;
    Ok(EquivalenceCheck {
        equivalent: outcome.success(),
        winning_tactic: outcome.winning_tactic,
    })
}
