//! Per-task outcome rows and the aggregate table derived from them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{accuracy, percent, union_accuracy, Method, MethodResult, SolvedKind};
use crate::prove::{ProofMethod, ProofOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalence {
    Equivalent,
    NotEquivalent,
    /// No candidate, or no ground truth to compare against.
    Unchecked,
}

/// Human review labels for formalizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewLabel {
    Correct,
    MinorError,
    MajorError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofSummary {
    pub success: bool,
    pub method: Option<ProofMethod>,
    pub samples_tried: usize,
    pub winning_sample_index: Option<usize>,
    pub k: usize,
}

impl ProofSummary {
    pub fn of(outcome: &ProofOutcome, k: usize) -> Self {
        Self {
            success: outcome.success,
            method: outcome.method,
            samples_tried: outcome.samples_tried,
            winning_sample_index: outcome.winning_sample_index,
            k,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub enumerate_s: Option<f64>,
    pub conjecture_s: Option<f64>,
    pub prove_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task_id: String,
    pub method: Method,
    pub candidate: Option<String>,
    pub candidate_digest: Option<String>,
    pub equivalence: Equivalence,
    pub proof: Option<ProofSummary>,
    pub stage_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<ReviewLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl ReportRow {
    pub fn solved_construction(&self) -> bool {
        self.equivalence == Equivalence::Equivalent
    }

    /// The same run's candidate must be both correct and proven.
    pub fn solved_end_to_end(&self) -> bool {
        self.solved_construction() && self.proof.as_ref().is_some_and(|p| p.success)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub attempted: usize,
    pub solved_construction: usize,
    pub solved_end_to_end: usize,
    pub construction_accuracy: f64,
    pub end_to_end_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub methods: Vec<MethodAggregate>,
    /// Present when both methods have rows.
    pub union_construction: Option<f64>,
    pub union_end_to_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub benchmark: String,
    pub total: usize,
    pub rows: Vec<ReportRow>,
    pub aggregates: Aggregates,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed report: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("stored aggregates differ from recomputation over rows")]
    AggregateMismatch,
    #[error("duplicate row for task {task_id} under {method:?}")]
    DuplicateRow { task_id: String, method: Method },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "markdown" | "md" => Some(Self::Markdown),
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

/// Collect the rows of one method into solved sets.
pub fn method_result(rows: &[ReportRow], method: Method) -> MethodResult {
    let mut r = MethodResult::new(method);
    for row in rows.iter().filter(|row| row.method == method) {
        r.attempted.insert(row.task_id.clone());
        if row.solved_construction() {
            r.solved_construction.insert(row.task_id.clone());
        }
        if row.solved_end_to_end() {
            r.solved_end_to_end.insert(row.task_id.clone());
        }
    }
    r
}

pub fn compute_aggregates(rows: &[ReportRow], total: usize) -> Aggregates {
    let present: BTreeSet<Method> = rows.iter().map(|r| r.method).collect();
    let results: Vec<MethodResult> = present.iter().map(|&m| method_result(rows, m)).collect();
    let methods = results
        .iter()
        .map(|r| MethodAggregate {
            method: r.method,
            attempted: r.attempted.len(),
            solved_construction: r.solved_construction.len(),
            solved_end_to_end: r.solved_end_to_end.len(),
            construction_accuracy: accuracy(r, SolvedKind::Construction, total),
            end_to_end_accuracy: accuracy(r, SolvedKind::EndToEnd, total),
        })
        .collect();
    let (union_construction, union_end_to_end) = match results.as_slice() {
        [a, b] => (
            Some(union_accuracy(a, b, SolvedKind::Construction, total)),
            Some(union_accuracy(a, b, SolvedKind::EndToEnd, total)),
        ),
        _ => (None, None),
    };
    Aggregates {
        methods,
        union_construction,
        union_end_to_end,
    }
}

impl RunReport {
    /// Rows are sorted by (task id, method) so output does not depend on
    /// completion order.
    pub fn new(run_id: impl Into<String>, benchmark: impl Into<String>, total: usize, mut rows: Vec<ReportRow>) -> Result<Self, ReportError> {
        rows.sort_by(|a, b| (&a.task_id, a.method).cmp(&(&b.task_id, b.method)));
        if let Some(w) = rows.windows(2).find(|w| w[0].task_id == w[1].task_id && w[0].method == w[1].method) {
            return Err(ReportError::DuplicateRow {
                task_id: w[0].task_id.clone(),
                method: w[0].method,
            });
        }
        let aggregates = compute_aggregates(&rows, total);
        Ok(Self {
            run_id: run_id.into(),
            benchmark: benchmark.into(),
            total,
            rows,
            aggregates,
        })
    }

    /// Combine reports over the same benchmark, e.g. a CoT run and an ECP run.
    pub fn merge(run_id: impl Into<String>, reports: &[RunReport]) -> Result<Self, ReportError> {
        let benchmark = reports.first().map(|r| r.benchmark.clone()).unwrap_or_default();
        let total = reports.iter().map(|r| r.total).max().unwrap_or(0);
        let rows = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
        Self::new(run_id, benchmark, total, rows)
    }

    pub fn verify(&self) -> Result<(), ReportError> {
        if compute_aggregates(&self.rows, self.total) != self.aggregates {
            return Err(ReportError::AggregateMismatch);
        }
        Ok(())
    }

    pub fn result(&self, method: Method) -> MethodResult {
        method_result(&self.rows, method)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let report: Self = serde_json::from_str(text)?;
        report.verify()?;
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn emit(&self, format: ReportFormat) -> Result<String, ReportError> {
        match format {
            ReportFormat::Json => Ok(self.to_json()),
            ReportFormat::Markdown => Ok(self.to_markdown()),
            ReportFormat::Csv => self.to_csv(),
        }
    }

    fn aggregate(&self, method: Method) -> Option<&MethodAggregate> {
        self.aggregates.methods.iter().find(|m| m.method == method)
    }

    /// Summary table with "CoT / ECP" and "Union" columns, then one line per
    /// task.
    pub fn to_markdown(&self) -> String {
        let cell = |m: Method, f: fn(&MethodAggregate) -> f64| {
            self.aggregate(m).map(|a| percent(f(a))).unwrap_or_else(|| "-".into())
        };
        let union = |u: Option<f64>| u.map(percent).unwrap_or_else(|| "-".into());
        let mut s = format!("# Run {}\n\nBenchmark: {} ({} tasks)\n\n", self.run_id, self.benchmark, self.total);
        s.push_str("| Metric | CoT / ECP | Union |\n|---|---|---|\n");
        s.push_str(&format!(
            "| Answer construction | {} / {} | {} |\n",
            cell(Method::Cot, |a| a.construction_accuracy),
            cell(Method::Ecp, |a| a.construction_accuracy),
            union(self.aggregates.union_construction)
        ));
        s.push_str(&format!(
            "| End-to-end | {} / {} | {} |\n\n",
            cell(Method::Cot, |a| a.end_to_end_accuracy),
            cell(Method::Ecp, |a| a.end_to_end_accuracy),
            union(self.aggregates.union_end_to_end)
        ));
        s.push_str("| Task | Method | Candidate | Equivalence | Proof | Error |\n|---|---|---|---|---|---|\n");
        for r in &self.rows {
            s.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                r.task_id,
                r.method.label(),
                r.candidate.as_deref().map(|c| format!("`{}`", c.replace('|', "\\|"))).unwrap_or_else(|| "-".into()),
                equivalence_label(r.equivalence),
                proof_label(r.proof.as_ref()),
                r.stage_error.as_deref().map(|e| e.replace('|', "\\|").replace('\n', " ")).unwrap_or_default()
            ));
        }
        s
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "task_id",
            "method",
            "candidate",
            "candidate_digest",
            "equivalence",
            "proved",
            "samples_tried",
            "stage_error",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.task_id.as_str(),
                r.method.label(),
                r.candidate.as_deref().unwrap_or(""),
                r.candidate_digest.as_deref().unwrap_or(""),
                equivalence_label(r.equivalence),
                if r.solved_end_to_end() { "yes" } else { "no" },
                &r.proof.as_ref().map(|p| p.samples_tried.to_string()).unwrap_or_default(),
                r.stage_error.as_deref().unwrap_or(""),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn equivalence_label(e: Equivalence) -> &'static str {
    match e {
        Equivalence::Equivalent => "equivalent",
        Equivalence::NotEquivalent => "not equivalent",
        Equivalence::Unchecked => "unchecked",
    }
}

fn proof_label(p: Option<&ProofSummary>) -> String {
    match p {
        None => "-".into(),
        Some(p) if p.success => match p.method {
            Some(ProofMethod::Cascade) => "cascade".into(),
            _ => format!("sample {}/{}", p.winning_sample_index.map_or(0, |i| i + 1), p.k),
        },
        Some(p) => format!("failed ({} samples)", p.samples_tried),
    }
}
