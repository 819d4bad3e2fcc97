//! Answer-construction tasks and the text transformations every stage uses.
//!
//! A task's formal statement declares the answer as
//! `abbrev <id>_answer : T := sorry` followed by a theorem mentioning that
//! name. Everything here is pure and operates on source text.

mod record;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lean::source::{self, SourceError};
use crate::lean::tokens::sorry_spans;

pub use record::{load_corpus, parse_record, save_corpus, serialize_record, CorpusError, SchemaError};

/// Coarse form of the object a task asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnswerShape {
    /// A single value of type β.
    SingleValue,
    /// A function α → β (one answer per context instance).
    SingleFunction,
    /// A set of answers, `Set β`.
    SetValued,
    /// α → Set β.
    SetFunction,
    /// The least element of a set, stated with `IsLeast`.
    LeastOf,
    /// The greatest element of a set, stated with `IsGreatest`.
    GreatestOf,
}

impl AnswerShape {
    pub const ALL: [AnswerShape; 6] = [
        AnswerShape::SingleValue,
        AnswerShape::SingleFunction,
        AnswerShape::SetValued,
        AnswerShape::SetFunction,
        AnswerShape::LeastOf,
        AnswerShape::GreatestOf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnswerShape::SingleValue => "SingleValue",
            AnswerShape::SingleFunction => "SingleFunction",
            AnswerShape::SetValued => "SetValued",
            AnswerShape::SetFunction => "SetFunction",
            AnswerShape::LeastOf => "LeastOf",
            AnswerShape::GreatestOf => "GreatestOf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Infer the shape from the answer type and the theorem goal.
    pub fn infer(answer_type: &str, goal: &str) -> Self {
        let goal_tokens = crate::lean::tokens::tokenize(goal);
        if goal_tokens.iter().any(|t| t.is("IsLeast")) {
            return AnswerShape::LeastOf;
        }
        if goal_tokens.iter().any(|t| t.is("IsGreatest")) {
            return AnswerShape::GreatestOf;
        }
        let parts = source::split_arrows(answer_type);
        let codomain = parts.last().map(String::as_str).unwrap_or("");
        let is_set = codomain.starts_with("Set ") || codomain.starts_with("Set(");
        match (parts.len() > 1, is_set) {
            (false, false) => AnswerShape::SingleValue,
            (false, true) => AnswerShape::SetValued,
            (true, false) => AnswerShape::SingleFunction,
            (true, true) => AnswerShape::SetFunction,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemMetadata {
    pub source: String,
    pub domain_tag: String,
    pub difficulty: String,
    pub created_after: Option<chrono::NaiveDate>,
    pub answer_type_tag: String,
    /// Explicit shape, overriding inference.
    pub shape_override: Option<AnswerShape>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerConstructionTask {
    pub id: String,
    pub informal_statement: String,
    pub formal_statement: String,
    pub answer_name: String,
    pub answer_type: String,
    /// Context variables a₁..a_k with their Lean types; empty for
    /// context-free tasks.
    pub context_signature: Vec<(String, String)>,
    pub answer_shape: AnswerShape,
    pub ground_truth: Option<String>,
    pub metadata: ProblemMetadata,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("answer name `{0}` does not occur in the theorem goal")]
    AnswerNotInGoal(String),
    #[error("candidate expression is empty")]
    EmptyCandidate,
    #[error("task has no ground truth")]
    MissingGroundTruth,
}

impl AnswerConstructionTask {
    /// Build a task from its stored fields, deriving the context signature
    /// and the shape, and checking the placeholder invariants.
    pub fn new(
        id: String,
        informal_statement: String,
        formal_statement: String,
        answer_name: String,
        answer_type: String,
        ground_truth: Option<String>,
        metadata: ProblemMetadata,
    ) -> Result<Self, TaskError> {
        let placeholder = source::find_placeholder(&formal_statement, &answer_name)?;
        let header = source::theorem_header(&formal_statement)?;
        let in_goal = crate::lean::tokens::tokenize(&header.goal)
            .iter()
            .any(|t| t.text == answer_name);
        if !in_goal || header.start < placeholder.decl.end {
            return Err(TaskError::AnswerNotInGoal(answer_name));
        }
        let answer_shape = metadata
            .shape_override
            .unwrap_or_else(|| AnswerShape::infer(&answer_type, &header.goal));
        let context_signature = context_signature(&answer_type, &header.binders);
        Ok(Self {
            id,
            informal_statement,
            formal_statement,
            answer_name,
            answer_type,
            context_signature,
            answer_shape,
            ground_truth,
            metadata,
        })
    }

    /// Main theorem header of the formal statement.
    pub fn theorem(&self) -> source::TheoremHeader {
        source::theorem_header(&self.formal_statement).expect("validated at construction")
    }

    /// Imports, opens and auxiliary definitions preceding the placeholder.
    pub fn preamble(&self) -> &str {
        let span = source::find_placeholder(&self.formal_statement, &self.answer_name).expect("validated at construction");
        &self.formal_statement[..span.decl.start]
    }
}

/// Context variables are the theorem binders whose types match the answer
/// function's domains, taken in order. Unmatched domains get synthetic names.
fn context_signature(answer_type: &str, binders: &[source::Binder]) -> Vec<(String, String)> {
    let parts = source::split_arrows(answer_type);
    let domains = &parts[..parts.len() - 1];
    let normalize = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut named = binders
        .iter()
        .filter(|b| b.explicit)
        .flat_map(|b| b.names.iter().map(move |n| (n.clone(), normalize(&b.ty))));
    domains
        .iter()
        .enumerate()
        .map(|(i, dom)| {
            let dom_n = normalize(dom.trim_start_matches('(').trim_end_matches(')'));
            match named.by_ref().find(|(_, ty)| *ty == dom_n) {
                Some((name, _)) => (name, dom.clone()),
                None => (format!("a{}", i + 1), dom.clone()),
            }
        })
        .collect()
}

/// Where a candidate came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: String,
    pub model_id: String,
    pub attempt: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compiled {
    #[default]
    Unknown,
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAnswer {
    pub expression: String,
    pub provenance: Provenance,
    pub compiled: Compiled,
}

impl CandidateAnswer {
    /// `None` if the expression is blank or mentions `sorry`.
    pub fn new(expression: impl Into<String>, provenance: Provenance) -> Option<Self> {
        let expression = expression.into().trim().to_string();
        if expression.is_empty() || !sorry_spans(&expression).is_empty() {
            return None;
        }
        Some(Self {
            expression,
            provenance,
            compiled: Compiled::Unknown,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub task: AnswerConstructionTask,
    pub informal_solution: Option<String>,
    /// Fields not understood by this version, kept for round-tripping.
    #[serde(skip)]
    pub extra: serde_json::Map<String, serde_json::Value>,
    #[serde(skip)]
    pub extra_metadata: serde_json::Map<String, serde_json::Value>,
}

/// The formal statement with the placeholder body replaced by `expression`.
pub fn substitute_answer(task: &AnswerConstructionTask, expression: &str) -> Result<String, TaskError> {
    if expression.trim().is_empty() {
        return Err(TaskError::EmptyCandidate);
    }
    let body = source::placeholder_body(&task.formal_statement, &task.answer_name)?;
    if body != "sorry" {
        return Err(SourceError::BodyNotSorry {
            name: task.answer_name.clone(),
            body: body.to_string(),
        }
        .into());
    }
    Ok(source::replace_body(&task.formal_statement, &task.answer_name, expression)?)
}

/// Preamble plus the placeholder declaration with `expression` as its body.
/// Compiling this checks that the candidate elaborates at the answer type.
pub fn render_answer_check(task: &AnswerConstructionTask, expression: &str) -> Result<String, TaskError> {
    let substituted = substitute_answer(task, expression)?;
    let span = source::find_placeholder(&substituted, &task.answer_name)?;
    Ok(format!("{}\n", &substituted[..span.decl.end]))
}

/// A standalone theorem `(candidate : T) = truth`, with a `sorry` hole for
/// the tactic cascade.
pub fn render_equivalence_goal(
    task: &AnswerConstructionTask,
    candidate: &str,
    ground_truth: Option<&str>,
) -> Result<String, TaskError> {
    let truth = ground_truth
        .or(task.ground_truth.as_deref())
        .ok_or(TaskError::MissingGroundTruth)?;
    if candidate.trim().is_empty() {
        return Err(TaskError::EmptyCandidate);
    }
    let span = source::find_placeholder(&task.formal_statement, &task.answer_name)?;
    let header_start = source::theorem_start(&task.formal_statement).unwrap_or(task.formal_statement.len());
    let mut out = String::new();
    out.push_str(&task.formal_statement[..span.decl.start]);
    // auxiliary definitions between the placeholder and the theorem
    if span.decl.end < header_start {
        let between = task.formal_statement[span.decl.end..header_start].trim();
        if !between.is_empty() {
            out.push_str(between);
            out.push_str("\n\n");
        }
    }
    out.push_str(&format!(
        "theorem {}_equiv : ({} : {}) = {} := by\n  sorry\n",
        task.answer_name,
        candidate.trim(),
        task.answer_type.trim(),
        truth.trim()
    ));
    Ok(out)
}

/// Split a drafted formalization whose placeholder has a concrete body into
/// the `sorry` form plus the body as ground truth.
pub fn split_ground_truth(formal: &str, answer_name: &str) -> Result<(String, String), SourceError> {
    let body = source::placeholder_body(formal, answer_name)?.to_string();
    let stripped = source::replace_body(formal, answer_name, "sorry")?;
    Ok((stripped, body))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn meta() -> ProblemMetadata {
        ProblemMetadata {
            source: "test".into(),
            domain_tag: "algebra".into(),
            difficulty: "1".into(),
            created_after: None,
            answer_type_tag: "natural number".into(),
            shape_override: None,
        }
    }

    const EQ_TASK: &str = "import Mathlib\n\nabbrev test_answer : Set (ℕ × ℕ) := sorry\n\ntheorem test (x y : ℕ) (hpos : 0 < x ∧ 0 < y) :\n    x ^ 3 + y ^ 3 = x ^ 2 + 42 * x * y + y ^ 2 ↔ (x, y) ∈ test_answer := by\n  sorry\n";

    fn eq_task() -> AnswerConstructionTask {
        AnswerConstructionTask::new(
            "test".into(),
            "Find all pairs".into(),
            EQ_TASK.into(),
            "test_answer".into(),
            "Set (ℕ × ℕ)".into(),
            Some("{(7, 1), (1, 7), (22, 22)}".into()),
            meta(),
        )
        .unwrap()
    }

    #[test]
    fn shapes() {
        assert_eq!(AnswerShape::infer("ℕ", "f = omni_answer"), AnswerShape::SingleValue);
        assert_eq!(AnswerShape::infer("ℕ → ℕ", "f = a"), AnswerShape::SingleFunction);
        assert_eq!(AnswerShape::infer("Set (ℕ × ℕ)", ""), AnswerShape::SetValued);
        assert_eq!(AnswerShape::infer("ℤ → Set ℤ", ""), AnswerShape::SetFunction);
        assert_eq!(AnswerShape::infer("ℕ", "IsLeast {k | 0 < k} a"), AnswerShape::LeastOf);
        assert_eq!(AnswerShape::infer("ℝ", "IsGreatest S a"), AnswerShape::GreatestOf);
        for s in AnswerShape::ALL {
            assert_eq!(AnswerShape::parse(s.name()), Some(s));
        }
    }

    #[test]
    fn context_free_task_has_empty_signature() {
        let t = eq_task();
        assert!(t.context_signature.is_empty());
        assert_eq!(t.answer_shape, AnswerShape::SetValued);
    }

    #[test]
    fn function_answer_picks_up_context_binders() {
        let formal = "abbrev p_answer : ℕ → ℕ := sorry\ntheorem p (n : ℕ) (hn : 0 < n) : (∑ i ∈ Finset.range (n + 1), i) = p_answer n := by sorry";
        let t = AnswerConstructionTask::new("p".into(), "".into(), formal.into(), "p_answer".into(), "ℕ → ℕ".into(), None, meta()).unwrap();
        assert_eq!(t.context_signature, vec![("n".to_string(), "ℕ".to_string())]);
        assert_eq!(t.answer_shape, AnswerShape::SingleFunction);
    }

    #[test]
    fn answer_must_appear_in_goal() {
        let formal = "abbrev q_answer : ℕ := sorry\ntheorem q : 1 = 1 := by sorry";
        let err = AnswerConstructionTask::new("q".into(), "".into(), formal.into(), "q_answer".into(), "ℕ".into(), None, meta());
        assert_eq!(err, Err(TaskError::AnswerNotInGoal("q_answer".into())));
    }

    #[test]
    fn substitution_is_local_and_invertible() {
        let t = eq_task();
        let out = substitute_answer(&t, "{(7, 1), (1, 7), (22, 22)}").unwrap();
        assert_eq!(out, EQ_TASK.replacen(":= sorry", ":= {(7, 1), (1, 7), (22, 22)}", 1));
        assert_eq!(source::placeholder_body(&out, "test_answer").unwrap(), "{(7, 1), (1, 7), (22, 22)}");
        let mut done = t.clone();
        done.formal_statement = out;
        assert!(matches!(
            substitute_answer(&done, "1"),
            Err(TaskError::Source(SourceError::BodyNotSorry { .. }))
        ));
        assert_eq!(substitute_answer(&t, "  "), Err(TaskError::EmptyCandidate));
    }

    #[test]
    fn equivalence_goal() {
        let t = eq_task();
        let g = render_equivalence_goal(&t, "{(1, 7), (7, 1), (22, 22)}", None).unwrap();
        assert!(g.starts_with("import Mathlib\n\n"));
        assert!(g.contains(
            "theorem test_answer_equiv : ({(1, 7), (7, 1), (22, 22)} : Set (ℕ × ℕ)) = {(7, 1), (1, 7), (22, 22)} := by\n  sorry\n"
        ));
        assert_eq!(sorry_spans(&g).len(), 1);
        let mut no_truth = t.clone();
        no_truth.ground_truth = None;
        assert_eq!(render_equivalence_goal(&no_truth, "1", None), Err(TaskError::MissingGroundTruth));
    }

    #[test]
    fn answer_check_source_omits_theorem() {
        let src = render_answer_check(&eq_task(), "{(7, 1)}").unwrap();
        assert_eq!(src, "import Mathlib\n\nabbrev test_answer : Set (ℕ × ℕ) := {(7, 1)}\n");
    }

    #[test]
    fn candidates_reject_sorry() {
        let p = Provenance { stage: "conjecture".into(), model_id: "m".into(), attempt: 1 };
        assert!(CandidateAnswer::new("sorry", p.clone()).is_none());
        assert!(CandidateAnswer::new(" ", p.clone()).is_none());
        assert_eq!(CandidateAnswer::new(" 69 ", p).unwrap().expression, "69");
    }

    #[test]
    fn ground_truth_split() {
        let (formal, truth) = split_ground_truth("abbrev o_answer : ℕ := 69\ntheorem o : o_answer = 69 := by sorry", "o_answer").unwrap();
        assert_eq!(truth, "69");
        assert_eq!(formal, "abbrev o_answer : ℕ := sorry\ntheorem o : o_answer = 69 := by sorry");
    }
}
