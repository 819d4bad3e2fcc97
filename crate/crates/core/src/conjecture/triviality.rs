//! Mechanical checks for answers that trivialize the problem.
//!
//! The echo check compares set-builder and lambda bodies of a candidate
//! against the goal's predicate after canonicalizing local names (each
//! distinct bound or theorem variable becomes `#k` by first occurrence), so
//! the verdict does not depend on spacing or on what the variables are called.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::lean::{tokenize, Token, TokenKind};
use crate::problem::AnswerConstructionTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrivialityReason {
    Ok,
    EchoesPredicate,
    ContainsSorry,
    ContainsChoice,
    ReferencesHypotheses,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrivialityVerdict {
    pub legal: bool,
    pub reason: TrivialityReason,
    /// Best token overlap of any candidate body with the goal predicate.
    pub echo_overlap: f64,
}

impl TrivialityVerdict {
    fn illegal(reason: TrivialityReason) -> Self {
        Self {
            legal: false,
            reason,
            echo_overlap: 0.0,
        }
    }
}

pub const DEFAULT_ECHO_THRESHOLD: f64 = 0.9;

/// Predicates shorter than this are too generic to call a match an echo.
const MIN_PREDICATE_TOKENS: usize = 4;

const CHOICE: &[&str] = &[
    "Classical.choose",
    "Classical.choice",
    "Classical.epsilon",
    "Classical.indefiniteDescription",
    "Exists.choose",
    "choose",
    "Classical.some",
];

const BINDER_KEYWORDS: &[&str] = &["∃", "∀", "∃!", "fun", "λ", "∑", "∏", "⋃", "⋂", "Π", "Σ"];

const RELATIONS: &[&str] = &["=", "≠", "<", ">", "≤", "≥", "<=", ">=", "∣", "∈", "∉", "∧", "∨", "¬", "↔", "⊆", "⊂"];

fn opens(t: &str) -> bool {
    matches!(t, "(" | "[" | "{" | "⦃" | "⟨")
}

fn closes(t: &str) -> bool {
    matches!(t, ")" | "]" | "}" | "⦄" | "⟩")
}

/// Index of the token closing the group opened at `open`, or `toks.len()`.
fn group_end(toks: &[Token], open: usize) -> usize {
    let mut depth = 0;
    for (i, t) in toks.iter().enumerate().skip(open) {
        if opens(&t.text) {
            depth += 1;
        } else if closes(&t.text) {
            depth -= 1;
            if depth == 0 {
                return i;
            }
        }
    }
    toks.len()
}

/// Identifiers in binder position within `toks[from..to]`: not inside a type
/// ascription.
fn binder_names(toks: &[Token], from: usize, to: usize) -> Vec<String> {
    let mut names = Vec::new();
    let mut depth = 0i32;
    let mut type_depth: Option<i32> = None;
    for t in &toks[from..to] {
        if opens(&t.text) {
            depth += 1;
        } else if closes(&t.text) {
            if type_depth == Some(depth) {
                type_depth = None;
            }
            depth -= 1;
        } else if t.is(":") && type_depth.is_none() {
            type_depth = Some(depth);
        } else if t.kind == TokenKind::Ident && type_depth.is_none() && t.text != "_" {
            names.push(t.text.clone());
        }
    }
    names
}

/// Where the binder list after a binder keyword at `kw` ends.
fn binder_stop(toks: &[Token], kw: usize) -> usize {
    let mut depth = 0;
    for (i, t) in toks.iter().enumerate().skip(kw + 1) {
        if opens(&t.text) {
            depth += 1;
        } else if closes(&t.text) {
            if depth == 0 {
                return i;
            }
            depth -= 1;
        } else if depth == 0 && matches!(t.text.as_str(), "," | "=>" | "↦" | "in" | "∈" | "|") {
            return i;
        }
    }
    toks.len()
}

/// A set-builder `{ binders | body }` starting at `open`: the binder range
/// and body range.
fn set_builder(toks: &[Token], open: usize) -> Option<(usize, usize, usize)> {
    let close = group_end(toks, open);
    let mut depth = 0;
    for i in open + 1..close {
        let t = &toks[i].text;
        if opens(t) {
            depth += 1;
        } else if closes(t) {
            depth -= 1;
        } else if depth == 0 && t == "|" {
            return Some((i, i + 1, close));
        }
    }
    None
}

/// All names bound anywhere in `toks`.
fn bound_names(toks: &[Token]) -> HashSet<String> {
    let mut out = HashSet::new();
    for (i, t) in toks.iter().enumerate() {
        if BINDER_KEYWORDS.contains(&t.text.as_str()) {
            out.extend(binder_names(toks, i + 1, binder_stop(toks, i)));
        } else if t.is("{") {
            if let Some((bar, _, _)) = set_builder(toks, i) {
                let stop = toks[i + 1..bar]
                    .iter()
                    .position(|t| t.is("∈"))
                    .map_or(bar, |p| i + 1 + p);
                out.extend(binder_names(toks, i + 1, stop));
            }
        }
    }
    out
}

/// Bodies worth comparing against the predicate: set-builder bodies and
/// lambda bodies.
fn candidate_bodies(toks: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if t.is("{") {
            if let Some((_, body_start, close)) = set_builder(toks, i) {
                out.push(&toks[body_start..close]);
            }
        } else if t.is("fun") || t.is("λ") {
            let arrow = binder_stop(toks, i);
            if arrow < toks.len() && matches!(toks[arrow].text.as_str(), "=>" | "↦") {
                // body runs to the end of the enclosing group
                let mut depth = 0;
                let mut end = toks.len();
                for (j, u) in toks.iter().enumerate().skip(arrow + 1) {
                    if opens(&u.text) {
                        depth += 1;
                    } else if closes(&u.text) {
                        if depth == 0 {
                            end = j;
                            break;
                        }
                        depth -= 1;
                    }
                }
                out.push(&toks[arrow + 1..end]);
            }
        }
    }
    out
}

fn canonicalize(toks: &[Token], locals: &HashSet<String>) -> Vec<String> {
    let mut order: Vec<&str> = Vec::new();
    toks.iter()
        .map(|t| {
            if t.kind == TokenKind::Ident && locals.contains(&t.text) {
                let k = order.iter().position(|n| *n == t.text).unwrap_or_else(|| {
                    order.push(&t.text);
                    order.len() - 1
                });
                format!("#{k}")
            } else {
                t.text.clone()
            }
        })
        .collect()
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// The goal's predicate: the side of a top-level `↔` or `=` not mentioning
/// the answer, the set body of an `IsLeast`/`IsGreatest` goal, or else the
/// goal tokens with the answer name removed.
fn goal_predicate(goal: &[Token], answer_name: &str) -> Vec<Token> {
    let mentions = |s: &[Token]| s.iter().any(|t| t.is(answer_name));
    for rel in ["↔", "="] {
        let mut depth = 0;
        for (i, t) in goal.iter().enumerate() {
            if opens(&t.text) {
                depth += 1;
            } else if closes(&t.text) {
                depth -= 1;
            } else if depth == 0 && t.is(rel) {
                let (l, r) = (&goal[..i], &goal[i + 1..]);
                match (mentions(l), mentions(r)) {
                    (false, true) => return l.to_vec(),
                    (true, false) => return r.to_vec(),
                    _ => {}
                }
            }
        }
    }
    if let Some(k) = goal.iter().position(|t| t.is("IsLeast") || t.is("IsGreatest")) {
        if let Some(open) = goal[k..].iter().position(|t| t.is("{")).map(|p| p + k) {
            if let Some((_, body, close)) = set_builder(goal, open) {
                return goal[body..close].to_vec();
            }
        }
    }
    goal.iter().filter(|t| !t.is(answer_name)).cloned().collect()
}

fn is_hypothesis_type(ty: &str) -> bool {
    tokenize(ty)
        .iter()
        .any(|t| RELATIONS.contains(&t.text.as_str()) || t.is("Nat.Prime") || t.is("Prime"))
}

/// Total, deterministic legality check of `expression` as an answer for `task`.
pub fn triviality_check(task: &AnswerConstructionTask, expression: &str, threshold: f64) -> TrivialityVerdict {
    let toks = tokenize(expression);
    if toks.iter().any(|t| t.is("sorry")) {
        return TrivialityVerdict::illegal(TrivialityReason::ContainsSorry);
    }
    if toks.iter().any(|t| CHOICE.contains(&t.text.as_str()) || t.text.ends_with(".choose")) {
        return TrivialityVerdict::illegal(TrivialityReason::ContainsChoice);
    }
    let header = task.theorem();
    let local = bound_names(&toks);
    let hyps: HashSet<&str> = header
        .binders
        .iter()
        .filter(|b| is_hypothesis_type(&b.ty))
        .flat_map(|b| b.names.iter().map(String::as_str))
        .collect();
    if toks
        .iter()
        .any(|t| t.kind == TokenKind::Ident && hyps.contains(t.text.as_str()) && !local.contains(&t.text))
    {
        return TrivialityVerdict::illegal(TrivialityReason::ReferencesHypotheses);
    }

    let goal_toks = tokenize(&header.goal);
    let pred = goal_predicate(&goal_toks, &task.answer_name);
    let mut pred_locals: HashSet<String> = header.binders.iter().flat_map(|b| b.names.iter().cloned()).collect();
    pred_locals.extend(bound_names(&pred));
    let pred_c = canonicalize(&pred, &pred_locals);
    let mut best = 0.0f64;
    if pred_c.len() >= MIN_PREDICATE_TOKENS {
        for body in candidate_bodies(&toks) {
            let body_c = canonicalize(body, &local);
            let overlap = lcs_len(&pred_c, &body_c) as f64 / pred_c.len() as f64;
            best = best.max(overlap);
        }
    }
    TrivialityVerdict {
        legal: best < threshold,
        reason: if best < threshold {
            TrivialityReason::Ok
        } else {
            TrivialityReason::EchoesPredicate
        },
        echo_overlap: best,
    }
}
