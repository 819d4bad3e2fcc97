use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cot,
    Ecp,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Cot => "CoT",
            Method::Ecp => "ECP",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cot" => Some(Method::Cot),
            "ecp" => Some(Method::Ecp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolvedKind {
    Construction,
    EndToEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub attempted: BTreeSet<String>,
    pub solved_construction: BTreeSet<String>,
    pub solved_end_to_end: BTreeSet<String>,
}

impl MethodResult {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            attempted: BTreeSet::new(),
            solved_construction: BTreeSet::new(),
            solved_end_to_end: BTreeSet::new(),
        }
    }

    /// end-to-end ⊆ construction ⊆ attempted
    pub fn is_consistent(&self) -> bool {
        self.solved_end_to_end.is_subset(&self.solved_construction) && self.solved_construction.is_subset(&self.attempted)
    }

    pub fn solved(&self, kind: SolvedKind) -> &BTreeSet<String> {
        match kind {
            SolvedKind::Construction => &self.solved_construction,
            SolvedKind::EndToEnd => &self.solved_end_to_end,
        }
    }
}

fn ratio(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        n as f64 / total as f64
    }
}

/// Solved fraction over the whole benchmark; unattempted tasks count as
/// unsolved.
pub fn accuracy(result: &MethodResult, kind: SolvedKind, total: usize) -> f64 {
    ratio(result.solved(kind).len(), total)
}

pub fn construction_accuracy(result: &MethodResult, total: usize) -> f64 {
    accuracy(result, SolvedKind::Construction, total)
}

pub fn end_to_end_accuracy(result: &MethodResult, total: usize) -> f64 {
    accuracy(result, SolvedKind::EndToEnd, total)
}

pub fn union_accuracy(a: &MethodResult, b: &MethodResult, kind: SolvedKind, total: usize) -> f64 {
    ratio(a.solved(kind).union(b.solved(kind)).count(), total)
}

/// Percentage with one decimal, as in the published tables.
pub fn percent(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}
