//! The fixed symbolic tactic cascade used both as a fallback prover and as
//! the equivalence checker for conjectured answers.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::source::fill_hole;
use super::tokens::sorry_spans;
use super::verifier::{LeanError, LeanVerdict, LeanVerifier};
use crate::lean::source::SourceError;

pub const DEFAULT_TACTICS: [&str; 5] = ["simp", "aesop", "nlinarith", "ring", "norm_num"];

/// Label reported as the winning tactic in chained mode.
pub const CHAIN_LABEL: &str = "chain";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticCascade {
    pub tactics: Vec<String>,
}

impl Default for TacticCascade {
    fn default() -> Self {
        Self {
            tactics: DEFAULT_TACTICS.iter().map(|t| t.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CascadeMode {
    /// Each tactic is a complete, separate proof attempt.
    #[default]
    Independent,
    /// One attempt running `try <tactic>` for every tactic in order.
    Chained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacticAttempt {
    pub tactic: String,
    pub verdict: LeanVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOutcome {
    pub verdict: LeanVerdict,
    pub winning_tactic: Option<String>,
    pub attempts: Vec<TacticAttempt>,
}

impl CascadeOutcome {
    pub fn success(&self) -> bool {
        self.winning_tactic.is_some()
    }
}

fn attempt(
    lean: &dyn LeanVerifier,
    goal_source: &str,
    label: &str,
    proof: &str,
    timeout: Duration,
) -> Result<LeanVerdict, LeanError> {
    if let Some(v) = lean.scripted_tactic(goal_source, label) {
        return Ok(v);
    }
    let filled = fill_hole(goal_source, proof)?;
    lean.check(&filled, timeout)
}

/// Try the cascade on the single proof hole of `goal_source`, stopping at the
/// first tactic that closes it. Timeouts count as failures of that tactic.
pub fn cascade_prove(
    lean: &dyn LeanVerifier,
    goal_source: &str,
    cascade: &TacticCascade,
    mode: CascadeMode,
    timeout: Duration,
) -> Result<CascadeOutcome, LeanError> {
    let holes = sorry_spans(goal_source).len();
    if holes != 1 {
        return Err(SourceError::HoleCount(holes).into());
    }
    let plan: Vec<(String, String)> = match mode {
        CascadeMode::Independent => cascade.tactics.iter().map(|t| (t.clone(), t.clone())).collect(),
        CascadeMode::Chained => {
            let body = cascade
                .tactics
                .iter()
                .map(|t| format!("try {t}"))
                .collect::<Vec<_>>()
                .join("\n");
            vec![(CHAIN_LABEL.to_string(), body)]
        }
    };
    let mut attempts = Vec::with_capacity(plan.len());
    for (label, proof) in plan {
        let verdict = attempt(lean, goal_source, &label, &proof, timeout)?;
        let closed = verdict.is_proof();
        attempts.push(TacticAttempt {
            tactic: label.clone(),
            verdict: verdict.clone(),
        });
        if closed {
            lean.record_cascade(goal_source, Some(&label));
            return Ok(CascadeOutcome {
                verdict,
                winning_tactic: Some(label),
                attempts,
            });
        }
    }
    lean.record_cascade(goal_source, None);
    let verdict = attempts
        .last()
        .map(|a| a.verdict.clone())
        .unwrap_or_else(|| LeanVerdict::failed(Vec::new()));
    Ok(CascadeOutcome {
        verdict,
        winning_tactic: None,
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lean::mock::{MockEntry, MockVerifier};

    const GOAL: &str = "theorem eq : (69 : ℕ) = 69 := by\n  sorry\n";

    #[test]
    fn scripted_winner_stops_the_cascade() {
        let mut mock = MockVerifier::default();
        mock.insert(GOAL, MockEntry::compiles().with_winning_tactic(Some("norm_num")));
        let out = cascade_prove(&mock, GOAL, &TacticCascade::default(), CascadeMode::Independent, Duration::from_secs(120)).unwrap();
        assert_eq!(out.winning_tactic.as_deref(), Some("norm_num"));
        assert_eq!(out.attempts.len(), 5);
        assert!(out.verdict.success);
    }

    #[test]
    fn all_fail() {
        let mut mock = MockVerifier::default();
        mock.insert(GOAL, MockEntry::compiles().with_winning_tactic(None));
        let out = cascade_prove(&mock, GOAL, &TacticCascade::default(), CascadeMode::Independent, Duration::from_secs(1)).unwrap();
        assert!(!out.success());
        assert_eq!(out.attempts.len(), 5);
        let names: Vec<_> = out.attempts.iter().map(|a| a.tactic.as_str()).collect();
        assert_eq!(names, DEFAULT_TACTICS);
    }

    #[test]
    fn falls_back_to_compiling_filled_sources() {
        let mut mock = MockVerifier::default();
        let goal = "theorem c (x y : ℤ) : x + y = y + x := by\n  sorry\n";
        for t in ["simp", "aesop", "nlinarith"] {
            mock.insert(&fill_hole(goal, t).unwrap(), MockEntry::fails(vec![]));
        }
        mock.insert(&fill_hole(goal, "ring").unwrap(), MockEntry::compiles());
        let out = cascade_prove(&mock, goal, &TacticCascade::default(), CascadeMode::Independent, Duration::from_secs(1)).unwrap();
        assert_eq!(out.winning_tactic.as_deref(), Some("ring"));
        assert_eq!(out.attempts.len(), 4);
    }

    #[test]
    fn chained_mode_is_one_attempt() {
        let mut mock = MockVerifier::default();
        mock.insert(GOAL, MockEntry::compiles().with_winning_tactic(Some("simp")));
        let out = cascade_prove(&mock, GOAL, &TacticCascade::default(), CascadeMode::Chained, Duration::from_secs(1)).unwrap();
        assert_eq!(out.attempts.len(), 1);
        assert_eq!(out.winning_tactic.as_deref(), Some(CHAIN_LABEL));
    }

    #[test]
    fn requires_exactly_one_hole() {
        let mock = MockVerifier::default();
        let err = cascade_prove(&mock, "theorem t : True := trivial", &TacticCascade::default(), CascadeMode::Independent, Duration::ZERO);
        assert!(matches!(err, Err(LeanError::Source(SourceError::HoleCount(0)))));
    }
}
