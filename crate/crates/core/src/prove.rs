//! Prove stage: symbolic cascade first, then Pass@k sampling from a prover
//! model.
//!
//! Samples are generated and verified in parallel batches, but the outcome
//! is always the one a sequential scan in sample order would produce: the
//! scan stops at the first error, or at the first verified proof when early
//! exit is on. Work done past that point is discarded, so results do not
//! depend on the batch size.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::lean::source::{theorem_header, theorem_start};
use crate::lean::{cascade_prove, fill_hole, tokenize, CascadeMode, LeanVerdict, LeanVerifier, TacticCascade};
use crate::llm::{last_fenced_block, BackendConfig, ChatBackend, ChatMessage, ChatRequest};
use crate::par;
use crate::prompts::PromptSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProveConfig {
    pub k: usize,
    pub verify_timeout_s: f64,
    pub prover: BackendConfig,
    pub try_cascade_first: bool,
    pub early_exit: bool,
    pub cascade_mode: CascadeMode,
    /// Samples generated and verified concurrently per batch.
    pub batch: usize,
}

impl Default for ProveConfig {
    fn default() -> Self {
        Self {
            k: 32,
            verify_timeout_s: 120.0,
            prover: BackendConfig::prover("prover"),
            try_cascade_first: true,
            early_exit: true,
            cascade_mode: CascadeMode::Independent,
            batch: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofMethod {
    Cascade,
    ProverSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub request_digest: String,
    pub proof: Option<String>,
    pub verdict: Option<LeanVerdict>,
    /// Why the sample failed before or during verification.
    pub failure: Option<String>,
}

impl SampleRecord {
    pub fn verified(&self) -> bool {
        self.verdict.as_ref().is_some_and(LeanVerdict::is_proof)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofOutcome {
    pub success: bool,
    pub method: Option<ProofMethod>,
    pub winning_proof: Option<String>,
    pub samples_tried: usize,
    pub winning_sample_index: Option<usize>,
    pub statement_ok: bool,
    pub cascade_attempts: Vec<String>,
    pub samples: Vec<SampleRecord>,
    pub error: Option<String>,
}

impl ProofOutcome {
    fn empty() -> Self {
        Self {
            success: false,
            method: None,
            winning_proof: None,
            samples_tried: 0,
            winning_sample_index: None,
            statement_ok: false,
            cascade_attempts: Vec::new(),
            samples: Vec::new(),
            error: None,
        }
    }
}

/// A proof in a reply: the last Lean (or untagged) fenced block, else a
/// theorem declaration, else a `by` block starting on its own line.
pub fn extract_proof(message: &ChatMessage) -> Option<String> {
    if let Some(b) = last_fenced_block(&message.content, Some(&["lean", "lean4"])) {
        let body = b.body.trim();
        return (!body.is_empty()).then(|| body.to_string());
    }
    let text = message.content.as_str();
    if let Some(start) = theorem_start(text) {
        return Some(text[start..].trim().to_string());
    }
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim_start();
        if t.starts_with("by") && (t.len() == 2 || t[2..].starts_with(char::is_whitespace)) {
            return Some(text[offset..].trim().to_string());
        }
        offset += line.len();
    }
    None
}

fn header_tokens(src: &str) -> Option<Vec<String>> {
    let h = theorem_header(src).ok()?;
    let mut toks: Vec<String> = tokenize(&src[h.start..h.statement_end]).into_iter().map(|t| t.text).collect();
    if toks.first().is_some_and(|t| t == "lemma") {
        toks[0] = "theorem".into();
    }
    Some(toks)
}

/// The file to verify for a proof text: a full declaration replaces the
/// theorem (its statement must be unchanged), anything else fills the hole.
pub fn assemble_proof(theorem_source: &str, proof: &str) -> Result<String, String> {
    if let Some(start) = theorem_start(proof) {
        let decl = &proof[start..];
        let ours = header_tokens(theorem_source).ok_or("theorem header not found")?;
        let theirs = header_tokens(decl).ok_or("could not parse the proof's theorem header")?;
        if ours != theirs {
            return Err("the proof changes the theorem statement".into());
        }
        let prefix = &theorem_source[..theorem_start(theorem_source).expect("header parsed")];
        return Ok(format!("{prefix}{}\n", decl.trim_end()));
    }
    fill_hole(theorem_source, proof).map_err(|e| e.to_string())
}

pub fn prove_request(prompts: &PromptSet, theorem_source: &str, config: &ProveConfig, index: usize) -> ChatRequest {
    let messages = vec![
        ChatMessage::system(prompts.get("prove_system")),
        ChatMessage::user(prompts.render("prove_task", &[("theorem", theorem_source.trim_end())])),
    ];
    ChatRequest::new(messages, config.prover.clone()).with_sample(index as u32)
}

enum Sample {
    Done(SampleRecord),
    Failed { record: SampleRecord, error: String },
}

fn run_sample(
    index: usize,
    theorem_source: &str,
    backend: &dyn ChatBackend,
    lean: &dyn LeanVerifier,
    prompts: &PromptSet,
    config: &ProveConfig,
) -> Sample {
    let request = prove_request(prompts, theorem_source, config, index);
    let mut record = SampleRecord {
        index,
        request_digest: request.digest(),
        proof: None,
        verdict: None,
        failure: None,
    };
    let reply = match backend.complete(&request) {
        Ok(r) => r,
        Err(e) => return Sample::Failed { record, error: e.to_string() },
    };
    let Some(proof) = extract_proof(&reply) else {
        record.failure = Some("no proof found in the reply".into());
        return Sample::Done(record);
    };
    record.proof = Some(proof.clone());
    let source = match assemble_proof(theorem_source, &proof) {
        Ok(s) => s,
        Err(why) => {
            record.failure = Some(why);
            return Sample::Done(record);
        }
    };
    match lean.check(&source, Duration::from_secs_f64(config.verify_timeout_s)) {
        Ok(v) => {
            if !v.is_proof() {
                record.failure = Some(if v.timed_out { "verification timed out" } else { "verification failed" }.into());
            }
            record.verdict = Some(v);
            Sample::Done(record)
        }
        Err(e) => Sample::Failed { record, error: e.to_string() },
    }
}

pub fn prove(
    theorem_source: &str,
    backend: &dyn ChatBackend,
    lean: &dyn LeanVerifier,
    prompts: &PromptSet,
    config: &ProveConfig,
) -> ProofOutcome {
    let mut out = ProofOutcome::empty();
    let timeout = Duration::from_secs_f64(config.verify_timeout_s);
    match lean.check(theorem_source, timeout) {
        Ok(v) if v.success => out.statement_ok = true,
        Ok(v) => {
            out.error = Some(format!(
                "statement does not compile: {}",
                crate::lean::render_diagnostics(&v.diagnostics)
            ));
            return out;
        }
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    }

    if config.try_cascade_first {
        match cascade_prove(lean, theorem_source, &TacticCascade::default(), config.cascade_mode, timeout) {
            Ok(c) => {
                out.cascade_attempts = c.attempts.iter().map(|a| a.tactic.clone()).collect();
                if let Some(t) = c.winning_tactic {
                    out.success = true;
                    out.method = Some(ProofMethod::Cascade);
                    out.winning_proof = Some(t);
                    return out;
                }
            }
            Err(e) => {
                out.error = Some(e.to_string());
                return out;
            }
        }
    }

    let batch = config.batch.max(1);
    let mut next = 0;
    'outer: while next < config.k {
        let indices: Vec<usize> = (next..(next + batch).min(config.k)).collect();
        let results = par::map(&indices, |&i| run_sample(i, theorem_source, backend, lean, prompts, config));
        for sample in results {
            match sample {
                Sample::Failed { record, error } => {
                    out.samples.push(record);
                    out.error = Some(error);
                    break 'outer;
                }
                Sample::Done(record) => {
                    out.samples_tried += 1;
                    let verified = record.verified();
                    if verified && out.winning_sample_index.is_none() {
                        out.success = true;
                        out.method = Some(ProofMethod::ProverSample);
                        out.winning_sample_index = Some(record.index);
                        out.winning_proof = record.proof.clone();
                    }
                    out.samples.push(record);
                    if verified && config.early_exit {
                        break 'outer;
                    }
                }
            }
        }
        next += indices.len();
    }
    out
}
