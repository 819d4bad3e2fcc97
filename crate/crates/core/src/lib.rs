//! Orchestration engine for formal answer-construction problems.
//!
//! A task is a Lean theorem whose answer is left as a named `abbrev`
//! placeholder. The pipeline enumerates candidate answers with generated
//! programs, conjectures a closed-form Lean expression, and proves the
//! theorem once the expression is substituted. Every external dependency
//! (chat models, the program sandbox, the Lean toolchain, embedders) sits
//! behind a trait with a record/replay implementation so that full runs are
//! deterministic without network or toolchain access.

pub mod autoformalize;
pub mod config;
pub mod conjecture;
pub mod digest;
pub mod enumerate;
pub mod eval;
pub mod kb;
pub mod lean;
pub mod llm;
pub mod par;
pub mod pipeline;
pub mod problem;
pub mod process;
pub mod prompts;
pub mod prove;
pub mod runlog;
pub mod sandbox;
pub mod services;
pub mod stage;

pub use problem::{AnswerConstructionTask, AnswerShape, CandidateAnswer, DatasetRecord};
