//! Errors shared by the pipeline stages. A failed stage hands back whatever
//! it had produced so far so that run logs stay complete.

use thiserror::Error;

use crate::lean::LeanError;
use crate::llm::LlmError;
use crate::problem::TaskError;
use crate::sandbox::SandboxError;

#[derive(Debug, Error)]
pub enum StageCause {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Lean(#[from] LeanError),
    #[error(transparent)]
    Task(#[from] TaskError),
}

#[derive(Debug, Error)]
#[error("{cause}")]
pub struct StageError<P> {
    #[source]
    pub cause: StageCause,
    pub partial: P,
}

impl<P> StageError<P> {
    pub fn new(cause: impl Into<StageCause>, partial: P) -> Self {
        Self {
            cause: cause.into(),
            partial,
        }
    }
}
