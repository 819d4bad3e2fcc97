use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::diagnostics::Diagnostic;
use super::source::SourceError;
use crate::digest::sha256_hex;

/// Outcome of one compiler run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeanVerdict {
    pub success: bool,
    pub diagnostics: Vec<Diagnostic>,
    pub elapsed_s: f64,
    pub timed_out: bool,
}

impl LeanVerdict {
    pub fn ok() -> Self {
        Self {
            success: true,
            diagnostics: Vec::new(),
            elapsed_s: 0.0,
            timed_out: false,
        }
    }

    pub fn failed(diagnostics: Vec<Diagnostic>) -> Self {
        Self {
            success: false,
            diagnostics,
            elapsed_s: 0.0,
            timed_out: false,
        }
    }

    pub fn timeout(elapsed_s: f64) -> Self {
        Self {
            success: false,
            diagnostics: vec![Diagnostic::error(0, 0, "verification timed out")],
            elapsed_s,
            timed_out: true,
        }
    }

    /// Whether any declaration still depends on `sorry`.
    pub fn uses_sorry(&self) -> bool {
        self.diagnostics
            .iter()
            .any(|d| d.message.contains("declaration uses 'sorry'"))
    }

    /// A compile that closes every goal without `sorry`.
    pub fn is_proof(&self) -> bool {
        self.success && !self.uses_sorry()
    }
}

#[derive(Debug, Error)]
pub enum LeanError {
    #[error("Lean toolchain unavailable: {0}")]
    ToolchainMissing(String),
    #[error("missing Lean fixture for source digest {digest}")]
    MissingFixture { digest: String },
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("I/O error running Lean: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed mock table: {0}")]
    Table(String),
}

/// Anything that can judge a Lean file.
pub trait LeanVerifier: Send + Sync {
    fn check(&self, source: &str, timeout: Duration) -> Result<LeanVerdict, LeanError>;

    /// Scripted verdict for running `tactic` on the hole of `goal_source`,
    /// bypassing compilation. Only test doubles override this.
    fn scripted_tactic(&self, _goal_source: &str, _tactic: &str) -> Option<LeanVerdict> {
        None
    }

    /// Notification that a cascade over `goal_source` finished.
    fn record_cascade(&self, _goal_source: &str, _winning_tactic: Option<&str>) {}
}

impl<V: LeanVerifier + ?Sized> LeanVerifier for std::sync::Arc<V> {
    fn check(&self, source: &str, timeout: Duration) -> Result<LeanVerdict, LeanError> {
        (**self).check(source, timeout)
    }
    fn scripted_tactic(&self, goal_source: &str, tactic: &str) -> Option<LeanVerdict> {
        (**self).scripted_tactic(goal_source, tactic)
    }
    fn record_cascade(&self, goal_source: &str, winning_tactic: Option<&str>) {
        (**self).record_cascade(goal_source, winning_tactic)
    }
}

/// Memoizes verdicts by source digest. Timed-out verdicts are not cached
/// since a later call may allow more time.
pub struct CachedVerifier<V> {
    inner: V,
    cache: Mutex<HashMap<String, LeanVerdict>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl<V: LeanVerifier> CachedVerifier<V> {
    pub fn new(inner: V) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    /// Number of calls forwarded to the wrapped verifier.
    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }
}

impl<V: LeanVerifier> LeanVerifier for CachedVerifier<V> {
    fn check(&self, source: &str, timeout: Duration) -> Result<LeanVerdict, LeanError> {
        let key = sha256_hex(source);
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let verdict = self.inner.check(source, timeout)?;
        if !verdict.timed_out {
            self.cache.lock().unwrap().insert(key, verdict.clone());
        }
        Ok(verdict)
    }

    fn scripted_tactic(&self, goal_source: &str, tactic: &str) -> Option<LeanVerdict> {
        self.inner.scripted_tactic(goal_source, tactic)
    }

    fn record_cascade(&self, goal_source: &str, winning_tactic: Option<&str>) {
        self.inner.record_cascade(goal_source, winning_tactic)
    }
}
