//! Table-driven verifier for desk-scale runs, and a recorder that produces
//! such tables from a real toolchain.
//!
//! Table format (JSON): `{ "<sha256 of source>": {"success": bool,
//! "diagnostics": [...], "winning_tactic": "norm_num" | null} }`. For a source
//! containing a proof hole, `success` answers a plain compile of that source
//! and `winning_tactic` scripts the tactic cascade over its hole (`null`
//! meaning every tactic fails).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::cascade::CHAIN_LABEL;
use super::diagnostics::Diagnostic;
use super::verifier::{LeanError, LeanVerdict, LeanVerifier};
use crate::digest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub success: bool,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default)]
    pub winning_tactic: Option<String>,
}

impl MockEntry {
    pub fn compiles() -> Self {
        Self {
            success: true,
            diagnostics: Vec::new(),
            winning_tactic: None,
        }
    }

    pub fn fails(diagnostics: Vec<Diagnostic>) -> Self {
        Self {
            success: false,
            diagnostics,
            winning_tactic: None,
        }
    }

    pub fn with_winning_tactic(mut self, tactic: Option<&str>) -> Self {
        self.winning_tactic = tactic.map(str::to_string);
        self
    }

    fn verdict(&self) -> LeanVerdict {
        LeanVerdict {
            success: self.success,
            diagnostics: self.diagnostics.clone(),
            elapsed_s: 0.0,
            timed_out: false,
        }
    }
}

pub type MockTable = BTreeMap<String, MockEntry>;

pub fn load_table(path: &Path) -> Result<MockTable, LeanError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| LeanError::Table(format!("{}: {e}", path.display())))
}

pub fn save_table(table: &MockTable, path: &Path) -> Result<(), LeanError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(table).map_err(|e| LeanError::Table(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Answers every check from a digest-keyed table. A source missing from the
/// table is an error, never a silent failure.
#[derive(Debug, Default, Clone)]
pub struct MockVerifier {
    table: MockTable,
}

impl MockVerifier {
    pub fn new(table: MockTable) -> Self {
        Self { table }
    }

    pub fn from_file(path: &Path) -> Result<Self, LeanError> {
        Ok(Self::new(load_table(path)?))
    }

    pub fn insert(&mut self, source: &str, entry: MockEntry) {
        self.table.insert(sha256_hex(source), entry);
    }

    pub fn table(&self) -> &MockTable {
        &self.table
    }
}

impl LeanVerifier for MockVerifier {
    fn check(&self, source: &str, _timeout: Duration) -> Result<LeanVerdict, LeanError> {
        let digest = sha256_hex(source);
        self.table
            .get(&digest)
            .map(MockEntry::verdict)
            .ok_or(LeanError::MissingFixture { digest })
    }

    fn scripted_tactic(&self, goal_source: &str, tactic: &str) -> Option<LeanVerdict> {
        let entry = self.table.get(&sha256_hex(goal_source))?;
        let closes = match entry.winning_tactic.as_deref() {
            Some(w) => w == tactic || tactic == CHAIN_LABEL,
            None => false,
        };
        Some(if closes {
            LeanVerdict::ok()
        } else {
            LeanVerdict::failed(vec![Diagnostic::error(0, 0, format!("tactic '{tactic}' failed"))])
        })
    }
}

/// Forwards to a real verifier and records every verdict as a mock entry.
pub struct RecordingVerifier<V> {
    inner: V,
    table: Mutex<MockTable>,
}

impl<V: LeanVerifier> RecordingVerifier<V> {
    pub fn new(inner: V) -> Self {
        Self {
            inner,
            table: Mutex::new(MockTable::new()),
        }
    }

    /// Start from an existing table so repeated recordings accumulate.
    pub fn with_table(inner: V, table: MockTable) -> Self {
        Self {
            inner,
            table: Mutex::new(table),
        }
    }

    pub fn table(&self) -> MockTable {
        self.table.lock().unwrap().clone()
    }

    pub fn save(&self, path: &Path) -> Result<(), LeanError> {
        save_table(&self.table.lock().unwrap(), path)
    }
}

impl<V: LeanVerifier> LeanVerifier for RecordingVerifier<V> {
    fn check(&self, source: &str, timeout: Duration) -> Result<LeanVerdict, LeanError> {
        let verdict = self.inner.check(source, timeout)?;
        let mut table = self.table.lock().unwrap();
        let entry = table
            .entry(sha256_hex(source))
            .or_insert_with(|| MockEntry::fails(Vec::new()));
        entry.success = verdict.success;
        entry.diagnostics = verdict.diagnostics.clone();
        Ok(verdict)
    }

    fn scripted_tactic(&self, goal_source: &str, tactic: &str) -> Option<LeanVerdict> {
        self.inner.scripted_tactic(goal_source, tactic)
    }

    fn record_cascade(&self, goal_source: &str, winning_tactic: Option<&str>) {
        let mut table = self.table.lock().unwrap();
        let entry = table
            .entry(sha256_hex(goal_source))
            .or_insert_with(|| MockEntry::fails(Vec::new()));
        entry.winning_tactic = winning_tactic.map(str::to_string);
        drop(table);
        self.inner.record_cascade(goal_source, winning_tactic);
    }
}
