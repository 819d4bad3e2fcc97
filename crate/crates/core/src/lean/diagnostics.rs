//! Parsing of Lean compiler output.
//!
//! The compiler prints one header line per message in the form
//! `file:line:col: severity: message`; message bodies may continue on the
//! following lines until the next header. Anything that does not fit is kept
//! as a single "unparsed output" diagnostic so parsing never fails.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn error(line: u32, column: u32, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            line,
            column,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.column, sev, self.message)
    }
}

pub const UNPARSED_OUTPUT: &str = "unparsed output";

static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:.*?):(\d+):(\d+):\s*(error|warning|info|information)(?:\([^)]*\))?:\s?(.*)$").unwrap()
});

static UNKNOWN_IDENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"unknown (?:identifier|constant) '([^']+)'").unwrap());

/// Parse compiler output. `failed` says whether the process exited
/// unsuccessfully; unrecognized output from a failed run becomes an error.
pub fn parse_diagnostics(output: &str, failed: bool) -> Vec<Diagnostic> {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let mut stray: Vec<&str> = Vec::new();
    for line in output.lines() {
        if let Some(caps) = HEADER.captures(line) {
            let severity = match &caps[3] {
                "error" => Severity::Error,
                "warning" => Severity::Warning,
                _ => Severity::Info,
            };
            diags.push(Diagnostic {
                severity,
                line: caps[1].parse().unwrap_or(0),
                column: caps[2].parse().unwrap_or(0),
                message: caps[4].to_string(),
            });
        } else if let Some(last) = diags.last_mut() {
            last.message.push('\n');
            last.message.push_str(line);
        } else if !line.trim().is_empty() {
            stray.push(line);
        }
    }
    for d in &mut diags {
        let trimmed = d.message.trim_end().len();
        d.message.truncate(trimmed);
    }
    if !stray.is_empty() || (failed && !diags.iter().any(Diagnostic::is_error)) {
        let text = stray.join("\n");
        let message = if text.is_empty() {
            UNPARSED_OUTPUT.to_string()
        } else {
            format!("{UNPARSED_OUTPUT}: {text}")
        };
        diags.insert(
            0,
            Diagnostic {
                severity: if failed { Severity::Error } else { Severity::Info },
                line: 0,
                column: 0,
                message,
            },
        );
    }
    diags
}

/// Identifiers quoted in unknown-identifier / unknown-constant errors,
/// deduplicated in first-occurrence order.
pub fn extract_unknown_identifiers(diagnostics: &[Diagnostic]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for d in diagnostics.iter().filter(|d| d.is_error()) {
        for caps in UNKNOWN_IDENT.captures_iter(&d.message) {
            let ident = caps[1].replace(['«', '»'], "");
            if !out.contains(&ident) {
                out.push(ident);
            }
        }
    }
    out
}

/// Render diagnostics as compiler-style text for prompt feedback.
pub fn render(diagnostics: &[Diagnostic]) -> String {
    diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}
