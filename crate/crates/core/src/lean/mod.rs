//! Everything that talks to (or stands in for) the Lean toolchain.

pub mod cascade;
pub mod diagnostics;
pub mod mock;
pub mod source;
pub mod tokens;
pub mod toolchain;
pub mod verifier;

pub use cascade::{cascade_prove, CascadeMode, CascadeOutcome, TacticAttempt, TacticCascade};
pub use diagnostics::{extract_unknown_identifiers, parse_diagnostics, render as render_diagnostics, Diagnostic, Severity};
pub use source::{fill_hole, theorem_header, Binder, SourceError, TheoremHeader};
pub use tokens::{sorry_spans, tokenize, Token, TokenKind};
pub use mock::{MockEntry, MockVerifier, RecordingVerifier};
pub use toolchain::{LeanToolchain, ToolchainConfig};
pub use verifier::{CachedVerifier, LeanError, LeanVerdict, LeanVerifier};
