use serde::Serialize;

use crate::lean::{extract_unknown_identifiers, Diagnostic};

use super::{Embedder, KbError, KbIndex};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suggestion {
    pub identifier: String,
    /// `(full_name, signature)` pairs, semantic hits first, duplicates removed.
    pub candidates: Vec<(String, String)>,
    pub semantic_hits: usize,
}

/// Up to `k` semantic and `k` edit-distance neighbours for each unknown
/// identifier in `diagnostics`.
pub fn suggest(
    index: &KbIndex,
    embedder: &dyn Embedder,
    diagnostics: &[Diagnostic],
    k: usize,
) -> Result<Vec<Suggestion>, KbError> {
    let mut out = Vec::new();
    for ident in extract_unknown_identifiers(diagnostics) {
        let semantic = index.query_semantic(embedder, &ident, k)?;
        let edit = index.query_edit_distance(&ident, k);
        let mut candidates: Vec<(String, String)> = Vec::new();
        for e in semantic.iter().map(|s| &s.entry).chain(edit.iter().map(|s| &s.entry)) {
            if !candidates.iter().any(|(n, _)| *n == e.full_name) {
                candidates.push((e.full_name.clone(), e.signature.clone()));
            }
        }
        out.push(Suggestion {
            identifier: ident,
            candidates,
            semantic_hits: semantic.len(),
        });
    }
    Ok(out)
}

/// Prompt block listing the suggestions; empty when there are none.
pub fn render_suggestions(suggestions: &[Suggestion]) -> String {
    let mut s = String::new();
    for sug in suggestions {
        s.push_str(&format!("`{}` is unknown. Related declarations:\n", sug.identifier));
        for (name, sig) in &sug.candidates {
            s.push_str(&format!("- {name} : {sig}\n"));
        }
    }
    s
}
