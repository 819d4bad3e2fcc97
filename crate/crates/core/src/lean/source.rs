//! Textual surgery on Lean files.
//!
//! Answer placeholders are located and rewritten on the source text rather
//! than on an AST: a placeholder is an `abbrev <name> : <type> := <body>`
//! command, and its body runs until the next top-level command or the end of
//! the file.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::tokens::{sorry_spans, tokenize, TokenKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SourceError {
    #[error("no declaration named `{0}` found")]
    PlaceholderNotFound(String),
    #[error("`{name}` is declared {count} times")]
    DuplicateDeclaration { name: String, count: usize },
    #[error("declaration `{0}` has no `:=` body")]
    MissingBody(String),
    #[error("placeholder `{name}` body is `{body}`, expected `sorry`")]
    BodyNotSorry { name: String, body: String },
    #[error("no theorem or lemma declaration found")]
    TheoremNotFound,
    #[error("expected exactly one proof hole, found {0}")]
    HoleCount(usize),
}

/// Byte spans of one placeholder declaration inside a Lean file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceholderSpan {
    /// The whole command, from its first keyword to the end of its body.
    pub decl: Range<usize>,
    pub ty: Range<usize>,
    pub body: Range<usize>,
}

static COMMAND_START: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?m)^(?:theorem|lemma|def|abbrev|noncomputable|open|namespace|end|section|example|instance|variable|universe|set_option|import|structure|inductive|class|macro|notation|local|private|protected|attribute|@\[|/--|/-|--)",
    )
    .unwrap()
});

static THEOREM_START: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^(?:@\[[^\]]*\]\s*)?(?:protected\s+|private\s+)?(?:theorem|lemma)\b").unwrap());

fn declaration_regex(name: &str) -> Regex {
    Regex::new(&format!(
        r"(?m)^[ \t]*(?:@\[[^\]]*\][ \t]*)?(?:noncomputable[ \t]+)?(?:abbrev|def)[ \t]+{}(?:[^\w'.]|$)",
        regex::escape(name)
    ))
    .expect("escaped name forms a valid pattern")
}

/// Number of `abbrev`/`def` commands declaring `name`.
pub fn count_declarations(src: &str, name: &str) -> usize {
    declaration_regex(name).find_iter(src).count()
}

/// Start of the next top-level command at or after `from`, or the file end.
fn next_command(src: &str, from: usize) -> usize {
    // commands start at column 0, so search from the beginning of the next line
    let line_start = match src[from..].find('\n') {
        Some(off) => from + off + 1,
        None => return src.len(),
    };
    COMMAND_START
        .find_at(src, line_start)
        .map(|m| m.start())
        .unwrap_or(src.len())
}

fn trim_end_span(src: &str, span: Range<usize>) -> Range<usize> {
    let trimmed = src[span.clone()].trim_end();
    span.start..span.start + trimmed.len()
}

/// Locate the unique declaration of `name` and split it into type and body.
pub fn find_placeholder(src: &str, name: &str) -> Result<PlaceholderSpan, SourceError> {
    let re = declaration_regex(name);
    let matches: Vec<_> = re.find_iter(src).collect();
    match matches.len() {
        0 => return Err(SourceError::PlaceholderNotFound(name.to_string())),
        1 => {}
        count => {
            return Err(SourceError::DuplicateDeclaration {
                name: name.to_string(),
                count,
            })
        }
    }
    let m = matches[0];
    let decl_start = m.start() + (m.as_str().len() - m.as_str().trim_start().len());
    let name_end = src[m.start()..].find(name).map(|o| m.start() + o + name.len()).unwrap();

    // walk tokens after the name: the first depth-0 `:` opens the type, the first
    // depth-0 `:=` closes it
    let mut depth = 0i32;
    let mut ty_start = None;
    let mut assign = None;
    for tok in tokenize(&src[name_end..]) {
        let at = name_end + tok.span.start;
        if tok.kind == TokenKind::Symbol {
            match tok.text.as_str() {
                "(" | "[" | "{" | "⦃" => depth += 1,
                ")" | "]" | "}" | "⦄" => depth -= 1,
                ":" if depth == 0 && ty_start.is_none() => ty_start = Some(name_end + tok.span.end),
                ":=" if depth == 0 => {
                    assign = Some((at, name_end + tok.span.end));
                    break;
                }
                _ => {}
            }
        }
    }
    let (assign_start, assign_end) = assign.ok_or_else(|| SourceError::MissingBody(name.to_string()))?;
    let ty_start = ty_start.unwrap_or(name_end);
    let ty = {
        let raw = &src[ty_start..assign_start];
        let lead = raw.len() - raw.trim_start().len();
        trim_end_span(src, ty_start + lead..assign_start)
    };
    let body_start = assign_end + (src[assign_end..].len() - src[assign_end..].trim_start().len());
    let decl_end = next_command(src, body_start.max(assign_end));
    let body = trim_end_span(src, body_start..decl_end.max(body_start));
    Ok(PlaceholderSpan {
        decl: decl_start..body.end,
        ty,
        body,
    })
}

/// Body text of the declaration of `name`.
pub fn placeholder_body<'a>(src: &'a str, name: &str) -> Result<&'a str, SourceError> {
    let span = find_placeholder(src, name)?;
    Ok(&src[span.body])
}

/// Replace the body of `name`, leaving every other byte untouched.
pub fn replace_body(src: &str, name: &str, new_body: &str) -> Result<String, SourceError> {
    let span = find_placeholder(src, name)?;
    let mut out = String::with_capacity(src.len() + new_body.len());
    out.push_str(&src[..span.body.start]);
    out.push_str(new_body);
    out.push_str(&src[span.body.end..]);
    Ok(out)
}

/// Split `A → B → C` at top-level arrows into `["A", "B", "C"]`.
pub fn split_arrows(ty: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut last = 0usize;
    for tok in tokenize(ty) {
        match tok.text.as_str() {
            "(" | "[" | "{" | "⦃" => depth += 1,
            ")" | "]" | "}" | "⦄" => depth -= 1,
            "→" | "->" if depth == 0 => {
                parts.push(ty[last..tok.span.start].trim().to_string());
                last = tok.span.end;
            }
            _ => {}
        }
    }
    parts.push(ty[last..].trim().to_string());
    parts
}

/// One binder group of a theorem header, e.g. `(x y : ℕ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binder {
    pub names: Vec<String>,
    pub ty: String,
    pub explicit: bool,
}

/// Header pieces of the main theorem of a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoremHeader {
    /// Byte offset of the theorem command in the file.
    pub start: usize,
    pub name: String,
    pub binders: Vec<Binder>,
    pub goal: String,
    /// Byte range of the goal text in the file.
    pub goal_span: Range<usize>,
    /// Byte offset just past the `:=` that ends the statement.
    pub statement_end: usize,
}

/// Byte offset of the last `theorem`/`lemma` command.
pub fn theorem_start(src: &str) -> Option<usize> {
    THEOREM_START.find_iter(src).last().map(|m| m.start())
}

/// Parse the header of the last theorem in `src`.
pub fn theorem_header(src: &str) -> Result<TheoremHeader, SourceError> {
    let start = theorem_start(src).ok_or(SourceError::TheoremNotFound)?;
    let toks = tokenize(&src[start..]);
    let mut iter = toks.iter().peekable();
    // skip attributes and modifiers up to the keyword
    for tok in iter.by_ref() {
        if tok.is("theorem") || tok.is("lemma") {
            break;
        }
    }
    let name = match iter.next() {
        Some(t) if t.kind == TokenKind::Ident => t.text.clone(),
        _ => return Err(SourceError::TheoremNotFound),
    };
    let mut binders = Vec::new();
    let mut goal_start = None;
    while let Some(tok) = iter.next() {
        let (open, close, explicit) = match tok.text.as_str() {
            "(" => ("(", ")", true),
            "{" => ("{", "}", false),
            "[" => ("[", "]", false),
            "⦃" => ("⦃", "⦄", false),
            ":" => {
                goal_start = Some(start + tok.span.end);
                break;
            }
            _ => continue,
        };
        let group_start = start + tok.span.end;
        let mut depth = 1;
        let mut colon = None;
        let mut group_end = group_start;
        for inner in iter.by_ref() {
            if inner.is(open) {
                depth += 1;
            } else if inner.is(close) {
                depth -= 1;
                if depth == 0 {
                    group_end = start + inner.span.start;
                    break;
                }
            } else if inner.is(":") && depth == 1 && colon.is_none() {
                colon = Some((start + inner.span.start, start + inner.span.end));
            }
        }
        let (names, ty) = match colon {
            Some((c0, c1)) => (
                src[group_start..c0].split_whitespace().map(str::to_string).collect(),
                src[c1..group_end].trim().to_string(),
            ),
            None => (Vec::new(), src[group_start..group_end].trim().to_string()),
        };
        binders.push(Binder { names, ty, explicit });
    }
    let goal_start = goal_start.ok_or(SourceError::TheoremNotFound)?;
    let mut depth = 0i32;
    let mut goal_end = None;
    for tok in tokenize(&src[goal_start..]) {
        match tok.text.as_str() {
            "(" | "[" | "{" | "⦃" => depth += 1,
            ")" | "]" | "}" | "⦄" => depth -= 1,
            ":=" if depth == 0 => {
                goal_end = Some((goal_start + tok.span.start, goal_start + tok.span.end));
                break;
            }
            _ => {}
        }
    }
    let (goal_end, statement_end) = goal_end.ok_or(SourceError::TheoremNotFound)?;
    let lead = src[goal_start..goal_end].len() - src[goal_start..goal_end].trim_start().len();
    let goal_span = trim_end_span(src, goal_start + lead..goal_end);
    Ok(TheoremHeader {
        start,
        name,
        binders,
        goal: src[goal_span.clone()].to_string(),
        goal_span,
        statement_end,
    })
}

/// Everything in the file before the placeholder command: imports, opens and
/// auxiliary definitions the answer may refer to.
pub fn preamble<'a>(src: &'a str, span: &PlaceholderSpan) -> &'a str {
    &src[..span.decl.start]
}

/// Replace the single `sorry` proof hole (together with a directly preceding
/// `by`) with `proof`. A `proof` that does not itself start with `by` is
/// treated as a tactic block.
pub fn fill_hole(src: &str, proof: &str) -> Result<String, SourceError> {
    let holes = sorry_spans(src);
    if holes.len() != 1 {
        return Err(SourceError::HoleCount(holes.len()));
    }
    let hole = holes[0].clone();
    let before = &src[..hole.start];
    let trimmed = before.trim_end();
    let proof = proof.trim();
    let (cut, replacement) = if trimmed.ends_with("by") && is_word_end(trimmed) {
        let by_start = trimmed.len() - 2;
        if proof.starts_with("by") {
            (by_start, proof.to_string())
        } else {
            (by_start, format!("by\n  {}", indent_tail(proof, "  ")))
        }
    } else if let Some(rest) = proof.strip_prefix("by") {
        (hole.start, format!("by{rest}"))
    } else {
        (hole.start, format!("by\n  {}", indent_tail(proof, "  ")))
    };
    let mut out = String::with_capacity(src.len() + replacement.len());
    out.push_str(&src[..cut]);
    out.push_str(&replacement);
    out.push_str(&src[hole.end..]);
    Ok(out)
}

fn is_word_end(s: &str) -> bool {
    let head = &s[..s.len() - 2];
    head.chars().last().is_none_or(|c| !(c.is_alphanumeric() || c == '_'))
}

fn indent_tail(text: &str, indent: &str) -> String {
    text.lines().collect::<Vec<_>>().join(&format!("\n{indent}"))
}
