//! Fenced code blocks in model replies.

use super::{ToolCall, ToolName};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock {
    /// Info string after the opening fence, lowercased (`python`, `lean4`, ...).
    pub lang: String,
    pub body: String,
}

/// All fenced blocks in order. An unterminated final block runs to the end
/// of the text (replies cut off by the token limit).
pub fn fenced_blocks(text: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut open: Option<(usize, String, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        let ticks = trimmed.chars().take_while(|&c| c == '`').count();
        match open.as_mut() {
            None if ticks >= 3 => {
                let lang = trimmed[ticks..].trim().to_lowercase();
                open = Some((ticks, lang, Vec::new()));
            }
            None => {}
            Some((width, _, _)) if ticks >= *width && trimmed[ticks..].trim().is_empty() => {
                let (_, lang, lines) = open.take().unwrap();
                blocks.push(FencedBlock {
                    lang,
                    body: lines.join("\n"),
                });
            }
            Some((_, _, lines)) => lines.push(line),
        }
    }
    if let Some((_, lang, lines)) = open {
        blocks.push(FencedBlock {
            lang,
            body: lines.join("\n"),
        });
    }
    blocks
}

/// The last fenced block, optionally restricted to the given languages
/// (an empty info string always qualifies).
pub fn last_fenced_block(text: &str, langs: Option<&[&str]>) -> Option<FencedBlock> {
    fenced_blocks(text)
        .into_iter()
        .rev()
        .find(|b| match langs {
            None => true,
            Some(ls) => b.lang.is_empty() || ls.iter().any(|l| b.lang == *l),
        })
}

/// Fallback for backends without native tool calls: the last fenced block
/// becomes a call to whichever offered tool matches its language.
pub fn parse_fenced_tool_call(text: &str, offered: &[ToolName], call_id: &str) -> Option<ToolCall> {
    let block = last_fenced_block(text, None)?;
    let tool = match block.lang.as_str() {
        "python" | "py" | "python3" => ToolName::RunEnumeration,
        "lean" | "lean4" => ToolName::CheckLean,
        "" if offered.len() == 1 => offered[0],
        _ => return None,
    };
    offered.contains(&tool).then(|| ToolCall {
        tool,
        arguments: block.body,
        call_id: call_id.to_string(),
    })
}
