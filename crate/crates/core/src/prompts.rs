//! Prompt templates. Built-in copies are compiled in from `assets/prompts`;
//! a directory of same-named `.md` files overrides them one by one.

use std::collections::BTreeMap;
use std::path::Path;

macro_rules! builtin {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../assets/prompts/", $name, ".md")))),*]
    };
}

const BUILTIN: &[(&str, &str)] = builtin!(
    "enumerate_system",
    "enumerate_task",
    "enumerate_retry",
    "conjecture_system",
    "conjecture_task",
    "conjecture_hints",
    "conjecture_retry",
    "prove_system",
    "prove_task",
    "autoformalize_system",
    "autoformalize_task",
    "autoformalize_retry",
    "judge_system",
    "judge_task",
    "fewshot_1",
    "fewshot_2",
    "fewshot_3",
);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        Self {
            templates: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Built-ins overridden by any `<name>.md` in `dir`. Extra `fewshot_N.md`
    /// files add exemplars.
    pub fn with_overrides(dir: &Path) -> std::io::Result<Self> {
        let mut set = Self::builtin();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("md") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            if set.templates.contains_key(stem) || stem.starts_with("fewshot_") {
                set.templates.insert(stem.to_string(), std::fs::read_to_string(&path)?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> &str {
        self.templates
            .get(name)
            .unwrap_or_else(|| panic!("unknown prompt template '{name}'"))
    }

    /// Fill `{{key}}` slots. Slots without a value are left in place.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> String {
        fill(self.get(name), vars)
    }

    /// The first `n` few-shot exemplars, in file-name order.
    pub fn few_shot(&self, n: usize) -> Vec<&str> {
        let mut shots: Vec<(usize, &str)> = self
            .templates
            .iter()
            .filter_map(|(k, v)| Some((k.strip_prefix("fewshot_")?.parse().ok()?, v.as_str())))
            .collect();
        shots.sort_by_key(|(i, _)| *i);
        shots.into_iter().take(n).map(|(_, v)| v).collect()
    }
}

pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let key = after[..close].trim();
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[open..open + 2 + close + 2]),
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
