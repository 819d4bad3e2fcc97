//! Per-task JSON logs under `<runs>/<run-id>/<task-id>/<stage>.json`.

use std::path::{Path, PathBuf};

use serde::Serialize;

/// Writes are best-effort: a failed log write is reported through `log` and
/// never fails the task.
#[derive(Debug, Clone)]
pub struct RunLog {
    dir: PathBuf,
}

impl RunLog {
    pub fn new(runs_dir: &Path, run_id: &str) -> Self {
        Self { dir: runs_dir.join(run_id) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn task_dir(&self, task_id: &str) -> PathBuf {
        self.dir.join(sanitize(task_id))
    }

    pub fn write_stage<T: Serialize>(&self, task_id: &str, stage: &str, value: &T) {
        let path = self.task_dir(task_id).join(format!("{stage}.json"));
        if let Err(e) = write_json(&path, value) {
            log::warn!("could not write {}: {e}", path.display());
        }
    }

    pub fn write_file(&self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        std::fs::write(&path, contents)?;
        Ok(path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Task ids become directory names; path separators and other unusual
/// characters are replaced.
fn sanitize(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        format!("_{s}")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let tmp = tempfile::tempdir().unwrap();
        let log = RunLog::new(tmp.path(), "r1");
        log.write_stage("putnam/1962 a5", "prove", &serde_json::json!({"ok": true}));
        let path = tmp.path().join("r1/putnam_1962_a5/prove.json");
        assert_eq!(std::fs::read_to_string(path).unwrap(), "{\n  \"ok\": true\n}\n");
        assert_eq!(sanitize(".."), "_..");
    }
}
