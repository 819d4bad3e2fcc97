//! On-disk record/replay store: one `<digest>.json` file per request holding
//! `{request, reply, meta{model_id, recorded_at}}`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{ChatMessage, ChatRequest, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureMeta {
    pub model_id: String,
    pub recorded_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub request: ChatRequest,
    pub reply: ChatMessage,
    pub meta: FixtureMeta,
}

/// Concurrent readers, serialized writers.
pub struct FixtureStore {
    dir: PathBuf,
    cache: RwLock<HashMap<String, FixtureFile>>,
    write_lock: Mutex<()>,
    hits: std::sync::atomic::AtomicUsize,
    misses: std::sync::atomic::AtomicUsize,
}

impl FixtureStore {
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            cache: RwLock::new(HashMap::new()),
            write_lock: Mutex::new(()),
            hits: Default::default(),
            misses: Default::default(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    fn read(&self, digest: &str) -> Result<Option<FixtureFile>, LlmError> {
        if let Some(f) = self.cache.read().unwrap().get(digest) {
            return Ok(Some(f.clone()));
        }
        let path = self.path_for(digest);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(LlmError::Store(format!("{}: {e}", path.display()))),
        };
        let file: FixtureFile =
            serde_json::from_str(&text).map_err(|e| LlmError::Store(format!("{}: {e}", path.display())))?;
        self.cache.write().unwrap().insert(digest.to_string(), file.clone());
        Ok(Some(file))
    }

    /// Stored reply for `request`, if any. A stored file whose request differs
    /// from `request` is a digest collision.
    pub fn lookup(&self, request: &ChatRequest) -> Result<Option<ChatMessage>, LlmError> {
        use std::sync::atomic::Ordering;
        let digest = request.digest();
        match self.read(&digest)? {
            Some(f) if f.request == *request => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Ok(Some(f.reply))
            }
            Some(_) => Err(LlmError::DigestCollision { digest }),
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                Ok(None)
            }
        }
    }

    /// Store a reply. Re-recording an identical request keeps the first reply.
    pub fn record(&self, request: &ChatRequest, reply: &ChatMessage) -> Result<(), LlmError> {
        let _guard = self.write_lock.lock().unwrap();
        let digest = request.digest();
        if let Some(existing) = self.read(&digest)? {
            if existing.request != *request {
                return Err(LlmError::DigestCollision { digest });
            }
            if existing.reply != *reply {
                log::info!("fixture {digest} already recorded; keeping the stored reply");
            }
            return Ok(());
        }
        let file = FixtureFile {
            request: request.clone(),
            reply: reply.clone(),
            meta: FixtureMeta {
                model_id: request.config.model_id.clone(),
                recorded_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            },
        };
        std::fs::create_dir_all(&self.dir).map_err(|e| LlmError::Store(e.to_string()))?;
        let mut text = serde_json::to_string_pretty(&file).map_err(|e| LlmError::Store(e.to_string()))?;
        text.push('\n');
        let path = self.path_for(&digest);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| LlmError::Store(format!("{}: {e}", path.display())))?;
        self.cache.write().unwrap().insert(digest, file);
        Ok(())
    }

    /// (hits, misses) of [`lookup`](Self::lookup) so far.
    pub fn stats(&self) -> (usize, usize) {
        use std::sync::atomic::Ordering;
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{BackendConfig, ChatMessage};

    fn req(user: &str) -> ChatRequest {
        ChatRequest::new(
            vec![ChatMessage::system("sys"), ChatMessage::user(user)],
            BackendConfig::prover("m"),
        )
    }

    #[test]
    fn record_then_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::open(dir.path());
        let r = req("hi");
        assert_eq!(store.lookup(&r).unwrap(), None);
        store.record(&r, &ChatMessage::assistant("hello")).unwrap();
        assert_eq!(store.lookup(&r).unwrap(), Some(ChatMessage::assistant("hello")));
        // a fresh handle reads from disk
        let again = FixtureStore::open(dir.path());
        assert_eq!(again.lookup(&r).unwrap(), Some(ChatMessage::assistant("hello")));
        assert_eq!(again.stats(), (1, 0));
        // first recording is kept
        store.record(&r, &ChatMessage::assistant("other")).unwrap();
        assert_eq!(again.lookup(&r).unwrap(), Some(ChatMessage::assistant("hello")));
    }

    #[test]
    fn collisions_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::open(dir.path());
        let r = req("a");
        store.record(&r, &ChatMessage::assistant("x")).unwrap();
        // plant a different request under r's digest
        let forged = FixtureFile {
            request: req("b"),
            reply: ChatMessage::assistant("y"),
            meta: FixtureMeta {
                model_id: "m".into(),
                recorded_at: "2025-01-01T00:00:00Z".into(),
            },
        };
        std::fs::write(dir.path().join(format!("{}.json", r.digest())), serde_json::to_string(&forged).unwrap()).unwrap();
        let fresh = FixtureStore::open(dir.path());
        assert!(matches!(fresh.lookup(&r), Err(LlmError::DigestCollision { .. })));
        assert!(matches!(
            fresh.record(&r, &ChatMessage::assistant("z")),
            Err(LlmError::DigestCollision { .. })
        ));
    }
}
