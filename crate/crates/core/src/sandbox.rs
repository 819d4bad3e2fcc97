//! Client side of the enumeration sandbox.
//!
//! The runner is an external program speaking one JSON request on stdin and
//! one JSON result on stdout (schema version 1). Exit code 0 means a result
//! was produced, 2 a malformed request, 3 an internal fault.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::digest_of;
use crate::process::run_with_timeout;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT_S: f64 = 60.0;
pub const DEFAULT_MAX_ANSWERS: usize = 100;
pub const DEFAULT_MAX_OUTPUT_BYTES: usize = 1 << 20;
pub const DEFAULT_MEMORY_MB: u64 = 1024;
const STDERR_EXCERPT_BYTES: usize = 2000;
const GRACE: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxRequest {
    pub v: u32,
    pub source: String,
    pub timeout_s: f64,
    pub max_answers: usize,
    pub max_output_bytes: usize,
    pub memory_mb: u64,
}

impl SandboxRequest {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            v: SCHEMA_VERSION,
            source: source.into(),
            timeout_s: DEFAULT_TIMEOUT_S,
            max_answers: DEFAULT_MAX_ANSWERS,
            max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
            memory_mb: DEFAULT_MEMORY_MB,
        }
    }

    pub fn validate(&self) -> Result<(), SandboxError> {
        let bad = |m: &str| Err(SandboxError::InvalidRequest(m.to_string()));
        if self.v != SCHEMA_VERSION {
            return bad("unsupported schema version");
        }
        if self.source.trim().is_empty() {
            return bad("source is empty");
        }
        if !(self.timeout_s > 0.0) {
            return bad("timeout_s must be positive");
        }
        if self.max_answers == 0 || self.max_output_bytes == 0 || self.memory_mb == 0 {
            return bad("limits must be positive");
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandboxStatus {
    Ok,
    Timeout,
    RuntimeError,
    OutputOverflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxResult {
    pub v: u32,
    pub status: SandboxStatus,
    pub answers: Vec<String>,
    pub truncated: bool,
    pub stderr_excerpt: String,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
}

impl SandboxResult {
    /// Contract checks on a result produced for `request`.
    pub fn check_against(&self, request: &SandboxRequest) -> Result<(), String> {
        if self.v != SCHEMA_VERSION {
            return Err(format!("result schema version {}", self.v));
        }
        if self.answers.len() > request.max_answers {
            return Err(format!("{} answers exceed the cap of {}", self.answers.len(), request.max_answers));
        }
        if self.status == SandboxStatus::Timeout && self.wall_time_s < request.timeout_s {
            return Err("timeout reported before the deadline".into());
        }
        Ok(())
    }

    /// Feedback text for the model after a run.
    pub fn render(&self) -> String {
        let status = match self.status {
            SandboxStatus::Ok => "ok",
            SandboxStatus::Timeout => "timeout",
            SandboxStatus::RuntimeError => "runtime_error",
            SandboxStatus::OutputOverflow => "output_overflow",
        };
        let mut out = format!("status: {status}\n");
        if let Some(code) = self.exit_code {
            out.push_str(&format!("exit code: {code}\n"));
        }
        out.push_str(&format!("answers ({}{}):\n", self.answers.len(), if self.truncated { ", truncated" } else { "" }));
        for a in &self.answers {
            out.push_str(a);
            out.push('\n');
        }
        if !self.stderr_excerpt.is_empty() {
            out.push_str("stderr:\n");
            out.push_str(&self.stderr_excerpt);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("invalid sandbox request: {0}")]
    InvalidRequest(String),
    #[error("could not start sandbox runner: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("sandbox runner rejected the request: {0}")]
    Protocol(String),
    #[error("sandbox runner fault (exit {code:?}): {stderr}")]
    Internal { code: Option<i32>, stderr: String },
    #[error("sandbox runner produced an invalid result: {0}")]
    BadResult(String),
    #[error("missing sandbox fixture for request digest {digest}")]
    MissingFixture { digest: String },
    #[error("sandbox fixture store: {0}")]
    Store(String),
}

pub trait SandboxClient: Send + Sync {
    fn run(&self, request: &SandboxRequest) -> Result<SandboxResult, SandboxError>;
}

impl<S: SandboxClient + ?Sized> SandboxClient for Arc<S> {
    fn run(&self, request: &SandboxRequest) -> Result<SandboxResult, SandboxError> {
        (**self).run(request)
    }
}

/// Talks to an external runner over stdin/stdout.
pub struct ProcessSandbox {
    command: Vec<String>,
}

impl ProcessSandbox {
    pub fn new(command: Vec<String>) -> Self {
        assert!(!command.is_empty(), "runner command is empty");
        Self { command }
    }
}

impl SandboxClient for ProcessSandbox {
    fn run(&self, request: &SandboxRequest) -> Result<SandboxResult, SandboxError> {
        request.validate()?;
        let mut cmd = Command::new(&self.command[0]);
        cmd.args(&self.command[1..]);
        let payload = serde_json::to_vec(request).expect("request serializes");
        // the runner enforces the program deadline itself; this is a backstop
        let backstop = Duration::from_secs_f64(request.timeout_s) + GRACE * 5;
        let out = run_with_timeout(cmd, Some(&payload), backstop)?;
        if out.timed_out {
            return Err(SandboxError::Internal {
                code: None,
                stderr: "runner did not exit".into(),
            });
        }
        let code = out.status.and_then(|s| s.code());
        match code {
            Some(0) => {
                let result: SandboxResult =
                    serde_json::from_str(out.stdout.trim()).map_err(|e| SandboxError::BadResult(e.to_string()))?;
                result.check_against(request).map_err(SandboxError::BadResult)?;
                Ok(result)
            }
            Some(2) => Err(SandboxError::Protocol(out.stderr.trim().to_string())),
            _ => Err(SandboxError::Internal {
                code,
                stderr: excerpt(&out.stderr),
            }),
        }
    }
}

fn excerpt(s: &str) -> String {
    if s.len() <= STDERR_EXCERPT_BYTES {
        return s.to_string();
    }
    let mut cut = s.len() - STDERR_EXCERPT_BYTES;
    while !s.is_char_boundary(cut) {
        cut += 1;
    }
    format!("...{}", &s[cut..])
}

/// Runs programs directly with a local Python interpreter: wall-clock limit,
/// answer and byte caps, sockets disabled by a prelude. No memory limit and
/// no isolation; meant for development and fixture generation.
pub struct LocalPythonSandbox {
    interpreter: String,
}

const PRELUDE: &str = "import socket as _s\n\
def _no_net(*a, **k):\n    raise OSError('network disabled in sandbox')\n\
_s.socket = _no_net\n_s.create_connection = _no_net\ndel _s\n";

impl LocalPythonSandbox {
    pub fn new(interpreter: impl Into<String>) -> Self {
        Self {
            interpreter: interpreter.into(),
        }
    }
}

impl Default for LocalPythonSandbox {
    fn default() -> Self {
        Self::new("python3")
    }
}

impl SandboxClient for LocalPythonSandbox {
    fn run(&self, request: &SandboxRequest) -> Result<SandboxResult, SandboxError> {
        request.validate()?;
        let dir = tempfile::tempdir()?;
        let script = dir.path().join("main.py");
        std::fs::write(&script, format!("{PRELUDE}{}", request.source))?;
        let mut cmd = Command::new(&self.interpreter);
        cmd.arg("-I").arg(&script).current_dir(dir.path());
        let out = run_with_timeout(cmd, None, Duration::from_secs_f64(request.timeout_s))?;
        Ok(finish_result(request, &out.stdout, &out.stderr, out.elapsed.as_secs_f64(), out.timed_out, out.status.and_then(|s| s.code())))
    }
}

/// Apply the answer and byte caps to raw program output.
pub fn finish_result(
    request: &SandboxRequest,
    stdout: &str,
    stderr: &str,
    wall_time_s: f64,
    timed_out: bool,
    exit_code: Option<i32>,
) -> SandboxResult {
    let overflow = stdout.len() > request.max_output_bytes;
    let mut visible = stdout;
    if overflow {
        let mut cut = request.max_output_bytes;
        while !stdout.is_char_boundary(cut) {
            cut -= 1;
        }
        // drop a partial trailing line
        visible = &stdout[..cut];
        if let Some(nl) = visible.rfind('\n') {
            visible = &visible[..=nl];
        }
    }
    let lines: Vec<&str> = visible.lines().filter(|l| !l.trim().is_empty()).collect();
    let truncated = overflow || lines.len() > request.max_answers;
    let answers = lines
        .into_iter()
        .take(request.max_answers)
        .map(|l| l.trim_end().to_string())
        .collect();
    let status = if timed_out {
        SandboxStatus::Timeout
    } else if exit_code != Some(0) {
        SandboxStatus::RuntimeError
    } else if overflow {
        SandboxStatus::OutputOverflow
    } else {
        SandboxStatus::Ok
    };
    SandboxResult {
        v: SCHEMA_VERSION,
        status,
        answers,
        truncated,
        stderr_excerpt: excerpt(stderr),
        wall_time_s,
        exit_code: if status == SandboxStatus::RuntimeError { exit_code } else { None },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SandboxFixture {
    request: SandboxRequest,
    result: SandboxResult,
}

/// Directory of `<request digest>.json` files holding `{request, result}`.
/// Serves stored results and, when an upstream client is attached, records
/// the ones it is missing.
pub struct ReplaySandbox {
    dir: PathBuf,
    upstream: Option<Arc<dyn SandboxClient>>,
    cache: RwLock<BTreeMap<String, SandboxResult>>,
    write_lock: Mutex<()>,
}

impl ReplaySandbox {
    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            upstream: None,
            cache: RwLock::new(BTreeMap::new()),
            write_lock: Mutex::new(()),
        }
    }

    pub fn recording(dir: impl Into<PathBuf>, upstream: Arc<dyn SandboxClient>) -> Self {
        Self {
            upstream: Some(upstream),
            ..Self::replay(dir)
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lookup(&self, digest: &str) -> Result<Option<SandboxResult>, SandboxError> {
        if let Some(r) = self.cache.read().unwrap().get(digest) {
            return Ok(Some(r.clone()));
        }
        let path = self.dir.join(format!("{digest}.json"));
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(SandboxError::Store(format!("{}: {e}", path.display()))),
        };
        let fx: SandboxFixture =
            serde_json::from_str(&text).map_err(|e| SandboxError::Store(format!("{}: {e}", path.display())))?;
        self.cache.write().unwrap().insert(digest.to_string(), fx.result.clone());
        Ok(Some(fx.result))
    }

    fn store(&self, request: &SandboxRequest, result: &SandboxResult) -> Result<(), SandboxError> {
        let _guard = self.write_lock.lock().unwrap();
        let digest = request.digest();
        std::fs::create_dir_all(&self.dir)?;
        let fx = SandboxFixture {
            request: request.clone(),
            result: result.clone(),
        };
        let mut text = serde_json::to_string_pretty(&fx).expect("fixture serializes");
        text.push('\n');
        std::fs::write(self.dir.join(format!("{digest}.json")), text)?;
        self.cache.write().unwrap().insert(digest, result.clone());
        Ok(())
    }
}

impl SandboxClient for ReplaySandbox {
    fn run(&self, request: &SandboxRequest) -> Result<SandboxResult, SandboxError> {
        request.validate()?;
        let digest = request.digest();
        if let Some(r) = self.lookup(&digest)? {
            return Ok(r);
        }
        match &self.upstream {
            None => Err(SandboxError::MissingFixture { digest }),
            Some(up) => {
                let result = up.run(request)?;
                self.store(request, &result)?;
                Ok(result)
            }
        }
    }
}
