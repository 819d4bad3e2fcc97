//! Live compiler integration: one fresh compiler process per check, on a
//! single file inside a prepared project (dependencies prebuilt).

use std::path::PathBuf;
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::diagnostics::parse_diagnostics;
use super::verifier::{LeanError, LeanVerdict, LeanVerifier};
use crate::process::run_with_timeout;

pub const PINNED_VERSION: &str = "4.23.0";
pub const ROOT_ENV: &str = "ECP_LEAN_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolchainConfig {
    /// Project directory the checked file is placed in.
    pub root: PathBuf,
    /// Command prefix; the file path is appended.
    pub command: Vec<String>,
    pub version: String,
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        Self {
            root: PathBuf::from("lean-project"),
            command: vec!["lake".into(), "env".into(), "lean".into()],
            version: PINNED_VERSION.into(),
        }
    }
}

impl ToolchainConfig {
    /// Configuration from `ECP_LEAN_ROOT`, if set.
    pub fn from_env() -> Option<Self> {
        let root = std::env::var_os(ROOT_ENV)?;
        Some(Self {
            root: PathBuf::from(root),
            ..Self::default()
        })
    }
}

#[derive(Debug, Clone)]
pub struct LeanToolchain {
    config: ToolchainConfig,
}

impl LeanToolchain {
    /// Fails with [`LeanError::ToolchainMissing`] unless the project
    /// directory exists and the compiler answers `--version`.
    pub fn new(config: ToolchainConfig) -> Result<Self, LeanError> {
        if !config.root.is_dir() {
            return Err(LeanError::ToolchainMissing(format!(
                "project directory {} does not exist",
                config.root.display()
            )));
        }
        let chain = Self { config };
        let version = chain.version()?;
        if !version.contains(&chain.config.version) {
            log::warn!("toolchain reports `{}`, pinned version is {}", version.trim(), chain.config.version);
        }
        Ok(chain)
    }

    pub fn version(&self) -> Result<String, LeanError> {
        let mut cmd = self.command()?;
        cmd.arg("--version");
        let out = run_with_timeout(cmd, None, Duration::from_secs(60))
            .map_err(|e| LeanError::ToolchainMissing(e.to_string()))?;
        match out.status {
            Some(s) if s.success() => Ok(out.stdout),
            _ => Err(LeanError::ToolchainMissing(format!("`--version` failed: {}", out.stderr.trim()))),
        }
    }

    fn command(&self) -> Result<Command, LeanError> {
        let (program, args) = self
            .config
            .command
            .split_first()
            .ok_or_else(|| LeanError::ToolchainMissing("empty compiler command".into()))?;
        let mut cmd = Command::new(program);
        cmd.args(args).current_dir(&self.config.root);
        Ok(cmd)
    }
}

impl LeanVerifier for LeanToolchain {
    fn check(&self, source: &str, timeout: Duration) -> Result<LeanVerdict, LeanError> {
        let file = tempfile::Builder::new()
            .prefix("ecp_check_")
            .suffix(".lean")
            .tempfile_in(&self.config.root)?;
        std::fs::write(file.path(), source)?;
        let mut cmd = self.command()?;
        cmd.arg(file.path());
        let out = run_with_timeout(cmd, None, timeout).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => LeanError::ToolchainMissing(e.to_string()),
            _ => LeanError::Io(e),
        })?;
        let elapsed_s = out.elapsed.as_secs_f64();
        if out.timed_out {
            return Ok(LeanVerdict::timeout(elapsed_s));
        }
        let failed = !out.status.is_some_and(|s| s.success());
        let combined = format!("{}{}", out.stdout, out.stderr);
        let diagnostics = parse_diagnostics(&combined, failed);
        let success = !failed && !diagnostics.iter().any(|d| d.is_error());
        Ok(LeanVerdict {
            success,
            diagnostics,
            elapsed_s,
            timed_out: false,
        })
    }
}
