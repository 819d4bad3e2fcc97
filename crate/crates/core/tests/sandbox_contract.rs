//! The runner contract as seen from the client side, using shell scripts
//! that stand in for the real runner.

use std::process::Command;
use std::sync::Arc;

use ecp_core::sandbox::{
    LocalPythonSandbox, ProcessSandbox, ReplaySandbox, SandboxClient, SandboxError, SandboxRequest, SandboxResult,
    SandboxStatus, SCHEMA_VERSION,
};
use serde_json::Value;

fn runner(script: &str) -> ProcessSandbox {
    ProcessSandbox::new(vec!["sh".into(), "-c".into(), script.into()])
}

const OK_RESULT: &str = r#"{"v":1,"status":"ok","answers":["(1, 7)","(7, 1)"],"truncated":false,"stderr_excerpt":"","wall_time_s":0.25}"#;

#[test]
fn exit_zero_yields_the_result() {
    let r = runner(&format!("cat > /dev/null; echo '{OK_RESULT}'"))
        .run(&SandboxRequest::new("print(1)"))
        .unwrap();
    assert_eq!(r.status, SandboxStatus::Ok);
    assert_eq!(r.answers, ["(1, 7)", "(7, 1)"]);
    assert_eq!(r.v, SCHEMA_VERSION);
}

#[test]
fn request_reaches_the_runner_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let seen = dir.path().join("req.json");
    let script = format!("cat > '{}'; echo '{OK_RESULT}'", seen.display());
    let mut req = SandboxRequest::new("for i in range(3):\n    print(i)\n");
    req.timeout_s = 7.5;
    req.max_answers = 12;
    runner(&script).run(&req).unwrap();
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&seen).unwrap()).unwrap();
    assert_eq!(v["v"], 1);
    assert_eq!(v["source"], req.source);
    assert_eq!(v["timeout_s"], 7.5);
    assert_eq!(v["max_answers"], 12);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["v", "source", "timeout_s", "max_answers", "max_output_bytes", "memory_mb"]);
    let back: SandboxRequest = serde_json::from_value(v).unwrap();
    assert_eq!(back, req);
}

#[test]
fn exit_two_is_a_protocol_error() {
    let err = runner("cat > /dev/null; echo 'unsupported version' >&2; exit 2")
        .run(&SandboxRequest::new("print(1)"))
        .unwrap_err();
    match err {
        SandboxError::Protocol(msg) => assert_eq!(msg, "unsupported version"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn exit_three_is_an_internal_fault() {
    let err = runner("cat > /dev/null; echo boom >&2; exit 3")
        .run(&SandboxRequest::new("print(1)"))
        .unwrap_err();
    match err {
        SandboxError::Internal { code, stderr } => {
            assert_eq!(code, Some(3));
            assert!(stderr.contains("boom"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_or_out_of_contract_results_are_rejected() {
    let req = SandboxRequest::new("print(1)");
    let err = runner("cat > /dev/null; echo 'not json'").run(&req).unwrap_err();
    assert!(matches!(err, SandboxError::BadResult(_)), "{err:?}");

    let mut small = req.clone();
    small.max_answers = 1;
    let err = runner(&format!("cat > /dev/null; echo '{OK_RESULT}'")).run(&small).unwrap_err();
    assert!(matches!(err, SandboxError::BadResult(_)), "{err:?}");

    let early_timeout = r#"{"v":1,"status":"timeout","answers":[],"truncated":false,"stderr_excerpt":"","wall_time_s":0.5}"#;
    let err = runner(&format!("cat > /dev/null; echo '{early_timeout}'")).run(&req).unwrap_err();
    assert!(matches!(err, SandboxError::BadResult(_)), "{err:?}");
}

#[test]
fn invalid_requests_never_reach_the_runner() {
    let dir = tempfile::tempdir().unwrap();
    let marker = dir.path().join("ran");
    let sb = runner(&format!("touch '{}'; echo '{OK_RESULT}'", marker.display()));
    let mut req = SandboxRequest::new("print(1)");
    req.v = 2;
    assert!(matches!(sb.run(&req), Err(SandboxError::InvalidRequest(_))));
    assert!(!marker.exists());
}

#[test]
fn result_schema_round_trips() {
    let r: SandboxResult = serde_json::from_str(OK_RESULT).unwrap();
    let again: SandboxResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(r, again);
    let with_code = r#"{"v":1,"status":"runtime_error","answers":[],"truncated":false,"stderr_excerpt":"Traceback","wall_time_s":0.1,"exit_code":1}"#;
    let r: SandboxResult = serde_json::from_str(with_code).unwrap();
    assert_eq!((r.status, r.exit_code), (SandboxStatus::RuntimeError, Some(1)));
}

#[test]
fn replay_sandbox_records_then_serves_offline() {
    let dir = tempfile::tempdir().unwrap();
    let upstream: Arc<dyn SandboxClient> = Arc::new(runner(&format!("cat > /dev/null; echo '{OK_RESULT}'")));
    let req = SandboxRequest::new("print(7)");
    let recorded = ReplaySandbox::recording(dir.path(), upstream).run(&req).unwrap();
    let replayed = ReplaySandbox::replay(dir.path()).run(&req).unwrap();
    assert_eq!(recorded, replayed);
    let miss = ReplaySandbox::replay(dir.path()).run(&SandboxRequest::new("print(8)"));
    assert!(matches!(miss, Err(SandboxError::MissingFixture { .. })));
}

fn has_python() -> bool {
    Command::new("python3").arg("--version").output().is_ok()
}

#[test]
fn local_python_enforces_the_deadline_and_caps() {
    if !has_python() {
        eprintln!("python3 not found; skipping");
        return;
    }
    let sb = LocalPythonSandbox::default();
    let mut spin = SandboxRequest::new("while True:\n    pass\n");
    spin.timeout_s = 2.0;
    let t = std::time::Instant::now();
    let r = sb.run(&spin).unwrap();
    assert_eq!(r.status, SandboxStatus::Timeout);
    assert!(t.elapsed().as_secs_f64() <= 3.0, "{:?}", t.elapsed());

    let r = sb.run(&SandboxRequest::new("for i in range(150):\n    print(i)\n")).unwrap();
    assert_eq!((r.answers.len(), r.truncated), (100, true));

    let r = sb
        .run(&SandboxRequest::new("import socket\nsocket.socket()\n"))
        .unwrap();
    assert_eq!(r.status, SandboxStatus::RuntimeError);
}
