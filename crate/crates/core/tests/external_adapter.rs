use std::path::Path;

use mtpose_core::adapter::{spawn_adapter, AdapterConfig, AdapterError, OracleAdapter, Prediction};
use mtpose_core::dataset::Category;
use mtpose_core::synthetic::synthetic_hand;
use mtpose_core::testgen::{params_for, TcId, TestCaseDescriptor};
use mtpose_core::transforms::OcclusionArtifact;

fn sh(script: &str, timeout_ms: u64) -> AdapterConfig {
    AdapterConfig::External {
        command: vec!["sh".into(), "-c".into(), script.into()],
        working_dir: None,
        timeout_ms,
    }
}

fn case(id: &str) -> TestCaseDescriptor {
    TestCaseDescriptor {
        id: id.into(),
        tc_id: TcId::Baseline,
        mr_id: None,
        source_id: id.into(),
        category: Category::WithoutObject,
        params: params_for(TcId::Baseline, &OcclusionArtifact::default(), 20),
        image: format!("{id}.png"),
        keypoints: synthetic_hand(244, 3),
    }
}

fn spawn_err(cfg: &AdapterConfig) -> AdapterError {
    match spawn_adapter(cfg) {
        Ok(_) => panic!("spawn unexpectedly succeeded"),
        Err(e) => e,
    }
}

#[test]
fn echo_adapter_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = mtpose_core::synthetic::write_synthetic_dataset(&dir.path().join("data"), 2, 64).unwrap();
    let manifest = mtpose_core::dataset::load_manifest(&manifest).unwrap();
    let config = mtpose_core::testgen::SuiteConfig {
        preprocess: mtpose_core::testgen::Preprocess::None,
        ..Default::default()
    };
    let suite = mtpose_core::testgen::materialize_suite(&manifest, &config, &dir.path().join("suite")).unwrap();

    let cfg = AdapterConfig::External {
        command: vec![env!("CARGO_BIN_EXE_mtpose-echo-adapter").into(), "--model".into(), "ref".into()],
        working_dir: None,
        timeout_ms: 10_000,
    };
    let mut adapter = spawn_adapter(&cfg).unwrap();
    assert_eq!(adapter.model_id(), "ref");
    for c in suite.cases() {
        let got = adapter.predict(c, &suite.image_path(c)).unwrap();
        assert_eq!(got, OracleAdapter::prediction(c));
    }
}

#[test]
fn version_mismatch_reports_stderr() {
    let err = spawn_err(&sh(
        r#"read l; echo 'old adapter' >&2; sleep 0.3; echo '{"type":"hello","version":2,"model":"x"}'; sleep 1"#,
        5_000,
    ));
    match err {
        AdapterError::VersionMismatch { expected, found, diagnostics } => {
            assert_eq!((expected, found), (1, 2));
            assert!(diagnostics.contains("old adapter"));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn handshake_timeout() {
    let err = spawn_err(&sh("sleep 5", 200));
    assert!(matches!(err, AdapterError::HandshakeTimeout { timeout_ms: 200, .. }), "{err}");
}

#[test]
fn early_exit_carries_diagnostics() {
    let err = spawn_err(&sh("echo 'model weights missing' >&2; exit 4", 5_000));
    match err {
        AdapterError::Exited { diagnostics } => assert!(diagnostics.contains("model weights missing")),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn non_hello_reply_is_protocol_error() {
    let err = spawn_err(&sh(r#"read l; echo '{"type":"result","id":"a","detected":false}'; sleep 1"#, 5_000));
    assert!(matches!(err, AdapterError::Protocol { .. }), "{err}");
}

#[test]
fn slow_request_times_out_and_late_reply_is_discarded() {
    let script = r#"
        read l; echo '{"type":"hello","version":1,"model":"slow"}'
        read l; sleep 1; echo '{"type":"result","id":"a","detected":false}'
        read l; echo '{"type":"result","id":"b","detected":false}'
        sleep 1
    "#;
    let mut adapter = spawn_adapter(&sh(script, 800)).unwrap();
    assert_eq!(adapter.model_id(), "slow");
    let err = adapter.predict(&case("a"), Path::new("/tmp/a.png")).unwrap_err();
    assert!(matches!(err, AdapterError::Timeout { ref id, .. } if id == "a"), "{err}");
    let next = adapter.predict(&case("b"), Path::new("/tmp/b.png")).unwrap();
    assert_eq!(next, Prediction::NoDetection);
}

#[test]
fn mismatched_id_is_protocol_error() {
    let script = r#"
        read l; echo '{"type":"hello","version":1}'
        read l; echo '{"type":"result","id":"zzz","detected":false}'
        sleep 1
    "#;
    let mut adapter = spawn_adapter(&sh(script, 2_000)).unwrap();
    assert_eq!(adapter.model_id(), "external");
    let err = adapter.predict(&case("a"), Path::new("/tmp/a.png")).unwrap_err();
    assert!(matches!(err, AdapterError::Protocol { .. }), "{err}");
}

#[test]
fn malformed_response_is_protocol_error() {
    let script = r#"
        read l; echo '{"type":"hello","version":1}'
        read l; echo 'this is not json'
        sleep 1
    "#;
    let mut adapter = spawn_adapter(&sh(script, 2_000)).unwrap();
    let err = adapter.predict(&case("a"), Path::new("/tmp/a.png")).unwrap_err();
    assert!(matches!(err, AdapterError::Protocol { .. }), "{err}");
}

#[test]
fn child_exit_mid_run() {
    let script = r#"read l; echo '{"type":"hello","version":1}'; read l; echo 'segfault' >&2; exit 139"#;
    let mut adapter = spawn_adapter(&sh(script, 2_000)).unwrap();
    match adapter.predict(&case("a"), Path::new("/tmp/a.png")).unwrap_err() {
        AdapterError::Exited { diagnostics } => assert!(diagnostics.contains("segfault")),
        other => panic!("unexpected {other}"),
    }
}
