use std::time::{Duration, Instant};

use super::*;
use crate::promptkit::{EXAMPLE_INPUT, EXAMPLE_OUTPUT, SYSTEM_TEXT};
use crate::tracer::AblationMode;

#[path = "../../tests/common/stub.rs"]
mod stub;

use stub::{completion, Canned, Stub};

fn bundle(debug_info: &str) -> PromptBundle {
    PromptBundle {
        system_text: SYSTEM_TEXT.into(),
        example_input: EXAMPLE_INPUT.into(),
        example_output: EXAMPLE_OUTPUT.into(),
        debug_info: debug_info.into(),
        mode: AblationMode::Full,
        token_estimate: 0,
    }
}

fn key(b: u32, d: u32) -> AttemptKey {
    AttemptKey { bug_id: "bug-001".into(), b, d }
}

fn http(stub: &Stub, max_retries: u32, timeout_ms: u64) -> HttpGenerator {
    let cfg = GeneratorConfig {
        request_timeout_ms: timeout_ms,
        max_retries,
        backoff_base_ms: 5,
        ..GeneratorConfig::http(&stub.url)
    };
    HttpGenerator::new(cfg, "test-key".into())
}

#[test]
fn canned_completion_is_returned_verbatim() {
    let text = "// FIXED_FUNCTION\nfn f() {\n    return 1;\n}\n";
    let stub = Stub::start(vec![Canned::ok(completion(text))]);
    let out = http(&stub, 0, 5_000).generate(&bundle("dbg"), &key(0, 0)).unwrap();
    assert_eq!(out, text);

    let reqs = stub.requests.lock().unwrap();
    assert_eq!(reqs.len(), 1);
    assert!(reqs[0].request_line.starts_with("POST /v1/chat/completions"));
    assert_eq!(reqs[0].header("authorization"), Some("Bearer test-key"));
    assert_eq!(reqs[0].header("content-type"), Some("application/json"));
    assert_eq!(reqs[0].body, chat_payload(&bundle("dbg"), "gpt-4o", 1.0));
}

#[test]
fn rate_limit_is_retried() {
    let stub = Stub::start(vec![Canned::status(429), Canned::status(429), Canned::ok(completion("done"))]);
    let out = http(&stub, 3, 5_000).generate(&bundle("x"), &key(0, 0)).unwrap();
    assert_eq!(out, "done");
    assert_eq!(stub.hits(), 3);
}

#[test]
fn retries_are_bounded() {
    let stub = Stub::start(vec![Canned::status(503)]);
    let err = http(&stub, 2, 5_000).generate(&bundle("x"), &key(0, 0)).unwrap_err();
    assert_eq!(err, GenerationError::BadStatus { code: 503 });
    assert_eq!(stub.hits(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = Stub::start(vec![Canned::status(401)]);
    let err = http(&stub, 3, 5_000).generate(&bundle("x"), &key(0, 0)).unwrap_err();
    assert_eq!(err, GenerationError::BadStatus { code: 401 });
    assert_eq!(stub.hits(), 1);
}

#[test]
fn slow_endpoint_times_out() {
    let stub = Stub::start(vec![Canned::ok(completion("late")).slow(1_000)]);
    let start = Instant::now();
    let err = http(&stub, 3, 100).generate(&bundle("x"), &key(0, 0)).unwrap_err();
    assert_eq!(err, GenerationError::Timeout);
    assert!(start.elapsed() < Duration::from_millis(900));
    assert_eq!(stub.hits(), 1);
}

#[test]
fn malformed_bodies() {
    for body in ["not json", r#"{"choices": []}"#, r#"{"choices": [{"message": {"content": 7}}]}"#] {
        let stub = Stub::start(vec![Canned::ok(body)]);
        let err = http(&stub, 3, 5_000).generate(&bundle("x"), &key(0, 0)).unwrap_err();
        assert!(matches!(err, GenerationError::MalformedResponse { .. }), "{body}: {err:?}");
        assert_eq!(stub.hits(), 1);
    }
}

#[test]
fn connection_refused_is_transport() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    drop(listener);
    let cfg = GeneratorConfig { max_retries: 1, backoff_base_ms: 1, ..GeneratorConfig::http(url) };
    let err = HttpGenerator::new(cfg, "k".into()).generate(&bundle("x"), &key(0, 0)).unwrap_err();
    assert!(matches!(err, GenerationError::Transport { .. }));
}

#[test]
fn payload_is_byte_stable() {
    let a = chat_payload(&bundle("same"), "m", 1.0);
    assert_eq!(a, chat_payload(&bundle("same"), "m", 1.0));
    assert!(a.starts_with(r#"{"model":"m","temperature":1.0,"messages":[{"role":"system","content":"#));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    let roles: Vec<&str> = v["messages"].as_array().unwrap().iter().map(|m| m["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["system", "user", "assistant", "user"]);
    assert_eq!(v["messages"][3]["content"], "same");
    assert_eq!(prompt_hash(&bundle("same"), "m", 1.0).len(), 64);
    assert_ne!(prompt_hash(&bundle("same"), "m", 1.0), prompt_hash(&bundle("other"), "m", 1.0));
}

#[test]
fn script_lookup_and_miss() {
    let plan = parse_script(
        r#"{"entries": [
            {"bug": "bug-001", "b": 0, "d": 0, "output": "first"},
            {"bug": "bug-001", "b": 1, "output": "any depth"},
            {"bug": "bug-002", "b": 0, "d": 0, "output": "other"}
        ]}"#,
    )
    .unwrap();
    assert_eq!(plan.entries.len(), 3);
    let g = ScriptedGenerator::new(plan);
    assert_eq!(g.generate(&bundle(""), &key(0, 0)).unwrap(), "first");
    assert_eq!(g.generate(&bundle(""), &key(1, 3)).unwrap(), "any depth");
    assert_eq!(g.generate(&bundle(""), &key(0, 0)).unwrap(), g.generate(&bundle(""), &key(0, 0)).unwrap());
    assert_eq!(
        g.generate(&bundle(""), &key(2, 0)).unwrap_err(),
        GenerationError::ScriptMiss { bug_id: "bug-001".into(), b: 2, d: 0 }
    );
}

#[test]
fn script_default_and_requirements() {
    let plan = parse_script(
        r#"{"default": "fallback", "entries": [
            {"bug": "*", "requires": ["Local Variable", "Branch"], "output": "traced"}
        ]}"#,
    )
    .unwrap();
    let g = ScriptedGenerator::new(plan);
    assert_eq!(g.generate(&bundle("-> Local Variable x\n-> Branch (c)"), &key(4, 2)).unwrap(), "traced");
    assert_eq!(g.generate(&bundle("-> Local Variable x"), &key(4, 2)).unwrap(), "fallback");
}

#[test]
fn script_errors() {
    let dup = r#"{"entries": [
        {"bug": "a", "b": 0, "d": 0, "output": "x"},
        {"bug": "a", "b": 0, "d": 0, "output": "y"}
    ]}"#;
    assert!(matches!(parse_script(dup), Err(ScriptError::Duplicate { index: 1, .. })));
    match parse_script("{\n  \"entries\": [\n    {\"bug\": }\n  ]\n}") {
        Err(ScriptError::Syntax { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_script(r#"{"entries": [{"bug": "a", "output": "x", "extra": 1}]}"#), Err(ScriptError::Syntax { .. })));
    assert!(matches!(load_script(std::path::Path::new("/no/such/plan.json")), Err(ScriptError::Io { .. })));
}

#[test]
fn config_validation() {
    assert!(GeneratorConfig::scripted("p.json").validate().is_ok());
    assert_eq!(GeneratorConfig { temperature: 2.5, ..GeneratorConfig::default() }.validate(), Err(ConfigError::Temperature(2.5)));
    assert_eq!(GeneratorConfig { kind: GeneratorKind::HttpChat, ..GeneratorConfig::default() }.validate(), Err(ConfigError::MissingEndpoint));
    assert_eq!(GeneratorConfig::default().validate(), Err(ConfigError::MissingScript));
    let d = GeneratorConfig::default();
    assert_eq!((d.temperature, d.model_name.as_str()), (1.0, "gpt-4o"));
}
