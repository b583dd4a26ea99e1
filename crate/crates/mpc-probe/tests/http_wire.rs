//! Wire-contract tests: the HTTP backend against the bundled stub server,
//! recorded-exchange request bodies, log-base conversion and retry.

use std::fs;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;

use mpc_probe::backend::stub::StubServer;
use mpc_probe::backend::{Backend, HttpBackend, MockBackend, RetryPolicy};

fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn updating() -> bool {
    std::env::var("UPDATE_GOLDENS").is_ok_and(|v| !v.is_empty() && v != "0")
}

fn check_golden(rel: &str, actual: &str) {
    let path = manifest_path(rel);
    if updating() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden {rel} ({e}); run with UPDATE_GOLDENS=1"));
    assert_eq!(expected, actual, "golden mismatch: {rel}");
}

#[test]
fn http_backend_matches_mock_through_the_stub() {
    let seed = 42;
    let server = StubServer::start(seed).unwrap();
    let http = HttpBackend::new(server.endpoint(), RetryPolicy::default());
    let mock = MockBackend::new(seed);

    let context = "[INST]<<SYS>> sys <</SYS>> input [/INST] The addressee of the next message is ";
    let continuation = "[BENNY]";
    let via_http = http.continuation_logprobs(context, continuation).unwrap();
    let direct = mock.continuation_logprobs(context, continuation).unwrap();
    assert_eq!(via_http.tokens, direct.tokens);
    assert_eq!(via_http.logprobs, direct.logprobs);

    let gen_http = http.generate("write the three main topics as a numbered list", 64).unwrap();
    let gen_direct = mock.generate("write the three main topics as a numbered list", 64).unwrap();
    assert_eq!(gen_http, gen_direct);
}

#[test]
fn recorded_logprobs_request_matches_the_wire_spec() {
    let server = StubServer::start(1).unwrap();
    let http = HttpBackend::new(server.endpoint(), RetryPolicy::default());
    http.continuation_logprobs("ctx text", "cand text").unwrap();

    let recorded = server.recorded_requests();
    assert_eq!(recorded.len(), 1);
    assert_eq!(recorded[0].path, "/v1/logprobs");
    check_golden("tests/goldens/http_logprobs_request.json", &recorded[0].body);

    // The body is exactly the two-field JSON object of the contract.
    let value: serde_json::Value = serde_json::from_str(&recorded[0].body).unwrap();
    let obj = value.as_object().unwrap();
    assert_eq!(obj.len(), 2);
    assert_eq!(obj["context"], "ctx text");
    assert_eq!(obj["continuation"], "cand text");

    http.generate("a prompt", 16).unwrap();
    let recorded = server.recorded_requests();
    assert_eq!(recorded[1].path, "/v1/generate");
    let value: serde_json::Value = serde_json::from_str(&recorded[1].body).unwrap();
    let obj = value.as_object().unwrap();
    assert_eq!(obj.len(), 3);
    assert_eq!(obj["prompt"], "a prompt");
    assert_eq!(obj["max_tokens"], 16);
    assert_eq!(obj["greedy"], true);
}

/// One-shot server returning canned responses, for paths the stub never
/// takes (foreign log bases, transient 5xx).
fn canned_server(responses: Vec<String>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        for body in responses {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut buf = [0u8; 65536];
            let mut head = Vec::new();
            loop {
                let n = stream.read(&mut buf).unwrap_or(0);
                if n == 0 {
                    break;
                }
                head.extend_from_slice(&buf[..n]);
                if head.windows(4).any(|w| w == b"\r\n\r\n") {
                    break;
                }
            }
            let _ = stream.write_all(body.as_bytes());
        }
    });
    format!("http://{addr}")
}

#[test]
fn log_base_two_is_converted_to_natural_log() {
    let payload = r#"{"tokens":["a","b"],"logprobs":[-1.0,-2.0],"log_base":"2"}"#;
    let response = format!(
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let endpoint = canned_server(vec![response]);
    let http = HttpBackend::new(endpoint, RetryPolicy::default());
    let lr = http.continuation_logprobs("c", "a b").unwrap();
    assert!((lr.logprobs[0] - (-std::f64::consts::LN_2)).abs() < 1e-12);
    assert!((lr.logprobs[1] - (-2.0 * std::f64::consts::LN_2)).abs() < 1e-12);
}

#[test]
fn unsupported_log_base_is_an_error() {
    let payload = r#"{"tokens":["a"],"logprobs":[-1.0],"log_base":"7"}"#;
    let response = format!(
        "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let endpoint = canned_server(vec![response]);
    let http = HttpBackend::new(endpoint, RetryPolicy::default());
    let err = http.continuation_logprobs("c", "a").unwrap_err();
    assert!(err.to_string().contains("log_base"), "{err}");
}

#[test]
fn transient_5xx_is_retried() {
    let payload = r#"{"tokens":["a"],"logprobs":[-1.0],"log_base":"e"}"#;
    let fail = "HTTP/1.1 500 Internal Server Error\r\nContent-Length: 0\r\nConnection: close\r\n\r\n".to_owned();
    let ok = format!(
        "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let endpoint = canned_server(vec![fail, ok]);
    let http = HttpBackend::new(
        endpoint,
        RetryPolicy {
            attempts: 3,
            base_delay: std::time::Duration::from_millis(5),
        },
    );
    let lr = http.continuation_logprobs("c", "a").unwrap();
    assert_eq!(lr.logprobs, vec![-1.0]);
}

#[test]
fn unreachable_backend_gives_up_after_bounded_attempts() {
    // Reserved port with nothing listening.
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let http = HttpBackend::new(
        endpoint,
        RetryPolicy {
            attempts: 2,
            base_delay: std::time::Duration::from_millis(1),
        },
    );
    let err = http.continuation_logprobs("c", "a").unwrap_err();
    assert!(err.to_string().contains("gave up after 2 attempts"), "{err}");
}

#[test]
fn empty_continuation_never_reaches_the_wire() {
    let server = StubServer::start(3).unwrap();
    let http = HttpBackend::new(server.endpoint(), RetryPolicy::default());
    assert!(matches!(
        http.continuation_logprobs("ctx", ""),
        Err(mpc_probe::Error::EmptyContinuation)
    ));
    assert!(server.recorded_requests().is_empty());
}
