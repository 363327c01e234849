//! The HTTP backend against a local stub server that replies with a fixed
//! sequence of statuses, one connection per request.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde_json::Value;
use tabreason::{HttpBackend, HttpConfig};
use tabreason_core::backend::{Counted, Message};
use tabreason_core::{Backend, BackendError, FinishReason, GenerationRequest};

const COMPLETION: &str = r#"{"choices":[{"message":{"role":"assistant","content":"The final answer is 2."},"finish_reason":"stop"}]}"#;

/// Serves one connection per scripted `(status, body)` and returns the
/// request bodies it received.
fn serve(script: Vec<(u16, &'static str)>) -> (String, JoinHandle<Vec<Value>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut length = 0usize;
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            assert!(request_line.starts_with("POST /v1/chat/completions"), "{request_line}");
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some((name, value)) = line.split_once(':') {
                    if name.eq_ignore_ascii_case("content-length") {
                        length = value.trim().parse().unwrap();
                    }
                }
            }
            let mut payload = vec![0; length];
            reader.read_exact(&mut payload).unwrap();
            bodies.push(serde_json::from_slice(&payload).unwrap());
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let mut stream = reader.into_inner();
            stream.write_all(reply.as_bytes()).unwrap();
            stream.flush().unwrap();
        }
        bodies
    });
    (base_url, handle)
}

fn backend(base_url: String) -> Counted<HttpBackend> {
    Counted::new(HttpBackend::new(HttpConfig {
        base_url,
        model: "stub-model".into(),
        api_key_env: "TABREASON_TEST_UNSET_KEY".into(),
        max_attempts: 3,
        timeout: Duration::from_secs(10),
        initial_backoff: Duration::from_millis(1),
    }))
}

fn request() -> GenerationRequest {
    GenerationRequest {
        messages: vec![Message::user("How many medals?")],
        max_new_tokens: 64,
        temperature: 0.0,
        stop: None,
    }
}

#[test]
fn retries_server_errors_and_counts_one_call() {
    let (url, server) = serve(vec![(500, "{}"), (503, "{}"), (200, COMPLETION)]);
    let backend = backend(url);
    let result = backend.generate(&request()).unwrap();
    assert_eq!(result.text, "The final answer is 2.");
    assert_eq!(result.finish_reason, FinishReason::Stop);
    assert_eq!(backend.calls(), 1);
    let bodies = server.join().unwrap();
    assert_eq!(bodies.len(), 3);
    assert_eq!(bodies[2]["model"], "stub-model");
    assert_eq!(bodies[2]["max_tokens"], 64);
    assert_eq!(bodies[2]["messages"][0]["content"], "How many medals?");
}

#[test]
fn client_errors_fail_without_retry() {
    let (url, server) = serve(vec![(400, r#"{"error":"bad"}"#)]);
    let backend = backend(url);
    match backend.generate(&request()) {
        Err(BackendError::BackendUnavailable(msg)) => assert!(msg.contains("400"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(backend.calls(), 0);
    assert_eq!(server.join().unwrap().len(), 1);
}

#[test]
fn gives_up_after_max_attempts() {
    let (url, server) = serve(vec![(500, "{}"), (429, "{}"), (500, "{}")]);
    let backend = backend(url);
    assert!(matches!(backend.generate(&request()), Err(BackendError::BackendUnavailable(_))));
    assert_eq!(backend.calls(), 0);
    assert_eq!(server.join().unwrap().len(), 3);
}

#[test]
fn invalid_requests_never_reach_the_server() {
    let backend = backend("http://127.0.0.1:9".into());
    let bad = GenerationRequest { max_new_tokens: 0, ..request() };
    assert!(matches!(backend.generate(&bad), Err(BackendError::InvalidRequest(_))));
}
