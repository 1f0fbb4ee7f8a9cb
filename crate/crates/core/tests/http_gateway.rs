//! The HTTP backend against a local chat-completions mock.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use mathcurate::curation::{Domain, PromptRecord};
use mathcurate::gateway::{BackendKind, Gateway, GeneratorConfig};
use serde_json::Value;

#[derive(Debug, Clone)]
struct Seen {
    authorization: Option<String>,
    body: Value,
}

/// Serves one canned `(status, body)` per connection, in order, and records
/// what each request carried.
fn mock(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut authorization = None;
            let mut length = 0usize;
            let mut line = String::new();
            loop {
                line.clear();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                if let Some((k, v)) = l.split_once(':') {
                    match k.to_ascii_lowercase().as_str() {
                        "authorization" => authorization = Some(v.trim().to_string()),
                        "content-length" => length = v.trim().parse().unwrap(),
                        _ => {}
                    }
                }
            }
            let mut raw = vec![0u8; length];
            reader.read_exact(&mut raw).unwrap();
            log.lock().unwrap().push(Seen { authorization, body: serde_json::from_slice(&raw).unwrap() });
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let mut stream = stream;
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, seen, handle)
}

fn completion(content: &str) -> String {
    serde_json::json!({"choices":[{"message":{"role":"assistant","content":content}}]}).to_string()
}

fn http_config(url: String, key_env: &str) -> GeneratorConfig {
    GeneratorConfig {
        endpoint_url: url,
        model_name: "policy-7b".into(),
        temperature: 0.0,
        max_output_tokens: 512,
        backend: BackendKind::Http,
        api_key_env: key_env.into(),
        retry_base_delay_ms: 1,
        max_in_flight: 1,
        ..GeneratorConfig::default()
    }
}

fn prompt() -> PromptRecord {
    PromptRecord::new("p1", "What is 2 + 3?", "fixture").with_domain(Domain::Math)
}

#[test]
fn sends_bearer_token_and_openai_body() {
    std::env::set_var("MOCK_KEY_OK", "s3cret");
    let (url, seen, handle) = mock(vec![(200, completion("2 + 3 = 5.\n\\boxed{5}"))]);
    let gateway = Gateway::new(http_config(url, "MOCK_KEY_OK")).unwrap();
    let cand = gateway.generate_solution(&prompt()).unwrap();
    handle.join().unwrap();
    assert_eq!(cand.text, "2 + 3 = 5.\n\\boxed{5}");
    assert_eq!(cand.problem_id, "p1");

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer s3cret"));
    let body = &seen[0].body;
    assert_eq!(body["model"], "policy-7b");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 512);
    assert_eq!(body["messages"][0]["role"], "user");
    let content = body["messages"][0]["content"].as_str().unwrap();
    assert!(content.starts_with("What is 2 + 3?\n"), "{content}");
    // the request key stays local
    assert!(body.get("key").is_none());
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (url, seen, handle) = mock(vec![
        (503, "{}".into()),
        (429, "{}".into()),
        (200, completion("\\boxed{5}")),
    ]);
    let gateway = Gateway::new(http_config(url, "MOCK_KEY_UNSET_A")).unwrap();
    let cand = gateway.generate_solution(&prompt()).unwrap();
    handle.join().unwrap();
    assert_eq!(cand.text, "\\boxed{5}");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen.iter().all(|s| s.authorization.is_none()));
}

#[test]
fn client_errors_fail_without_retry() {
    let (url, seen, handle) = mock(vec![(400, r#"{"error":"bad"}"#.into())]);
    let gateway = Gateway::new(http_config(url, "MOCK_KEY_UNSET_B")).unwrap();
    let failure = gateway.generate_solution(&prompt()).unwrap_err();
    handle.join().unwrap();
    assert_eq!(failure.attempts, 1);
    assert!(failure.error.contains("400"), "{}", failure.error);
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn http_backend_needs_an_endpoint() {
    let cfg = GeneratorConfig { backend: BackendKind::Http, ..GeneratorConfig::default() };
    assert!(Gateway::new(cfg).is_err());
}
