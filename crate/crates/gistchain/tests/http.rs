//! Wire-format checks against a throwaway local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};

use gistchain::gateway::{
    EmbedBackend, Gateway, GatewayError, HttpChat, HttpEmbed, HttpSettings, Message, RetryPolicy, Role,
};

struct Request {
    line: String,
    headers: Vec<(String, String)>,
    body: Value,
}

/// Serve one canned `(status, body)` per connection, in order.
fn serve(replies: Vec<(u16, String)>) -> (String, JoinHandle<()>, Arc<Mutex<Vec<Request>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let mut headers = Vec::new();
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end();
                if h.is_empty() {
                    break;
                }
                let (k, v) = h.split_once(':').unwrap();
                headers.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
            }
            let len: usize = headers
                .iter()
                .find(|(k, _)| k == "content-length")
                .map(|(_, v)| v.parse().unwrap())
                .unwrap_or(0);
            let mut raw = vec![0; len];
            reader.read_exact(&mut raw).unwrap();
            log.lock().unwrap().push(Request {
                line: line.trim_end().to_string(),
                headers,
                body: serde_json::from_slice(&raw).unwrap_or(Value::Null),
            });
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (base, handle, seen)
}

fn settings(endpoint: &str) -> HttpSettings {
    HttpSettings {
        endpoint: endpoint.into(),
        model: "m-test".into(),
        api_key: Some("secret".into()),
        timeout: Duration::from_secs(10),
    }
}

fn fast_retry(max_retries: u32) -> RetryPolicy {
    RetryPolicy {
        max_retries,
        base_delay_ms: 1,
        max_delay_ms: 2,
    }
}

#[test]
fn chat_request_shape_and_usage() {
    let reply = json!({
        "choices": [{"message": {"role": "assistant", "content": "hello"}}],
        "usage": {"prompt_tokens": 12, "completion_tokens": 3}
    });
    let (base, handle, seen) = serve(vec![(200, reply.to_string())]);
    let gw = Gateway::new().with_chat(Role::Central, Arc::new(HttpChat::new(settings(&base))), fast_retry(0));
    let c = gw
        .complete(Role::Central, &[Message::system("sys"), Message::user("hi")])
        .unwrap();
    handle.join().unwrap();
    assert_eq!(c.text, "hello");
    assert_eq!((c.usage.prompt_tokens, c.usage.completion_tokens), (12, 3));
    assert_eq!(gw.ledger().totals().reasoning_tokens, 15);

    let seen = seen.lock().unwrap();
    let req = &seen[0];
    assert_eq!(req.line, "POST /v1/chat/completions HTTP/1.1");
    assert!(req
        .headers
        .iter()
        .any(|(k, v)| k == "authorization" && v == "Bearer secret"));
    assert_eq!(req.body["model"], "m-test");
    assert_eq!(
        req.body["messages"],
        json!([{"role": "system", "content": "sys"}, {"role": "user", "content": "hi"}])
    );
}

#[test]
fn transient_statuses_are_retried() {
    let ok = json!({"choices": [{"message": {"content": "ok"}}]}).to_string();
    let (base, handle, seen) = serve(vec![(429, "{}".into()), (503, "{}".into()), (200, ok)]);
    let gw = Gateway::new().with_chat(Role::Auxiliary, Arc::new(HttpChat::new(settings(&base))), fast_retry(3));
    let c = gw.complete(Role::Auxiliary, &[Message::user("x")]).unwrap();
    handle.join().unwrap();
    assert_eq!(c.text, "ok");
    assert_eq!(seen.lock().unwrap().len(), 3);
    let totals = gw.ledger().totals();
    assert_eq!(totals.failed_attempts, 2);
    // missing usage counts as zero
    assert_eq!(totals.processing_tokens, 0);
}

#[test]
fn client_errors_are_not_retried() {
    let (base, handle, seen) = serve(vec![(400, "{}".into())]);
    let gw = Gateway::new().with_chat(Role::Central, Arc::new(HttpChat::new(settings(&base))), fast_retry(3));
    let err = gw.complete(Role::Central, &[Message::user("x")]).unwrap_err();
    handle.join().unwrap();
    assert!(matches!(err, GatewayError::Provider { attempts: 1, .. }), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn retries_exhaust_into_a_provider_error() {
    let (base, handle, _) = serve(vec![(500, "{}".into()), (500, "{}".into())]);
    let gw = Gateway::new().with_chat(Role::Central, Arc::new(HttpChat::new(settings(&base))), fast_retry(1));
    let err = gw.complete(Role::Central, &[Message::user("x")]).unwrap_err();
    handle.join().unwrap();
    assert!(matches!(err, GatewayError::Provider { attempts: 2, .. }), "{err:?}");
}

#[test]
fn embeddings_are_reordered_by_index() {
    let reply = json!({
        "data": [
            {"index": 1, "embedding": [0.0, 2.0]},
            {"index": 0, "embedding": [3.0, 0.0]}
        ],
        "usage": {"prompt_tokens": 4}
    });
    let (base, handle, seen) = serve(vec![(200, reply.to_string())]);
    let backend = HttpEmbed::new(settings(&base));
    let (vectors, usage) = backend.embed(&["a".into(), "b".into()]).unwrap();
    handle.join().unwrap();
    assert_eq!(vectors, vec![vec![3.0, 0.0], vec![0.0, 2.0]]);
    assert_eq!(usage.prompt_tokens, 4);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].line, "POST /v1/embeddings HTTP/1.1");
    assert_eq!(seen[0].body["input"], json!(["a", "b"]));
}
