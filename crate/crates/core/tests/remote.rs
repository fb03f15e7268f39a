use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use augdem_core::predictor::{
    dual_order_predict, remote_complete, PredictError, PredictionQuery, PromptLanguage,
    PromptTemplate, RemoteBackend, RemoteEndpointConfig,
};
use augdem_core::{Choice, Demographics, Proposal};

struct Reply {
    status: u16,
    body: String,
}

fn completion(text: &str) -> Reply {
    Reply {
        status: 200,
        body: serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]})
            .to_string(),
    }
}

fn status(code: u16) -> Reply {
    Reply {
        status: code,
        body: "{}".into(),
    }
}

struct Captured {
    headers: Vec<String>,
    body: serde_json::Value,
}

/// Serves the scripted replies one connection at a time and records requests.
fn serve(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for reply in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_owned();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Captured {
                headers,
                body: serde_json::from_slice(&body).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.status,
                reply.body.len(),
                reply.body
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn config(url: &str) -> RemoteEndpointConfig {
    let mut c = RemoteEndpointConfig::new(url, "tuned-model");
    c.backoff_base_ms = 5;
    c.backoff_cap_ms = 20;
    c.timeout_ms = 2_000;
    c
}

#[test]
fn returns_completion_text_with_zero_temperature() {
    let (url, seen) = serve(vec![completion("A")]);
    assert_eq!(remote_complete(&config(&url), "prompt text").unwrap(), "A");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].body["temperature"], 0);
    assert_eq!(seen[0].body["model"], "tuned-model");
    assert_eq!(seen[0].body["messages"][0]["content"], "prompt text");
    assert!(seen[0].headers[0].starts_with("POST /v1/chat/completions"));
}

#[test]
fn retries_rate_limits_and_server_errors() {
    let (url, seen) = serve(vec![status(429), status(503), completion("B")]);
    assert_eq!(remote_complete(&config(&url), "p").unwrap(), "B");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_max_retries() {
    let (url, _) = serve(vec![status(500), status(500)]);
    let mut c = config(&url);
    c.max_retries = 1;
    assert!(matches!(
        remote_complete(&c, "p"),
        Err(PredictError::BackendUnavailable(_))
    ));
}

#[test]
fn unauthorized_is_not_retried() {
    let (url, seen) = serve(vec![status(401)]);
    assert!(matches!(
        remote_complete(&config(&url), "p"),
        Err(PredictError::Auth(_))
    ));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn token_comes_from_named_environment_variable() {
    let (url, seen) = serve(vec![completion("A")]);
    let mut c = config(&url);
    c.auth_env = Some("AUGDEM_REMOTE_TEST_TOKEN".into());
    // SAFETY: no other test reads or writes this variable
    unsafe { std::env::set_var("AUGDEM_REMOTE_TEST_TOKEN", "s3cret") };
    remote_complete(&c, "p").unwrap();
    let seen = seen.lock().unwrap();
    assert!(seen[0]
        .headers
        .iter()
        .any(|h| h == "authorization: Bearer s3cret" || h == "Authorization: Bearer s3cret"));
}

#[test]
fn silent_server_times_out() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hold = thread::spawn(move || {
        let mut held = Vec::new();
        for _ in 0..2 {
            held.push(listener.accept().unwrap().0);
        }
        thread::sleep(std::time::Duration::from_millis(500));
    });
    let mut c = config(&url);
    c.timeout_ms = 100;
    c.max_retries = 1;
    assert!(matches!(
        remote_complete(&c, "p"),
        Err(PredictError::BackendUnavailable(_))
    ));
    hold.join().unwrap();
}

#[test]
fn backend_parses_both_orders() {
    // first call names the second proposal's text, second call answers "A"
    let (url, _) = serve(vec![completion("I prefer: more parks"), completion("A")]);
    let backend = RemoteBackend::new(
        config(&url),
        PromptTemplate::default_for(PromptLanguage::English),
    );
    let q = PredictionQuery::new(
        None,
        Demographics::default(),
        Proposal::new(1, "fewer cars", None),
        Proposal::new(2, "more parks", None),
    )
    .unwrap();
    let r = dual_order_predict(&backend, &q, 0).unwrap();
    assert!(r.consistent_across_orders);
    assert_eq!(r.chosen, Choice::B);
    assert_eq!(r.raw_responses.len(), 2);
}
