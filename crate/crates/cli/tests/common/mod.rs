#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use fred::predictor::load_builtin;
use fred::text::tokenize;
use fred::{Prediction, Predictor};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn data(name: &str) -> PathBuf {
    repo_root().join("data").join(name)
}

pub fn fred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fred"))
        .args(args)
        .env_remove("FRED_AUTH_HEADER")
        .output()
        .expect("run fred")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// How the mock server misbehaves.
#[derive(Debug, Clone, Copy, Default)]
pub struct Faults {
    /// Answer this many `/predict` requests with HTTP 500 first.
    pub fail_first: usize,
    /// Return rows in reverse order.
    pub reverse_rows: bool,
    /// Answer malformed bodies with 200 and an empty batch.
    pub accept_malformed: bool,
    /// Answer every `/predict` with 500.
    pub always_fail: bool,
}

/// A model server speaking the prediction protocol, backed by the bundled
/// logistic sentiment model.
pub struct MockServer {
    pub url: String,
    pub predict_calls: Arc<AtomicUsize>,
}

struct Request {
    method: String,
    path: String,
    body: Vec<u8>,
}

fn read_request(stream: &mut TcpStream) -> Option<Request> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut length = 0;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).ok()?;
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((k, v)) = header.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    Some(Request { method, path, body })
}

fn respond(stream: &mut TcpStream, status: u16, body: &str) {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        _ => "Internal Server Error",
    };
    let _ = write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.flush();
}

impl MockServer {
    pub fn start(faults: Faults) -> MockServer {
        let model = load_builtin(&data("sentiment_model.json"), Some(&data("vectorizer.json"))).unwrap();
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&calls);
        let model: Arc<dyn Predictor> = Arc::from(model);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let model = Arc::clone(&model);
                let counter = Arc::clone(&counter);
                thread::spawn(move || {
                    let Some(req) = read_request(&mut stream) else { return };
                    match (req.method.as_str(), req.path.as_str()) {
                        ("GET", "/info") => respond(&mut stream, 200, r#"{"classes": ["negative", "positive"]}"#),
                        ("POST", "/predict") => {
                            let call = counter.fetch_add(1, Ordering::SeqCst);
                            if faults.always_fail || call < faults.fail_first {
                                respond(&mut stream, 500, r#"{"error": "unavailable"}"#);
                                return;
                            }
                            let parsed: Result<serde_json::Value, _> = serde_json::from_slice(&req.body);
                            let texts: Option<Vec<String>> = parsed
                                .ok()
                                .and_then(|v| serde_json::from_value(v["texts"].clone()).ok());
                            let Some(texts) = texts else {
                                if faults.accept_malformed {
                                    respond(&mut stream, 200, r#"{"probabilities": []}"#);
                                } else {
                                    respond(&mut stream, 400, r#"{"error": "malformed request"}"#);
                                }
                                return;
                            };
                            let docs: Vec<_> = texts.iter().map(|t| tokenize(t)).collect();
                            let mut rows: Vec<Vec<f64>> = model
                                .predict_batch(&docs)
                                .unwrap()
                                .into_iter()
                                .map(|p| match p {
                                    Prediction::Probabilities(r) => r,
                                    Prediction::Value(v) => vec![v],
                                })
                                .collect();
                            if faults.reverse_rows {
                                rows.reverse();
                            }
                            let body = serde_json::json!({ "probabilities": rows }).to_string();
                            respond(&mut stream, 200, &body);
                        }
                        _ => respond(&mut stream, 404, r#"{"error": "not found"}"#),
                    }
                });
            }
        });
        MockServer {
            url,
            predict_calls: calls,
        }
    }

    pub fn predict_calls(&self) -> usize {
        self.predict_calls.load(Ordering::SeqCst)
    }
}

/// An address nothing listens on.
pub fn dead_endpoint() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    url
}
