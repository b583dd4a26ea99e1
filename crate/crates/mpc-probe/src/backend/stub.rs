//! Minimal HTTP stub server implementing the logprob/generate wire contract
//! on top of [`MockBackend`]. Ships with the test harness so the HTTP client
//! path can be exercised without a real inference server.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, MockBackend};
use crate::error::{Error, Result};

/// One recorded request: path plus raw body bytes as received.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub path: String,
    pub body: String,
}

pub struct StubServer {
    addr: String,
    stop: Arc<AtomicBool>,
    requests: Arc<Mutex<Vec<RecordedRequest>>>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds to an ephemeral localhost port and serves until dropped.
    pub fn start(seed: u64) -> Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?.to_string();
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(Mutex::new(Vec::new()));

        let backend = MockBackend::new(seed);
        let stop_flag = Arc::clone(&stop);
        let recorded = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let _ = handle_connection(stream, &backend, &recorded);
            }
        });

        Ok(StubServer {
            addr,
            stop,
            requests,
            handle: Some(handle),
        })
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn recorded_requests(&self) -> Vec<RecordedRequest> {
        self.requests.lock().expect("request log poisoned").clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(&self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

#[derive(Deserialize)]
struct LogprobsBody {
    context: String,
    continuation: String,
}

#[derive(Deserialize)]
struct GenerateBody {
    prompt: String,
    max_tokens: usize,
    #[allow(dead_code)]
    greedy: bool,
}

fn handle_connection(
    mut stream: TcpStream,
    backend: &MockBackend,
    recorded: &Mutex<Vec<RecordedRequest>>,
) -> Result<()> {
    let (path, body) = read_request(&mut stream)?;
    recorded
        .lock()
        .expect("request log poisoned")
        .push(RecordedRequest {
            path: path.clone(),
            body: body.clone(),
        });

    let (status, payload) = match path.as_str() {
        "/v1/logprobs" => match serde_json::from_str::<LogprobsBody>(&body) {
            Ok(req) => match backend.continuation_logprobs(&req.context, &req.continuation) {
                Ok(lr) => (
                    "200 OK",
                    json!({"tokens": lr.tokens, "logprobs": lr.logprobs, "log_base": "e"}),
                ),
                Err(e) => ("422 Unprocessable Entity", json!({"error": e.to_string()})),
            },
            Err(e) => ("400 Bad Request", json!({"error": e.to_string()})),
        },
        "/v1/generate" => match serde_json::from_str::<GenerateBody>(&body) {
            Ok(req) => match backend.generate(&req.prompt, req.max_tokens) {
                Ok(text) => ("200 OK", json!({"text": text})),
                Err(e) => ("422 Unprocessable Entity", json!({"error": e.to_string()})),
            },
            Err(e) => ("400 Bad Request", json!({"error": e.to_string()})),
        },
        _ => ("404 Not Found", json!({"error": "unknown endpoint"})),
    };

    let body = payload.to_string();
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes())?;
    stream.flush()?;
    Ok(())
}

/// Reads one HTTP/1.1 request with a Content-Length framed body.
fn read_request(stream: &mut TcpStream) -> Result<(String, String)> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Err(Error::CorpusRead("connection closed mid-request".into()));
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_subsequence(&buf, b"\r\n\r\n") {
            break pos + 4;
        }
        if buf.len() > 1 << 20 {
            return Err(Error::CorpusRead("oversized request head".into()));
        }
    };

    let head = String::from_utf8_lossy(&buf[..header_end]).into_owned();
    let mut lines = head.lines();
    let request_line = lines.next().unwrap_or_default();
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_owned();
    let content_length = lines
        .filter_map(|l| l.split_once(':'))
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.trim().parse::<usize>().ok())
        .unwrap_or(0);

    let mut body = buf[header_end..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            break;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    body.truncate(content_length);
    Ok((path, String::from_utf8_lossy(&body).into_owned()))
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}
