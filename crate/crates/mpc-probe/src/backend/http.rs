//! HTTP backend speaking the JSON wire contract:
//!
//! ```text
//! POST /v1/logprobs  {"context": str, "continuation": str}
//!                    -> {"tokens": [str], "logprobs": [float], "log_base": "e"}
//! POST /v1/generate  {"prompt": str, "max_tokens": int, "greedy": true}
//!                    -> {"text": str}
//! ```
//!
//! Adapters may map this contract onto existing inference servers; logprobs
//! are converted to natural log when the server declares base "2" or "10".

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::Backend;
use crate::error::{Error, Result};
use crate::scoring::LogprobResult;

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(100),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LogprobsRequest<'a> {
    pub context: &'a str,
    pub continuation: &'a str,
}

#[derive(Debug, Deserialize)]
struct LogprobsResponse {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
    log_base: String,
}

#[derive(Debug, Serialize)]
pub struct GenerateRequest<'a> {
    pub prompt: &'a str,
    pub max_tokens: usize,
    pub greedy: bool,
}

#[derive(Debug, Deserialize)]
struct GenerateResponse {
    text: String,
}

pub struct HttpBackend {
    endpoint: String,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
}

impl HttpBackend {
    pub fn new(endpoint: String, retry: RetryPolicy) -> Self {
        let endpoint = endpoint.trim_end_matches('/').to_owned();
        HttpBackend {
            endpoint,
            client: reqwest::blocking::Client::new(),
            retry,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Backend {
            backend: self.id(),
            message: message.into(),
        }
    }

    /// POSTs `body` with exponential backoff on transport errors and 5xx
    /// responses. 4xx responses fail immediately.
    fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<R> {
        let url = format!("{}{}", self.endpoint, path);
        let mut last = String::new();
        for attempt in 0..self.retry.attempts {
            if attempt > 0 {
                std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
            }
            match self.client.post(&url).json(body).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.json::<R>().map_err(|e| self.err(format!("bad response body: {e}")));
                    }
                    let text = resp.text().unwrap_or_default();
                    if status.is_client_error() {
                        return Err(self.err(format!("{status}: {text}")));
                    }
                    last = format!("{status}: {text}");
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(self.err(format!("gave up after {} attempts: {last}", self.retry.attempts)))
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http-{}", self.endpoint)
    }

    fn continuation_logprobs(&self, context: &str, continuation: &str) -> Result<LogprobResult> {
        if continuation.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        let resp: LogprobsResponse = self.post_json(
            "/v1/logprobs",
            &LogprobsRequest { context, continuation },
        )?;
        if resp.tokens.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        if resp.tokens.len() != resp.logprobs.len() {
            return Err(self.err(format!(
                "token/logprob length mismatch: {} vs {}",
                resp.tokens.len(),
                resp.logprobs.len()
            )));
        }
        let factor = match resp.log_base.as_str() {
            "e" => 1.0,
            "2" => std::f64::consts::LN_2,
            "10" => std::f64::consts::LN_10,
            other => return Err(self.err(format!("unsupported log_base {other:?}"))),
        };
        let logprobs = resp.logprobs.iter().map(|lp| lp * factor).collect();
        Ok(LogprobResult {
            tokens: resp.tokens,
            logprobs,
        })
    }

    fn generate(&self, prompt: &str, max_tokens: usize) -> Result<String> {
        let resp: GenerateResponse = self.post_json(
            "/v1/generate",
            &GenerateRequest {
                prompt,
                max_tokens,
                greedy: true,
            },
        )?;
        Ok(resp.text)
    }
}
