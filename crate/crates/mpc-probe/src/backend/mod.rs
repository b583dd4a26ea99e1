//! Model backends: per-token continuation log-probabilities and greedy
//! generation, behind one object-safe trait.
//!
//! The mock backend is fully deterministic and hash-driven; the HTTP backend
//! speaks the JSON wire contract (`POST /v1/logprobs`, `POST /v1/generate`)
//! and a stub server implementing that contract ships with the test harness.

mod http;
mod mock;
pub mod stub;

pub use http::{HttpBackend, RetryPolicy};
pub use mock::MockBackend;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scoring::LogprobResult;

pub trait Backend: Send + Sync {
    /// Stable identity string recorded in provenance and cache keys.
    fn id(&self) -> String;

    /// Per-token natural-log probabilities of `continuation` conditioned on
    /// `context`. Covers only the continuation tokens.
    fn continuation_logprobs(&self, context: &str, continuation: &str) -> Result<LogprobResult>;

    /// Greedy generation; the only supported decoding mode.
    fn generate(&self, prompt: &str, max_tokens: usize) -> Result<String>;
}

/// Serializable backend selection, recorded verbatim in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendDescriptor {
    Mock { seed: u64 },
    Http { endpoint: String },
}

impl BackendDescriptor {
    pub fn build(&self) -> Box<dyn Backend> {
        match self {
            BackendDescriptor::Mock { seed } => Box::new(MockBackend::new(*seed)),
            BackendDescriptor::Http { endpoint } => {
                Box::new(HttpBackend::new(endpoint.clone(), RetryPolicy::default()))
            }
        }
    }

    pub fn identity(&self) -> String {
        match self {
            BackendDescriptor::Mock { seed } => format!("mock-{seed}"),
            BackendDescriptor::Http { endpoint } => format!("http-{endpoint}"),
        }
    }
}
