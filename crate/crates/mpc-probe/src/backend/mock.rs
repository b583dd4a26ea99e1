//! Deterministic hash-driven backend for tests and desk-scale runs.
//!
//! Token log-probabilities are derived from a SHA-256 of (seed, trailing
//! context window, token) and mapped into [-6, -0.1], so every run of the
//! pipeline is reproducible byte-for-byte on any host.

use sha2::{Digest, Sha256};

use super::Backend;
use crate::error::{Error, Result};
use crate::scoring::LogprobResult;

/// Characters of trailing context that condition each token's logprob.
/// Wide enough to reach past the fixed instruction/begin-of-output suffix
/// into the instance-specific transcript, so scores vary per instance.
const CONTEXT_WINDOW: usize = 512;
const LOGPROB_MIN: f64 = -6.0;
const LOGPROB_MAX: f64 = -0.1;

const TOPICS: [&str; 8] = [
    "package installation",
    "network configuration",
    "kernel upgrade",
    "display drivers",
    "file permissions",
    "disk partitioning",
    "audio troubleshooting",
    "system backup",
];

const TOPIC_EXPLANATIONS: [&str; 5] = [
    "the users compare possible solutions",
    "one user walks another through the steps",
    "the participants share relevant commands",
    "several suggestions are exchanged before one works",
    "the issue is narrowed down step by step",
];

const ADJECTIVES: [&str; 8] = [
    "helpful", "curious", "persistent", "impatient", "methodical", "friendly", "terse",
    "skeptical",
];

const ADJECTIVE_EXPLANATIONS: [&str; 5] = [
    "the speaker answers questions from the other users",
    "the speaker asks for clarification several times",
    "the speaker keeps trying alternative fixes",
    "the speaker pushes for a quick resolution",
    "the speaker proceeds one step at a time",
];

const FILLER_WORDS: [&str; 12] = [
    "the", "system", "reports", "that", "a", "restart", "resolves", "it", "after", "updating",
    "packages", "cleanly",
];

#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend { seed }
    }

    fn hash64(&self, window: &str, salt: &str) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(window.as_bytes());
        hasher.update([0x1f]);
        hasher.update(salt.as_bytes());
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
    }

    fn pick<'a>(&self, window: &str, salt: &str, list: &[&'a str]) -> &'a str {
        list[(self.hash64(window, salt) % list.len() as u64) as usize]
    }
}

fn tail(s: &str, n: usize) -> &str {
    let mut start = s.len().saturating_sub(n);
    while !s.is_char_boundary(start) {
        start += 1;
    }
    &s[start..]
}

impl Backend for MockBackend {
    fn id(&self) -> String {
        format!("mock-{}", self.seed)
    }

    fn continuation_logprobs(&self, context: &str, continuation: &str) -> Result<LogprobResult> {
        let tokens: Vec<&str> = continuation.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        let mut state = context.to_owned();
        let mut logprobs = Vec::with_capacity(tokens.len());
        for tok in &tokens {
            let window = tail(&state, CONTEXT_WINDOW);
            let raw = self.hash64(window, tok);
            let frac = raw as f64 / u64::MAX as f64;
            logprobs.push(LOGPROB_MAX + (LOGPROB_MIN - LOGPROB_MAX) * frac);
            state.push(' ');
            state.push_str(tok);
        }
        Ok(LogprobResult {
            tokens: tokens.into_iter().map(str::to_owned).collect(),
            logprobs,
        })
    }

    fn generate(&self, prompt: &str, max_tokens: usize) -> Result<String> {
        let window = tail(prompt, CONTEXT_WINDOW).to_owned();
        let dashed = prompt.contains("dashed");

        // Shape the output after the task the prompt asks for, so the
        // structured parsers downstream see conformant text.
        let (entries, items, explanations): (usize, &[&str], &[&str]) =
            if prompt.contains("adjective") {
                (5, &ADJECTIVES, &ADJECTIVE_EXPLANATIONS)
            } else if prompt.contains("topic") {
                (3, &TOPICS, &TOPIC_EXPLANATIONS)
            } else {
                let n = max_tokens.clamp(1, 12);
                let words: Vec<&str> = (0..n)
                    .map(|i| self.pick(&window, &format!("w{i}"), &FILLER_WORDS))
                    .collect();
                return Ok(words.join(" "));
            };

        let mut lines = Vec::with_capacity(entries);
        let mut used = Vec::new();
        for i in 0..entries {
            // Skip over already-used items so entries stay distinct.
            let mut item = self.pick(&window, &format!("item{i}"), items);
            let mut bump = 0usize;
            while used.contains(&item) {
                bump += 1;
                item = self.pick(&window, &format!("item{i}.{bump}"), items);
            }
            used.push(item);
            let explanation = self.pick(&window, &format!("expl{i}"), explanations);
            if dashed {
                lines.push(format!("- {item}: {explanation}"));
            } else {
                lines.push(format!("{}. {item}: {explanation}", i + 1));
            }
        }
        Ok(lines.join("\n"))
    }
}
