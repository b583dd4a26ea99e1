//! Conditional-perplexity scoring and candidate selection.
//!
//! A candidate continuation `r` given prompt `p` is scored by
//! `CPPL(r|p) = 1 / P(r|p)^(1/|r|)`, computed as
//! `exp(-(sum of token logprobs)/|tokens|)`; the two forms are algebraically
//! identical. The selected candidate is the CPPL argmin, and the CPPL vector
//! induces a probability distribution over candidates via
//! `P(r_k) = (1/CPPL(r_k)) / sum_i (1/CPPL(r_i))`.

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::prompt::AssembledPrompt;

/// Per-token natural-log probabilities of a continuation. Covers only the
/// continuation, never the prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobResult {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
}

/// Slack for backends that report logprobs a hair above zero.
const LOGPROB_TOLERANCE: f64 = 1e-9;

impl LogprobResult {
    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        if self.tokens.len() != self.logprobs.len() {
            return Err(Error::Backend {
                backend: "logprob-result".to_owned(),
                message: format!(
                    "token/logprob length mismatch: {} vs {}",
                    self.tokens.len(),
                    self.logprobs.len()
                ),
            });
        }
        if let Some(bad) = self
            .logprobs
            .iter()
            .find(|lp| !lp.is_finite() || **lp > LOGPROB_TOLERANCE)
        {
            return Err(Error::Backend {
                backend: "logprob-result".to_owned(),
                message: format!("logprob {bad} outside (-inf, 0]"),
            });
        }
        Ok(())
    }

    pub fn mean_logprob(&self) -> f64 {
        self.logprobs.iter().sum::<f64>() / self.logprobs.len() as f64
    }
}

/// Conditional perplexity of one scored continuation.
pub fn cppl(lr: &LogprobResult) -> f64 {
    (-lr.mean_logprob()).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate_id: usize,
    pub cppl: f64,
    pub normalized_prob: f64,
}

/// Scores every candidate appended after the begin-of-output marker of
/// `prompt`. All-or-nothing: a candidate that stays unscored aborts the
/// whole instance, never producing a partial verdict.
pub fn score_candidates(
    prompt: &AssembledPrompt,
    candidates: &[String],
    backend: &dyn Backend,
    instance_label: &str,
) -> Result<Vec<CandidateScore>> {
    if candidates.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 candidates, got {}",
            candidates.len()
        )));
    }
    let context = prompt.scoring_context();
    let mut cppls = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let lr = backend
            .continuation_logprobs(&context, candidate)
            .and_then(|lr| {
                lr.validate()?;
                Ok(lr)
            })
            .map_err(|e| Error::InstanceAborted {
                instance: instance_label.to_owned(),
                reason: e.to_string(),
            })?;
        cppls.push(cppl(&lr));
    }

    let inverse_sum: f64 = cppls.iter().map(|c| 1.0 / c).sum();
    Ok(cppls
        .into_iter()
        .enumerate()
        .map(|(candidate_id, c)| CandidateScore {
            candidate_id,
            cppl: c,
            normalized_prob: (1.0 / c) / inverse_sum,
        })
        .collect())
}

/// Argmin CPPL; exact ties go to the lowest candidate index.
pub fn select(scores: &[CandidateScore]) -> usize {
    let mut best = 0usize;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.cppl < scores[best].cppl {
            best = i;
        }
    }
    scores[best].candidate_id
}
