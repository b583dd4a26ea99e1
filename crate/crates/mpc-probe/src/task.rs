//! Task instance materialization from diagnostic conversations.
//!
//! RS: pick the true final message against one distractor drawn from the
//! final turns of the same diagnostic dataset. AR: pick the final turn's
//! addressee among the conversation's user tags plus a dummy tag that never
//! occurs in the conversation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::{Conversation, UserId, TAG_POOL};
use crate::diagnostic::DiagnosticDataset;
use crate::error::{Error, Result};

/// Outside the 6-tag anonymization pool, so it can never collide.
pub const DEFAULT_DUMMY_TAG: &str = "[JORDAN]";

const DISTRACTOR_ATTEMPTS: usize = 64;

/// Binary response-selection instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsInstance {
    pub conversation_id: String,
    pub context: Conversation,
    pub next_speaker_tag: String,
    /// Exactly two response texts in seeded-shuffle order.
    pub candidates: Vec<String>,
    pub gold_index: usize,
    /// Conversation id the distractor was drawn from.
    pub distractor_provenance: String,
}

/// Addressee-recognition instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArInstance {
    pub conversation_id: String,
    pub context: Conversation,
    pub next_speaker_tag: String,
    /// User tags in pool order, dummy last: `user_count + 1` candidates.
    pub candidates: Vec<String>,
    pub gold: String,
}

/// Per-instance RNG derived from the run seed and the conversation id, so
/// instances are reproducible independently of iteration order.
fn instance_rng(seed: u64, conversation_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(conversation_id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Builds the RS instance for `conv`, sampling the distractor uniformly from
/// the other conversations of `pool` and resampling (bounded) on string
/// equality with the true response.
pub fn build_rs_instance(
    conv: &Conversation,
    pool: &DiagnosticDataset,
    rng_seed: u64,
) -> Result<RsInstance> {
    let truth = conv
        .turns
        .last()
        .ok_or_else(|| Error::InvalidConfig("conversation has no turns".to_owned()))?
        .text
        .clone();
    let others: Vec<(&str, &str)> = pool
        .entries
        .iter()
        .filter(|e| e.conversation.id != conv.id)
        .filter_map(|e| {
            e.conversation
                .turns
                .last()
                .map(|t| (e.conversation.id.as_str(), t.text.as_str()))
        })
        .collect();
    if others.is_empty() {
        return Err(Error::DistractorUnavailable);
    }

    let mut rng = instance_rng(rng_seed, &conv.id);
    let mut picked: Option<(&str, &str)> = None;
    for _ in 0..DISTRACTOR_ATTEMPTS {
        let (id, text) = others[rng.random_range(0..others.len())];
        if text != truth {
            picked = Some((id, text));
            break;
        }
    }
    let Some((distractor_id, distractor)) = picked else {
        return Err(Error::DistractorUnavailable);
    };

    let truth_first: bool = rng.random();
    let (candidates, gold_index) = if truth_first {
        (vec![truth, distractor.to_owned()], 0)
    } else {
        (vec![distractor.to_owned(), truth], 1)
    };

    Ok(RsInstance {
        conversation_id: conv.id.clone(),
        context: conv.context(),
        next_speaker_tag: TAG_POOL[0].to_owned(),
        candidates,
        gold_index,
        distractor_provenance: distractor_id.to_owned(),
    })
}

/// Builds the AR instance for an anonymized `conv`: candidates are the
/// conversation's user tags in pool order plus `dummy_tag` last.
pub fn build_ar_instance(conv: &Conversation, dummy_tag: &str) -> Result<ArInstance> {
    let final_turn = conv
        .turns
        .last()
        .ok_or_else(|| Error::InvalidConfig("conversation has no turns".to_owned()))?;
    let dummy = UserId::new(dummy_tag)?;
    if conv.users.contains(&dummy) {
        return Err(Error::DummyCollision(dummy_tag.to_owned()));
    }

    let mut tags: Vec<&UserId> = conv.users.iter().collect();
    tags.sort_by_key(|u| pool_position(u.as_str()));
    let mut candidates: Vec<String> = tags.iter().map(|u| u.as_str().to_owned()).collect();
    candidates.push(dummy_tag.to_owned());

    Ok(ArInstance {
        conversation_id: conv.id.clone(),
        context: conv.context(),
        next_speaker_tag: TAG_POOL[0].to_owned(),
        candidates,
        gold: final_turn.addressee.as_str().to_owned(),
    })
}

fn pool_position(tag: &str) -> usize {
    TAG_POOL
        .iter()
        .position(|t| *t == tag)
        .unwrap_or(TAG_POOL.len())
}

/// One-line audit view of an instance, for JSONL dumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceAudit {
    pub conversation_id: String,
    pub task: &'static str,
    pub candidates: Vec<String>,
    pub gold: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distractor_provenance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RsInstance {
    pub fn audit(&self, seed: u64) -> InstanceAudit {
        InstanceAudit {
            conversation_id: self.conversation_id.clone(),
            task: "RS",
            candidates: self.candidates.clone(),
            gold: self.candidates[self.gold_index].clone(),
            distractor_provenance: Some(self.distractor_provenance.clone()),
            seed: Some(seed),
        }
    }
}

impl ArInstance {
    pub fn audit(&self) -> InstanceAudit {
        InstanceAudit {
            conversation_id: self.conversation_id.clone(),
            task: "AR",
            candidates: self.candidates.clone(),
            gold: self.gold.clone(),
            distractor_provenance: None,
            seed: None,
        }
    }
}
