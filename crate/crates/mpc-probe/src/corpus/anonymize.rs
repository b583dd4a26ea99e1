//! Username anonymization with a fixed pool of gender-neutral tags.
//!
//! The next speaker always becomes `[ALEX]`; the remaining users receive
//! tags in order of first appearance in the turn sequence. Occurrences of
//! original usernames inside message text are rewritten as well
//! (longest-match-first), so no identity leaks into rendered transcripts.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{Conversation, Turn, UserId};
use crate::error::{Error, Result};

/// The fixed anonymization tag pool. Its size bounds anonymizable
/// conversations to six distinct users.
pub const TAG_POOL: [&str; 6] = ["[ALEX]", "[BENNY]", "[CAM]", "[DANA]", "[ELI]", "[FREDDIE]"];

/// Injective mapping from original user ids to pool tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AliasMap {
    /// original id -> tag, in deterministic (sorted) order.
    pub assignments: BTreeMap<UserId, String>,
    pub next_speaker: UserId,
}

impl AliasMap {
    pub fn tag_of(&self, user: &UserId) -> Option<&str> {
        self.assignments.get(user).map(String::as_str)
    }
}

/// Rewrites all speaker/addressee fields (and username occurrences inside
/// message text) of `conv` through a fresh [`AliasMap`] that sends
/// `next_speaker` to `[ALEX]`.
///
/// Deterministic: the same `(conversation, next_speaker)` pair always yields
/// the same map and output.
pub fn anonymize(conv: &Conversation, next_speaker: &UserId) -> Result<(Conversation, AliasMap)> {
    if !conv.users.contains(next_speaker) {
        return Err(Error::InvalidNextSpeaker(next_speaker.as_str().to_owned()));
    }
    if conv.users.len() > TAG_POOL.len() {
        return Err(Error::AnonymizationOverflow {
            users: conv.users.len(),
            pool: TAG_POOL.len(),
        });
    }

    let mut assignments: BTreeMap<UserId, String> = BTreeMap::new();
    assignments.insert(next_speaker.clone(), TAG_POOL[0].to_owned());

    // Remaining users take tags in order of first appearance; within a turn
    // the speaker counts as appearing before the addressee.
    let mut next_tag = 1usize;
    for turn in &conv.turns {
        for user in [&turn.speaker, &turn.addressee] {
            if !assignments.contains_key(user) {
                assignments.insert(user.clone(), TAG_POOL[next_tag].to_owned());
                next_tag += 1;
            }
        }
    }

    let replacements = text_replacements(&assignments);
    let turns: Vec<Turn> = conv
        .turns
        .iter()
        .map(|t| Turn {
            index: t.index,
            speaker: UserId::new(&assignments[&t.speaker][..]).expect("pool tags are valid ids"),
            addressee: UserId::new(&assignments[&t.addressee][..]).expect("pool tags are valid ids"),
            text: rewrite_text(&t.text, &replacements),
        })
        .collect();

    let anonymized = Conversation::new(conv.id.clone(), turns);
    let map = AliasMap {
        assignments,
        next_speaker: next_speaker.clone(),
    };
    Ok((anonymized, map))
}

/// (original username, tag) pairs sorted longest-username-first so that a
/// username that is a prefix or substring of another never shadows it.
fn text_replacements(assignments: &BTreeMap<UserId, String>) -> Vec<(&str, &str)> {
    let mut pairs: Vec<(&str, &str)> = assignments
        .iter()
        .map(|(u, tag)| (u.as_str(), tag.as_str()))
        .collect();
    pairs.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(b.0)));
    pairs
}

/// Single left-to-right scan; at each position the longest matching
/// username wins.
fn rewrite_text(text: &str, replacements: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    'outer: while !rest.is_empty() {
        for (name, tag) in replacements {
            if let Some(stripped) = rest.strip_prefix(name) {
                out.push_str(tag);
                rest = stripped;
                continue 'outer;
            }
        }
        let ch = rest.chars().next().expect("rest is non-empty");
        out.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    out
}
