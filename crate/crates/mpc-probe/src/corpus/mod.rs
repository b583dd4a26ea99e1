//! Conversation data model: parsing, validation and anonymization of
//! multi-party chat logs.
//!
//! A [`Conversation`] is an ordered list of [`Turn`]s, each carrying a
//! speaker, an explicit addressee and the message text. Everything
//! downstream (graphs, prompts, task instances) is derived from this type.

mod anonymize;
mod parse;

pub use anonymize::{anonymize, AliasMap, TAG_POOL};
pub use parse::{parse_corpus, write_jsonl, CorpusFormat, IngestOptions, ParseDiagnostic};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque participant identifier: non-empty, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UserId(String);

impl UserId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() || value.chars().any(char::is_whitespace) {
            return Err(Error::InvalidUserId(value));
        }
        Ok(UserId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for UserId {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        UserId::new(value)
    }
}

impl From<UserId> for String {
    fn from(id: UserId) -> String {
        id.0
    }
}

/// One message of a conversation. `index` is the 1-based chronological
/// position within its conversation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub index: usize,
    pub speaker: UserId,
    pub addressee: UserId,
    pub text: String,
}

/// An ordered multi-party conversation together with its derived user set
/// (all speakers plus all addressees).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub turns: Vec<Turn>,
    pub users: BTreeSet<UserId>,
}

impl Conversation {
    /// Builds a conversation, deriving the user set from the turns.
    /// Structural invariants are checked by [`validate`], not here.
    pub fn new(id: impl Into<String>, turns: Vec<Turn>) -> Self {
        let users = derive_users(&turns);
        Conversation {
            id: id.into(),
            turns,
            users,
        }
    }

    /// The speaker of the final turn, i.e. the "next speaker" when the final
    /// turn is the classification target.
    pub fn final_speaker(&self) -> Option<&UserId> {
        self.turns.last().map(|t| &t.speaker)
    }

    /// The conversation without its final turn (the classification context).
    pub fn context(&self) -> Conversation {
        let turns: Vec<Turn> = self.turns[..self.turns.len().saturating_sub(1)].to_vec();
        Conversation::new(self.id.clone(), turns)
    }
}

pub fn derive_users(turns: &[Turn]) -> BTreeSet<UserId> {
    let mut users = BTreeSet::new();
    for t in turns {
        users.insert(t.speaker.clone());
        users.insert(t.addressee.clone());
    }
    users
}

/// A single violated invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    TooFewTurns { count: usize },
    NonIncreasingIndex { position: usize, index: usize },
    EmptyText { turn_index: usize },
    UserSetMismatch { missing: Vec<String>, extra: Vec<String> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewTurns { count } => {
                write!(f, "conversation has {count} turns, at least 2 required")
            }
            Violation::NonIncreasingIndex { position, index } => write!(
                f,
                "turn at position {position} has index {index}, indices must be strictly increasing"
            ),
            Violation::EmptyText { turn_index } => {
                write!(f, "turn {turn_index} has empty text")
            }
            Violation::UserSetMismatch { missing, extra } => write!(
                f,
                "user set does not equal the union over turns (missing: {missing:?}, extra: {extra:?})"
            ),
        }
    }
}

/// Result of [`validate`]: empty iff the conversation is well-formed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every conversation invariant and lists the violated ones.
/// Total function: never errors, an empty report means valid.
pub fn validate(conv: &Conversation, allow_empty_text: bool) -> ValidationReport {
    let mut violations = Vec::new();

    if conv.turns.len() < 2 {
        violations.push(Violation::TooFewTurns {
            count: conv.turns.len(),
        });
    }

    let mut prev = 0usize;
    for (pos, turn) in conv.turns.iter().enumerate() {
        if turn.index <= prev {
            violations.push(Violation::NonIncreasingIndex {
                position: pos + 1,
                index: turn.index,
            });
        }
        prev = turn.index;
        if turn.text.is_empty() && !allow_empty_text {
            violations.push(Violation::EmptyText {
                turn_index: turn.index,
            });
        }
    }

    let derived = derive_users(&conv.turns);
    if derived != conv.users {
        let missing = derived
            .difference(&conv.users)
            .map(|u| u.as_str().to_owned())
            .collect();
        let extra = conv
            .users
            .difference(&derived)
            .map(|u| u.as_str().to_owned())
            .collect();
        violations.push(Violation::UserSetMismatch { missing, extra });
    }

    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn(i: usize, s: &str, a: &str, text: &str) -> Turn {
        Turn {
            index: i,
            speaker: UserId::new(s).unwrap(),
            addressee: UserId::new(a).unwrap(),
            text: text.to_owned(),
        }
    }

    #[test]
    fn user_id_rejects_empty_and_whitespace() {
        assert!(UserId::new("").is_err());
        assert!(UserId::new("a b").is_err());
        assert!(UserId::new("tab\tsep").is_err());
        assert!(UserId::new("[ALEX]").is_ok());
    }

    #[test]
    fn valid_three_turn_conversation_has_empty_report() {
        let conv = Conversation::new(
            "c1",
            vec![
                turn(1, "x", "y", "hi"),
                turn(2, "y", "x", "hello"),
                turn(3, "x", "y", "bye"),
            ],
        );
        assert!(validate(&conv, false).is_valid());
        assert_eq!(conv.users.len(), 2);
    }

    #[test]
    fn out_of_order_indices_named() {
        let conv = Conversation::new(
            "c1",
            vec![
                turn(1, "x", "y", "a"),
                turn(3, "y", "x", "b"),
                turn(2, "x", "y", "c"),
            ],
        );
        let report = validate(&conv, false);
        assert_eq!(
            report.violations,
            vec![Violation::NonIncreasingIndex {
                position: 3,
                index: 2
            }]
        );
    }

    #[test]
    fn user_set_mismatch_detected() {
        let mut conv = Conversation::new("c1", vec![turn(1, "x", "y", "a"), turn(2, "y", "z", "b")]);
        conv.users.remove(&UserId::new("z").unwrap());
        let report = validate(&conv, false);
        assert_eq!(
            report.violations,
            vec![Violation::UserSetMismatch {
                missing: vec!["z".to_owned()],
                extra: vec![]
            }]
        );
    }

    #[test]
    fn empty_text_policy() {
        let conv = Conversation::new("c1", vec![turn(1, "x", "y", ""), turn(2, "y", "x", "b")]);
        assert!(!validate(&conv, false).is_valid());
        assert!(validate(&conv, true).is_valid());
    }

    #[test]
    fn context_drops_final_turn() {
        let conv = Conversation::new(
            "c1",
            vec![
                turn(1, "x", "y", "a"),
                turn(2, "y", "x", "b"),
                turn(3, "z", "x", "c"),
            ],
        );
        let ctx = conv.context();
        assert_eq!(ctx.turns.len(), 2);
        assert!(!ctx.users.contains(&UserId::new("z").unwrap()));
    }
}
