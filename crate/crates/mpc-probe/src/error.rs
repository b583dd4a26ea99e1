//! Crate-wide error type.

use std::path::PathBuf;

use crate::prompt::{InputCombination, RepresentationKind, Task};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The input stream could not be decoded or read at all.
    #[error("fatal corpus read error: {0}")]
    CorpusRead(String),

    #[error("invalid user id {0:?}: must be non-empty and contain no whitespace")]
    InvalidUserId(String),

    /// More distinct users than anonymization tags.
    #[error("conversation has {users} users, the alias pool holds only {pool}")]
    AnonymizationOverflow { users: usize, pool: usize },

    #[error("next speaker {0:?} does not occur in the conversation")]
    InvalidNextSpeaker(String),

    #[error("node {0:?} is not part of the graph")]
    UnknownNode(String),

    #[error("operation undefined on the empty graph")]
    EmptyGraph,

    #[error("closeness centrality requires a connected graph")]
    DisconnectedGraph,

    #[error("input combination {combo} is not legal for task {task}")]
    IllegalCombination { task: Task, combo: InputCombination },

    #[error("required representation {0} was not provided")]
    MissingRepresentation(RepresentationKind),

    #[error("backend {backend}: {message}")]
    Backend { backend: String, message: String },

    #[error("continuation tokenized to zero tokens")]
    EmptyContinuation,

    #[error("backend returned an empty generation")]
    EmptyGeneration,

    #[error("corrupt cache entry at {0}")]
    CacheCorrupt(PathBuf),

    #[error("no distractor distinct from the true response could be drawn")]
    DistractorUnavailable,

    #[error("dummy tag {0} collides with a conversation user")]
    DummyCollision(String),

    /// A candidate stayed unscored after bounded retries; the whole instance
    /// is dropped rather than reporting a partial verdict.
    #[error("instance {instance} aborted: {reason}")]
    InstanceAborted { instance: String, reason: String },

    #[error("no records in cell")]
    EmptyCell,

    #[error("all per-scheme accuracies are zero")]
    DegenerateCell,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("aborted fraction {aborted}/{total} exceeds threshold {threshold}")]
    AbortThresholdExceeded {
        aborted: usize,
        total: usize,
        threshold: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
