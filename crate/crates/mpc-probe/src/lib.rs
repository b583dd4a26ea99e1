//! mpc-probe: a corpus-to-report diagnostic toolkit for multi-party
//! conversation classifiers.
//!
//! The pipeline parses raw chat logs into validated, anonymized
//! conversations, filters them into diagnostic subsets with fixed user count
//! and connected interaction graphs, assembles a matrix of classification
//! prompts (input combinations x verbosity schemes), scores response
//! selection and addressee recognition candidates by conditional perplexity
//! over a pluggable log-probability backend, and relates accuracy to the
//! structural complexity of the conversation graph.

pub mod auxgen;
pub mod backend;
pub mod cli;
pub mod corpus;
pub mod diagnostic;
pub mod error;
pub mod eval;
pub mod graph;
pub mod prompt;
pub mod scoring;
pub mod synth;
pub mod task;

pub use error::{Error, Result};
