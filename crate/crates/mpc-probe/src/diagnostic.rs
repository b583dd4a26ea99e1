//! Diagnostic subset construction: fixed user count, bounded length,
//! connected interaction graph, next speaker present in the context.
//!
//! Retained conversations are anonymized with their final-turn speaker as
//! the next speaker and stored together with that node's metrics.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{anonymize, parse_corpus, write_jsonl, Conversation, CorpusFormat, IngestOptions};
use crate::error::{Error, Result};
use crate::graph::{build_graphs, is_connected, node_metrics, GraphScope, NodeMetrics};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Conversation length admission rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthPolicy {
    Exactly15,
    AtMost15,
    /// At most `n` turns.
    Custom(usize),
}

impl LengthPolicy {
    pub fn admits(&self, len: usize) -> bool {
        match self {
            LengthPolicy::Exactly15 => len == 15,
            LengthPolicy::AtMost15 => len <= 15,
            LengthPolicy::Custom(n) => len <= *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Exact number of distinct users (speakers plus addressees) a retained
    /// conversation must have.
    pub user_count: usize,
    pub length_policy: LengthPolicy,
    pub require_connected: bool,
    pub require_next_speaker_in_context: bool,
    /// Scope used when recording next-speaker node metrics.
    pub metric_scope: GraphScope,
}

impl FilterConfig {
    pub fn new(user_count: usize) -> Self {
        FilterConfig {
            user_count,
            length_policy: LengthPolicy::AtMost15,
            require_connected: true,
            require_next_speaker_in_context: true,
            metric_scope: GraphScope::ContextOnly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_count < 2 {
            return Err(Error::InvalidConfig(format!(
                "user_count must be >= 2, got {}",
                self.user_count
            )));
        }
        if let LengthPolicy::Custom(n) = self.length_policy {
            if n < 2 {
                return Err(Error::InvalidConfig(format!(
                    "custom length bound must be >= 2, got {n}"
                )));
            }
        }
        Ok(())
    }
}

/// The predicate that excluded a conversation. Predicates are evaluated in
/// this order and the first failure is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionReason {
    UserCount,
    Length,
    Connectivity,
    NextSpeakerNotInContext,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionStats {
    pub input: usize,
    pub retained: usize,
    pub user_count: usize,
    pub length: usize,
    pub connectivity: usize,
    pub next_speaker: usize,
}

impl RejectionStats {
    fn record(&mut self, reason: RejectionReason) {
        match reason {
            RejectionReason::UserCount => self.user_count += 1,
            RejectionReason::Length => self.length += 1,
            RejectionReason::Connectivity => self.connectivity += 1,
            RejectionReason::NextSpeakerNotInContext => self.next_speaker += 1,
        }
    }
}

/// One retained conversation: anonymized, with the next-speaker node metrics
/// computed at the configured scope.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticEntry {
    pub conversation: Conversation,
    pub metrics: NodeMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_corpus_id: String,
    pub toolkit_version: String,
    pub stats: RejectionStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticDataset {
    pub config: FilterConfig,
    pub entries: Vec<DiagnosticEntry>,
    pub provenance: Provenance,
}

impl DiagnosticDataset {
    pub fn id(&self) -> String {
        format!("{}-u{}", self.provenance.source_corpus_id, self.config.user_count)
    }
}

/// Evaluates the admission predicates in order; `None` means retained.
pub fn first_failing_predicate(conv: &Conversation, cfg: &FilterConfig) -> Option<RejectionReason> {
    if conv.users.len() != cfg.user_count {
        return Some(RejectionReason::UserCount);
    }
    if !cfg.length_policy.admits(conv.turns.len()) {
        return Some(RejectionReason::Length);
    }
    if cfg.require_connected {
        let (und, _) = build_graphs(conv, GraphScope::Full);
        if !is_connected(&und).unwrap_or(false) {
            return Some(RejectionReason::Connectivity);
        }
    }
    if cfg.require_next_speaker_in_context {
        let Some(next_speaker) = conv.final_speaker() else {
            return Some(RejectionReason::NextSpeakerNotInContext);
        };
        let in_context = conv.turns[..conv.turns.len() - 1]
            .iter()
            .any(|t| t.speaker == *next_speaker || t.addressee == *next_speaker);
        if !in_context {
            return Some(RejectionReason::NextSpeakerNotInContext);
        }
    }
    None
}

/// Filters `corpus` through `cfg`, anonymizing every retained conversation
/// with its final-turn speaker as next speaker. An empty result is legal.
pub fn build_diagnostic_subset(
    corpus: &[Conversation],
    cfg: &FilterConfig,
    source_corpus_id: &str,
) -> Result<DiagnosticDataset> {
    cfg.validate()?;
    let mut stats = RejectionStats {
        input: corpus.len(),
        ..RejectionStats::default()
    };
    let mut entries = Vec::new();

    for conv in corpus {
        if let Some(reason) = first_failing_predicate(conv, cfg) {
            stats.record(reason);
            continue;
        }
        let next_speaker = conv
            .final_speaker()
            .expect("length policy admits only conversations with turns")
            .clone();
        let (anon, map) = anonymize(conv, &next_speaker)?;
        let anon_next = crate::corpus::UserId::new(
            map.tag_of(&next_speaker).expect("next speaker is mapped"),
        )?;
        let (und, dir) = build_graphs(&anon, cfg.metric_scope);
        let metrics = match node_metrics(&und, &dir, &anon_next) {
            Ok(m) => m,
            // Next speaker absent from the scoped graph (possible only when
            // the context predicate is disabled): degenerate zero metrics.
            Err(Error::UnknownNode(_)) => NodeMetrics {
                degree: 0,
                out_degree: 0,
                weighted_out_degree: 0,
                avg_outgoing_weight: 0.0,
                avg_outgoing_weight_rounded: 0,
                closeness: None,
                clustering: None,
            },
            Err(e) => return Err(e),
        };
        entries.push(DiagnosticEntry {
            conversation: anon,
            metrics,
        });
    }

    stats.retained = entries.len();
    Ok(DiagnosticDataset {
        config: cfg.clone(),
        entries,
        provenance: Provenance {
            source_corpus_id: source_corpus_id.to_owned(),
            toolkit_version: VERSION.to_owned(),
            stats,
        },
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    config: FilterConfig,
    provenance: Provenance,
    conversations: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    next_speaker: String,
    metrics: NodeMetrics,
}

/// Writes `<stem>.jsonl` (anonymized conversations) and
/// `<stem>.manifest.json` (config, counts, per-conversation metrics).
pub fn save_dataset(dataset: &DiagnosticDataset, stem: &Path) -> Result<()> {
    let jsonl_path = stem.with_extension("jsonl");
    let manifest_path = stem.with_extension("manifest.json");

    let conversations: Vec<Conversation> = dataset
        .entries
        .iter()
        .map(|e| e.conversation.clone())
        .collect();
    let mut buf = Vec::new();
    write_jsonl(&conversations, &mut buf)?;
    fs::write(&jsonl_path, buf)?;

    let manifest = ManifestFile {
        config: dataset.config.clone(),
        provenance: dataset.provenance.clone(),
        conversations: dataset
            .entries
            .iter()
            .map(|e| ManifestEntry {
                id: e.conversation.id.clone(),
                next_speaker: crate::corpus::TAG_POOL[0].to_owned(),
                metrics: e.metrics.clone(),
            })
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(&manifest_path, json)?;
    Ok(())
}

/// Loads a dataset previously written by [`save_dataset`].
pub fn load_dataset(stem: &Path) -> Result<DiagnosticDataset> {
    let jsonl_path = stem.with_extension("jsonl");
    let manifest_path = stem.with_extension("manifest.json");

    let manifest: ManifestFile = serde_json::from_slice(&fs::read(&manifest_path)?)?;
    let file = fs::File::open(&jsonl_path)?;
    let (conversations, diags) =
        parse_corpus(file, CorpusFormat::GenericJsonl, IngestOptions { allow_empty_text: true })?;
    if !diags.is_empty() {
        return Err(Error::CorpusRead(format!(
            "dataset file {} contains malformed records: {}",
            jsonl_path.display(),
            diags[0]
        )));
    }
    if conversations.len() != manifest.conversations.len() {
        return Err(Error::CorpusRead(format!(
            "dataset/manifest mismatch: {} conversations vs {} manifest entries",
            conversations.len(),
            manifest.conversations.len()
        )));
    }

    let entries = conversations
        .into_iter()
        .zip(manifest.conversations)
        .map(|(conversation, m)| {
            if conversation.id != m.id {
                return Err(Error::CorpusRead(format!(
                    "dataset/manifest order mismatch at id {} vs {}",
                    conversation.id, m.id
                )));
            }
            Ok(DiagnosticEntry {
                conversation,
                metrics: m.metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DiagnosticDataset {
        config: manifest.config,
        entries,
        provenance: manifest.provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Turn, UserId};

    fn conv(id: &str, pairs: &[(&str, &str)]) -> Conversation {
        let turns: Vec<Turn> = pairs
            .iter()
            .enumerate()
            .map(|(i, (s, a))| Turn {
                index: i + 1,
                speaker: UserId::new(*s).unwrap(),
                addressee: UserId::new(*a).unwrap(),
                text: format!("m{}", i + 1),
            })
            .collect();
        Conversation::new(id, turns)
    }

    /// 3 users, connected, next speaker in context.
    fn good() -> Conversation {
        conv("good", &[("a", "b"), ("b", "c"), ("c", "a"), ("a", "b")])
    }

    #[test]
    fn classifies_the_three_fixtures() {
        // One connected 3-user, one 3-user with an isolated self-addressed
        // node (disconnected), one connected 4-user.
        let disconnected = conv("disc", &[("a", "b"), ("b", "a"), ("c", "c"), ("a", "b")]);
        let four_users = conv("four", &[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a"), ("a", "b")]);
        let cfg = FilterConfig::new(3);
        let ds = build_diagnostic_subset(
            &[good(), disconnected, four_users],
            &cfg,
            "fixture",
        )
        .unwrap();
        assert_eq!(ds.entries.len(), 1);
        assert_eq!(ds.provenance.stats.connectivity, 1);
        assert_eq!(ds.provenance.stats.user_count, 1);
        assert_eq!(ds.provenance.stats.retained, 1);
        // The retained conversation is anonymized: next speaker is [ALEX].
        assert_eq!(
            ds.entries[0].conversation.final_speaker().unwrap().as_str(),
            "[ALEX]"
        );
    }

    #[test]
    fn disconnected_same_user_count_rejected_for_connectivity() {
        let disconnected = conv("disc4", &[("a", "b"), ("c", "d"), ("a", "b"), ("c", "d")]);
        let cfg = FilterConfig::new(4);
        let ds = build_diagnostic_subset(&[disconnected], &cfg, "fixture").unwrap();
        assert_eq!(ds.entries.len(), 0);
        assert_eq!(ds.provenance.stats.connectivity, 1);
    }

    #[test]
    fn empty_corpus_is_legal() {
        let cfg = FilterConfig::new(3);
        let ds = build_diagnostic_subset(&[], &cfg, "empty").unwrap();
        assert!(ds.entries.is_empty());
        assert_eq!(ds.provenance.stats.input, 0);
    }

    #[test]
    fn length_policies() {
        assert!(LengthPolicy::Exactly15.admits(15));
        assert!(!LengthPolicy::Exactly15.admits(14));
        assert!(LengthPolicy::AtMost15.admits(2));
        assert!(!LengthPolicy::AtMost15.admits(16));
        assert!(LengthPolicy::Custom(5).admits(5));
        assert!(!LengthPolicy::Custom(5).admits(6));
    }

    #[test]
    fn next_speaker_not_in_context_rejected() {
        // d only appears in the final turn.
        let c = conv("late", &[("a", "b"), ("b", "c"), ("c", "a"), ("d", "a")]);
        let cfg = FilterConfig::new(4);
        assert_eq!(
            first_failing_predicate(&c, &cfg),
            Some(RejectionReason::NextSpeakerNotInContext)
        );
        let mut relaxed = cfg.clone();
        relaxed.require_next_speaker_in_context = false;
        assert_eq!(first_failing_predicate(&c, &relaxed), None);
    }

    #[test]
    fn relaxed_next_speaker_predicate_yields_degenerate_metrics() {
        let c = conv("late", &[("a", "b"), ("b", "c"), ("c", "a"), ("d", "a")]);
        let mut cfg = FilterConfig::new(4);
        cfg.require_next_speaker_in_context = false;
        let ds = build_diagnostic_subset(&[c], &cfg, "fixture").unwrap();
        assert_eq!(ds.entries.len(), 1);
        assert_eq!(ds.entries[0].metrics.degree, 0);
        assert_eq!(ds.entries[0].metrics.avg_outgoing_weight, 0.0);
    }

    #[test]
    fn filtering_is_idempotent_on_its_output() {
        let corpus = vec![
            good(),
            conv("g2", &[("x", "y"), ("y", "z"), ("z", "x"), ("y", "x")]),
        ];
        let cfg = FilterConfig::new(3);
        let ds = build_diagnostic_subset(&corpus, &cfg, "src").unwrap();
        let convs: Vec<Conversation> = ds.entries.iter().map(|e| e.conversation.clone()).collect();
        let again = build_diagnostic_subset(&convs, &cfg, "src").unwrap();
        assert_eq!(again.entries, ds.entries);
        assert_eq!(again.provenance.stats.retained, ds.entries.len());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FilterConfig::new(3);
        let ds = build_diagnostic_subset(&[good()], &cfg, "src").unwrap();
        let stem = dir.path().join("ubuntu3");
        save_dataset(&ds, &stem).unwrap();
        let loaded = load_dataset(&stem).unwrap();
        assert_eq!(loaded, ds);
    }
}
