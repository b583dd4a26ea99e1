//! Generated auxiliary representations: conversation summaries and
//! next-speaker user descriptions, plus their content-addressed disk cache.
//!
//! Generation is always greedy. Parse failures degrade instead of aborting:
//! the raw text is retained and injected downstream, the structured form is
//! kept for reporting only.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::Backend;
use crate::corpus::Conversation;
use crate::error::{Error, Result};
use crate::prompt::{
    assemble_with_variant, render_conversation_transcript, render_interaction_transcript,
    BeginOfOutput, InputCombination, PromptScheme, Task,
};

/// The two output templates for the generation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputTemplateVariant {
    #[default]
    V1,
    V2,
}

impl fmt::Display for OutputTemplateVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputTemplateVariant::V1 => f.write_str("v1"),
            OutputTemplateVariant::V2 => f.write_str("v2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub title: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjectiveEntry {
    pub adjective: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenProvenance {
    pub backend_id: String,
    pub prompt_sha256: String,
}

/// Conversation summary: three main topics when parsing succeeds; the raw
/// generation is always retained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub topics: Vec<TopicEntry>,
    pub raw_text: String,
    pub degraded: bool,
    pub provenance: GenProvenance,
}

/// Next-speaker description: five adjectives when parsing succeeds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserDescription {
    pub adjectives: Vec<AdjectiveEntry>,
    pub subject: String,
    pub raw_text: String,
    pub degraded: bool,
    pub provenance: GenProvenance,
}

pub const SUMMARY_TOPIC_COUNT: usize = 3;
pub const DESCRIPTION_ADJECTIVE_COUNT: usize = 5;
pub const DEFAULT_GEN_MAX_TOKENS: usize = 512;

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Splits a generated list into `(item, explanation)` pairs according to the
/// variant's marker: `1.`/`1)` numbering for V1, leading dashes for V2.
/// Lines that do not match are skipped.
fn parse_entries(text: &str, variant: OutputTemplateVariant) -> Vec<(String, String)> {
    let mut entries = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        let stripped = match variant {
            OutputTemplateVariant::V1 => {
                let digits = line.chars().take_while(char::is_ascii_digit).count();
                if digits == 0 {
                    continue;
                }
                let rest = &line[digits..];
                match rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
                    Some(r) => r.trim_start(),
                    None => continue,
                }
            }
            OutputTemplateVariant::V2 => match line.strip_prefix('-') {
                Some(r) => r.trim_start(),
                None => continue,
            },
        };
        let Some((item, explanation)) = stripped.split_once(':') else {
            continue;
        };
        let item = item.trim();
        let explanation = explanation.trim();
        if item.is_empty() {
            continue;
        }
        entries.push((item.to_owned(), explanation.to_owned()));
    }
    entries
}

fn generate_raw(
    conv: &Conversation,
    task: Task,
    backend: &dyn Backend,
    scheme: PromptScheme,
    variant: OutputTemplateVariant,
    max_tokens: usize,
) -> Result<(String, GenProvenance)> {
    let reps = vec![
        render_conversation_transcript(conv),
        render_interaction_transcript(conv),
    ];
    let prompt = assemble_with_variant(
        task,
        InputCombination::ConvStruct,
        scheme,
        variant,
        &reps,
        crate::corpus::TAG_POOL[0],
        &BeginOfOutput::default(),
    )?;
    let rendered = prompt.render();
    let raw = backend.generate(&rendered, max_tokens)?;
    if raw.trim().is_empty() {
        return Err(Error::EmptyGeneration);
    }
    Ok((
        raw,
        GenProvenance {
            backend_id: backend.id(),
            prompt_sha256: sha256_hex(&rendered),
        },
    ))
}

/// Generates and parses a conversation summary (greedy decoding).
pub fn generate_summary(
    conv: &Conversation,
    backend: &dyn Backend,
    scheme: PromptScheme,
    variant: OutputTemplateVariant,
    max_tokens: usize,
) -> Result<Summary> {
    let (raw, provenance) =
        generate_raw(conv, Task::SummaryGeneration, backend, scheme, variant, max_tokens)?;
    let entries = parse_entries(&raw, variant);
    let degraded = entries.len() != SUMMARY_TOPIC_COUNT;
    Ok(Summary {
        topics: if degraded {
            Vec::new()
        } else {
            entries
                .into_iter()
                .map(|(title, explanation)| TopicEntry { title, explanation })
                .collect()
        },
        raw_text: raw,
        degraded,
        provenance,
    })
}

/// Generates and parses a description of the next speaker (`[ALEX]`).
pub fn generate_user_description(
    conv: &Conversation,
    backend: &dyn Backend,
    scheme: PromptScheme,
    variant: OutputTemplateVariant,
    max_tokens: usize,
) -> Result<UserDescription> {
    let (raw, provenance) = generate_raw(
        conv,
        Task::DescriptionGeneration,
        backend,
        scheme,
        variant,
        max_tokens,
    )?;
    let entries = parse_entries(&raw, variant);
    let degraded = entries.len() != DESCRIPTION_ADJECTIVE_COUNT;
    Ok(UserDescription {
        adjectives: if degraded {
            Vec::new()
        } else {
            entries
                .into_iter()
                .map(|(adjective, explanation)| AdjectiveEntry { adjective, explanation })
                .collect()
        },
        subject: crate::corpus::TAG_POOL[0].to_owned(),
        raw_text: raw,
        degraded,
        provenance,
    })
}

/// Cache key: one entry per (conversation, task, scheme, variant, backend).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub conversation_id: String,
    pub task: Task,
    pub scheme: PromptScheme,
    pub variant: OutputTemplateVariant,
    pub backend_id: String,
}

impl CacheKey {
    fn digest(&self) -> String {
        sha256_hex(&format!(
            "{}\x1f{}\x1f{}\x1f{}\x1f{}",
            self.conversation_id, self.task, self.scheme, self.variant, self.backend_id
        ))
    }
}

/// Cached payload, tagged by task kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CachedAux {
    Summary(Summary),
    Description(UserDescription),
}

impl CachedAux {
    pub fn raw_text(&self) -> &str {
        match self {
            CachedAux::Summary(s) => &s.raw_text,
            CachedAux::Description(d) => &d.raw_text,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    key: CacheKey,
    aux: CachedAux,
}

/// Content-addressed on-disk cache, one JSON file per key. Writers of
/// distinct keys never collide; writers of the same key are serialized by
/// the atomic rename.
pub struct AuxCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl AuxCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(AuxCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.digest()))
    }

    /// `Ok(None)` on miss. A corrupt entry is evicted and surfaces as
    /// [`Error::CacheCorrupt`] so the caller can regenerate.
    pub fn lookup(&self, key: &CacheKey) -> Result<Option<CachedAux>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        match serde_json::from_slice::<CacheFile>(&bytes) {
            Ok(file) if file.key == *key => Ok(Some(file.aux)),
            _ => {
                let _ = fs::remove_file(&path);
                Err(Error::CacheCorrupt(path))
            }
        }
    }

    pub fn store(&self, key: &CacheKey, aux: &CachedAux) -> Result<()> {
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let file = CacheFile {
            key: key.clone(),
            aux: aux.clone(),
        };
        fs::write(&tmp, serde_json::to_vec_pretty(&file)?)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// Cache-through summary: lookup, else generate and store. A corrupt entry
/// counts as a miss and is regenerated.
pub fn ensure_summary(
    cache: &AuxCache,
    conv: &Conversation,
    backend: &dyn Backend,
    scheme: PromptScheme,
    variant: OutputTemplateVariant,
    max_tokens: usize,
) -> Result<Summary> {
    let key = CacheKey {
        conversation_id: conv.id.clone(),
        task: Task::SummaryGeneration,
        scheme,
        variant,
        backend_id: backend.id(),
    };
    match cache.lookup(&key) {
        Ok(Some(CachedAux::Summary(s))) => return Ok(s),
        Ok(Some(_)) | Ok(None) | Err(Error::CacheCorrupt(_)) => {}
        Err(e) => return Err(e),
    }
    let summary = generate_summary(conv, backend, scheme, variant, max_tokens)?;
    cache.store(&key, &CachedAux::Summary(summary.clone()))?;
    Ok(summary)
}

/// Cache-through user description.
pub fn ensure_description(
    cache: &AuxCache,
    conv: &Conversation,
    backend: &dyn Backend,
    scheme: PromptScheme,
    variant: OutputTemplateVariant,
    max_tokens: usize,
) -> Result<UserDescription> {
    let key = CacheKey {
        conversation_id: conv.id.clone(),
        task: Task::DescriptionGeneration,
        scheme,
        variant,
        backend_id: backend.id(),
    };
    match cache.lookup(&key) {
        Ok(Some(CachedAux::Description(d))) => return Ok(d),
        Ok(Some(_)) | Ok(None) | Err(Error::CacheCorrupt(_)) => {}
        Err(e) => return Err(e),
    }
    let desc = generate_user_description(conv, backend, scheme, variant, max_tokens)?;
    cache.store(&key, &CachedAux::Description(desc.clone()))?;
    Ok(desc)
}
