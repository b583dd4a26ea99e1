//! Corpus ingestion: generic JSONL and the Ubuntu IRC adjacency format.
//!
//! Malformed records are skipped and reported through [`ParseDiagnostic`],
//! never silently dropped. Only conversations that satisfy all invariants
//! are returned.

use std::fmt;
use std::io::{BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::{validate, Conversation, Turn, UserId};
use crate::error::{Error, Result};

/// Supported on-disk corpus formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// One conversation per line: `{"id": ..., "turns": [{"speaker", "addressee", "text"}]}`.
    GenericJsonl,
    /// `speaker addressee utterance` rows, blank-line-separated conversations.
    UbuntuIrcAdjacency,
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusFormat::GenericJsonl => f.write_str("generic-jsonl"),
            CorpusFormat::UbuntuIrcAdjacency => f.write_str("ubuntu-irc-adjacency"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Accept turns whose message text is empty.
    pub allow_empty_text: bool,
}

/// One skipped record, with enough context to locate it in the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    /// 1-based line number in the source stream.
    pub line: usize,
    /// Record id when one could be extracted.
    pub record_id: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.record_id {
            Some(id) => write!(f, "line {}: record {:?}: {}", self.line, id, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

// Wire schema of the generic-jsonl format. Lenient on purpose: presence is
// checked per field so diagnostics can name the offending turn.
#[derive(Debug, Deserialize)]
struct LenientRecord {
    id: Option<String>,
    turns: Option<Vec<LenientTurn>>,
}

#[derive(Debug, Deserialize)]
struct LenientTurn {
    speaker: Option<String>,
    addressee: Option<String>,
    text: Option<String>,
}

#[derive(Debug, Serialize)]
struct WireRecord<'a> {
    id: &'a str,
    turns: Vec<WireTurn<'a>>,
}

#[derive(Debug, Serialize)]
struct WireTurn<'a> {
    speaker: &'a str,
    addressee: &'a str,
    text: &'a str,
}

/// Parses a corpus stream. Returns all well-formed conversations plus one
/// diagnostic per skipped record. Fails only when the stream itself cannot
/// be read or decoded as UTF-8.
pub fn parse_corpus(
    source: impl Read,
    format: CorpusFormat,
    opts: IngestOptions,
) -> Result<(Vec<Conversation>, Vec<ParseDiagnostic>)> {
    let mut text = String::new();
    BufReader::new(source)
        .read_to_string(&mut text)
        .map_err(|e| Error::CorpusRead(e.to_string()))?;
    match format {
        CorpusFormat::GenericJsonl => parse_jsonl(&text, opts),
        CorpusFormat::UbuntuIrcAdjacency => parse_irc(&text, opts),
    }
}

fn parse_jsonl(text: &str, opts: IngestOptions) -> Result<(Vec<Conversation>, Vec<ParseDiagnostic>)> {
    let mut conversations = Vec::new();
    let mut diagnostics = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: LenientRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(ParseDiagnostic {
                    line: lineno,
                    record_id: None,
                    message: format!("invalid JSON: {e}"),
                });
                continue;
            }
        };
        let id = match record.id {
            Some(id) if !id.is_empty() => id,
            _ => {
                diagnostics.push(ParseDiagnostic {
                    line: lineno,
                    record_id: None,
                    message: "missing or empty \"id\" field".to_owned(),
                });
                continue;
            }
        };
        let Some(raw_turns) = record.turns else {
            diagnostics.push(ParseDiagnostic {
                line: lineno,
                record_id: Some(id),
                message: "missing \"turns\" field".to_owned(),
            });
            continue;
        };

        match build_turns(raw_turns) {
            Ok(turns) => finish_record(id, turns, lineno, opts, &mut conversations, &mut diagnostics),
            Err(msg) => diagnostics.push(ParseDiagnostic {
                line: lineno,
                record_id: Some(id),
                message: msg,
            }),
        }
    }

    Ok((conversations, diagnostics))
}

fn build_turns(raw: Vec<LenientTurn>) -> std::result::Result<Vec<Turn>, String> {
    let mut turns = Vec::with_capacity(raw.len());
    for (i, t) in raw.into_iter().enumerate() {
        let index = i + 1;
        let speaker = t
            .speaker
            .ok_or_else(|| format!("turn {index} lacks \"speaker\""))?;
        let addressee = t
            .addressee
            .ok_or_else(|| format!("turn {index} lacks \"addressee\""))?;
        let text = t.text.ok_or_else(|| format!("turn {index} lacks \"text\""))?;
        let speaker =
            UserId::new(speaker).map_err(|e| format!("turn {index} speaker: {e}"))?;
        let addressee =
            UserId::new(addressee).map_err(|e| format!("turn {index} addressee: {e}"))?;
        turns.push(Turn {
            index,
            speaker,
            addressee,
            text,
        });
    }
    Ok(turns)
}

fn parse_irc(text: &str, opts: IngestOptions) -> Result<(Vec<Conversation>, Vec<ParseDiagnostic>)> {
    let mut conversations = Vec::new();
    let mut diagnostics = Vec::new();

    let mut block: Vec<(usize, &str)> = Vec::new();
    let mut block_no = 0usize;
    let mut lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    // Sentinel blank line so the final block is flushed by the same path.
    lines.push((text.lines().count() + 1, ""));

    for (lineno, line) in lines {
        if line.trim().is_empty() {
            if !block.is_empty() {
                block_no += 1;
                let id = format!("irc-{block_no:06}");
                let start_line = block[0].0;
                match irc_block_to_turns(&block) {
                    Ok(turns) => finish_record(
                        id,
                        turns,
                        start_line,
                        opts,
                        &mut conversations,
                        &mut diagnostics,
                    ),
                    Err(msg) => diagnostics.push(ParseDiagnostic {
                        line: start_line,
                        record_id: Some(id),
                        message: msg,
                    }),
                }
                block.clear();
            }
            continue;
        }
        block.push((lineno, line));
    }

    Ok((conversations, diagnostics))
}

fn irc_block_to_turns(block: &[(usize, &str)]) -> std::result::Result<Vec<Turn>, String> {
    let mut turns = Vec::with_capacity(block.len());
    for (i, (_, row)) in block.iter().enumerate() {
        let index = i + 1;
        let mut parts = row.splitn(3, char::is_whitespace);
        let speaker = parts.next().unwrap_or("");
        let addressee = parts.next().unwrap_or("");
        let text = parts.next().unwrap_or("").trim_start();
        if speaker.is_empty() {
            return Err(format!("turn {index} lacks a speaker column"));
        }
        // "-" is the corpus marker for an unknown addressee; such rows are
        // rejected rather than inferred.
        if addressee.is_empty() || addressee == "-" {
            return Err(format!("turn {index} lacks an explicit addressee"));
        }
        let speaker = UserId::new(speaker).map_err(|e| format!("turn {index} speaker: {e}"))?;
        let addressee =
            UserId::new(addressee).map_err(|e| format!("turn {index} addressee: {e}"))?;
        turns.push(Turn {
            index,
            speaker,
            addressee,
            text: text.to_owned(),
        });
    }
    Ok(turns)
}

fn finish_record(
    id: String,
    turns: Vec<Turn>,
    lineno: usize,
    opts: IngestOptions,
    conversations: &mut Vec<Conversation>,
    diagnostics: &mut Vec<ParseDiagnostic>,
) {
    let conv = Conversation::new(id.clone(), turns);
    let report = validate(&conv, opts.allow_empty_text);
    if report.is_valid() {
        conversations.push(conv);
    } else {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        diagnostics.push(ParseDiagnostic {
            line: lineno,
            record_id: Some(id),
            message: msgs.join("; "),
        });
    }
}

/// Serializes conversations to the generic-jsonl format, one record per line.
/// `parse(write(parse(x)))` round-trips bit-identically.
pub fn write_jsonl(conversations: &[Conversation], mut out: impl Write) -> Result<()> {
    for conv in conversations {
        let record = WireRecord {
            id: &conv.id,
            turns: conv
                .turns
                .iter()
                .map(|t| WireTurn {
                    speaker: t.speaker.as_str(),
                    addressee: t.addressee.as_str(),
                    text: &t.text,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
