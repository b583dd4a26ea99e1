//! Evaluation runs over (dataset x task x combination x scheme), macro
//! accuracy, prompt-sensitivity gaps and structural slices.
//!
//! Records are persisted incrementally under idempotent keys, so an
//! interrupted run resumes to the exact same record set. Instance scoring is
//! parallel across a worker pool; aggregation is single-threaded over the
//! immutable records.

mod report;
mod svg;

pub use report::{emit_report, ReportFormat, ReportOptions};

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::auxgen::{ensure_description, ensure_summary, AuxCache, OutputTemplateVariant, DEFAULT_GEN_MAX_TOKENS};
use crate::backend::{Backend, BackendDescriptor};
use crate::corpus::TAG_POOL;
use crate::diagnostic::{DiagnosticDataset, DiagnosticEntry, Provenance};
use crate::error::{Error, Result};
use crate::graph::{build_graphs, node_metrics, GraphScope, NodeMetrics};
use crate::prompt::{
    assemble, render_conversation_transcript, render_interaction_transcript, AssembledPrompt,
    BeginOfOutput, InputCombination, PromptScheme, Representation, RepresentationKind, Task,
};
use crate::scoring::{score_candidates, select, CandidateScore};
use crate::task::{build_ar_instance, build_rs_instance, DEFAULT_DUMMY_TAG};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Full configuration of one evaluation run; serialized verbatim into the
/// run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset_id: String,
    pub task: Task,
    pub combinations: Vec<InputCombination>,
    pub schemes: Vec<PromptScheme>,
    pub backend: BackendDescriptor,
    pub seed: u64,
    pub metric_scope: GraphScope,
    pub variant: OutputTemplateVariant,
    #[serde(default)]
    pub begin_of_output: BeginOfOutput,
    pub dummy_tag: String,
    /// Run fails when the aborted fraction exceeds this.
    pub max_abort_fraction: f64,
    pub workers: usize,
    pub gen_max_tokens: usize,
}

impl RunConfig {
    pub fn new(dataset_id: impl Into<String>, task: Task, backend: BackendDescriptor, seed: u64) -> Self {
        RunConfig {
            dataset_id: dataset_id.into(),
            task,
            combinations: InputCombination::all_for(task),
            schemes: PromptScheme::ALL.to_vec(),
            backend,
            seed,
            metric_scope: GraphScope::ContextOnly,
            variant: OutputTemplateVariant::V1,
            begin_of_output: BeginOfOutput::default(),
            dummy_tag: DEFAULT_DUMMY_TAG.to_owned(),
            max_abort_fraction: 0.01,
            workers: 1,
            gen_max_tokens: DEFAULT_GEN_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.task.is_classification() {
            return Err(Error::InvalidConfig(format!(
                "task {} is not a classification task",
                self.task
            )));
        }
        if self.combinations.is_empty() || self.schemes.is_empty() {
            return Err(Error::InvalidConfig(
                "combinations and schemes must be non-empty".to_owned(),
            ));
        }
        for combo in &self.combinations {
            if !combo.legal_for(self.task) {
                return Err(Error::IllegalCombination {
                    task: self.task,
                    combo: *combo,
                });
            }
        }
        if self.schemes.iter().collect::<BTreeSet<_>>().len() != self.schemes.len() {
            return Err(Error::InvalidConfig("duplicate schemes".to_owned()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be >= 1".to_owned()));
        }
        if !(0.0..=1.0).contains(&self.max_abort_fraction) {
            return Err(Error::InvalidConfig(
                "max_abort_fraction must be in [0, 1]".to_owned(),
            ));
        }
        Ok(())
    }
}

/// One scored instance joined with the next-speaker node metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub instance_id: String,
    pub dataset_id: String,
    pub task: Task,
    pub combination: InputCombination,
    pub scheme: PromptScheme,
    pub gold: String,
    pub predicted: String,
    pub correct: bool,
    pub deg_u: usize,
    pub w_avg_o_u: f64,
    pub w_avg_o_rounded: u32,
    pub scores: Vec<CandidateScore>,
}

impl EvalRecord {
    pub fn key(&self) -> String {
        record_key(self.task, self.combination, self.scheme, &self.instance_id)
    }
}

fn record_key(task: Task, combo: InputCombination, scheme: PromptScheme, instance_id: &str) -> String {
    format!("{task}|{combo}|{scheme}|{instance_id}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortedInstance {
    pub key: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunCounts {
    pub planned: usize,
    pub scored_now: usize,
    pub reused_existing: usize,
    pub aborted: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub config: RunConfig,
    pub backend_id: String,
    pub dataset_provenance: Provenance,
    pub counts: RunCounts,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<EvalRecord>,
    pub aborted: Vec<AbortedInstance>,
    pub manifest: RunManifest,
}

/// Builds the exact classification prompt, candidate set and gold label for
/// one (entry, combination, scheme) cell. Shared by the runner and the CLI
/// `inspect` command so the preview can never drift from what gets scored.
pub fn build_instance_prompt(
    cfg: &RunConfig,
    dataset: &DiagnosticDataset,
    entry: &DiagnosticEntry,
    combo: InputCombination,
    scheme: PromptScheme,
    backend: &dyn Backend,
    cache: &AuxCache,
) -> Result<(AssembledPrompt, Vec<String>, String)> {
    let conv = &entry.conversation;
    let context = conv.context();

    let (candidates, gold) = match cfg.task {
        Task::AddresseeRecognition => {
            let inst = build_ar_instance(conv, &cfg.dummy_tag)?;
            (inst.candidates, inst.gold)
        }
        Task::ResponseSelection => {
            let inst = build_rs_instance(conv, dataset, cfg.seed)?;
            let gold = inst.candidates[inst.gold_index].clone();
            (inst.candidates, gold)
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "task {other} cannot be scored"
            )))
        }
    };

    let mut reps: Vec<Representation> = Vec::new();
    for kind in combo.kinds() {
        let rep = match kind {
            RepresentationKind::ConversationTranscript => render_conversation_transcript(&context),
            RepresentationKind::InteractionTranscript => render_interaction_transcript(&context),
            RepresentationKind::Summary => {
                let summary = ensure_summary(cache, &context, backend, scheme, cfg.variant, cfg.gen_max_tokens)?;
                Representation {
                    kind: RepresentationKind::Summary,
                    text: summary.raw_text,
                }
            }
            RepresentationKind::UserDescription => {
                let desc = ensure_description(cache, &context, backend, scheme, cfg.variant, cfg.gen_max_tokens)?;
                Representation {
                    kind: RepresentationKind::UserDescription,
                    text: desc.raw_text,
                }
            }
        };
        reps.push(rep);
    }

    let prompt = assemble(cfg.task, combo, scheme, &reps, TAG_POOL[0], &cfg.begin_of_output)?;
    Ok((prompt, candidates, gold))
}

fn metrics_at_scope(entry: &DiagnosticEntry, scope: GraphScope) -> Result<NodeMetrics> {
    let next = crate::corpus::UserId::new(TAG_POOL[0])?;
    let (und, dir) = build_graphs(&entry.conversation, scope);
    match node_metrics(&und, &dir, &next) {
        Ok(m) => Ok(m),
        Err(Error::UnknownNode(_)) => Ok(NodeMetrics {
            degree: 0,
            out_degree: 0,
            weighted_out_degree: 0,
            avg_outgoing_weight: 0.0,
            avg_outgoing_weight_rounded: 0,
            closeness: None,
            clustering: None,
        }),
        Err(e) => Err(e),
    }
}

fn score_instance(
    cfg: &RunConfig,
    dataset: &DiagnosticDataset,
    entry: &DiagnosticEntry,
    combo: InputCombination,
    scheme: PromptScheme,
    backend: &dyn Backend,
    cache: &AuxCache,
) -> Result<EvalRecord> {
    let label = record_key(cfg.task, combo, scheme, &entry.conversation.id);
    let (prompt, candidates, gold) =
        build_instance_prompt(cfg, dataset, entry, combo, scheme, backend, cache)?;
    let scores = score_candidates(&prompt, &candidates, backend, &label)?;
    let predicted = candidates[select(&scores)].clone();
    let metrics = metrics_at_scope(entry, cfg.metric_scope)?;

    Ok(EvalRecord {
        instance_id: entry.conversation.id.clone(),
        dataset_id: cfg.dataset_id.clone(),
        task: cfg.task,
        combination: combo,
        scheme,
        correct: predicted == gold,
        gold,
        predicted,
        deg_u: metrics.degree,
        w_avg_o_u: metrics.avg_outgoing_weight,
        w_avg_o_rounded: metrics.avg_outgoing_weight_rounded,
        scores,
    })
}

fn read_existing_records(path: &Path) -> Result<BTreeMap<String, EvalRecord>> {
    let mut map = BTreeMap::new();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(map),
        Err(e) => return Err(e.into()),
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        // A killed run may leave a truncated final line; resume past it.
        if let Ok(record) = serde_json::from_str::<EvalRecord>(line) {
            map.insert(record.key(), record);
        }
    }
    Ok(map)
}

/// Scores every instance of `dataset` under every (combination, scheme) of
/// `cfg`, persisting records incrementally to `out_dir/records.jsonl`.
/// Re-running with the same output directory resumes instead of re-scoring.
pub fn run_evaluation(
    cfg: &RunConfig,
    dataset: &DiagnosticDataset,
    backend: &dyn Backend,
    cache: &AuxCache,
    out_dir: &Path,
) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let records_path = out_dir.join("records.jsonl");
    let existing = read_existing_records(&records_path)?;

    struct WorkItem {
        combo: InputCombination,
        scheme: PromptScheme,
        entry_idx: usize,
    }

    let mut items = Vec::new();
    let mut planned = 0usize;
    for combo in &cfg.combinations {
        for scheme in &cfg.schemes {
            for (entry_idx, entry) in dataset.entries.iter().enumerate() {
                planned += 1;
                let key = record_key(cfg.task, *combo, *scheme, &entry.conversation.id);
                if !existing.contains_key(&key) {
                    items.push(WorkItem {
                        combo: *combo,
                        scheme: *scheme,
                        entry_idx,
                    });
                }
            }
        }
    }

    let reused_existing = planned - items.len();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&records_path)?;
    let writer = Mutex::new(file);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<EvalRecord>>>> =
        Mutex::new((0..items.len()).map(|_| None).collect());

    let workers = cfg.workers.min(items.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(idx) else { break };
                let outcome = score_instance(
                    cfg,
                    dataset,
                    &dataset.entries[item.entry_idx],
                    item.combo,
                    item.scheme,
                    backend,
                    cache,
                );
                if let Ok(record) = &outcome {
                    if let Ok(line) = serde_json::to_string(record) {
                        let mut w = writer.lock().expect("record writer poisoned");
                        let _ = w.write_all(line.as_bytes());
                        let _ = w.write_all(b"\n");
                        let _ = w.flush();
                    }
                }
                results.lock().expect("result slots poisoned")[idx] = Some(outcome);
            });
        }
    });

    let mut records: BTreeMap<String, EvalRecord> = existing;
    let mut aborted = Vec::new();
    for slot in results.into_inner().expect("result slots poisoned") {
        match slot.expect("worker filled every slot") {
            Ok(record) => {
                records.insert(record.key(), record);
            }
            Err(Error::InstanceAborted { instance, reason }) => aborted.push(AbortedInstance {
                key: instance,
                reason,
            }),
            Err(e) => return Err(e),
        }
    }
    aborted.sort_by(|a, b| a.key.cmp(&b.key));

    let attempted = planned - reused_existing;
    if attempted > 0 {
        let fraction = aborted.len() as f64 / attempted as f64;
        if fraction > cfg.max_abort_fraction {
            return Err(Error::AbortThresholdExceeded {
                aborted: aborted.len(),
                total: attempted,
                threshold: cfg.max_abort_fraction,
            });
        }
    }
    if !aborted.is_empty() {
        let mut lines = String::new();
        for a in &aborted {
            lines.push_str(&serde_json::to_string(a)?);
            lines.push('\n');
        }
        fs::write(out_dir.join("aborted.jsonl"), lines)?;
    }

    let manifest = RunManifest {
        toolkit_version: VERSION.to_owned(),
        config: cfg.clone(),
        backend_id: backend.id(),
        dataset_provenance: dataset.provenance.clone(),
        counts: RunCounts {
            planned,
            scored_now: attempted - aborted.len(),
            reused_existing,
            aborted: aborted.len(),
        },
    };
    let mut manifest_json = serde_json::to_vec_pretty(&manifest)?;
    manifest_json.push(b'\n');
    fs::write(out_dir.join("run_manifest.json"), manifest_json)?;

    Ok(RunOutcome {
        records: records.into_values().collect(),
        aborted,
        manifest,
    })
}

/// Fraction of correct records; errors on an empty cell.
pub fn macro_accuracy(records: &[&EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyCell);
    }
    let correct = records.iter().filter(|r| r.correct).count();
    Ok(correct as f64 / records.len() as f64)
}

/// Best and average over per-scheme accuracies plus the relative gap
/// `1 - average/best`. Ties on the best accuracy go to the earliest scheme
/// in the given order.
pub fn relative_gap(per_scheme: &[(PromptScheme, f64)]) -> Result<(PromptScheme, f64, f64, f64)> {
    if per_scheme.is_empty() {
        return Err(Error::EmptyCell);
    }
    let (mut best_scheme, mut best) = per_scheme[0];
    for (scheme, acc) in &per_scheme[1..] {
        if *acc > best {
            best = *acc;
            best_scheme = *scheme;
        }
    }
    if best <= 0.0 {
        return Err(Error::DegenerateCell);
    }
    let average = per_scheme.iter().map(|(_, a)| a).sum::<f64>() / per_scheme.len() as f64;
    Ok((best_scheme, best, average, 1.0 - average / best))
}

/// Structural slicing key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceKey {
    Deg,
    WAvgRounded,
}

impl std::fmt::Display for SliceKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SliceKey::Deg => f.write_str("deg"),
            SliceKey::WAvgRounded => f.write_str("w_avg_rounded"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SliceCell {
    pub correct: usize,
    pub n: usize,
}

impl SliceCell {
    pub fn accuracy(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.correct as f64 / self.n as f64
        }
    }
}

/// Accuracy-by-bucket table: bucket value -> combination -> cell. Buckets in
/// the observed range with no records are listed in `empty_buckets`.
#[derive(Debug, Clone, Serialize)]
pub struct SliceTable {
    pub key: SliceKey,
    pub rows: BTreeMap<u32, BTreeMap<String, SliceCell>>,
    pub empty_buckets: Vec<u32>,
}

pub fn structural_slices(records: &[&EvalRecord], key: SliceKey) -> SliceTable {
    let mut rows: BTreeMap<u32, BTreeMap<String, SliceCell>> = BTreeMap::new();
    for r in records {
        let bucket = match key {
            SliceKey::Deg => r.deg_u as u32,
            SliceKey::WAvgRounded => r.w_avg_o_rounded,
        };
        let cell = rows
            .entry(bucket)
            .or_default()
            .entry(r.combination.to_string())
            .or_default();
        cell.n += 1;
        if r.correct {
            cell.correct += 1;
        }
    }
    let empty_buckets = match (rows.keys().next(), rows.keys().next_back()) {
        (Some(&min), Some(&max)) => (min..=max).filter(|b| !rows.contains_key(b)).collect(),
        _ => Vec::new(),
    };
    SliceTable {
        key,
        rows,
        empty_buckets,
    }
}
