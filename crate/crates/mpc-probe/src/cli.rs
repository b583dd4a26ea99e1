//! Command-line interface: `ingest`, `build`, `genaux`, `run`, `report`,
//! `inspect`.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
//! Options come from flags, optionally seeded by a JSON config file
//! (`--config`); flags win. `MPC_PROBE_CACHE` overrides the default cache
//! directory when no `--cache` flag is given.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::auxgen::{ensure_description, ensure_summary, AuxCache, OutputTemplateVariant};
use crate::backend::BackendDescriptor;
use crate::corpus::{anonymize, parse_corpus, CorpusFormat, IngestOptions};
use crate::diagnostic::{
    build_diagnostic_subset, load_dataset, save_dataset, FilterConfig, LengthPolicy,
};
use crate::error::{Error, Result};
use crate::eval::{
    build_instance_prompt, emit_report, run_evaluation, EvalRecord, ReportFormat, ReportOptions,
    RunConfig,
};
use crate::graph::GraphScope;
use crate::prompt::{render_conversation_transcript, InputCombination, PromptScheme, Task};

pub const CACHE_ENV_VAR: &str = "MPC_PROBE_CACHE";

#[derive(Parser, Debug)]
#[command(
    name = "mpc-probe",
    version,
    about = "Diagnostic evaluation of multi-party-conversation classifiers"
)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a corpus, reporting per-record diagnostics and an
    /// anonymization preview.
    Ingest(IngestArgs),
    /// Build a diagnostic dataset (fixed user count, bounded length,
    /// connected interaction graph).
    Build(BuildArgs),
    /// Generate summaries and user descriptions into the cache.
    Genaux(GenauxArgs),
    /// Score a task over the full (combination x scheme) matrix.
    Run(RunArgs),
    /// Aggregate records into accuracy/gap/slice reports and plots.
    Report(ReportArgs),
    /// Print the exact prompt that `run` would score for one instance.
    Inspect(InspectArgs),
}

#[derive(Args, Debug, Default)]
struct CommonBackendArgs {
    /// Backend kind: mock or http.
    #[arg(long)]
    backend: Option<String>,
    /// HTTP backend endpoint, e.g. http://127.0.0.1:8080.
    #[arg(long)]
    endpoint: Option<String>,
    /// Seed for the mock backend and instance sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Cache directory for generated summaries/descriptions.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Corpus format: generic-jsonl or ubuntu-irc-adjacency.
    #[arg(long)]
    format: Option<String>,
    /// Accept turns with empty text.
    #[arg(long)]
    allow_empty_text: bool,
    /// Print the anonymized transcript of the first N conversations.
    #[arg(long, default_value_t = 1)]
    preview: usize,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    allow_empty_text: bool,
    /// Required number of users per conversation.
    #[arg(long)]
    users: Option<usize>,
    /// Keep conversations with at most this many turns.
    #[arg(long, conflicts_with = "exact_len")]
    max_len: Option<usize>,
    /// Keep only conversations with exactly this many turns.
    #[arg(long)]
    exact_len: Option<usize>,
    /// Admit conversations whose final speaker never appears in the context.
    #[arg(long)]
    allow_unseen_next_speaker: bool,
    /// Graph scope for recorded node metrics: context-only or full.
    #[arg(long)]
    scope: Option<String>,
    /// Output stem; writes <out>.jsonl and <out>.manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenauxArgs {
    /// Dataset stem as written by `build`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[command(flatten)]
    backend: CommonBackendArgs,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Task: ar or rs.
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated combinations (conv, conv+struct, struct+summ,
    /// struct+desc, struct+summ+desc, struct) or "all".
    #[arg(long)]
    combos: Option<String>,
    /// Comma-separated schemes (verbose, medium, concise) or "all".
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    scope: Option<String>,
    #[arg(long)]
    dummy: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_abort_fraction: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    backend: CommonBackendArgs,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Run directory holding records.jsonl.
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long)]
    plots: bool,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    combo: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    /// Conversation id; defaults to the first dataset entry.
    #[arg(long)]
    id: Option<String>,
    /// Print the full scored text for this candidate index instead of the
    /// bare classification prompt.
    #[arg(long)]
    candidate: Option<usize>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    dummy: Option<String>,
    #[command(flatten)]
    backend: CommonBackendArgs,
}

/// JSON config file schema; every field optional, flags take precedence.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    corpus: Option<PathBuf>,
    format: Option<String>,
    allow_empty_text: Option<bool>,
    users: Option<usize>,
    max_len: Option<usize>,
    exact_len: Option<usize>,
    scope: Option<String>,
    task: Option<String>,
    combos: Option<String>,
    schemes: Option<String>,
    variant: Option<String>,
    backend: Option<String>,
    endpoint: Option<String>,
    seed: Option<u64>,
    dummy: Option<String>,
    workers: Option<usize>,
    max_abort_fraction: Option<f64>,
    max_tokens: Option<usize>,
    cache: Option<PathBuf>,
    out: Option<PathBuf>,
    dataset: Option<PathBuf>,
    records: Option<PathBuf>,
    plots: Option<bool>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let bytes = fs::read(p)?;
            serde_json::from_slice(&bytes)
                .map_err(|e| Error::InvalidConfig(format!("config file {}: {e}", p.display())))
        }
    }
}

fn parse_format(s: &str) -> Result<CorpusFormat> {
    match s.to_ascii_lowercase().as_str() {
        "generic-jsonl" | "jsonl" => Ok(CorpusFormat::GenericJsonl),
        "ubuntu-irc-adjacency" | "irc" => Ok(CorpusFormat::UbuntuIrcAdjacency),
        other => Err(Error::InvalidConfig(format!("unknown corpus format {other:?}"))),
    }
}

fn parse_task(s: &str) -> Result<Task> {
    match s.to_ascii_lowercase().as_str() {
        "ar" | "addressee-recognition" => Ok(Task::AddresseeRecognition),
        "rs" | "response-selection" => Ok(Task::ResponseSelection),
        other => Err(Error::InvalidConfig(format!("unknown task {other:?}"))),
    }
}

fn parse_combo(s: &str) -> Result<InputCombination> {
    match s.to_ascii_lowercase().as_str() {
        "conv" => Ok(InputCombination::Conv),
        "conv+struct" => Ok(InputCombination::ConvStruct),
        "struct+summ" => Ok(InputCombination::StructSumm),
        "struct+desc" => Ok(InputCombination::StructDesc),
        "struct+summ+desc" => Ok(InputCombination::StructSummDesc),
        "struct" => Ok(InputCombination::Struct),
        other => Err(Error::InvalidConfig(format!("unknown combination {other:?}"))),
    }
}

fn parse_combos(s: &str, task: Task) -> Result<Vec<InputCombination>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(InputCombination::all_for(task));
    }
    s.split(',').map(|part| parse_combo(part.trim())).collect()
}

fn parse_scheme(s: &str) -> Result<PromptScheme> {
    match s.to_ascii_lowercase().as_str() {
        "verbose" => Ok(PromptScheme::Verbose),
        "medium" => Ok(PromptScheme::Medium),
        "concise" => Ok(PromptScheme::Concise),
        other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
    }
}

fn parse_schemes(s: &str) -> Result<Vec<PromptScheme>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(PromptScheme::ALL.to_vec());
    }
    s.split(',').map(|part| parse_scheme(part.trim())).collect()
}

fn parse_variant(s: &str) -> Result<OutputTemplateVariant> {
    match s.to_ascii_lowercase().as_str() {
        "v1" => Ok(OutputTemplateVariant::V1),
        "v2" => Ok(OutputTemplateVariant::V2),
        other => Err(Error::InvalidConfig(format!("unknown output template variant {other:?}"))),
    }
}

fn parse_scope(s: &str) -> Result<GraphScope> {
    match s.to_ascii_lowercase().as_str() {
        "context-only" | "context" => Ok(GraphScope::ContextOnly),
        "full" => Ok(GraphScope::Full),
        other => Err(Error::InvalidConfig(format!("unknown graph scope {other:?}"))),
    }
}

fn backend_descriptor(args: &CommonBackendArgs, cfg: &FileConfig) -> Result<BackendDescriptor> {
    let kind = args
        .backend
        .clone()
        .or_else(|| cfg.backend.clone())
        .unwrap_or_else(|| "mock".to_owned());
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    match kind.to_ascii_lowercase().as_str() {
        "mock" => Ok(BackendDescriptor::Mock { seed }),
        "http" => {
            let endpoint = args
                .endpoint
                .clone()
                .or_else(|| cfg.endpoint.clone())
                .ok_or_else(|| Error::InvalidConfig("http backend requires --endpoint".to_owned()))?;
            Ok(BackendDescriptor::Http { endpoint })
        }
        other => Err(Error::InvalidConfig(format!("unknown backend {other:?}"))),
    }
}

fn cache_dir(args: &CommonBackendArgs, cfg: &FileConfig) -> PathBuf {
    if let Some(dir) = &args.cache {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var(CACHE_ENV_VAR) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    cfg.cache.clone().unwrap_or_else(|| PathBuf::from("mpc-cache"))
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidConfig(format!("missing required option --{flag}")))
}

/// Returns the process exit code for `argv`.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path too.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };

    let file_cfg = match load_file_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };

    let outcome = match &cli.command {
        Command::Ingest(args) => cmd_ingest(args, &file_cfg),
        Command::Build(args) => cmd_build(args, &file_cfg),
        Command::Genaux(args) => cmd_genaux(args, &file_cfg),
        Command::Run(args) => cmd_run(args, &file_cfg),
        Command::Report(args) => cmd_report(args, &file_cfg),
        Command::Inspect(args) => cmd_inspect(args, &file_cfg),
    };

    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_)
        | Error::IllegalCombination { .. }
        | Error::InvalidUserId(_)
        | Error::InvalidNextSpeaker(_)
        | Error::DummyCollision(_) => 1,
        _ => 2,
    }
}

fn read_corpus(
    corpus: &Path,
    format: CorpusFormat,
    allow_empty_text: bool,
) -> Result<(Vec<crate::corpus::Conversation>, Vec<crate::corpus::ParseDiagnostic>)> {
    let file = fs::File::open(corpus)?;
    parse_corpus(file, format, IngestOptions { allow_empty_text })
}

fn cmd_ingest(args: &IngestArgs, cfg: &FileConfig) -> Result<()> {
    let corpus = required(args.corpus.clone().or_else(|| cfg.corpus.clone()), "corpus")?;
    let format = parse_format(
        &args
            .format
            .clone()
            .or_else(|| cfg.format.clone())
            .unwrap_or_else(|| "generic-jsonl".to_owned()),
    )?;
    let allow_empty = args.allow_empty_text || cfg.allow_empty_text.unwrap_or(false);
    let (conversations, diagnostics) = read_corpus(&corpus, format, allow_empty)?;

    println!(
        "parsed {}: {} conversations, {} skipped records",
        corpus.display(),
        conversations.len(),
        diagnostics.len()
    );
    for d in &diagnostics {
        println!("  skipped: {d}");
    }
    for conv in conversations.iter().take(args.preview) {
        let next_speaker = conv
            .final_speaker()
            .expect("parsed conversations have turns")
            .clone();
        match anonymize(conv, &next_speaker) {
            Ok((anon, map)) => {
                println!("\npreview {} (next speaker {} -> [ALEX]):", conv.id, next_speaker);
                for (orig, tag) in &map.assignments {
                    println!("  {orig} -> {tag}");
                }
                println!("{}", render_conversation_transcript(&anon).text);
            }
            Err(e) => println!("\npreview {}: not anonymizable: {e}", conv.id),
        }
    }
    Ok(())
}

fn length_policy(args: &BuildArgs, cfg: &FileConfig) -> Result<LengthPolicy> {
    let exact = args.exact_len.or(cfg.exact_len);
    let max = args.max_len.or(cfg.max_len);
    match (exact, max) {
        (Some(15), None) => Ok(LengthPolicy::Exactly15),
        (Some(n), None) => Err(Error::InvalidConfig(format!(
            "--exact-len supports only 15, got {n}"
        ))),
        (None, Some(15)) | (None, None) => Ok(LengthPolicy::AtMost15),
        (None, Some(n)) => Ok(LengthPolicy::Custom(n)),
        (Some(_), Some(_)) => Err(Error::InvalidConfig(
            "--exact-len conflicts with --max-len".to_owned(),
        )),
    }
}

fn cmd_build(args: &BuildArgs, cfg: &FileConfig) -> Result<()> {
    let corpus_path = required(args.corpus.clone().or_else(|| cfg.corpus.clone()), "corpus")?;
    let format = parse_format(
        &args
            .format
            .clone()
            .or_else(|| cfg.format.clone())
            .unwrap_or_else(|| "generic-jsonl".to_owned()),
    )?;
    let allow_empty = args.allow_empty_text || cfg.allow_empty_text.unwrap_or(false);
    let users = required(args.users.or(cfg.users), "users")?;
    let out = required(args.out.clone().or_else(|| cfg.out.clone()), "out")?;

    let mut filter = FilterConfig::new(users);
    filter.length_policy = length_policy(args, cfg)?;
    filter.require_next_speaker_in_context = !args.allow_unseen_next_speaker;
    if let Some(scope) = args.scope.clone().or_else(|| cfg.scope.clone()) {
        filter.metric_scope = parse_scope(&scope)?;
    }
    filter.validate()?;

    let (conversations, diagnostics) = read_corpus(&corpus_path, format, allow_empty)?;
    let source_id = corpus_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_owned());
    let dataset = build_diagnostic_subset(&conversations, &filter, &source_id)?;

    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    save_dataset(&dataset, &out)?;
    let stats = &dataset.provenance.stats;
    println!(
        "dataset {}: retained {} of {} (skipped at parse: {}); rejections: user-count {}, length {}, connectivity {}, next-speaker {}",
        out.display(),
        stats.retained,
        stats.input,
        diagnostics.len(),
        stats.user_count,
        stats.length,
        stats.connectivity,
        stats.next_speaker
    );
    Ok(())
}

fn open_dataset(
    dataset: Option<PathBuf>,
    cfg: &FileConfig,
) -> Result<(crate::diagnostic::DiagnosticDataset, PathBuf)> {
    let stem = required(dataset.or_else(|| cfg.dataset.clone()), "dataset")?;
    let ds = load_dataset(&stem)?;
    Ok((ds, stem))
}

fn cmd_genaux(args: &GenauxArgs, cfg: &FileConfig) -> Result<()> {
    let (dataset, _) = open_dataset(args.dataset.clone(), cfg)?;
    let schemes = parse_schemes(
        &args
            .schemes
            .clone()
            .or_else(|| cfg.schemes.clone())
            .unwrap_or_else(|| "all".to_owned()),
    )?;
    let variant = parse_variant(
        &args
            .variant
            .clone()
            .or_else(|| cfg.variant.clone())
            .unwrap_or_else(|| "v1".to_owned()),
    )?;
    let max_tokens = args
        .max_tokens
        .or(cfg.max_tokens)
        .unwrap_or(crate::auxgen::DEFAULT_GEN_MAX_TOKENS);
    let descriptor = backend_descriptor(&args.backend, cfg)?;
    let backend = descriptor.build();
    let cache = AuxCache::new(cache_dir(&args.backend, cfg))?;

    let mut generated = 0usize;
    for entry in &dataset.entries {
        let context = entry.conversation.context();
        for scheme in &schemes {
            ensure_summary(&cache, &context, backend.as_ref(), *scheme, variant, max_tokens)?;
            ensure_description(&cache, &context, backend.as_ref(), *scheme, variant, max_tokens)?;
            generated += 2;
        }
    }
    println!(
        "cached {} aux entries for {} conversations under {}",
        generated,
        dataset.entries.len(),
        cache.dir().display()
    );
    Ok(())
}

fn build_run_config(args: &RunArgs, cfg: &FileConfig, dataset_id: String) -> Result<RunConfig> {
    let task = parse_task(&required(args.task.clone().or_else(|| cfg.task.clone()), "task")?)?;
    let descriptor = backend_descriptor(&args.backend, cfg)?;
    let seed = args.backend.seed.or(cfg.seed).unwrap_or(0);
    let mut run = RunConfig::new(dataset_id, task, descriptor, seed);
    if let Some(combos) = args.combos.clone().or_else(|| cfg.combos.clone()) {
        run.combinations = parse_combos(&combos, task)?;
    }
    if let Some(schemes) = args.schemes.clone().or_else(|| cfg.schemes.clone()) {
        run.schemes = parse_schemes(&schemes)?;
    }
    if let Some(variant) = args.variant.clone().or_else(|| cfg.variant.clone()) {
        run.variant = parse_variant(&variant)?;
    }
    if let Some(scope) = args.scope.clone().or_else(|| cfg.scope.clone()) {
        run.metric_scope = parse_scope(&scope)?;
    }
    if let Some(dummy) = args.dummy.clone().or_else(|| cfg.dummy.clone()) {
        run.dummy_tag = dummy;
    }
    if let Some(workers) = args.workers.or(cfg.workers) {
        run.workers = workers;
    }
    if let Some(fraction) = args.max_abort_fraction.or(cfg.max_abort_fraction) {
        run.max_abort_fraction = fraction;
    }
    if let Some(max_tokens) = cfg.max_tokens {
        run.gen_max_tokens = max_tokens;
    }
    Ok(run)
}

fn cmd_run(args: &RunArgs, cfg: &FileConfig) -> Result<()> {
    let (dataset, stem) = open_dataset(args.dataset.clone(), cfg)?;
    let dataset_id = stem
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dataset.id());
    let run_cfg = build_run_config(args, cfg, dataset_id)?;
    run_cfg.validate()?;

    let out = required(args.out.clone().or_else(|| cfg.out.clone()), "out")?;
    let backend = run_cfg.backend.build();
    let cache = AuxCache::new(cache_dir(&args.backend, cfg))?;
    let outcome = run_evaluation(&run_cfg, &dataset, backend.as_ref(), &cache, &out)?;
    println!(
        "run complete: {} records ({} reused, {} aborted) -> {}",
        outcome.records.len(),
        outcome.manifest.counts.reused_existing,
        outcome.aborted.len(),
        out.display()
    );
    Ok(())
}

fn read_records(dir: &Path) -> Result<Vec<EvalRecord>> {
    let path = if dir.is_dir() { dir.join("records.jsonl") } else { dir.to_path_buf() };
    let text = fs::read_to_string(&path)?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = serde_json::from_str(line).map_err(|e| {
            Error::CorpusRead(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

fn cmd_report(args: &ReportArgs, cfg: &FileConfig) -> Result<()> {
    let records_dir = required(args.records.clone().or_else(|| cfg.records.clone()), "records")?;
    let records = read_records(&records_dir)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| records_dir.clone());
    let opts = ReportOptions {
        formats: vec![ReportFormat::Csv, ReportFormat::Json],
        plots: args.plots || cfg.plots.unwrap_or(false),
    };
    let written = emit_report(&records, &out, &opts)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_inspect(args: &InspectArgs, cfg: &FileConfig) -> Result<()> {
    let (dataset, stem) = open_dataset(args.dataset.clone(), cfg)?;
    let dataset_id = stem
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dataset.id());
    let task = parse_task(&required(args.task.clone().or_else(|| cfg.task.clone()), "task")?)?;
    let combo = parse_combo(&required(args.combo.clone().or_else(|| cfg.combos.clone()), "combo")?)?;
    let scheme = parse_scheme(&required(args.scheme.clone().or_else(|| cfg.schemes.clone()), "scheme")?)?;

    let descriptor = backend_descriptor(&args.backend, cfg)?;
    let seed = args.backend.seed.or(cfg.seed).unwrap_or(0);
    let mut run_cfg = RunConfig::new(dataset_id, task, descriptor, seed);
    run_cfg.combinations = vec![combo];
    run_cfg.schemes = vec![scheme];
    if let Some(variant) = args.variant.clone().or_else(|| cfg.variant.clone()) {
        run_cfg.variant = parse_variant(&variant)?;
    }
    if let Some(dummy) = args.dummy.clone().or_else(|| cfg.dummy.clone()) {
        run_cfg.dummy_tag = dummy;
    }
    run_cfg.validate()?;

    let entry = match &args.id {
        Some(id) => dataset
            .entries
            .iter()
            .find(|e| e.conversation.id == *id)
            .ok_or_else(|| Error::InvalidConfig(format!("no conversation {id:?} in dataset")))?,
        None => dataset
            .entries
            .first()
            .ok_or_else(|| Error::InvalidConfig("dataset is empty".to_owned()))?,
    };

    let backend = run_cfg.backend.build();
    let cache = AuxCache::new(cache_dir(&args.backend, cfg))?;
    let (prompt, candidates, _gold) =
        build_instance_prompt(&run_cfg, &dataset, entry, combo, scheme, backend.as_ref(), &cache)?;

    match args.candidate {
        None => print!("{}", prompt.render()),
        Some(k) => {
            let candidate = candidates.get(k).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "candidate index {k} out of range ({} candidates)",
                    candidates.len()
                ))
            })?;
            print!("{}", prompt.scored_text(candidate));
        }
    }
    Ok(())
}
