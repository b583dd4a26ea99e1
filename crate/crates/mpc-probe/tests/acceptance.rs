//! Acceptance suite: one test per criterion, each printing a single
//! `ACCEPTANCE <n> PASS/FAIL` line (visible with `-- --nocapture`).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mpc_probe::auxgen::AuxCache;
use mpc_probe::backend::stub::StubServer;
use mpc_probe::backend::{Backend, BackendDescriptor, HttpBackend, MockBackend, RetryPolicy};
use mpc_probe::corpus::{parse_corpus, Conversation, CorpusFormat, IngestOptions, UserId};
use mpc_probe::diagnostic::{build_diagnostic_subset, first_failing_predicate, FilterConfig, LengthPolicy, RejectionReason};
use mpc_probe::eval::{emit_report, relative_gap, run_evaluation, ReportFormat, ReportOptions, RunConfig};
use mpc_probe::graph::{average_outgoing_weight, build_graphs, degree_centrality, GraphScope};
use mpc_probe::prompt::{build_system_prompt, InputCombination, PromptScheme, Task};
use mpc_probe::scoring::{cppl, LogprobResult};
use mpc_probe::synth::{corpus_with_violations, random_conversation, InjectedViolation};
use mpc_probe::task::{build_ar_instance, DEFAULT_DUMMY_TAG};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(n: u32, name: &str, f: impl FnOnce() -> Result<String, String>) {
    match f() {
        Ok(detail) => println!("ACCEPTANCE {n} PASS - {name}: {detail}"),
        Err(msg) => {
            println!("ACCEPTANCE {n} FAIL - {name}: {msg}");
            panic!("acceptance criterion {n} failed: {msg}");
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($arg)+));
        }
    };
}

fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

// ---------------------------------------------------------------------------
// Criterion 1: the published per-scheme accuracy tables reproduce the
// published relative-gap table (44 cells) and best-scheme markers.
// ---------------------------------------------------------------------------

struct GapRow {
    task: Task,
    combo: InputCombination,
    /// Per dataset (U3..U6): accuracies for (verbose, medium, concise).
    accs: [[f64; 3]; 4],
    /// Per dataset: (gap percent, best-scheme marker v/m/c).
    expected: [(f64, char); 4],
}

fn gap_table() -> Vec<GapRow> {
    use InputCombination::*;
    use Task::{AddresseeRecognition as AR, ResponseSelection as RS};
    vec![
        GapRow { task: AR, combo: Conv, accs: [[0.613, 0.582, 0.595], [0.414, 0.409, 0.416], [0.352, 0.344, 0.298], [0.277, 0.283, 0.289]], expected: [(2.7, 'v'), (0.6, 'c'), (5.8, 'v'), (2.0, 'c')] },
        GapRow { task: RS, combo: Conv, accs: [[0.625, 0.624, 0.612], [0.627, 0.619, 0.617], [0.619, 0.613, 0.610], [0.640, 0.646, 0.649]], expected: [(0.8, 'v'), (0.9, 'v'), (0.8, 'v'), (0.6, 'c')] },
        GapRow { task: AR, combo: ConvStruct, accs: [[0.660, 0.609, 0.571], [0.584, 0.501, 0.477], [0.525, 0.513, 0.465], [0.449, 0.431, 0.400]], expected: [(7.1, 'v'), (10.9, 'v'), (4.5, 'v'), (4.9, 'v')] },
        GapRow { task: RS, combo: ConvStruct, accs: [[0.626, 0.626, 0.618], [0.611, 0.609, 0.616], [0.602, 0.606, 0.590], [0.620, 0.631, 0.629]], expected: [(0.4, 'v'), (0.6, 'c'), (1.1, 'm'), (0.8, 'm')] },
        GapRow { task: AR, combo: StructSumm, accs: [[0.623, 0.644, 0.617], [0.517, 0.491, 0.441], [0.448, 0.465, 0.433], [0.397, 0.429, 0.374]], expected: [(2.5, 'm'), (6.5, 'v'), (3.6, 'm'), (6.7, 'm')] },
        GapRow { task: RS, combo: StructSumm, accs: [[0.572, 0.575, 0.564], [0.570, 0.556, 0.572], [0.569, 0.573, 0.587], [0.626, 0.614, 0.623]], expected: [(0.8, 'm'), (1.0, 'c'), (1.7, 'c'), (0.8, 'v')] },
        GapRow { task: AR, combo: StructDesc, accs: [[0.637, 0.604, 0.618], [0.499, 0.457, 0.458], [0.456, 0.442, 0.404], [0.406, 0.380, 0.323]], expected: [(2.7, 'v'), (5.6, 'v'), (4.8, 'v'), (8.9, 'v')] },
        GapRow { task: RS, combo: StructDesc, accs: [[0.565, 0.553, 0.542], [0.553, 0.565, 0.562], [0.540, 0.550, 0.538], [0.597, 0.586, 0.606]], expected: [(2.1, 'v'), (0.9, 'm'), (1.3, 'm'), (1.6, 'c')] },
        GapRow { task: AR, combo: StructSummDesc, accs: [[0.628, 0.620, 0.607], [0.472, 0.455, 0.433], [0.429, 0.444, 0.417], [0.383, 0.374, 0.323]], expected: [(1.5, 'v'), (4.0, 'v'), (3.2, 'm'), (6.0, 'v')] },
        GapRow { task: RS, combo: StructSummDesc, accs: [[0.576, 0.574, 0.573], [0.570, 0.570, 0.583], [0.573, 0.575, 0.585], [0.623, 0.614, 0.620]], expected: [(0.2, 'v'), (1.4, 'c'), (1.2, 'c'), (0.6, 'v')] },
        GapRow { task: AR, combo: Struct, accs: [[0.654, 0.626, 0.573], [0.572, 0.515, 0.487], [0.537, 0.498, 0.438], [0.454, 0.434, 0.389]], expected: [(5.6, 'v'), (8.3, 'v'), (8.5, 'v'), (6.3, 'v')] },
    ]
}

fn marker(scheme: PromptScheme) -> char {
    match scheme {
        PromptScheme::Verbose => 'v',
        PromptScheme::Medium => 'm',
        PromptScheme::Concise => 'c',
    }
}

#[test]
fn criterion_1_gap_table_cross_check() {
    criterion(1, "paper-table cross-check (gap_rel)", || {
        let start = Instant::now();
        let rows = gap_table();
        let mut cells = 0;
        for row in &rows {
            for (dataset_idx, accs) in row.accs.iter().enumerate() {
                let per_scheme = [
                    (PromptScheme::Verbose, accs[0]),
                    (PromptScheme::Medium, accs[1]),
                    (PromptScheme::Concise, accs[2]),
                ];
                let (best_scheme, _, _, gap) =
                    relative_gap(&per_scheme).map_err(|e| e.to_string())?;
                let gap_pct = (gap * 1000.0).round() / 10.0;
                let (expected_pct, expected_marker) = row.expected[dataset_idx];
                ensure!(
                    (gap_pct - expected_pct).abs() <= 0.1 + 1e-9,
                    "{} {} Ubuntu{}: computed {gap_pct:.1}%, published {expected_pct}%",
                    row.task,
                    row.combo,
                    dataset_idx + 3
                );
                ensure!(
                    marker(best_scheme) == expected_marker,
                    "{} {} Ubuntu{}: best scheme {best_scheme}, published marker {expected_marker}",
                    row.task,
                    row.combo,
                    dataset_idx + 3
                );
                cells += 1;
            }
        }
        ensure!(cells == 44, "expected 44 cells, checked {cells}");
        let elapsed = start.elapsed();
        ensure!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
        Ok(format!("44/44 cells within 0.1 pp, all best-scheme markers match ({elapsed:?})"))
    });
}

// ---------------------------------------------------------------------------
// Criterion 2: graph metrics equal a brute-force adjacency-matrix oracle on
// 1,000 random conversations, exactly, for every node.
// ---------------------------------------------------------------------------

fn oracle_metrics(conv: &Conversation) -> BTreeMap<UserId, (usize, f64)> {
    let users: Vec<UserId> = conv.users.iter().cloned().collect();
    let index: BTreeMap<&UserId, usize> = users.iter().zip(0..).collect();
    let n = users.len();
    let mut adjacent = vec![vec![false; n]; n];
    let mut weight = vec![vec![0u32; n]; n];
    for t in &conv.turns {
        if t.speaker == t.addressee {
            continue;
        }
        let i = index[&t.speaker];
        let j = index[&t.addressee];
        adjacent[i][j] = true;
        adjacent[j][i] = true;
        weight[i][j] += 1;
    }
    users
        .iter()
        .map(|u| {
            let i = index[u];
            let degree = adjacent[i].iter().filter(|x| **x).count();
            let out: Vec<u32> = weight[i].iter().copied().filter(|w| *w > 0).collect();
            let avg = if out.is_empty() {
                0.0
            } else {
                f64::from(out.iter().sum::<u32>()) / out.len() as f64
            };
            (u.clone(), (degree, avg))
        })
        .collect()
}

#[test]
fn criterion_2_graph_metric_oracle() {
    criterion(2, "graph-metric oracle equivalence", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut nodes_checked = 0usize;
        for i in 0..1000 {
            let conv = random_conversation(&mut rng, &format!("rand-{i}"), 6, 15);
            let (und, dir) = build_graphs(&conv, GraphScope::Full);
            let oracle = oracle_metrics(&conv);
            for (user, (expected_degree, expected_avg)) in oracle {
                let degree = degree_centrality(&und, &user).map_err(|e| e.to_string())?;
                let avg = average_outgoing_weight(&dir, &user).map_err(|e| e.to_string())?;
                ensure!(
                    degree == expected_degree,
                    "conversation {i}, node {user}: degree {degree} vs oracle {expected_degree}"
                );
                ensure!(
                    avg == expected_avg,
                    "conversation {i}, node {user}: w_avg {avg} vs oracle {expected_avg}"
                );
                nodes_checked += 1;
            }
        }
        let elapsed = start.elapsed();
        ensure!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
        Ok(format!("1000 conversations, {nodes_checked} nodes, exact match ({elapsed:?})"))
    });
}

// ---------------------------------------------------------------------------
// Criterion 3: filter soundness and completeness on 500 conversations with
// injected violations, re-checked by independent predicate implementations.
// ---------------------------------------------------------------------------

fn independent_user_count(conv: &Conversation) -> usize {
    let mut set = BTreeSet::new();
    for t in &conv.turns {
        set.insert(t.speaker.as_str());
        set.insert(t.addressee.as_str());
    }
    set.len()
}

fn independent_connected(conv: &Conversation) -> bool {
    let users: Vec<&str> = {
        let mut set = BTreeSet::new();
        for t in &conv.turns {
            set.insert(t.speaker.as_str());
            set.insert(t.addressee.as_str());
        }
        set.into_iter().collect()
    };
    let index: BTreeMap<&str, usize> = users.iter().copied().zip(0..).collect();
    let n = users.len();
    if n == 0 {
        return false;
    }
    let mut adjacent = vec![vec![false; n]; n];
    for t in &conv.turns {
        if t.speaker != t.addressee {
            let i = index[t.speaker.as_str()];
            let j = index[t.addressee.as_str()];
            adjacent[i][j] = true;
            adjacent[j][i] = true;
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for (j, edge) in adjacent[i].iter().enumerate() {
            if *edge && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn independent_next_speaker_in_context(conv: &Conversation) -> bool {
    let Some(last) = conv.turns.last() else { return false };
    conv.turns[..conv.turns.len() - 1]
        .iter()
        .any(|t| t.speaker == last.speaker || t.addressee == last.speaker)
}

fn independent_predicate_fails(conv: &Conversation, cfg: &FilterConfig, reason: RejectionReason) -> bool {
    match reason {
        RejectionReason::UserCount => independent_user_count(conv) != cfg.user_count,
        RejectionReason::Length => conv.turns.len() > 15,
        RejectionReason::Connectivity => !independent_connected(conv),
        RejectionReason::NextSpeakerNotInContext => !independent_next_speaker_in_context(conv),
    }
}

#[test]
fn criterion_3_filter_soundness_completeness() {
    criterion(3, "diagnostic filter soundness/completeness", || {
        let cfg = FilterConfig::new(4);
        let labeled = corpus_with_violations(97, 500, 4);
        let corpus: Vec<Conversation> = labeled.iter().map(|(c, _)| c.clone()).collect();
        let dataset = build_diagnostic_subset(&corpus, &cfg, "violations").unwrap();

        let retained: BTreeSet<&str> = dataset
            .entries
            .iter()
            .map(|e| e.conversation.id.as_str())
            .collect();

        let mut clean = 0usize;
        let mut rejected = 0usize;
        for (conv, label) in &labeled {
            let is_retained = retained.contains(conv.id.as_str());
            match label {
                None => {
                    ensure!(is_retained, "clean conversation {} was rejected", conv.id);
                    clean += 1;
                }
                Some(violation) => {
                    ensure!(!is_retained, "{} with injected {violation:?} was retained", conv.id);
                    rejected += 1;
                }
            }
        }

        // Soundness: every retained conversation passes independent
        // re-checks of all enabled predicates (on the anonymized member).
        for entry in &dataset.entries {
            let conv = &entry.conversation;
            ensure!(
                independent_user_count(conv) == cfg.user_count,
                "{}: independent user count check fails",
                conv.id
            );
            ensure!(conv.turns.len() <= 15, "{}: independent length check fails", conv.id);
            ensure!(independent_connected(conv), "{}: independent connectivity check fails", conv.id);
            ensure!(
                independent_next_speaker_in_context(conv),
                "{}: independent next-speaker check fails",
                conv.id
            );
        }

        // Completeness: the predicate recorded for every rejection
        // genuinely fails per the independent implementations.
        let mut recorded_counts: BTreeMap<&'static str, usize> = BTreeMap::new();
        for (conv, label) in &labeled {
            if label.is_none() {
                continue;
            }
            let Some(reason) = first_failing_predicate(conv, &cfg) else {
                return Err(format!("{} labeled {label:?} but no predicate fails", conv.id));
            };
            ensure!(
                independent_predicate_fails(conv, &cfg, reason),
                "{}: recorded predicate {reason:?} does not fail independently",
                conv.id
            );
            let expected = match label.unwrap() {
                InjectedViolation::UserCount => RejectionReason::UserCount,
                InjectedViolation::Length => RejectionReason::Length,
                InjectedViolation::Connectivity => RejectionReason::Connectivity,
                InjectedViolation::NextSpeaker => RejectionReason::NextSpeakerNotInContext,
            };
            ensure!(
                reason == expected,
                "{}: recorded {reason:?}, injected {expected:?}",
                conv.id
            );
            *recorded_counts
                .entry(match reason {
                    RejectionReason::UserCount => "user_count",
                    RejectionReason::Length => "length",
                    RejectionReason::Connectivity => "connectivity",
                    RejectionReason::NextSpeakerNotInContext => "next_speaker",
                })
                .or_default() += 1;
        }
        let stats = &dataset.provenance.stats;
        ensure!(
            stats.user_count == recorded_counts.get("user_count").copied().unwrap_or(0)
                && stats.length == recorded_counts.get("length").copied().unwrap_or(0)
                && stats.connectivity == recorded_counts.get("connectivity").copied().unwrap_or(0)
                && stats.next_speaker == recorded_counts.get("next_speaker").copied().unwrap_or(0),
            "aggregate rejection statistics disagree with per-conversation reasons: {stats:?} vs {recorded_counts:?}"
        );
        ensure!(stats.retained == clean, "retained {} != clean {clean}", stats.retained);

        Ok(format!(
            "500 conversations: {clean} retained, {rejected} rejected, zero misclassifications"
        ))
    });
}

// ---------------------------------------------------------------------------
// Criterion 4: CPPL worked examples exact to 1e-9; 10,000 random vectors
// confirm argmin-CPPL = argmax-mean-logprob and closed-form agreement.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_cppl_math() {
    criterion(4, "CPPL worked examples and property suite", || {
        let lr = |lps: &[f64]| LogprobResult {
            tokens: lps.iter().map(|_| "t".to_owned()).collect(),
            logprobs: lps.to_vec(),
        };
        ensure!((cppl(&lr(&[0.0])) - 1.0).abs() < 1e-9, "CPPL([0]) != 1");
        let half = 0.5f64.ln();
        ensure!((cppl(&lr(&[half, half])) - 2.0).abs() < 1e-9, "CPPL != 2");
        ensure!(
            (cppl(&lr(&[-1.0, -1.0, -1.0, -1.0])) - std::f64::consts::E).abs() < 1e-9,
            "CPPL != e"
        );

        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for case in 0..10_000 {
            let k = rng.random_range(2..=7);
            let vectors: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let n = rng.random_range(1..=40);
                    (0..n).map(|_| -rng.random_range(0.01..6.0)).collect()
                })
                .collect();

            let cppls: Vec<f64> = vectors.iter().map(|v| cppl(&lr(v))).collect();
            let argmin_cppl = cppls
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                .unwrap()
                .0;
            let means: Vec<f64> = vectors
                .iter()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect();
            let argmax_mean = means
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                .unwrap()
                .0;
            ensure!(
                argmin_cppl == argmax_mean,
                "case {case}: argmin CPPL {argmin_cppl} != argmax mean logprob {argmax_mean}"
            );

            for (v, c) in vectors.iter().zip(&cppls) {
                let p: f64 = v.iter().map(|l| l.exp()).product();
                let closed = 1.0 / p.powf(1.0 / v.len() as f64);
                let rel = (c - closed).abs() / closed;
                ensure!(rel < 1e-12, "case {case}: closed-form disagreement {rel}");
            }
        }
        Ok("3 worked examples exact, 10,000 random vectors consistent".to_owned())
    });
}

// ---------------------------------------------------------------------------
// Criterion 5: the 33 classification and 6 generation system prompts match
// the checked-in goldens byte for byte; framing strings are exact.
// ---------------------------------------------------------------------------

fn task_slug(task: Task) -> &'static str {
    match task {
        Task::ResponseSelection => "rs",
        Task::AddresseeRecognition => "ar",
        Task::SummaryGeneration => "summ",
        Task::DescriptionGeneration => "desc",
    }
}

fn combo_slug(combo: InputCombination) -> &'static str {
    match combo {
        InputCombination::Conv => "conv",
        InputCombination::ConvStruct => "conv-struct",
        InputCombination::StructSumm => "struct-summ",
        InputCombination::StructDesc => "struct-desc",
        InputCombination::StructSummDesc => "struct-summ-desc",
        InputCombination::Struct => "struct",
    }
}

#[test]
fn criterion_5_prompt_matrix_goldens() {
    criterion(5, "prompt matrix goldens and framing", || {
        let mut checked = 0;
        for task in [Task::AddresseeRecognition, Task::ResponseSelection] {
            for combo in InputCombination::all_for(task) {
                for scheme in PromptScheme::ALL {
                    let system = build_system_prompt(task, combo, scheme).unwrap();
                    let rel = format!(
                        "tests/goldens/system/{}_{}_{}.txt",
                        task_slug(task),
                        combo_slug(combo),
                        scheme
                    );
                    let golden = fs::read_to_string(manifest_path(&rel))
                        .map_err(|e| format!("missing golden {rel}: {e}"))?;
                    ensure!(golden == system, "system prompt differs from golden {rel}");
                    checked += 1;
                }
            }
        }
        ensure!(checked == 33, "expected 33 classification prompts, saw {checked}");
        for task in [Task::SummaryGeneration, Task::DescriptionGeneration] {
            for scheme in PromptScheme::ALL {
                let system = build_system_prompt(task, InputCombination::ConvStruct, scheme).unwrap();
                let rel = format!("tests/goldens/system/{}_{}_v1.txt", task_slug(task), scheme);
                let golden = fs::read_to_string(manifest_path(&rel))
                    .map_err(|e| format!("missing golden {rel}: {e}"))?;
                ensure!(golden == system, "system prompt differs from golden {rel}");
                checked += 1;
            }
        }
        ensure!(checked == 39, "expected 39 prompts, saw {checked}");

        // Framing strings exactly as published.
        use mpc_probe::prompt::{AssembledPrompt, Framing};
        let generation = AssembledPrompt {
            system: "s".to_owned(),
            input: "i".to_owned(),
            begin_of_output: None,
            framing: Framing::Generation,
        };
        ensure!(
            generation.render() == "[INST] <<SYS>> s <</SYS>> i [/INST]",
            "generation framing drifted: {:?}",
            generation.render()
        );
        let classification = AssembledPrompt {
            system: "s".to_owned(),
            input: "i".to_owned(),
            begin_of_output: Some("b".to_owned()),
            framing: Framing::Classification,
        };
        ensure!(
            classification.render() == "[INST]<<SYS>> s <</SYS>> i [/INST] b",
            "classification framing drifted: {:?}",
            classification.render()
        );
        ensure!(
            classification.scored_text("r") == "[INST]<<SYS>> s <</SYS>> i [/INST] b r",
            "candidate join drifted"
        );

        // The instruction-template triplet for AR, as published.
        let section = |scheme| {
            build_system_prompt(Task::AddresseeRecognition, InputCombination::Conv, scheme)
                .unwrap()
                .split("\n\n")
                .nth(5)
                .unwrap()
                .to_owned()
        };
        ensure!(
            section(PromptScheme::Verbose) == "Write the user id of the addressee of the next message"
                && section(PromptScheme::Medium) == "Write the addressee id of the next message"
                && section(PromptScheme::Concise) == "Write the next addressee id",
            "AR instruction triplet drifted"
        );

        Ok("39 system prompts byte-match goldens; framing exact".to_owned())
    });
}

// ---------------------------------------------------------------------------
// Criterion 6: AR candidate counts are user_count + 1 for 3..=6 users.
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_ar_candidate_counts() {
    criterion(6, "AR candidate-count property", || {
        for user_count in 3..=6usize {
            let corpus = mpc_probe::synth::synthetic_corpus(60 + user_count as u64, 25, user_count);
            let dataset =
                build_diagnostic_subset(&corpus, &FilterConfig::new(user_count), "cand").unwrap();
            ensure!(!dataset.entries.is_empty(), "empty dataset for {user_count} users");
            for entry in &dataset.entries {
                let instance = build_ar_instance(&entry.conversation, DEFAULT_DUMMY_TAG)
                    .map_err(|e| e.to_string())?;
                ensure!(
                    instance.candidates.len() == user_count + 1,
                    "{}: {} candidates for {user_count} users",
                    entry.conversation.id,
                    instance.candidates.len()
                );
                ensure!(
                    instance.gold != DEFAULT_DUMMY_TAG,
                    "{}: gold is the dummy tag",
                    entry.conversation.id
                );
            }
        }
        Ok("user counts 3,4,5,6 -> 4,5,6,7 candidates; gold never the dummy".to_owned())
    });
}

// ---------------------------------------------------------------------------
// Criterion 7: end-to-end determinism of the full matrix over the bundled
// corpus: report bytes identical across two independent runs.
// ---------------------------------------------------------------------------

fn full_matrix_run(root: &Path) -> Result<(), String> {
    let corpus_file = manifest_path("fixtures/synthetic_corpus.jsonl");
    let file = fs::File::open(&corpus_file).map_err(|e| e.to_string())?;
    let (corpus, diags) =
        parse_corpus(file, CorpusFormat::GenericJsonl, IngestOptions::default())
            .map_err(|e| e.to_string())?;
    if !diags.is_empty() {
        return Err(format!("bundled corpus has diagnostics: {}", diags[0]));
    }
    let dataset = build_diagnostic_subset(&corpus, &FilterConfig::new(3), "synthetic50")
        .map_err(|e| e.to_string())?;
    if dataset.entries.len() != 50 {
        return Err(format!("expected 50 retained conversations, got {}", dataset.entries.len()));
    }

    let cache = AuxCache::new(root.join("cache")).map_err(|e| e.to_string())?;
    let run_dir = root.join("run");
    for task in [Task::AddresseeRecognition, Task::ResponseSelection] {
        let cfg = RunConfig::new("synthetic50-u3", task, BackendDescriptor::Mock { seed: 11 }, 11);
        let backend = cfg.backend.build();
        run_evaluation(&cfg, &dataset, backend.as_ref(), &cache, &run_dir)
            .map_err(|e| e.to_string())?;
    }

    let text = fs::read_to_string(run_dir.join("records.jsonl")).map_err(|e| e.to_string())?;
    let mut records: Vec<mpc_probe::eval::EvalRecord> = text
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    records.sort_by_key(|r| r.key());
    let expected = (6 + 5) * 3 * 50;
    if records.len() != expected {
        return Err(format!("expected {expected} records, got {}", records.len()));
    }
    emit_report(
        &records,
        &root.join("report"),
        &ReportOptions {
            formats: vec![ReportFormat::Csv, ReportFormat::Json],
            plots: true,
        },
    )
    .map_err(|e| e.to_string())?;
    Ok(())
}

#[test]
fn criterion_7_end_to_end_determinism() {
    criterion(7, "end-to-end determinism on the bundled corpus", || {
        let start = Instant::now();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        full_matrix_run(dir1.path())?;
        full_matrix_run(dir2.path())?;

        let mut compared = 0;
        for rel in ["report/report.csv", "report/slices.csv", "report/report.json"] {
            let a = fs::read(dir1.path().join(rel)).map_err(|e| e.to_string())?;
            let b = fs::read(dir2.path().join(rel)).map_err(|e| e.to_string())?;
            ensure!(a == b, "{rel} differs between runs");
            compared += 1;
        }
        let plots = fs::read_dir(dir1.path().join("report/plots")).map_err(|e| e.to_string())?;
        for entry in plots {
            let entry = entry.map_err(|e| e.to_string())?;
            let name = entry.file_name();
            let a = fs::read(entry.path()).map_err(|e| e.to_string())?;
            let b = fs::read(dir2.path().join("report/plots").join(&name)).map_err(|e| e.to_string())?;
            ensure!(a == b, "plot {name:?} differs between runs");
            compared += 1;
        }
        ensure!(compared >= 9, "compared only {compared} files");

        let elapsed = start.elapsed();
        ensure!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}, budget 2 min");
        Ok(format!(
            "50 conversations, AR 6x3 + RS 5x3 (1,650 records) twice; {compared} report files byte-identical ({elapsed:?})"
        ))
    });
}

// ---------------------------------------------------------------------------
// Criterion 8 (conditional): dataset sizes on the external Ubuntu IRC
// corpus, compared against the published 1200/635/520/350.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_external_corpus_sizes() {
    criterion(8, "external-corpus dataset sizes", || {
        let Ok(path) = std::env::var("MPC_PROBE_UBUNTU_CORPUS") else {
            return Ok(
                "SKIPPED (conditional): set MPC_PROBE_UBUNTU_CORPUS to the corpus file to run"
                    .to_owned(),
            );
        };
        let file = fs::File::open(&path).map_err(|e| format!("{path}: {e}"))?;
        let (corpus, diags) = parse_corpus(
            file,
            CorpusFormat::UbuntuIrcAdjacency,
            IngestOptions { allow_empty_text: true },
        )
        .map_err(|e| e.to_string())?;
        let published = [1200usize, 635, 520, 350];
        let mut report = format!("{} conversations parsed ({} skipped);", corpus.len(), diags.len());
        let mut failures = Vec::new();
        for (i, user_count) in (3..=6usize).enumerate() {
            let mut deviations = Vec::new();
            for policy in [LengthPolicy::AtMost15, LengthPolicy::Exactly15] {
                let mut cfg = FilterConfig::new(user_count);
                cfg.length_policy = policy;
                let ds = build_diagnostic_subset(&corpus, &cfg, "ubuntu-irc")
                    .map_err(|e| e.to_string())?;
                let got = ds.entries.len();
                let deviation = (got as f64 - published[i] as f64).abs() / published[i] as f64;
                deviations.push(deviation);
                report.push_str(&format!(
                    " u{user_count}/{policy:?}: {got} vs {} ({:+.1}%);",
                    published[i],
                    (got as f64 / published[i] as f64 - 1.0) * 100.0
                ));
            }
            if deviations.iter().all(|d| *d > 0.15) {
                failures.push(format!("u{user_count} deviates >15% under both length policies"));
            }
        }
        ensure!(failures.is_empty(), "{report} FAILURES: {}", failures.join("; "));
        Ok(report)
    });
}

// ---------------------------------------------------------------------------
// Criterion 9: non-reproducibility statement and the verified HTTP
// integration path.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_http_integration_path() {
    criterion(9, "non-reproducibility statement and HTTP wire contract", || {
        println!(
            "NOTE: the reference Llama2-13b-chat accuracy figures and structural-trend \
             curves are not desk-scale reproducible (they require GPU inference over 13B \
             weights); criteria 1-8 substitute for them, and `--backend http` provides the \
             integration path whose wire contract is verified here against the stub server."
        );
        let seed = 99;
        let server = StubServer::start(seed).map_err(|e| e.to_string())?;
        let http = HttpBackend::new(server.endpoint(), RetryPolicy::default());
        let mock = MockBackend::new(seed);

        let context = "[INST]<<SYS>> s <</SYS>> i [/INST] The addressee of the next message is ";
        for candidate in ["[ALEX]", "[BENNY]", "[JORDAN]"] {
            let via_http = http
                .continuation_logprobs(context, candidate)
                .map_err(|e| e.to_string())?;
            let direct = mock
                .continuation_logprobs(context, candidate)
                .map_err(|e| e.to_string())?;
            ensure!(
                via_http == direct,
                "HTTP and direct mock disagree on {candidate}"
            );
        }
        let gen_http = http
            .generate("write the three main topics as a numbered list", 64)
            .map_err(|e| e.to_string())?;
        let gen_direct = mock
            .generate("write the three main topics as a numbered list", 64)
            .map_err(|e| e.to_string())?;
        ensure!(gen_http == gen_direct, "HTTP and direct generation disagree");

        let recorded = server.recorded_requests();
        ensure!(recorded.len() == 4, "expected 4 recorded exchanges, got {}", recorded.len());
        let body: serde_json::Value =
            serde_json::from_str(&recorded[0].body).map_err(|e| e.to_string())?;
        ensure!(
            recorded[0].path == "/v1/logprobs"
                && body.as_object().map(|o| o.len()) == Some(2)
                && body["context"] == context
                && body["continuation"] == "[ALEX]",
            "recorded logprobs request deviates from the wire contract: {body}"
        );
        let body: serde_json::Value =
            serde_json::from_str(&recorded[3].body).map_err(|e| e.to_string())?;
        ensure!(
            recorded[3].path == "/v1/generate"
                && body.as_object().map(|o| o.len()) == Some(3)
                && body["greedy"] == true,
            "recorded generate request deviates from the wire contract: {body}"
        );

        Ok("wire contract round-trips against the stub server; statement printed".to_owned())
    });
}
