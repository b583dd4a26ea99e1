//! Golden-file checks for the prompt matrix and the bundled synthetic
//! corpus. Regenerate with `UPDATE_GOLDENS=1 cargo test --test goldens`.

use std::fs;
use std::path::PathBuf;

use mpc_probe::auxgen::OutputTemplateVariant;
use mpc_probe::backend::{Backend, MockBackend};
use mpc_probe::corpus::write_jsonl;
use mpc_probe::prompt::{
    assemble, build_system_prompt, render_interaction_transcript, BeginOfOutput, InputCombination,
    PromptScheme, Representation, RepresentationKind, Task,
};
use mpc_probe::synth::synthetic_corpus;

const FIXTURE_SEED: u64 = 7;
const FIXTURE_SIZE: usize = 50;
const FIXTURE_USERS: usize = 3;

fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn updating() -> bool {
    std::env::var("UPDATE_GOLDENS").is_ok_and(|v| !v.is_empty() && v != "0")
}

fn check_golden(rel: &str, actual: &str) {
    let path = manifest_path(rel);
    if updating() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden {rel} ({e}); run with UPDATE_GOLDENS=1"));
    assert_eq!(expected, actual, "golden mismatch: {rel}");
}

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
fn system_prompt_goldens() {
    // 33 classification prompts: (2 tasks x 5 combos + AR x STRUCT) x 3.
    let mut count = 0;
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
                check_golden(&rel, &system);
                count += 1;
            }
        }
    }
    assert_eq!(count, 33);

    // 6 generation prompts (output template V1).
    for task in [Task::SummaryGeneration, Task::DescriptionGeneration] {
        for scheme in PromptScheme::ALL {
            let system =
                build_system_prompt(task, InputCombination::ConvStruct, scheme).unwrap();
            let rel = format!(
                "tests/goldens/system/{}_{}_v1.txt",
                task_slug(task),
                scheme
            );
            check_golden(&rel, &system);
            count += 1;
        }
    }
    assert_eq!(count, 39);
}

/// Full assembled classification prompt over a fixed instance, pinning the
/// representation order, announcement, instruction and framing bytes.
#[test]
fn assembled_prompt_golden() {
    let corpus = synthetic_corpus(FIXTURE_SEED, 2, FIXTURE_USERS);
    let cfg = mpc_probe::diagnostic::FilterConfig::new(FIXTURE_USERS);
    let dataset = mpc_probe::diagnostic::build_diagnostic_subset(&corpus, &cfg, "golden").unwrap();
    let context = dataset.entries[0].conversation.context();

    let backend = MockBackend::new(0);
    let summary = mpc_probe::auxgen::generate_summary(
        &context,
        &backend,
        PromptScheme::Verbose,
        OutputTemplateVariant::V1,
        256,
    )
    .unwrap();

    let reps = vec![
        render_interaction_transcript(&context),
        Representation {
            kind: RepresentationKind::Summary,
            text: summary.raw_text.clone(),
        },
    ];
    let prompt = assemble(
        Task::AddresseeRecognition,
        InputCombination::StructSumm,
        PromptScheme::Verbose,
        &reps,
        "[ALEX]",
        &BeginOfOutput::default(),
    )
    .unwrap();
    check_golden("tests/goldens/prompt_ar_struct_summ_verbose.txt", &prompt.render());

    let gen_reps = vec![
        mpc_probe::prompt::render_conversation_transcript(&context),
        render_interaction_transcript(&context),
    ];
    let gen_prompt = assemble(
        Task::SummaryGeneration,
        InputCombination::ConvStruct,
        PromptScheme::Verbose,
        &gen_reps,
        "[ALEX]",
        &BeginOfOutput::default(),
    )
    .unwrap();
    check_golden("tests/goldens/prompt_summ_gen_verbose.txt", &gen_prompt.render());
}

/// The bundled 50-conversation corpus is exactly the seeded generator
/// output; the checked-in bytes prove cross-host reproducibility.
#[test]
fn bundled_corpus_matches_generator() {
    let corpus = synthetic_corpus(FIXTURE_SEED, FIXTURE_SIZE, FIXTURE_USERS);
    let mut bytes = Vec::new();
    write_jsonl(&corpus, &mut bytes).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    check_golden("fixtures/synthetic_corpus.jsonl", &text);
}

/// Mock-backend wire values pinned: any change to the hashing scheme is a
/// breaking change for recorded runs.
#[test]
fn mock_backend_logprob_golden() {
    let backend = MockBackend::new(42);
    let lr = backend
        .continuation_logprobs("[INST]<<SYS>> sys <</SYS>> input [/INST] The addressee of the next message is ", "[BENNY]")
        .unwrap();
    let serialized = serde_json::to_string_pretty(&lr).unwrap();
    check_golden("tests/goldens/mock_logprobs.json", &serialized);
}
