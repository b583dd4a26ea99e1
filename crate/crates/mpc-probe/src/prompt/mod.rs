//! Conversation representations and prompt assembly.
//!
//! The prompt matrix spans tasks (RS, AR, plus the two generation tasks),
//! input combinations and three verbosity schemes. Rendering is stateless
//! and deterministic: identical inputs yield byte-identical prompts.

mod templates;

pub use templates::{build_system_prompt, build_system_prompt_with_variant};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Conversation;
use crate::error::{Error, Result};

/// The four prompted activities. RS and AR are scored by conditional
/// perplexity; the two generation tasks produce auxiliary representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    ResponseSelection,
    AddresseeRecognition,
    SummaryGeneration,
    DescriptionGeneration,
}

impl Task {
    pub fn is_classification(self) -> bool {
        matches!(self, Task::ResponseSelection | Task::AddresseeRecognition)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::ResponseSelection => "RS",
            Task::AddresseeRecognition => "AR",
            Task::SummaryGeneration => "SUMM-GEN",
            Task::DescriptionGeneration => "DESC-GEN",
        };
        f.write_str(s)
    }
}

/// What a rendered representation is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepresentationKind {
    ConversationTranscript,
    InteractionTranscript,
    Summary,
    UserDescription,
}

impl RepresentationKind {
    /// Label heading the representation block inside the input prompt.
    pub fn label(self) -> &'static str {
        match self {
            RepresentationKind::ConversationTranscript => "Conversation transcript",
            RepresentationKind::InteractionTranscript => "Interaction transcript",
            RepresentationKind::Summary => "Summary",
            RepresentationKind::UserDescription => "User description",
        }
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representation {
    pub kind: RepresentationKind,
    pub text: String,
}

/// Which representations are injected into the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputCombination {
    Conv,
    ConvStruct,
    StructSumm,
    StructDesc,
    StructSummDesc,
    Struct,
}

impl InputCombination {
    /// Representations implied by the combination, in the fixed rendering
    /// order: conversation transcript first when present, then interaction
    /// transcript, summary, user description.
    pub fn kinds(self) -> &'static [RepresentationKind] {
        use RepresentationKind::*;
        match self {
            InputCombination::Conv => &[ConversationTranscript],
            InputCombination::ConvStruct => &[ConversationTranscript, InteractionTranscript],
            InputCombination::StructSumm => &[InteractionTranscript, Summary],
            InputCombination::StructDesc => &[InteractionTranscript, UserDescription],
            InputCombination::StructSummDesc => &[InteractionTranscript, Summary, UserDescription],
            InputCombination::Struct => &[InteractionTranscript],
        }
    }

    /// STRUCT carries no linguistic information, so it is legal only for
    /// addressee recognition; the generation tasks always consume the
    /// conversation and interaction transcripts.
    pub fn legal_for(self, task: Task) -> bool {
        match task {
            Task::AddresseeRecognition => true,
            Task::ResponseSelection => self != InputCombination::Struct,
            Task::SummaryGeneration | Task::DescriptionGeneration => {
                self == InputCombination::ConvStruct
            }
        }
    }

    /// All combinations legal for a classification task, in table order.
    pub fn all_for(task: Task) -> Vec<InputCombination> {
        use InputCombination::*;
        let base = [Conv, ConvStruct, StructSumm, StructDesc, StructSummDesc, Struct];
        base.into_iter().filter(|c| c.legal_for(task)).collect()
    }
}

impl fmt::Display for InputCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InputCombination::Conv => "CONV",
            InputCombination::ConvStruct => "CONV+STRUCT",
            InputCombination::StructSumm => "STRUCT+SUMM",
            InputCombination::StructDesc => "STRUCT+DESC",
            InputCombination::StructSummDesc => "STRUCT+SUMM+DESC",
            InputCombination::Struct => "STRUCT",
        };
        f.write_str(s)
    }
}

/// Verbosity level of the system prompt. Each scheme is a complete rewrite
/// of all seven sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptScheme {
    Verbose,
    Medium,
    Concise,
}

impl PromptScheme {
    pub const ALL: [PromptScheme; 3] = [PromptScheme::Verbose, PromptScheme::Medium, PromptScheme::Concise];
}

impl fmt::Display for PromptScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PromptScheme::Verbose => "verbose",
            PromptScheme::Medium => "medium",
            PromptScheme::Concise => "concise",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framing {
    Generation,
    Classification,
}

/// Begin-of-output strings appended after `[/INST]` on classification
/// prompts so that only the candidate continuation is scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeginOfOutput {
    pub ar: String,
    pub rs: String,
}

impl Default for BeginOfOutput {
    fn default() -> Self {
        BeginOfOutput {
            ar: "The addressee of the next message is".to_owned(),
            rs: "The next message is:".to_owned(),
        }
    }
}

impl BeginOfOutput {
    fn for_task(&self, task: Task) -> Option<&str> {
        match task {
            Task::AddresseeRecognition => Some(&self.ar),
            Task::ResponseSelection => Some(&self.rs),
            _ => None,
        }
    }
}

/// A fully assembled prompt: system prompt, input prompt and, for
/// classification, the begin-of-output string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub system: String,
    pub input: String,
    pub begin_of_output: Option<String>,
    pub framing: Framing,
}

impl AssembledPrompt {
    /// The complete prompt text in the chat-model frame:
    /// generation `[INST] <<SYS>> s <</SYS>> i [/INST]`,
    /// classification `[INST]<<SYS>> s <</SYS>> i [/INST] b`.
    pub fn render(&self) -> String {
        match self.framing {
            Framing::Generation => {
                format!("[INST] <<SYS>> {} <</SYS>> {} [/INST]", self.system, self.input)
            }
            Framing::Classification => {
                let b = self.begin_of_output.as_deref().unwrap_or("");
                format!("[INST]<<SYS>> {} <</SYS>> {} [/INST] {}", self.system, self.input, b)
            }
        }
    }

    /// Context string that precedes a scored candidate: the rendered
    /// classification prompt plus the single joining space.
    pub fn scoring_context(&self) -> String {
        let mut ctx = self.render();
        ctx.push(' ');
        ctx
    }

    /// The full text whose tail is scored: context plus candidate.
    pub fn scored_text(&self, candidate: &str) -> String {
        let mut s = self.scoring_context();
        s.push_str(candidate);
        s
    }
}

/// One line per turn: `<speaker-tag>: <text>`.
pub fn render_conversation_transcript(conv: &Conversation) -> Representation {
    let text = conv
        .turns
        .iter()
        .map(|t| format!("{}: {}", t.speaker, t.text))
        .collect::<Vec<_>>()
        .join("\n");
    Representation {
        kind: RepresentationKind::ConversationTranscript,
        text,
    }
}

/// One line per turn: `<speaker-tag> -> <addressee-tag>`; never contains
/// message text.
pub fn render_interaction_transcript(conv: &Conversation) -> Representation {
    let text = conv
        .turns
        .iter()
        .map(|t| format!("{} -> {}", t.speaker, t.addressee))
        .collect::<Vec<_>>()
        .join("\n");
    Representation {
        kind: RepresentationKind::InteractionTranscript,
        text,
    }
}

/// Assembles the input prompt and frames it together with the system prompt.
///
/// The input prompt holds the required representation blocks in fixed order,
/// the next-speaker announcement and the instruction command.
pub fn assemble(
    task: Task,
    combo: InputCombination,
    scheme: PromptScheme,
    reps: &[Representation],
    next_speaker_tag: &str,
    begin_of_output: &BeginOfOutput,
) -> Result<AssembledPrompt> {
    let system = build_system_prompt(task, combo, scheme)?;
    assemble_with_system(task, combo, scheme, system, reps, next_speaker_tag, begin_of_output)
}

/// As [`assemble`] but with an explicit output-template variant for the
/// generation tasks.
pub fn assemble_with_variant(
    task: Task,
    combo: InputCombination,
    scheme: PromptScheme,
    variant: crate::auxgen::OutputTemplateVariant,
    reps: &[Representation],
    next_speaker_tag: &str,
    begin_of_output: &BeginOfOutput,
) -> Result<AssembledPrompt> {
    let system = build_system_prompt_with_variant(task, combo, scheme, variant)?;
    assemble_with_system(task, combo, scheme, system, reps, next_speaker_tag, begin_of_output)
}

fn assemble_with_system(
    task: Task,
    combo: InputCombination,
    scheme: PromptScheme,
    system: String,
    reps: &[Representation],
    next_speaker_tag: &str,
    begin_of_output: &BeginOfOutput,
) -> Result<AssembledPrompt> {
    let mut blocks = Vec::new();
    for kind in combo.kinds() {
        let rep = reps
            .iter()
            .find(|r| r.kind == *kind)
            .ok_or(Error::MissingRepresentation(*kind))?;
        blocks.push(format!("{}:\n{}", kind.label(), rep.text));
    }
    blocks.push(format!("The next message will be written by {next_speaker_tag}."));
    blocks.push(templates::instruction(task, scheme).to_owned());
    let input = blocks.join("\n\n");

    let framing = if task.is_classification() {
        Framing::Classification
    } else {
        Framing::Generation
    };
    Ok(AssembledPrompt {
        system,
        input,
        begin_of_output: begin_of_output.for_task(task).map(str::to_owned),
        framing,
    })
}
