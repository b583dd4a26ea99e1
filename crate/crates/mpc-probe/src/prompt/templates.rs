//! Compile-time template assets and system-prompt assembly.
//!
//! Every system prompt is the concatenation of seven sections in fixed
//! order: scenario description, input elements, task definition, user space
//! description, input format, instruction template, output template. The
//! section texts live as plain-text files under `assets/templates/<scheme>/`
//! and are embedded at build time. Input elements and input format are
//! assembled modularly from the input combination.

use crate::auxgen::OutputTemplateVariant;
use crate::error::{Error, Result};

use super::{InputCombination, PromptScheme, RepresentationKind, Task};

macro_rules! tpl {
    ($scheme:expr, $name:literal) => {
        match $scheme {
            PromptScheme::Verbose => {
                include_str!(concat!("../../assets/templates/verbose/", $name, ".txt"))
            }
            PromptScheme::Medium => {
                include_str!(concat!("../../assets/templates/medium/", $name, ".txt"))
            }
            PromptScheme::Concise => {
                include_str!(concat!("../../assets/templates/concise/", $name, ".txt"))
            }
        }
        .trim_end()
    };
}

fn scenario(scheme: PromptScheme) -> &'static str {
    tpl!(scheme, "scenario")
}

fn user_space(scheme: PromptScheme) -> &'static str {
    tpl!(scheme, "user_space")
}

fn task_definition(task: Task, scheme: PromptScheme) -> &'static str {
    match task {
        Task::ResponseSelection => tpl!(scheme, "task_definition.rs"),
        Task::AddresseeRecognition => tpl!(scheme, "task_definition.ar"),
        Task::SummaryGeneration => tpl!(scheme, "task_definition.summ"),
        Task::DescriptionGeneration => tpl!(scheme, "task_definition.desc"),
    }
}

pub(super) fn instruction(task: Task, scheme: PromptScheme) -> &'static str {
    match task {
        Task::ResponseSelection => tpl!(scheme, "instruction.rs"),
        Task::AddresseeRecognition => tpl!(scheme, "instruction.ar"),
        Task::SummaryGeneration => tpl!(scheme, "instruction.summ"),
        Task::DescriptionGeneration => tpl!(scheme, "instruction.desc"),
    }
}

fn output_template(task: Task, scheme: PromptScheme, variant: OutputTemplateVariant) -> &'static str {
    match (task, variant) {
        (Task::ResponseSelection, _) => tpl!(scheme, "output_template.rs"),
        (Task::AddresseeRecognition, _) => tpl!(scheme, "output_template.ar"),
        (Task::SummaryGeneration, OutputTemplateVariant::V1) => tpl!(scheme, "output_template.summ.v1"),
        (Task::SummaryGeneration, OutputTemplateVariant::V2) => tpl!(scheme, "output_template.summ.v2"),
        (Task::DescriptionGeneration, OutputTemplateVariant::V1) => tpl!(scheme, "output_template.desc.v1"),
        (Task::DescriptionGeneration, OutputTemplateVariant::V2) => tpl!(scheme, "output_template.desc.v2"),
    }
}

fn element_item(kind: RepresentationKind, scheme: PromptScheme) -> &'static str {
    match kind {
        RepresentationKind::ConversationTranscript => tpl!(scheme, "input_elements.conv"),
        RepresentationKind::InteractionTranscript => tpl!(scheme, "input_elements.struct"),
        RepresentationKind::Summary => tpl!(scheme, "input_elements.summ"),
        RepresentationKind::UserDescription => tpl!(scheme, "input_elements.desc"),
    }
}

pub(super) fn format_item(kind: RepresentationKind, scheme: PromptScheme) -> &'static str {
    match kind {
        RepresentationKind::ConversationTranscript => tpl!(scheme, "input_format.conv"),
        RepresentationKind::InteractionTranscript => tpl!(scheme, "input_format.struct"),
        RepresentationKind::Summary => tpl!(scheme, "input_format.summ"),
        RepresentationKind::UserDescription => tpl!(scheme, "input_format.desc"),
    }
}

fn input_elements(combo: InputCombination, scheme: PromptScheme) -> String {
    let mut section = tpl!(scheme, "input_elements.intro").to_owned();
    for kind in combo.kinds() {
        section.push('\n');
        section.push_str(element_item(*kind, scheme));
    }
    section
}

fn input_format(combo: InputCombination, scheme: PromptScheme) -> String {
    let mut section = tpl!(scheme, "input_format.intro").to_owned();
    for kind in combo.kinds() {
        section.push('\n');
        section.push_str(format_item(*kind, scheme));
    }
    section
}

/// Renders the full 7-section system prompt for `(task, combo, scheme)`.
/// Uses output-template variant V1 for the generation tasks.
pub fn build_system_prompt(task: Task, combo: InputCombination, scheme: PromptScheme) -> Result<String> {
    build_system_prompt_with_variant(task, combo, scheme, OutputTemplateVariant::V1)
}

pub fn build_system_prompt_with_variant(
    task: Task,
    combo: InputCombination,
    scheme: PromptScheme,
    variant: OutputTemplateVariant,
) -> Result<String> {
    if !combo.legal_for(task) {
        return Err(Error::IllegalCombination { task, combo });
    }
    let sections = [
        scenario(scheme).to_owned(),
        input_elements(combo, scheme),
        task_definition(task, scheme).to_owned(),
        user_space(scheme).to_owned(),
        input_format(combo, scheme),
        instruction(task, scheme).to_owned(),
        output_template(task, scheme, variant).to_owned(),
    ];
    Ok(sections.join("\n\n"))
}
