//! Prompt templates. The gradient templates follow the textual-gradient
//! protocol: the critique step returns `<START>…<END>`-wrapped feedback and
//! the edit step returns `<START>…<END>`-wrapped successor prompts.

/// System message for batch generation. The numbered-line protocol is what
/// [`super::parse_numbered`] expects back.
pub fn generation_system(batch_size: usize) -> String {
    format!(
        "You generate synthetic data items for a dataset. Output exactly {batch_size} items, \
         one per line, each line starting with its number followed by a period (\"1. ...\"). \
         Output nothing else."
    )
}

pub const GRADIENT_GET: &str = r#"I'm optimizing a data generation prompt using gradient-based feedback.

Current system prompt: "{prompt}"

Current user prompt: "{state}"

LLM generated outputs: "{E}"

Existing data samples in the set: "{existing outputs}"

The output was rejected because its diversity score with the existing samples is below the threshold.

Analyze this rejection and provide "{num feedbacks}" reasons why the user prompt could have gotten this generated outputs to be less diverse with the existing data samples.

- What specific aspect or issue exists in the user prompt that is causing low diversity?
- Given the existing data samples, how should the user prompt be modified to encourage more diverse outputs?
- What linguistic patterns or constraints should be added/removed to encourage diversity?

Format each gradient direction as: "[specific issue & improvement suggestion]"

Wrap each gradient with <START> and <END> tags."#;

pub const GRADIENT_APPLY: &str = r#"I'm optimizing a data generation prompt using gradient-based feedback.

Current system prompt: "{prompt}"

Current user prompt: "{state}"

Gradient analysis for improvement:
"{gradient str}"

Based on this gradient feedback list, generate "{num-feedbacks}" improved prompts and then project the improved prompts onto the "{prompt}".

The projection operation is a relevance operation that makes the improved prompt relevant to the system prompt {prompt}.

Requirements:
- Each prompt should address a single gradient suggestions & then project onto the "{prompt}".
- Use positive language (what to generate, not what to avoid)
- Each prompt should be concise and clear
- Wrap each improved prompt with <START> and <END> tags"#;

fn numbered(items: &[&str]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}. {}", i + 1, t))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_gradient_get(
    system_prompt: &str,
    user_prompt: &str,
    rejected: &[&str],
    existing: &[&str],
    num_feedbacks: usize,
) -> String {
    GRADIENT_GET
        .replace("{prompt}", system_prompt)
        .replace("{state}", user_prompt)
        .replace("{E}", &numbered(rejected))
        .replace("{existing outputs}", &numbered(existing))
        .replace("{num feedbacks}", &num_feedbacks.to_string())
}

pub fn render_gradient_apply(system_prompt: &str, user_prompt: &str, gradients: &[String]) -> String {
    let grads: Vec<&str> = gradients.iter().map(String::as_str).collect();
    GRADIENT_APPLY
        .replace("{state}", user_prompt)
        .replace("{gradient str}", &numbered(&grads))
        .replace("{num-feedbacks}", &gradients.len().to_string())
        .replace("{prompt}", system_prompt)
}

/// Default instruction appended by the diverse-prompting baseline.
pub const DIVERSE_INSTRUCTION: &str =
    "Make the outputs as diverse as possible: vary topics, settings, structure, and wording across items.";

pub fn with_history(task_prompt: &str, recent: &[&str]) -> String {
    if recent.is_empty() {
        return task_prompt.to_string();
    }
    format!(
        "{task_prompt}\nAvoid repeating these previously generated items; produce items that differ from them:\n{}",
        recent.iter().map(|t| format!("- {t}")).collect::<Vec<_>>().join("\n")
    )
}

pub fn subtopic_list(task_prompt: &str, count: usize) -> String {
    format!("List {count} distinct subtopics for the following task, one per line.\nTask: {task_prompt}")
}

pub fn for_subtopic(task_prompt: &str, subtopic: &str) -> String {
    format!("{task_prompt}\nSubtopic: {subtopic}")
}
