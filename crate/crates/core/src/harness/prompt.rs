use serde::{Deserialize, Serialize};

use crate::alphabet::PermutedAlphabet;
use crate::problem::AnalogyProblem;

pub const DEFAULT_SYSTEM_MESSAGE: &str = "You are a helpful assistant.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    /// Answer-only prompt, deterministic decoding.
    Plain,
    /// Open-ended puzzle prompt for a model with code execution.
    ToolAugmented,
}

/// The two problem rows: `[A] [B]` then `[C] [ ? ]`.
pub fn problem_rows(problem: &AnalogyProblem) -> String {
    format!(
        "{} {}\n{} [ ? ]",
        problem.source_a, problem.source_b, problem.target_a
    )
}

pub fn user_prompt(problem: &AnalogyProblem, alphabet: &PermutedAlphabet, mode: PromptMode) -> String {
    let rows = problem_rows(problem);
    let letters = alphabet.to_line();
    match mode {
        PromptMode::Plain => format!(
            "Use this fictional alphabet: [{letters}].\n\n\
             Let's try to complete the pattern:\n\n\
             {rows}\n\n\
             Please only provide the answer. Do not provide any additional explanation.\n\n\
             Answer:"
        ),
        PromptMode::ToolAugmented => format!(
            "Let's solve a puzzle problem involving the following fictional alphabet:\n\n\
             [{letters}]\n\n\
             Here is the problem:\n\n\
             {rows}"
        ),
    }
}

/// Messages sent for one problem. Plain mode carries the default system
/// message; tool mode sends the user prompt alone.
pub fn build_prompt(problem: &AnalogyProblem, alphabet: &PermutedAlphabet, mode: PromptMode) -> Vec<ChatMessage> {
    let user = ChatMessage::user(user_prompt(problem, alphabet, mode));
    match mode {
        PromptMode::Plain => vec![ChatMessage::system(DEFAULT_SYSTEM_MESSAGE), user],
        PromptMode::ToolAugmented => vec![user],
    }
}
