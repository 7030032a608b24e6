use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Fence labels the model must use for the two halves of a code pair.
pub const SOURCE_FENCE: &str = "source";
pub const TARGET_FENCE: &str = "target";

pub const OUTPUT_FORMAT: &str = "Answer with exactly two fenced code blocks: the source-library program in a block opened with ```source and the target-library program in a block opened with ```target. Both programs must use the same inputs.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    /// Task description with `{api_name}`, `{source_library}` and
    /// `{target_library}` placeholders.
    pub task_section: String,
    pub emphasis_clauses: Vec<String>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            task_section: "Write a code pair for the API `{api_name}` of the {target_library} library. \
The target program calls `{api_name}` using {target_library}; the source program computes the same \
result with {source_library}. Both programs must be complete and runnable."
                .to_string(),
            emphasis_clauses: vec![
                "Use input values that include NaNs and Infs.".to_string(),
                "Cover edge cases such as empty or zero-sized inputs, very large sizes and dtype boundary values.".to_string(),
                "Prefer scenarios likely to trigger the API's error checking and crashes.".to_string(),
            ],
        }
    }
}

impl PromptTemplate {
    /// Plain-text template: task text, then an `[EMPHASIS]` header followed by
    /// one clause per line.
    pub fn parse(text: &str) -> Self {
        let (task, emphasis) = match text.find("[EMPHASIS]") {
            Some(i) => (&text[..i], &text[i + "[EMPHASIS]".len()..]),
            None => (text, ""),
        };
        PromptTemplate {
            task_section: task.trim().to_string(),
            emphasis_clauses: emphasis
                .lines()
                .map(|l| l.trim().trim_start_matches("- ").trim())
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn to_text(&self) -> String {
        let mut out = self.task_section.clone();
        out.push_str("\n[EMPHASIS]\n");
        for c in &self.emphasis_clauses {
            out.push_str(c);
            out.push('\n');
        }
        out
    }

    pub fn render_task(&self, api_name: &str, source_library: &str, target_library: &str) -> String {
        self.task_section
            .replace("{api_name}", api_name)
            .replace("{source_library}", source_library)
            .replace("{target_library}", target_library)
    }
}
