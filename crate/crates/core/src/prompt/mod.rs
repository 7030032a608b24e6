//! Three-part prompts for code-pair generation: task description, trimmed
//! API documentation and a single-usage code example.

mod decompose;
mod template;
mod trim;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use decompose::{count_api_occurrences, decompose_example, Decomposition};
pub use template::{PromptTemplate, OUTPUT_FORMAT, SOURCE_FENCE, TARGET_FENCE};
pub use trim::{chars_div_4, trim_doc, Estimator};

use crate::catalog::ApiInfo;
use crate::library::LibraryId;
use crate::util::{sanitize_component, write_atomic, write_ndrec};

pub const NO_EXAMPLE: &str = "none available";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    /// `<library>/<api>/<index>`
    pub id: String,
    pub api: String,
    pub library: LibraryId,
    pub task_text: String,
    pub emphasis: Vec<String>,
    pub doc_excerpt: String,
    pub example: Option<String>,
    pub token_budget: usize,
    pub index_within_api: usize,
    #[serde(default)]
    pub undecomposed: bool,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    Undocumented,
    /// Fixed parts (task, example, format instructions) alone exceed the budget.
    OverBudget { needed: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub api: String,
    pub example_index: Option<usize>,
    pub reason: SkipReason,
}

/// Library display names substituted into the task text.
#[derive(Debug, Clone)]
pub struct PromptContext {
    pub source_library: String,
    pub target_library: String,
    pub estimate: Estimator,
}

impl PromptContext {
    pub fn new(source_library: &str, target_library: &str) -> Self {
        PromptContext {
            source_library: source_library.to_string(),
            target_library: target_library.to_string(),
            estimate: chars_div_4,
        }
    }
}

pub fn render(api: &str, task: &str, emphasis: &[String], doc: &str, example: Option<&str>) -> String {
    let mut out = String::new();
    out.push_str(task.trim());
    out.push_str("\n\n");
    if !emphasis.is_empty() {
        out.push_str("Requirements:\n");
        for c in emphasis {
            out.push_str("- ");
            out.push_str(c);
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str("API: ");
    out.push_str(api);
    out.push_str("\n\nDocumentation:\n");
    out.push_str(doc.trim_end());
    out.push_str("\n\nCode example:\n");
    match example {
        Some(ex) => {
            out.push_str("```python\n");
            out.push_str(ex.trim_end());
            out.push_str("\n```\n");
        }
        None => {
            out.push_str(NO_EXAMPLE);
            out.push('\n');
        }
    }
    out.push('\n');
    out.push_str(OUTPUT_FORMAT);
    out.push('\n');
    out
}

#[derive(Debug, Default)]
pub struct BuildOutcome {
    pub prompts: Vec<Prompt>,
    pub skipped: Vec<SkipEntry>,
}

/// One prompt per decomposed example snippet (a single doc-only prompt for
/// APIs without examples). The doc excerpt is trimmed to whatever budget the
/// fixed parts leave; emphasis clauses are dropped from the end if even an
/// empty excerpt does not fit.
pub fn build_prompts(api: &ApiInfo, template: &PromptTemplate, budget: usize, ctx: &PromptContext) -> BuildOutcome {
    let mut out = BuildOutcome::default();
    if api.undocumented {
        out.skipped.push(SkipEntry {
            api: api.name.clone(),
            example_index: None,
            reason: SkipReason::Undocumented,
        });
        return out;
    }
    let task = template.render_task(&api.name, &ctx.source_library, &ctx.target_library);

    let mut units: Vec<(Option<usize>, Option<String>, bool)> = Vec::new();
    if api.examples.is_empty() {
        units.push((None, None, false));
    }
    for (i, ex) in api.examples.iter().enumerate() {
        let d = decompose_example(ex, &api.name);
        for s in d.snippets {
            units.push((Some(i), Some(s), d.undecomposed));
        }
    }

    for (example_index, example, undecomposed) in units {
        match fit(api, &task, template, example.as_deref(), budget, ctx.estimate) {
            Ok((emphasis, doc, rendered)) => {
                let index = out.prompts.len();
                out.prompts.push(Prompt {
                    id: format!("{}/{}/{}", api.target_library, api.name, index),
                    api: api.name.clone(),
                    library: api.target_library.clone(),
                    task_text: task.clone(),
                    emphasis,
                    doc_excerpt: doc,
                    example,
                    token_budget: budget,
                    index_within_api: index,
                    undecomposed,
                    rendered,
                });
            }
            Err(needed) => out.skipped.push(SkipEntry {
                api: api.name.clone(),
                example_index,
                reason: SkipReason::OverBudget { needed },
            }),
        }
    }
    out
}

fn fit(
    api: &ApiInfo,
    task: &str,
    template: &PromptTemplate,
    example: Option<&str>,
    budget: usize,
    estimate: Estimator,
) -> Result<(Vec<String>, String, String), usize> {
    let mut emphasis = template.emphasis_clauses.clone();
    loop {
        let skeleton = render(&api.name, task, &emphasis, "", example);
        let fixed = estimate(&skeleton);
        if fixed < budget {
            // The doc sits inside the skeleton; the estimator is not additive,
            // so shrink until the whole rendering fits.
            let mut doc_budget = budget - fixed;
            loop {
                let doc = trim_doc(&api.doc, doc_budget, estimate);
                let rendered = render(&api.name, task, &emphasis, &doc, example);
                if estimate(&rendered) <= budget {
                    return Ok((emphasis, doc, rendered));
                }
                if doc_budget <= 1 {
                    break;
                }
                doc_budget -= 1;
            }
        }
        if fixed <= budget {
            return Ok((emphasis, String::new(), skeleton));
        }
        if emphasis.pop().is_none() {
            return Err(fixed);
        }
    }
}

/// `prompts/<library>/<api>/<index>.txt` plus `prompts/<library>/index.ndrec`.
pub fn dump_prompts(root: &Path, library: &LibraryId, prompts: &[Prompt]) -> std::io::Result<()> {
    let lib_dir = root.join(sanitize_component(library.as_str()));
    for p in prompts {
        let path = lib_dir
            .join(sanitize_component(&p.api))
            .join(format!("{}.txt", p.index_within_api));
        write_atomic(&path, p.rendered.as_bytes())?;
    }
    write_ndrec(&lib_dir.join("index.ndrec"), prompts)
}

pub fn load_prompts(root: &Path, library: &LibraryId) -> std::io::Result<Vec<Prompt>> {
    crate::util::read_ndrec(&root.join(sanitize_component(library.as_str())).join("index.ndrec"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn api(examples: &[&str]) -> ApiInfo {
        let mut a = ApiInfo::new(
            "mlx.core.eye",
            &LibraryId::new("mlx"),
            "Create an identity matrix.\n\nArgs:\n    n (int): rows.\n\nNotes:\n    Dense.\n",
        );
        a.examples = examples.iter().map(|s| s.to_string()).collect();
        a
    }

    fn ctx() -> PromptContext {
        PromptContext::new("PyTorch", "MLX")
    }

    #[test]
    fn one_example_used_once() {
        let out = build_prompts(&api(&["import mlx.core as mx\nx = mx.eye(3)\n"]), &PromptTemplate::default(), 4096, &ctx());
        assert_eq!(out.prompts.len(), 1);
        let p = &out.prompts[0];
        assert!(p.rendered.contains("API: mlx.core.eye"));
        assert!(p.task_text.contains("MLX") && p.task_text.contains("PyTorch"));
        assert_eq!(p.id, "mlx/mlx.core.eye/0");
    }

    #[test]
    fn three_call_sites_give_three_prompts() {
        let ex = "import mlx.core as mx\na = mx.eye(3)\nb = mx.eye(2, 4)\nc = mx.eye(5, k=1)\n";
        let out = build_prompts(&api(&[ex]), &PromptTemplate::default(), 4096, &ctx());
        assert_eq!(out.prompts.len(), 3);
        for (i, p) in out.prompts.iter().enumerate() {
            assert_eq!(p.index_within_api, i);
            assert_eq!(count_api_occurrences(p.example.as_deref().unwrap(), "eye"), 1);
        }
    }

    #[test]
    fn no_examples_gives_doc_only_prompt() {
        let out = build_prompts(&api(&[]), &PromptTemplate::default(), 4096, &ctx());
        assert_eq!(out.prompts.len(), 1);
        assert!(out.prompts[0].rendered.contains(NO_EXAMPLE));
        assert!(out.prompts[0].example.is_none());
    }

    #[test]
    fn undocumented_is_skipped() {
        let mut a = api(&[]);
        a.undocumented = true;
        let out = build_prompts(&a, &PromptTemplate::default(), 4096, &ctx());
        assert!(out.prompts.is_empty());
        assert_eq!(out.skipped[0].reason, SkipReason::Undocumented);
    }

    #[test]
    fn tight_budget_trims_doc_then_emphasis() {
        let a = api(&["mx.eye(3)\n"]);
        let t = PromptTemplate::default();
        let full = build_prompts(&a, &t, 4096, &ctx()).prompts.remove(0);
        let need = chars_div_4(&full.rendered);
        let tight = build_prompts(&a, &t, need - 5, &ctx()).prompts.remove(0);
        assert!(chars_div_4(&tight.rendered) <= need - 5);
        assert!(!tight.doc_excerpt.contains("Notes"));
        assert_eq!(tight.emphasis.len(), 3);
    }

    #[test]
    fn hopeless_budget_is_reported() {
        let out = build_prompts(&api(&["mx.eye(3)\n"]), &PromptTemplate::default(), 8, &ctx());
        assert!(out.prompts.is_empty());
        assert!(matches!(out.skipped[0].reason, SkipReason::OverBudget { .. }));
    }
}
