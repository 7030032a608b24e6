use serde::{Deserialize, Serialize};

use crate::library::ImportTable;
use crate::python;

/// Headings that introduce a reproduction snippet in issue templates.
pub const DEFAULT_KEYWORDS: &[&str] = &[
    "Standalone code to reproduce the issue",
    "Usage example",
    "Code example",
];

/// Info strings that mark a fenced block as host-language code.
pub const HOST_LANGUAGE_TAGS: &[&str] = &["python", "py", "python3", "pycon", "ipython"];

/// A fenced code block and the prose between it and the previous block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock {
    pub info: String,
    pub body: String,
    pub context: String,
}

/// Fenced blocks (``` or ~~~) in document order. An unterminated fence runs
/// to the end of the text.
pub fn fenced_blocks(markdown: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut context = String::new();
    let mut open: Option<(String, String, String)> = None; // (fence, info, body)
    for line in markdown.lines() {
        let trimmed = line.trim_start();
        match &mut open {
            None => {
                let fence = if trimmed.starts_with("```") {
                    Some("```")
                } else if trimmed.starts_with("~~~") {
                    Some("~~~")
                } else {
                    None
                };
                match fence {
                    Some(f) => {
                        let info = trimmed.trim_start_matches(f.chars().next().unwrap()).trim().to_string();
                        open = Some((f.to_string(), info, String::new()));
                    }
                    None => {
                        context.push_str(line);
                        context.push('\n');
                    }
                }
            }
            Some((fence, _, body)) => {
                if trimmed.starts_with(fence.as_str()) && trimmed.trim_start_matches(fence.chars().next().unwrap()).trim().is_empty() {
                    let (_, info, body) = open.take().unwrap();
                    blocks.push(FencedBlock {
                        info,
                        body,
                        context: std::mem::take(&mut context),
                    });
                } else {
                    body.push_str(line);
                    body.push('\n');
                }
            }
        }
    }
    if let Some((_, info, body)) = open {
        blocks.push(FencedBlock { info, body, context });
    }
    blocks
}

fn is_host_tag(info: &str) -> bool {
    let tag = info.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
    HOST_LANGUAGE_TAGS.contains(&tag.as_str())
}

/// Reproduction snippets in an issue body: blocks introduced by one of the
/// keywords, else every host-language block. Order is preserved.
pub fn extract_snippets(body: &str, keywords: &[&str]) -> Vec<String> {
    let blocks = fenced_blocks(body);
    let lowered: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    let tagged: Vec<String> = blocks
        .iter()
        .filter(|b| {
            let ctx = b.context.to_lowercase();
            lowered.iter().any(|k| ctx.contains(k.as_str()))
        })
        .map(|b| b.body.clone())
        .filter(|b| !b.trim().is_empty())
        .collect();
    if !tagged.is_empty() {
        return tagged;
    }
    blocks
        .into_iter()
        .filter(|b| is_host_tag(&b.info) && !b.body.trim().is_empty())
        .map(|b| b.body)
        .collect()
}

/// Result of cleaning a raw snippet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocessed {
    pub text: String,
    pub injected_imports: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RejectReason {
    #[error("snippet is empty after cleaning")]
    Empty,
    #[error("does not parse: {0}")]
    Unparseable(String),
}

fn is_shell_line(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("$ ")
        || t.starts_with('!')
        || t.starts_with('%')
        || t.starts_with("pip install")
        || t.starts_with("pip3 install")
        || t.starts_with("conda install")
}

/// Strip interpreter prompts, their echoed output, shell commands and
/// markdown residue. Pure text transformation; does not parse.
pub fn clean(raw: &str) -> String {
    let raw = raw.replace("\r\n", "\n").replace('\t', "    ");
    let transcript = raw.lines().any(|l| l.trim_start().starts_with(">>>"));
    let mut lines: Vec<String> = Vec::new();
    for line in raw.lines() {
        let t = line.trim_start();
        if t.starts_with("```") || t.starts_with("~~~") {
            continue;
        }
        if transcript {
            if let Some(rest) = t.strip_prefix(">>> ").or_else(|| t.strip_prefix(">>>")) {
                lines.push(rest.to_string());
            } else if let Some(rest) = t.strip_prefix("... ").or_else(|| t.strip_prefix("...")) {
                lines.push(rest.to_string());
            }
            // everything else in a transcript is echoed output
            continue;
        }
        if is_shell_line(line) {
            continue;
        }
        lines.push(line.trim_end().to_string());
    }
    while lines.first().is_some_and(|l| l.trim().is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return String::new();
    }
    let mut text = dedent(&lines).join("\n");
    text.push('\n');
    text
}

fn dedent(lines: &[String]) -> Vec<String> {
    let indent = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    lines
        .iter()
        .map(|l| if l.len() >= indent { l[indent..].to_string() } else { l.trim_start().to_string() })
        .collect()
}

/// Clean `raw`, prepend imports for library roots it uses without binding,
/// and require the result to parse.
pub fn preprocess_snippet(raw: &str, imports: &ImportTable) -> Result<Preprocessed, RejectReason> {
    let text = clean(raw);
    if text.trim().is_empty() {
        return Err(RejectReason::Empty);
    }
    let free = python::free_names(&text).map_err(|e| RejectReason::Unparseable(e.to_string()))?;
    let mut injected: Vec<String> = Vec::new();
    for name in free {
        if let Some(line) = imports.lookup(&name) {
            if !injected.iter().any(|l| l == line) {
                injected.push(line.to_string());
            }
        }
    }
    if injected.is_empty() {
        return Ok(Preprocessed {
            text,
            injected_imports: injected,
        });
    }
    let mut with_imports = injected.join("\n");
    with_imports.push('\n');
    with_imports.push_str(&text);
    python::parse(&with_imports).map_err(|e| RejectReason::Unparseable(e.to_string()))?;
    Ok(Preprocessed {
        text: with_imports,
        injected_imports: injected,
    })
}
