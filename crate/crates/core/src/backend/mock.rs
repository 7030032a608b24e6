use std::fs;
use std::path::Path;

use super::BackendError;

/// Canned completions keyed by prompt substrings.
///
/// File format: blocks separated by lines consisting of `%%`. The first line
/// of a block is `KEY >>> first line of completion`; following lines continue
/// the completion. Lines starting with `#` before the first block are
/// comments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Rulebook {
    rules: Vec<(String, String)>,
}

impl Rulebook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rule(mut self, key: &str, completion: &str) -> Self {
        self.rules.push((key.to_string(), completion.to_string()));
        self
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut rules = Vec::new();
        let mut block: Vec<&str> = Vec::new();
        let mut started = false;
        let mut flush = |block: &mut Vec<&str>, line_no: usize| -> Result<(), String> {
            if block.iter().all(|l| l.trim().is_empty()) {
                block.clear();
                return Ok(());
            }
            let first = block[0];
            let (key, head) = first
                .split_once(">>>")
                .ok_or_else(|| format!("block ending at line {line_no}: first line lacks `>>>`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(format!("block ending at line {line_no}: empty key"));
            }
            let mut completion = head.strip_prefix(' ').unwrap_or(head).to_string();
            for l in &block[1..] {
                completion.push('\n');
                completion.push_str(l);
            }
            rules.push((key.to_string(), completion.trim_end_matches('\n').to_string() + "\n"));
            block.clear();
            Ok(())
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim_end() == "%%" {
                flush(&mut block, i + 1)?;
                started = true;
                continue;
            }
            if !started && block.is_empty() && (line.starts_with('#') || line.trim().is_empty()) {
                continue;
            }
            block.push(line);
        }
        flush(&mut block, text.lines().count())?;
        Ok(Rulebook { rules })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path).map_err(|e| BackendError::Rulebook {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text).map_err(|reason| BackendError::Rulebook {
            path: path.display().to_string(),
            reason,
        })
    }

    pub fn to_text(&self) -> String {
        self.rules
            .iter()
            .map(|(k, c)| format!("{k} >>> {}", c.trim_end_matches('\n')))
            .collect::<Vec<_>>()
            .join("\n%%\n")
            + "\n"
    }

    /// Completion for the longest key contained in `prompt`; earlier rules
    /// win ties.
    pub fn lookup(&self, prompt: &str) -> Result<&str, BackendError> {
        let mut best: Option<&(String, String)> = None;
        for rule in &self.rules {
            if prompt.contains(rule.0.as_str()) && best.map_or(true, |b| rule.0.len() > b.0.len()) {
                best = Some(rule);
            }
        }
        best.map(|r| r.1.as_str()).ok_or_else(|| BackendError::MockMiss {
            prompt_head: prompt.chars().take(80).collect(),
        })
    }
}
