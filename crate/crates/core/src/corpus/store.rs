use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::issue::IssueRecord;
use super::snippet::Preprocessed;
use super::CorpusError;
use crate::library::LibraryId;
use crate::util::{sanitize_component, write_atomic};

/// A preprocessed historical bug code, as stored in the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugCode {
    pub id: String,
    pub source_library: LibraryId,
    pub issue_id: u64,
    pub issue_title: String,
    pub issue_url: String,
    pub label: String,
    pub text: String,
    pub injected_imports: Vec<String>,
    /// Relative to the corpus root.
    pub storage_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub label: String,
    pub path: String,
    pub status: String,
}

/// On-disk corpus: `<root>/<source>/<label>/<name>.<ext>` plus `index.tsv`.
/// Single writer; callers serialize `store` calls.
#[derive(Debug)]
pub struct CorpusStore {
    root: PathBuf,
    ext: String,
    entries: Vec<IndexEntry>,
    codes: Vec<BugCode>,
    names: BTreeSet<String>,
}

impl CorpusStore {
    pub fn create(root: impl Into<PathBuf>, ext: &str) -> Result<Self, CorpusError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CorpusError::io(&root, e))?;
        Ok(CorpusStore {
            root,
            ext: ext.trim_start_matches('.').to_string(),
            entries: Vec::new(),
            codes: Vec::new(),
            names: BTreeSet::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn codes(&self) -> &[BugCode] {
        &self.codes
    }

    pub fn stored_count(&self) -> usize {
        self.codes.len()
    }

    fn unique_stem(&mut self, issue: &IssueRecord) -> String {
        let base = format!("{}_{}", sanitize_component(&issue.title), issue.issue_id);
        let mut stem = base.clone();
        let mut k = 1;
        while self.names.contains(&stem) {
            stem = format!("{base}_{k}");
            k += 1;
        }
        self.names.insert(stem.clone());
        stem
    }

    /// Write one snippet and update the index. Duplicate names get `_k`.
    pub fn store(&mut self, issue: &IssueRecord, snippet: Preprocessed) -> Result<BugCode, CorpusError> {
        let stem = self.unique_stem(issue);
        let rel = format!(
            "{}/{}/{}.{}",
            sanitize_component(issue.source_library.as_str()),
            sanitize_component(&issue.label),
            stem,
            self.ext
        );
        let path = self.root.join(&rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
        }
        fs::write(&path, &snippet.text).map_err(|e| CorpusError::io(&path, e))?;
        let code = BugCode {
            id: stem,
            source_library: issue.source_library.clone(),
            issue_id: issue.issue_id,
            issue_title: issue.title.clone(),
            issue_url: issue.url.clone(),
            label: issue.label.clone(),
            text: snippet.text,
            injected_imports: snippet.injected_imports,
            storage_path: rel.clone(),
        };
        self.entries.push(IndexEntry {
            id: code.id.clone(),
            label: code.label.clone(),
            path: rel,
            status: "stored".into(),
        });
        self.codes.push(code.clone());
        self.flush()?;
        Ok(code)
    }

    /// Record a rejected snippet in the index (no file is written).
    pub fn reject(&mut self, issue: &IssueRecord, snippet_index: usize, reason: &str) -> Result<(), CorpusError> {
        self.entries.push(IndexEntry {
            id: format!(
                "{}_{}#{}",
                sanitize_component(&issue.title),
                issue.issue_id,
                snippet_index
            ),
            label: issue.label.clone(),
            path: "-".into(),
            status: format!("rejected: {}", reason.replace(['\t', '\n'], " ")),
        });
        self.flush()
    }

    fn flush(&self) -> Result<(), CorpusError> {
        let mut tsv = String::from("id\tlabel\tpath\tstatus\n");
        for e in &self.entries {
            tsv.push_str(&format!("{}\t{}\t{}\t{}\n", e.id, e.label, e.path, e.status));
        }
        let index = self.root.join("index.tsv");
        write_atomic(&index, tsv.as_bytes()).map_err(|e| CorpusError::io(&index, e))?;
        let mut nd = String::new();
        for c in &self.codes {
            nd.push_str(&serde_json::to_string(c).expect("bug code serializes"));
            nd.push('\n');
        }
        let meta = self.root.join("bugs.ndrec");
        write_atomic(&meta, nd.as_bytes()).map_err(|e| CorpusError::io(&meta, e))
    }

    /// Reload the stored bug codes of a corpus written by [`CorpusStore`].
    pub fn load(root: &Path) -> Result<Vec<BugCode>, CorpusError> {
        let meta = root.join("bugs.ndrec");
        let text = fs::read_to_string(&meta).map_err(|e| CorpusError::io(&meta, e))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                serde_json::from_str(l).map_err(|e| CorpusError::MalformedDump {
                    path: meta.clone(),
                    line: n + 1,
                    reason: e.to_string(),
                })
            })
            .collect()
    }
}

pub fn read_index(root: &Path) -> Result<Vec<IndexEntry>, CorpusError> {
    let path = root.join("index.tsv");
    let text = fs::read_to_string(&path).map_err(|e| CorpusError::io(&path, e))?;
    Ok(text
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut f = l.splitn(4, '\t');
            IndexEntry {
                id: f.next().unwrap_or_default().into(),
                label: f.next().unwrap_or_default().into(),
                path: f.next().unwrap_or_default().into(),
                status: f.next().unwrap_or_default().into(),
            }
        })
        .collect())
}
