//! Historical bug collection: issue ingestion, reproduction-snippet
//! extraction, preprocessing and the on-disk bug-code corpus.

mod issue;
mod snippet;
mod store;

use std::path::{Path, PathBuf};

pub use issue::{
    encode_dump_line, fetch_issues, read_dump, write_dump, FetchMode, FetchResult, IssueRecord, LiveTracker,
};
pub use snippet::{
    clean, extract_snippets, fenced_blocks, preprocess_snippet, FencedBlock, Preprocessed, RejectReason,
    DEFAULT_KEYWORDS, HOST_LANGUAGE_TAGS,
};
pub use store::{read_index, BugCode, CorpusStore, IndexEntry};

use crate::library::ImportTable;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dump not found: {0}")]
    MissingDump(PathBuf),
    #[error("malformed dump record at {path}:{line}: {reason}")]
    MalformedDump { path: PathBuf, line: usize, reason: String },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Counters for one mining run. `stored + rejected == extracted` always.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MiningReport {
    pub issues: usize,
    pub extracted: usize,
    pub stored: usize,
    pub rejected: usize,
}

/// Extract, preprocess and store the snippets of every issue.
pub fn mine_issues(
    issues: &[IssueRecord],
    keywords: &[&str],
    imports: &ImportTable,
    store: &mut CorpusStore,
) -> Result<MiningReport, CorpusError> {
    let mut report = MiningReport {
        issues: issues.len(),
        ..Default::default()
    };
    for issue in issues {
        if issue.body.trim().is_empty() {
            continue;
        }
        for (k, raw) in extract_snippets(&issue.body, keywords).iter().enumerate() {
            report.extracted += 1;
            match preprocess_snippet(raw, imports) {
                Ok(p) => {
                    store.store(issue, p)?;
                    report.stored += 1;
                }
                Err(reason) => {
                    log::debug!("issue {} snippet {k} rejected: {reason}", issue.issue_id);
                    store.reject(issue, k, &reason.to_string())?;
                    report.rejected += 1;
                }
            }
        }
    }
    Ok(report)
}
