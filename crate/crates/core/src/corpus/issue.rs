use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::library::LibraryId;

/// One bug-labeled issue from a source-library tracker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub source_library: LibraryId,
    pub issue_id: u64,
    pub title: String,
    pub label: String,
    /// Rendered issue body with fenced code blocks preserved.
    pub body: String,
    pub url: String,
    /// ISO-8601 creation date (`YYYY-MM-DD...`), when known.
    pub created_at: Option<String>,
}

/// Where issues come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchMode {
    /// Newline-delimited dump file, or a directory of page files read in
    /// file-name order.
    OfflineDump(PathBuf),
    Live(LiveTracker),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiveTracker {
    /// API base, e.g. `https://api.github.com`.
    pub base_url: String,
    /// `owner/repo`.
    pub repo: String,
    pub token: Option<String>,
    pub per_page: u32,
    pub max_retries: u32,
}

impl LiveTracker {
    pub fn github(repo: &str, token: Option<String>) -> Self {
        LiveTracker {
            base_url: "https://api.github.com".to_string(),
            repo: repo.to_string(),
            token,
            per_page: 100,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FetchResult {
    pub issues: Vec<IssueRecord>,
    /// Set when the transport gave up before pagination was exhausted.
    pub partial: bool,
}

/// Wire form of a dump line.
#[derive(Debug, Serialize, Deserialize)]
struct DumpLine {
    source: String,
    id: u64,
    title: String,
    label: String,
    body: String,
    url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    created_at: Option<String>,
}

pub fn encode_dump_line(issue: &IssueRecord) -> String {
    let line = DumpLine {
        source: issue.source_library.to_string(),
        id: issue.issue_id,
        title: issue.title.clone(),
        label: issue.label.clone(),
        body: B64.encode(issue.body.as_bytes()),
        url: issue.url.clone(),
        created_at: issue.created_at.clone(),
    };
    serde_json::to_string(&line).expect("dump line serializes")
}

pub fn write_dump(path: &Path, issues: &[IssueRecord]) -> Result<(), CorpusError> {
    let mut text = String::new();
    for i in issues {
        text.push_str(&encode_dump_line(i));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CorpusError::io(path, e))
}

fn dump_files(path: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| CorpusError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        Ok(files)
    } else if path.is_file() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(CorpusError::MissingDump(path.to_path_buf()))
    }
}

pub fn read_dump(path: &Path) -> Result<Vec<IssueRecord>, CorpusError> {
    let mut out = Vec::new();
    for file in dump_files(path)? {
        let reader = BufReader::new(fs::File::open(&file).map_err(|e| CorpusError::io(&file, e))?);
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| CorpusError::io(&file, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| CorpusError::MalformedDump {
                path: file.clone(),
                line: n + 1,
                reason,
            };
            let rec: DumpLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let body = B64
                .decode(rec.body.trim())
                .map_err(|e| bad(format!("record {}: body is not base64: {e}", rec.id)))?;
            let body = String::from_utf8(body)
                .map_err(|_| bad(format!("record {}: body is not UTF-8", rec.id)))?;
            if rec.id == 0 {
                return Err(bad("issue id must be positive".into()));
            }
            if rec.label.trim().is_empty() {
                return Err(bad(format!("record {}: empty label", rec.id)));
            }
            out.push(IssueRecord {
                source_library: LibraryId::new(rec.source),
                issue_id: rec.id,
                title: rec.title,
                label: rec.label,
                body,
                url: rec.url,
                created_at: rec.created_at,
            });
        }
    }
    Ok(out)
}

fn keep(issue: &IssueRecord, source: &LibraryId, label: &str, since: Option<&str>) -> bool {
    issue.source_library == *source
        && issue.label.eq_ignore_ascii_case(label)
        && match (since, issue.created_at.as_deref()) {
            (Some(s), Some(c)) => c >= s,
            _ => true,
        }
}

/// Every issue of `source` carrying `label`, descending by issue id.
pub fn fetch_issues(
    source: &LibraryId,
    label: &str,
    mode: &FetchMode,
    since: Option<&str>,
) -> Result<FetchResult, CorpusError> {
    let mut result = match mode {
        FetchMode::OfflineDump(path) => FetchResult {
            issues: read_dump(path)?,
            partial: false,
        },
        FetchMode::Live(tracker) => fetch_live(source, label, tracker)?,
    };
    result.issues.retain(|i| keep(i, source, label, since));
    result.issues.sort_by(|a, b| b.issue_id.cmp(&a.issue_id));
    let before = result.issues.len();
    result.issues.dedup_by_key(|i| i.issue_id);
    if result.issues.len() != before {
        log::warn!("{source}: dropped {} duplicate issue ids", before - result.issues.len());
    }
    Ok(result)
}

#[derive(Deserialize)]
struct GhLabel {
    name: String,
}

#[derive(Deserialize)]
struct GhIssue {
    number: u64,
    title: String,
    #[serde(default)]
    body: Option<String>,
    html_url: String,
    #[serde(default)]
    labels: Vec<GhLabel>,
    #[serde(default)]
    created_at: Option<String>,
    #[serde(default)]
    pull_request: Option<serde_json::Value>,
}

fn fetch_live(source: &LibraryId, label: &str, t: &LiveTracker) -> Result<FetchResult, CorpusError> {
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_secs(30))
        .build();
    let mut out = FetchResult::default();
    let mut page = 1u32;
    loop {
        let url = format!(
            "{}/repos/{}/issues",
            t.base_url.trim_end_matches('/'),
            t.repo
        );
        let mut attempt = 0;
        let batch: Vec<GhIssue> = loop {
            let mut req = agent
                .get(&url)
                .query("labels", label)
                .query("state", "all")
                .query("per_page", &t.per_page.to_string())
                .query("page", &page.to_string())
                .set("Accept", "application/vnd.github+json");
            if let Some(tok) = &t.token {
                req = req.set("Authorization", &format!("Bearer {tok}"));
            }
            match req.call() {
                Ok(resp) => match resp.into_json::<Vec<GhIssue>>() {
                    Ok(b) => break b,
                    Err(e) => {
                        return Err(CorpusError::MalformedDump {
                            path: PathBuf::from(&url),
                            line: page as usize,
                            reason: e.to_string(),
                        })
                    }
                },
                Err(e) => {
                    attempt += 1;
                    log::warn!("{url} page {page}: {e} (attempt {attempt})");
                    if attempt > t.max_retries {
                        out.partial = true;
                        return Ok(out);
                    }
                    thread::sleep(Duration::from_millis(50 << attempt.min(6)));
                }
            }
        };
        if batch.is_empty() {
            break;
        }
        for gh in batch.into_iter().filter(|g| g.pull_request.is_none()) {
            let label = gh
                .labels
                .iter()
                .find(|l| l.name.eq_ignore_ascii_case(label))
                .map(|l| l.name.clone())
                .unwrap_or_else(|| label.to_string());
            out.issues.push(IssueRecord {
                source_library: source.clone(),
                issue_id: gh.number,
                title: gh.title,
                label,
                body: gh.body.unwrap_or_default(),
                url: gh.html_url,
                created_at: gh.created_at,
            });
        }
        page += 1;
    }
    Ok(out)
}
