//! Target-library API catalog: `{name, doc, examples}` triplets ingested from
//! pre-scraped documentation bundles, with reference resolution for APIs that
//! only point at another API's documentation.
//!
//! A bundle is a directory tree of per-API record files. Each record has
//! bracketed section headers on their own line:
//!
//! ```text
//! [NAME]
//! mlx.core.eye
//! [DOC]
//! Create an identity matrix ...
//! [EXAMPLE]
//! import mlx.core as mx
//! mx.eye(3)
//! [REFS]
//! mlx.core.identity
//! ```
//!
//! `[EXAMPLE]` may repeat. An optional `[LIBRARY]` section overrides the
//! library the bundle is ingested for.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::library::LibraryId;
use crate::util::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiInfo {
    pub name: String,
    pub doc: String,
    pub examples: Vec<String>,
    pub references: Vec<String>,
    pub target_library: LibraryId,
    #[serde(default)]
    pub undocumented: bool,
    #[serde(default)]
    pub record_path: Option<PathBuf>,
}

impl ApiInfo {
    pub fn new(name: &str, library: &LibraryId, doc: &str) -> Self {
        ApiInfo {
            name: name.to_string(),
            doc: doc.to_string(),
            examples: Vec::new(),
            references: Vec::new(),
            target_library: library.clone(),
            undocumented: false,
            record_path: None,
        }
    }

    /// Last dotted component of the name.
    pub fn short_name(&self) -> &str {
        crate::python::terminal_name(&self.name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate API {name}: {first} and {second}")]
    Duplicate {
        name: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("{path}: record has no [NAME] section")]
    MissingName { path: PathBuf },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CatalogError + '_ {
    move |source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parse one record file.
pub fn parse_record(text: &str, library: &LibraryId, path: &Path) -> Result<ApiInfo, CatalogError> {
    let mut name: Option<String> = None;
    let mut doc = String::new();
    let mut examples = Vec::new();
    let mut refs = Vec::new();
    let mut lib = library.clone();
    let mut section: Option<String> = None;
    let mut buf: Vec<&str> = Vec::new();

    let mut close = |section: &Option<String>, buf: &mut Vec<&str>| {
        let body = trim_block(buf);
        match section.as_deref() {
            Some("NAME") => name = Some(body.trim().to_string()),
            Some("DOC") => doc = body,
            Some("EXAMPLE") => {
                if !body.trim().is_empty() {
                    let mut b = body;
                    b.push('\n');
                    examples.push(b);
                }
            }
            Some("REFS") => refs.extend(
                body.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::to_string),
            ),
            Some("LIBRARY") => lib = LibraryId::new(body.trim()),
            _ => {}
        }
        buf.clear();
    };

    for line in text.lines() {
        let t = line.trim();
        let header = t
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .filter(|h| matches!(*h, "NAME" | "DOC" | "EXAMPLE" | "REFS" | "LIBRARY"));
        match header {
            Some(h) => {
                close(&section, &mut buf);
                section = Some(h.to_string());
            }
            None => buf.push(line),
        }
    }
    close(&section, &mut buf);

    let name = name
        .filter(|n| !n.is_empty())
        .ok_or_else(|| CatalogError::MissingName { path: path.to_path_buf() })?;
    Ok(ApiInfo {
        name,
        doc,
        examples,
        references: refs,
        target_library: lib,
        undocumented: false,
        record_path: Some(path.to_path_buf()),
    })
}

fn trim_block(lines: &[&str]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(lines.len());
    let end = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(start, |i| i + 1);
    lines[start..end].join("\n")
}

fn record_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CatalogError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            record_files(&path, out)?;
        } else if path.is_file() {
            out.push(path);
        }
    }
    Ok(())
}

/// One [`ApiInfo`] per record under `bundle`, in path order.
pub fn ingest_api_docs(bundle: &Path, library: &LibraryId) -> Result<Vec<ApiInfo>, CatalogError> {
    let mut files = Vec::new();
    record_files(bundle, &mut files)?;
    files.sort();
    let mut seen: BTreeMap<(LibraryId, String), PathBuf> = BTreeMap::new();
    let mut out = Vec::with_capacity(files.len());
    for path in files {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let api = parse_record(&text, library, &path)?;
        let key = (api.target_library.clone(), api.name.clone());
        if let Some(first) = seen.get(&key) {
            return Err(CatalogError::Duplicate {
                name: api.name,
                first: first.clone(),
                second: path,
            });
        }
        seen.insert(key, path);
        out.push(api);
    }
    Ok(out)
}

/// Fill empty docs from the first (transitively) documented reference.
/// Unresolvable APIs, including every member of a reference cycle with no
/// documented exit, are flagged `undocumented`.
pub fn resolve_references(catalog: &[ApiInfo]) -> Vec<ApiInfo> {
    let by_name: BTreeMap<(&LibraryId, &str), usize> = catalog
        .iter()
        .enumerate()
        .map(|(i, a)| ((&a.target_library, a.name.as_str()), i))
        .collect();

    fn find(
        i: usize,
        catalog: &[ApiInfo],
        by_name: &BTreeMap<(&LibraryId, &str), usize>,
        visiting: &mut HashSet<usize>,
        cycle: &mut bool,
    ) -> Option<usize> {
        if !catalog[i].doc.trim().is_empty() {
            return Some(i);
        }
        if !visiting.insert(i) {
            *cycle = true;
            return None;
        }
        let api = &catalog[i];
        for r in &api.references {
            if let Some(&j) = by_name.get(&(&api.target_library, r.as_str())) {
                if let Some(found) = find(j, catalog, by_name, visiting, cycle) {
                    return Some(found);
                }
            }
        }
        None
    }

    catalog
        .iter()
        .enumerate()
        .map(|(i, api)| {
            let mut api = api.clone();
            if !api.doc.trim().is_empty() {
                api.undocumented = false;
                return api;
            }
            let mut cycle = false;
            match find(i, catalog, &by_name, &mut HashSet::new(), &mut cycle) {
                Some(j) => {
                    api.doc = catalog[j].doc.clone();
                    if api.examples.is_empty() {
                        api.examples = catalog[j].examples.clone();
                    }
                    api.undocumented = false;
                }
                None => {
                    if cycle {
                        log::warn!("{}: reference cycle without documentation", api.name);
                    }
                    api.undocumented = true;
                }
            }
            api
        })
        .collect()
}

/// Machine-readable export: name, doc length, example count, flags.
pub fn export_index(catalog: &[ApiInfo]) -> String {
    let mut out = String::from("name\tdoc_len\texamples\tflags\n");
    for a in catalog {
        let flags = if a.undocumented { "undocumented" } else { "-" };
        out.push_str(&format!("{}\t{}\t{}\t{}\n", a.name, a.doc.len(), a.examples.len(), flags));
    }
    out
}

pub fn write_catalog(dir: &Path, library: &LibraryId, catalog: &[ApiInfo]) -> std::io::Result<()> {
    write_atomic(&dir.join(format!("{library}.tsv")), export_index(catalog).as_bytes())?;
    crate::util::write_ndrec(&dir.join(format!("{library}.ndrec")), catalog)
}

pub fn load_catalog(dir: &Path, library: &LibraryId) -> std::io::Result<Vec<ApiInfo>> {
    crate::util::read_ndrec(&dir.join(format!("{library}.ndrec")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib() -> LibraryId {
        LibraryId::new("mlx")
    }

    fn api(name: &str, doc: &str, refs: &[&str]) -> ApiInfo {
        let mut a = ApiInfo::new(name, &lib(), doc);
        a.references = refs.iter().map(|s| s.to_string()).collect();
        a
    }

    #[test]
    fn parses_sections() {
        let text = "[NAME]\nmlx.core.eye\n[DOC]\nIdentity.\n\nArgs:\n  n: rows\n[EXAMPLE]\nmx.eye(3)\n[EXAMPLE]\nmx.eye(2, 4)\n[REFS]\nmlx.core.identity\n";
        let a = parse_record(text, &lib(), Path::new("eye.rec")).unwrap();
        assert_eq!(a.name, "mlx.core.eye");
        assert_eq!(a.doc, "Identity.\n\nArgs:\n  n: rows");
        assert_eq!(a.examples, vec!["mx.eye(3)\n", "mx.eye(2, 4)\n"]);
        assert_eq!(a.references, vec!["mlx.core.identity"]);
    }

    #[test]
    fn empty_doc_with_link() {
        let a = parse_record("[NAME]\nx.alias\n[DOC]\n[REFS]\nx.real\n", &lib(), Path::new("a")).unwrap();
        assert_eq!(a.doc, "");
        assert_eq!(a.references, vec!["x.real"]);
    }

    #[test]
    fn direct_copy() {
        let out = resolve_references(&[api("A", "", &["B"]), api("B", "d", &[])]);
        assert_eq!(out[0].doc, "d");
        assert!(!out[0].undocumented);
    }

    #[test]
    fn chain_resolves_transitively() {
        let out = resolve_references(&[api("A", "", &["B"]), api("B", "", &["C"]), api("C", "c-doc", &[])]);
        assert_eq!(out[0].doc, "c-doc");
        assert_eq!(out[1].doc, "c-doc");
    }

    #[test]
    fn cycle_flags_all_members() {
        let out = resolve_references(&[api("A", "", &["B"]), api("B", "", &["A"])]);
        assert!(out.iter().all(|a| a.undocumented && a.doc.is_empty()));
    }

    #[test]
    fn first_documented_reference_wins() {
        let out = resolve_references(&[
            api("A", "", &["Z", "B", "C"]),
            api("B", "b", &[]),
            api("C", "c", &[]),
        ]);
        assert_eq!(out[0].doc, "b");
    }

    #[test]
    fn examples_fill_only_when_empty() {
        let mut a = api("A", "", &["B"]);
        a.examples = vec!["own()\n".into()];
        let mut b = api("B", "d", &[]);
        b.examples = vec!["other()\n".into()];
        let out = resolve_references(&[a, b]);
        assert_eq!(out[0].examples, vec!["own()\n"]);
    }
}
