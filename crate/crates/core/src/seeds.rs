//! Seed corpus: historical bug codes converted to the target library (`pot`)
//! plus freshly generated API snippets (`gen`).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{self, CodeModel};
use crate::catalog::ApiInfo;
use crate::corpus::{preprocess_snippet, BugCode};
use crate::library::{ImportTable, LibraryId, LibraryProfile};
use crate::python;
use crate::util::{sanitize_component, write_atomic, write_ndrec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    Pot,
    Gen,
}

impl fmt::Display for SeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeedKind::Pot => "pot",
            SeedKind::Gen => "gen",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedCode {
    pub id: String,
    pub kind: SeedKind,
    /// Bug-code id for `pot`, API name for `gen`.
    pub origin: String,
    pub target_library: LibraryId,
    pub text: String,
    pub target_apis: Vec<String>,
    /// Source-library implementation of the same program, when known.
    pub paired_source: Option<String>,
}

/// Seeds plus per-reason failure counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedBatch {
    pub seeds: Vec<SeedCode>,
    pub attempts: usize,
    pub failures: BTreeMap<String, usize>,
    /// The attempt budget ran out before the requested count was reached.
    pub partial: bool,
}

impl SeedBatch {
    fn fail(&mut self, reason: &str) {
        *self.failures.entry(reason.to_string()).or_default() += 1;
    }

    pub fn failure_count(&self) -> usize {
        self.failures.values().sum()
    }
}

/// What the seed generator needs to know about the libraries involved.
pub struct SeedContext<'a> {
    pub source: &'a LibraryProfile,
    pub target: &'a LibraryProfile,
    pub apis: Vec<String>,
    pub imports: ImportTable,
    pub temperature: f64,
}

impl<'a> SeedContext<'a> {
    pub fn new(source: &'a LibraryProfile, target: &'a LibraryProfile, catalog: &[ApiInfo]) -> Self {
        SeedContext {
            source,
            target,
            apis: catalog.iter().map(|a| a.name.clone()).collect(),
            imports: ImportTable::from_profiles([source, target]),
            temperature: backend::DEFAULT_TEMPERATURE,
        }
    }
}

/// Convert each bug code to the target library, then clean it exactly like
/// a mined snippet. One conversion per bug code.
pub fn convert_corpus(corpus: &[BugCode], model: &dyn CodeModel, ctx: &SeedContext) -> SeedBatch {
    let mut batch = SeedBatch::default();
    for bug in corpus {
        batch.attempts += 1;
        let converted = match backend::convert_code(model, &bug.text, &ctx.target.display_name, ctx.temperature) {
            Ok(c) => c,
            Err(e) => {
                log::debug!("{}: conversion failed: {e}", bug.id);
                batch.fail(match e {
                    backend::BackendError::EmptyConversion => "empty_conversion",
                    _ => "backend",
                });
                continue;
            }
        };
        let pre = match preprocess_snippet(&converted, &ctx.imports) {
            Ok(p) => p,
            Err(_) => {
                batch.fail("unparseable");
                continue;
            }
        };
        batch.seeds.push(SeedCode {
            id: format!("pot-{}", bug.id),
            kind: SeedKind::Pot,
            origin: bug.id.clone(),
            target_library: ctx.target.id.clone(),
            target_apis: ctx.target.detect_apis(&pre.text, &ctx.apis),
            text: pre.text,
            paired_source: Some(bug.text.clone()),
        });
    }
    batch
}

/// Generate `total` parseable snippets round-robin over `apis` (attempt `j`
/// targets API `j mod n`), within an attempt budget of five times `total`.
/// With `paired`, each snippet also gets a source-library counterpart.
pub fn generate_random(
    apis: &[ApiInfo],
    total: usize,
    model: &dyn CodeModel,
    ctx: &SeedContext,
    paired: bool,
) -> SeedBatch {
    let mut batch = SeedBatch::default();
    if apis.is_empty() || total == 0 {
        return batch;
    }
    let budget = 5 * total;
    let mut per_api: HashMap<&str, usize> = HashMap::new();
    for j in 0..budget {
        if batch.seeds.len() >= total {
            break;
        }
        batch.attempts += 1;
        let api = &apis[j % apis.len()];
        let code = match backend::generate_code(model, &api.name, &ctx.target.display_name, ctx.temperature) {
            Ok(c) => c,
            Err(e) => {
                log::debug!("{}: generation failed: {e}", api.name);
                batch.fail("backend");
                continue;
            }
        };
        let pre = match preprocess_snippet(&code, &ctx.imports) {
            Ok(p) => p,
            Err(_) => {
                batch.fail("unparseable");
                continue;
            }
        };
        let paired_source = if paired {
            backend::source_counterpart(model, &pre.text, &ctx.source.display_name, ctx.temperature)
                .ok()
                .and_then(|s| preprocess_snippet(&s, &ctx.imports).ok())
                .map(|p| p.text)
        } else {
            None
        };
        let k = per_api.entry(api.name.as_str()).or_default();
        batch.seeds.push(SeedCode {
            id: format!("gen-{}-{}", sanitize_component(&api.name), k),
            kind: SeedKind::Gen,
            origin: api.name.clone(),
            target_library: ctx.target.id.clone(),
            target_apis: ctx.target.detect_apis(&pre.text, &ctx.apis),
            text: pre.text,
            paired_source,
        });
        *k += 1;
    }
    batch.partial = batch.seeds.len() < total;
    batch
}

/// Drop seeds whose normalized text (comments and layout ignored) was seen
/// before. Returns the survivors and `(removed, kept)` id pairs.
pub fn dedupe_seeds(seeds: Vec<SeedCode>) -> (Vec<SeedCode>, Vec<(String, String)>) {
    let mut first: HashMap<String, String> = HashMap::new();
    let mut kept = Vec::with_capacity(seeds.len());
    let mut removed = Vec::new();
    for s in seeds {
        let key = python::normalized(&s.text);
        match first.get(&key) {
            Some(k) => removed.push((s.id, k.clone())),
            None => {
                first.insert(key, s.id.clone());
                kept.push(s);
            }
        }
    }
    (kept, removed)
}

/// `<root>/<library>/<kind>/<id>.py` (plus `<id>.src.py` for paired
/// sources), `<root>/<library>/seeds.ndrec`, and `<root>/index.tsv` covering
/// every library written so far.
pub fn store_seeds(root: &Path, library: &LibraryId, seeds: &[SeedCode]) -> std::io::Result<()> {
    let lib_dir = root.join(sanitize_component(library.as_str()));
    for s in seeds {
        let dir = lib_dir.join(s.kind.to_string());
        write_atomic(&dir.join(format!("{}.py", s.id)), s.text.as_bytes())?;
        if let Some(src) = &s.paired_source {
            write_atomic(&dir.join(format!("{}.src.py", s.id)), src.as_bytes())?;
        }
    }
    write_ndrec(&lib_dir.join("seeds.ndrec"), seeds)?;

    let mut libs: Vec<_> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("seeds.ndrec").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    libs.sort();
    let mut tsv = String::from("id\tkind\torigin\tapis\tpaired_source\n");
    for lib in libs {
        let all: Vec<SeedCode> = crate::util::read_ndrec(&root.join(&lib).join("seeds.ndrec"))?;
        for s in all {
            let src = if s.paired_source.is_some() {
                format!("{lib}/{}/{}.src.py", s.kind, s.id)
            } else {
                "-".into()
            };
            let apis = if s.target_apis.is_empty() { "-".into() } else { s.target_apis.join(",") };
            tsv.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", s.id, s.kind, s.origin, apis, src));
        }
    }
    write_atomic(&root.join("index.tsv"), tsv.as_bytes())
}

pub fn load_seeds(root: &Path, library: &LibraryId) -> std::io::Result<Vec<SeedCode>> {
    crate::util::read_ndrec(&root.join(sanitize_component(library.as_str())).join("seeds.ndrec"))
}

/// Relative path of a stored seed's program file.
pub fn seed_path(root: &Path, seed: &SeedCode) -> std::path::PathBuf {
    root.join(sanitize_component(seed.target_library.as_str()))
        .join(seed.kind.to_string())
        .join(format!("{}.py", seed.id))
}

pub fn paired_source_path(root: &Path, seed: &SeedCode) -> Option<std::path::PathBuf> {
    seed.paired_source.as_ref().map(|_| {
        root.join(sanitize_component(seed.target_library.as_str()))
            .join(seed.kind.to_string())
            .join(format!("{}.src.py", seed.id))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Backend, Rulebook};
    use crate::library;

    fn bug(id: &str, text: &str) -> BugCode {
        BugCode {
            id: id.into(),
            source_library: LibraryId::new("pytorch"),
            issue_id: 1,
            issue_title: "t".into(),
            issue_url: String::new(),
            label: "l".into(),
            text: text.into(),
            injected_imports: vec![],
            storage_path: String::new(),
        }
    }

    fn catalog() -> Vec<ApiInfo> {
        ["mlx.core.eye", "mlx.core.sum", "mlx.core.add"]
            .iter()
            .map(|n| ApiInfo::new(n, &LibraryId::new("mlx"), "doc"))
            .collect()
    }

    #[test]
    fn converts_each_bug_code() {
        let rb = Rulebook::new()
            .with_rule("torch.eye(3)", "```python\nmx.eye(3)\n```")
            .with_rule("torch.sum", "```python\nx = mx.array([1.0])\nmx.sum(x)\n```")
            .with_rule("torch.add", "no code");
        let (src, tgt) = (library::pytorch(), library::mlx());
        let ctx = SeedContext::new(&src, &tgt, &catalog());
        let corpus = [
            bug("a", "import torch\ntorch.eye(3)\n"),
            bug("b", "import torch\ntorch.sum(torch.ones(2))\n"),
            bug("c", "import torch\ntorch.add(1, 2)\n"),
        ];
        let b = convert_corpus(&corpus, &Backend::mock(rb), &ctx);
        assert_eq!(b.seeds.len(), 2);
        assert_eq!(b.failures.get("empty_conversion"), Some(&1));
        let s = &b.seeds[0];
        assert_eq!(s.text, "import mlx.core as mx\nmx.eye(3)\n");
        assert_eq!(s.target_apis, vec!["mlx.core.eye"]);
        assert_eq!(s.paired_source.as_deref(), Some(corpus[0].text.as_str()));
        assert_eq!(b.seeds[1].target_apis, vec!["mlx.core.sum"]);
    }

    #[test]
    fn round_robin_counts() {
        let rb = Rulebook::new()
            .with_rule("calls mlx.core.eye", "```python\nmx.eye(2)\n```")
            .with_rule("calls mlx.core.sum", "```python\nmx.sum(mx.ones(2))\n```")
            .with_rule("calls mlx.core.add", "```python\nmx.add(1, 2)\n```");
        let (src, tgt) = (library::pytorch(), library::mlx());
        let ctx = SeedContext::new(&src, &tgt, &catalog());
        let b = generate_random(&catalog(), 7, &Backend::mock(rb), &ctx, false);
        assert_eq!(b.seeds.len(), 7);
        assert!(!b.partial);
        let mut counts = BTreeMap::new();
        for s in &b.seeds {
            *counts.entry(s.origin.as_str()).or_insert(0) += 1;
        }
        assert_eq!(counts.values().copied().collect::<Vec<_>>(), vec![2, 3, 2]); // add, eye, sum
        assert_eq!(counts["mlx.core.eye"], 3);
        assert!(generate_random(&catalog(), 0, &Backend::mock(Rulebook::new()), &ctx, false).seeds.is_empty());
    }

    #[test]
    fn exhausted_budget_is_partial() {
        let (src, tgt) = (library::pytorch(), library::mlx());
        let ctx = SeedContext::new(&src, &tgt, &catalog());
        let b = generate_random(&catalog(), 4, &Backend::mock(Rulebook::new()), &ctx, false);
        assert!(b.partial && b.seeds.is_empty());
        assert_eq!(b.attempts, 20);
    }

    fn seed(id: &str, text: &str) -> SeedCode {
        SeedCode {
            id: id.into(),
            kind: SeedKind::Gen,
            origin: "x".into(),
            target_library: LibraryId::new("mlx"),
            text: text.into(),
            target_apis: vec![],
            paired_source: None,
        }
    }

    #[test]
    fn dedupe_ignores_comments_and_layout() {
        let seeds = vec![
            seed("a", "x = mx.eye(3)\n"),
            seed("b", "x = mx.eye(3)\n"),
            seed("c", "# note\nx = mx.eye( 3 )  # trailing\n"),
            seed("d", "x = mx.eye(4)\n"),
        ];
        let (kept, removed) = dedupe_seeds(seeds);
        assert_eq!(kept.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), vec!["a", "d"]);
        assert_eq!(removed, vec![("b".into(), "a".into()), ("c".into(), "a".into())]);
        let (again, none) = dedupe_seeds(kept.clone());
        assert_eq!(again, kept);
        assert!(none.is_empty());
    }

    #[test]
    fn store_writes_index() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = seed("gen-eye-0", "mx.eye(2)\n");
        s.paired_source = Some("torch.eye(2)\n".into());
        store_seeds(dir.path(), &LibraryId::new("mlx"), &[s.clone()]).unwrap();
        assert_eq!(std::fs::read_to_string(seed_path(dir.path(), &s)).unwrap(), "mx.eye(2)\n");
        let idx = std::fs::read_to_string(dir.path().join("index.tsv")).unwrap();
        assert!(idx.contains("gen-eye-0\tgen\tx\t-\tmlx/gen/gen-eye-0.src.py"));
        assert_eq!(load_seeds(dir.path(), &LibraryId::new("mlx")).unwrap(), vec![s]);
    }
}
