//! Code pairs `(S, T)`: one API implemented with the source library and the
//! target library, obtained from the code model and mutated into variants.

mod mutate;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use mutate::{draw_value, mutable_inputs, mutate_pair, variant_seed, Edit, MutatedPair, Side};

use crate::backend::{CodeModel, CompletionRequest, DEFAULT_TEMPERATURE, GENERATION_MAX_TOKENS};
use crate::corpus::fenced_blocks;
use crate::library::{LibraryId, LibraryProfile};
use crate::prompt::{Prompt, SOURCE_FENCE, TARGET_FENCE};
use crate::python;
use crate::util::{sanitize_component, write_atomic, write_ndrec};

pub const DEFAULT_PAIRS_PER_API: usize = 5;
pub const DEFAULT_MUTATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodePair {
    /// `<library>/<api>/<pair_index>`
    pub id: String,
    pub api: String,
    pub library: LibraryId,
    pub source_code: String,
    pub target_code: String,
    pub prompt_ref: String,
    pub pair_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairReject {
    ParseFailS,
    ParseFailT,
    WrongLibrary,
    CrossContamination,
}

impl fmt::Display for PairReject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairReject::ParseFailS => "parse_fail_S",
            PairReject::ParseFailT => "parse_fail_T",
            PairReject::WrongLibrary => "wrong_library",
            PairReject::CrossContamination => "cross_contamination",
        })
    }
}

/// Split a completion into its `source` and `target` blocks.
pub fn parse_completion(text: &str) -> Option<(String, String)> {
    let mut s = None;
    let mut t = None;
    for b in fenced_blocks(text) {
        let tag = b.info.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
        if tag == SOURCE_FENCE && s.is_none() {
            s = Some(b.body);
        } else if tag == TARGET_FENCE && t.is_none() {
            t = Some(b.body);
        }
    }
    Some((s?, t?))
}

fn uses_library(code: &str, lib: &LibraryProfile) -> bool {
    let imported = python::imported_modules(code).unwrap_or_default();
    if lib.modules.iter().any(|m| imported.contains(m)) {
        return true;
    }
    let names = python::referenced_names(code).unwrap_or_default();
    lib.roots().any(|r| names.contains(r))
}

fn imports_library(code: &str, lib: &LibraryProfile) -> bool {
    let imported = python::imported_modules(code).unwrap_or_default();
    lib.modules.iter().any(|m| imported.contains(m))
}

pub fn validate_pair(pair: &CodePair, source: &LibraryProfile, target: &LibraryProfile) -> Result<(), PairReject> {
    if !python::is_parseable(&pair.source_code) {
        return Err(PairReject::ParseFailS);
    }
    if !python::is_parseable(&pair.target_code) {
        return Err(PairReject::ParseFailT);
    }
    if imports_library(&pair.target_code, source) || imports_library(&pair.source_code, target) {
        return Err(PairReject::CrossContamination);
    }
    if !uses_library(&pair.source_code, source) || !uses_library(&pair.target_code, target) {
        return Err(PairReject::WrongLibrary);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationFailure {
    Backend(String),
    MissingDelimiter,
    Rejected(PairReject),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairGeneration {
    pub pairs: Vec<CodePair>,
    /// One entry per discarded completion, tagged with the prompt id.
    pub failures: Vec<(String, GenerationFailure)>,
}

impl PairGeneration {
    pub fn is_partial(&self, limit: usize) -> bool {
        self.pairs.len() < limit
    }
}

#[derive(Debug, Clone)]
pub struct PairSettings {
    pub per_api_limit: usize,
    /// Total completion attempts per API; defaults to three times the limit.
    pub retry_budget: usize,
    pub temperature: f64,
}

impl Default for PairSettings {
    fn default() -> Self {
        PairSettings {
            per_api_limit: DEFAULT_PAIRS_PER_API,
            retry_budget: 3 * DEFAULT_PAIRS_PER_API,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl PairSettings {
    pub fn with_limit(limit: usize) -> Self {
        PairSettings {
            per_api_limit: limit,
            retry_budget: 3 * limit,
            ..Self::default()
        }
    }
}

/// Query the model with the API's prompts, round-robin, until
/// `per_api_limit` valid pairs are collected or the attempt budget is spent.
pub fn generate_pairs(
    prompts: &[Prompt],
    model: &dyn CodeModel,
    settings: &PairSettings,
    source: &LibraryProfile,
    target: &LibraryProfile,
) -> PairGeneration {
    let mut out = PairGeneration::default();
    if prompts.is_empty() {
        return out;
    }
    for attempt in 0..settings.retry_budget {
        if out.pairs.len() >= settings.per_api_limit {
            break;
        }
        let prompt = &prompts[attempt % prompts.len()];
        let mut req = CompletionRequest::new(&prompt.rendered, model.model_id());
        req.temperature = settings.temperature;
        req.max_new_tokens = GENERATION_MAX_TOKENS;
        let completion = match model.complete(&req) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("{}: {e}", prompt.id);
                out.failures.push((prompt.id.clone(), GenerationFailure::Backend(e.to_string())));
                continue;
            }
        };
        let Some((s, t)) = parse_completion(&completion) else {
            out.failures.push((prompt.id.clone(), GenerationFailure::MissingDelimiter));
            continue;
        };
        let index = out.pairs.len();
        let pair = CodePair {
            id: format!("{}/{}/{}", prompt.library, prompt.api, index),
            api: prompt.api.clone(),
            library: prompt.library.clone(),
            source_code: s,
            target_code: t,
            prompt_ref: prompt.id.clone(),
            pair_index: index,
        };
        match validate_pair(&pair, source, target) {
            Ok(()) => out.pairs.push(pair),
            Err(r) => out.failures.push((prompt.id.clone(), GenerationFailure::Rejected(r))),
        }
    }
    out
}

pub fn render_pair_file(pair: &CodePair) -> String {
    format!(
        "# pair {} from prompt {}\n```{SOURCE_FENCE}\n{}```\n```{TARGET_FENCE}\n{}```\n",
        pair.id, pair.prompt_ref, pair.source_code, pair.target_code
    )
}

/// `<root>/<library>/<api>/<pair_index>.pair` plus `<root>/<library>/pairs.ndrec`.
pub fn store_pairs(root: &Path, library: &LibraryId, pairs: &[CodePair]) -> std::io::Result<()> {
    let dir = root.join(sanitize_component(library.as_str()));
    for p in pairs {
        let path = dir.join(sanitize_component(&p.api)).join(format!("{}.pair", p.pair_index));
        write_atomic(&path, render_pair_file(p).as_bytes())?;
    }
    write_ndrec(&dir.join("pairs.ndrec"), pairs)
}

pub fn load_pairs(root: &Path, library: &LibraryId) -> std::io::Result<Vec<CodePair>> {
    crate::util::read_ndrec(&root.join(sanitize_component(library.as_str())).join("pairs.ndrec"))
}

/// `mutations.tsv` (parent, index, seed, edits) and `mutated.ndrec`.
pub fn store_mutations(root: &Path, library: &LibraryId, variants: &[MutatedPair]) -> std::io::Result<()> {
    let dir = root.join(sanitize_component(library.as_str()));
    let mut tsv = String::from("parent\tindex\tseed\tedits\n");
    for v in variants {
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            v.parent,
            v.mutation_index,
            v.rng_seed,
            v.edit_summary().replace(['\t', '\n'], " ")
        ));
    }
    write_atomic(&dir.join("mutations.tsv"), tsv.as_bytes())?;
    write_ndrec(&dir.join("mutated.ndrec"), variants)
}

pub fn load_mutations(root: &Path, library: &LibraryId) -> std::io::Result<Vec<MutatedPair>> {
    crate::util::read_ndrec(&root.join(sanitize_component(library.as_str())).join("mutated.ndrec"))
}

/// Distinct APIs with at least one pair.
pub fn apis_with_pairs(pairs: &[CodePair]) -> BTreeSet<&str> {
    pairs.iter().map(|p| p.api.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Backend, Rulebook};
    use crate::library;

    const GOOD: &str = "Here you go.\n```source\nimport torch\nx = torch.eye(3)\n```\n```target\nimport mlx.core as mx\nx = mx.eye(3)\n```\n";

    fn prompt() -> Prompt {
        Prompt {
            id: "mlx/mlx.core.eye/0".into(),
            api: "mlx.core.eye".into(),
            library: LibraryId::new("mlx"),
            task_text: String::new(),
            emphasis: vec![],
            doc_excerpt: String::new(),
            example: None,
            token_budget: 100,
            index_within_api: 0,
            undecomposed: false,
            rendered: "API: mlx.core.eye".into(),
        }
    }

    fn pair(s: &str, t: &str) -> CodePair {
        CodePair {
            id: "p".into(),
            api: "a".into(),
            library: LibraryId::new("mlx"),
            source_code: s.into(),
            target_code: t.into(),
            prompt_ref: "q".into(),
            pair_index: 0,
        }
    }

    #[test]
    fn completion_with_both_blocks() {
        let (s, t) = parse_completion(GOOD).unwrap();
        assert_eq!(s, "import torch\nx = torch.eye(3)\n");
        assert_eq!(t, "import mlx.core as mx\nx = mx.eye(3)\n");
        assert!(parse_completion("```python\nx\n```\n").is_none());
    }

    #[test]
    fn validation_rules() {
        let (src, tgt) = (library::pytorch(), library::mlx());
        assert_eq!(validate_pair(&pair("import torch\ntorch.eye(2)\n", "mx.eye(2)\n"), &src, &tgt), Ok(()));
        assert_eq!(
            validate_pair(&pair("torch.eye(2)\n", "import torch\nimport mlx.core as mx\nmx.eye(2)\n"), &src, &tgt),
            Err(PairReject::CrossContamination)
        );
        assert_eq!(
            validate_pair(&pair("torch.eye(2\n", "mx.eye(2)\n"), &src, &tgt),
            Err(PairReject::ParseFailS)
        );
        assert_eq!(
            validate_pair(&pair("torch.eye(2)\n", "mx.eye(2\n"), &src, &tgt),
            Err(PairReject::ParseFailT)
        );
        assert_eq!(
            validate_pair(&pair("import numpy as np\nnp.eye(2)\n", "mx.eye(2)\n"), &src, &tgt),
            Err(PairReject::WrongLibrary)
        );
    }

    #[test]
    fn cooperative_mock_fills_the_limit() {
        let b = Backend::mock(Rulebook::new().with_rule("API: mlx.core.eye", GOOD));
        let g = generate_pairs(&[prompt()], &b, &PairSettings::with_limit(5), &library::pytorch(), &library::mlx());
        assert_eq!(g.pairs.len(), 5);
        assert!(g.failures.is_empty());
        assert_eq!(g.pairs[4].id, "mlx/mlx.core.eye/4");
    }

    #[test]
    fn garbage_exhausts_the_budget() {
        let b = Backend::mock(Rulebook::new().with_rule("API:", "no code here"));
        let s = PairSettings::with_limit(5);
        let g = generate_pairs(&[prompt()], &b, &s, &library::pytorch(), &library::mlx());
        assert!(g.pairs.is_empty());
        assert_eq!(g.failures.len(), s.retry_budget);
        assert!(g.failures.iter().all(|(_, f)| *f == GenerationFailure::MissingDelimiter));
    }

    #[test]
    fn pair_file_reparses() {
        let p = pair("import torch\n", "import mlx.core as mx\n");
        let (s, t) = parse_completion(&render_pair_file(&p)).unwrap();
        assert_eq!((s.as_str(), t.as_str()), (p.source_code.as_str(), p.target_code.as_str()));
    }
}
