//! Deep-learning library profiles: identifiers, import lines and the
//! identifier roots used to recognise code written against each library.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A library id such as `pytorch` or `mlx`. Unknown names are kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LibraryId(String);

impl LibraryId {
    pub fn new(id: impl Into<String>) -> Self {
        LibraryId(id.into().to_ascii_lowercase())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LibraryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LibraryId {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(LibraryId::new(s.trim()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryProfile {
    pub id: LibraryId,
    /// Human-facing name used in instructions, e.g. `MLX`.
    pub display_name: String,
    /// Top-level module names (`import <module>`).
    pub modules: Vec<String>,
    /// Conventional aliases (`mx`, `tf`, `flow`) mapped to the import line
    /// that binds them.
    pub aliases: Vec<(String, String)>,
}

impl LibraryProfile {
    pub fn new(id: &str, display_name: &str, modules: &[&str], aliases: &[(&str, &str)]) -> Self {
        LibraryProfile {
            id: LibraryId::new(id),
            display_name: display_name.to_string(),
            modules: modules.iter().map(|s| s.to_string()).collect(),
            aliases: aliases
                .iter()
                .map(|(a, line)| (a.to_string(), line.to_string()))
                .collect(),
        }
    }

    /// Identifier roots that indicate code uses this library.
    pub fn roots(&self) -> impl Iterator<Item = &str> {
        self.modules
            .iter()
            .map(String::as_str)
            .chain(self.aliases.iter().map(|(a, _)| a.as_str()))
    }

    /// Import statement binding `root`, if `root` belongs to this library.
    pub fn import_for(&self, root: &str) -> Option<String> {
        if let Some((_, line)) = self.aliases.iter().find(|(a, _)| a == root) {
            return Some(line.clone());
        }
        self.modules
            .iter()
            .find(|m| m.as_str() == root)
            .map(|m| format!("import {m}"))
    }

    /// Expand an alias root to the module it binds: `mx.eye` -> `mlx.core.eye`.
    pub fn expand(&self, dotted: &str) -> String {
        let (root, rest) = dotted.split_once('.').map_or((dotted, None), |(r, t)| (r, Some(t)));
        let module = self.aliases.iter().find(|(a, _)| a == root).and_then(|(a, line)| {
            let line = line.trim();
            let target = line.strip_prefix("import ")?.split(" as ").next()?.trim();
            (line.ends_with(&format!(" as {a}"))).then(|| target.to_string())
        });
        match (module, rest) {
            (Some(m), Some(r)) => format!("{m}.{r}"),
            (Some(m), None) => m,
            (None, _) => dotted.to_string(),
        }
    }

    /// Catalog APIs invoked by `code`, in order of first call. A call matches
    /// an API when its alias-expanded dotted name equals it, or, failing
    /// that, when a call rooted in this library shares its terminal name
    /// with exactly one API.
    pub fn detect_apis(&self, code: &str, apis: &[String]) -> Vec<String> {
        let calls = crate::python::called_names(code).unwrap_or_default();
        let roots: Vec<&str> = self.roots().collect();
        let mut out: Vec<String> = Vec::new();
        for c in calls {
            let full = self.expand(&c);
            let hit = apis.iter().find(|a| **a == full).or_else(|| {
                let root = c.split('.').next().unwrap_or("");
                if !c.contains('.') || !roots.contains(&root) {
                    return None;
                }
                let term = crate::python::terminal_name(&c);
                let mut m = apis.iter().filter(|a| crate::python::terminal_name(a) == term);
                match (m.next(), m.next()) {
                    (Some(a), None) => Some(a),
                    _ => None,
                }
            });
            if let Some(a) = hit {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
        }
        out
    }

    /// Main import line (first alias if any, else the first module).
    pub fn primary_import(&self) -> String {
        self.aliases
            .first()
            .map(|(_, l)| l.clone())
            .unwrap_or_else(|| format!("import {}", self.modules[0]))
    }
}

pub fn pytorch() -> LibraryProfile {
    LibraryProfile::new("pytorch", "PyTorch", &["torch"], &[])
}

pub fn tensorflow() -> LibraryProfile {
    LibraryProfile::new(
        "tensorflow",
        "TensorFlow",
        &["tensorflow"],
        &[("tf", "import tensorflow as tf")],
    )
}

pub fn mlx() -> LibraryProfile {
    LibraryProfile::new("mlx", "MLX", &["mlx"], &[("mx", "import mlx.core as mx")])
}

pub fn mindspore() -> LibraryProfile {
    LibraryProfile::new(
        "mindspore",
        "MindSpore",
        &["mindspore"],
        &[("ms", "import mindspore as ms"), ("ops", "import mindspore.ops as ops")],
    )
}

pub fn oneflow() -> LibraryProfile {
    LibraryProfile::new(
        "oneflow",
        "OneFlow",
        &["oneflow"],
        &[("flow", "import oneflow as flow")],
    )
}

pub fn numpy() -> LibraryProfile {
    LibraryProfile::new("numpy", "NumPy", &["numpy"], &[("np", "import numpy as np")])
}

/// Set of known library profiles, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    libs: BTreeMap<LibraryId, LibraryProfile>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry {
            libs: BTreeMap::new(),
        };
        for p in [pytorch(), tensorflow(), mlx(), mindspore(), oneflow(), numpy()] {
            r.insert(p);
        }
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            libs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, profile: LibraryProfile) {
        self.libs.insert(profile.id.clone(), profile);
    }

    pub fn get(&self, id: &LibraryId) -> Option<&LibraryProfile> {
        self.libs.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LibraryProfile> {
        self.libs.values()
    }
}

/// Identifier root -> import statement, used to repair snippets that use a
/// library without importing it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ImportTable {
    entries: Vec<(String, String)>,
}

impl ImportTable {
    pub fn from_profiles<'a>(profiles: impl IntoIterator<Item = &'a LibraryProfile>) -> Self {
        let mut t = ImportTable::default();
        for p in profiles {
            for root in p.roots() {
                if let Some(line) = p.import_for(root) {
                    t.insert(root, &line);
                }
            }
        }
        t
    }

    pub fn insert(&mut self, root: &str, import_line: &str) {
        match self.entries.iter_mut().find(|(r, _)| r == root) {
            Some(e) => e.1 = import_line.to_string(),
            None => self.entries.push((root.to_string(), import_line.to_string())),
        }
    }

    pub fn lookup(&self, root: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(r, _)| r == root)
            .map(|(_, l)| l.as_str())
    }
}

impl Default for LibraryProfile {
    fn default() -> Self {
        pytorch()
    }
}
