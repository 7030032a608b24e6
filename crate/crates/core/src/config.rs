//! Campaign configuration: an INI file with sections, plus environment
//! (`FUTUR__SECTION__KEY`) and command-line (`section.key=value`) overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ini::Ini;
use thiserror::Error;

use crate::backend::{BackendDescriptor, BackendLocator, DEFAULT_TEMPERATURE};
use crate::dataset::{DatasetMix, DatasetPolicy, FineTuneConfig};
use crate::harness::{RunnerSpec, DEFAULT_TIMEOUT};
use crate::library::{LibraryId, LibraryProfile, Registry};
use crate::metrics::RoundingMode;
use crate::oracle::{OracleConfig, Thresholds, DEFAULT_THRESHOLD};
use crate::pairs::{DEFAULT_MUTATIONS, DEFAULT_PAIRS_PER_API};

pub const ENV_PREFIX: &str = "FUTUR__";
pub const DEFAULT_TOKEN_BUDGET: usize = 2048;
pub const DEFAULT_LABEL: &str = "Nans and Infs";
pub const DEFAULT_GENERATE_TOTAL: usize = 1000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Load { path: PathBuf, reason: String },
    #[error("override {0:?} is not of the form section.key=value")]
    BadOverride(String),
    #[error("[{section}] {key}: {reason}")]
    Invalid { section: String, key: String, reason: String },
    #[error("[{section}] {key} is required")]
    Missing { section: String, key: String },
    #[error("{0}: path does not exist")]
    Unresolvable(PathBuf),
}

/// Raw sectioned key/value pairs, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    sections: Vec<(String, Vec<(String, String)>)>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl Config {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Load {
            path: base_dir.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut cfg = Config {
            sections: Vec::new(),
            base_dir: base_dir.to_path_buf(),
        };
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if props.iter().next().is_some() {
                    return Err(ConfigError::Load {
                        path: base_dir.to_path_buf(),
                        reason: "keys must appear under a [section]".into(),
                    });
                }
                continue;
            };
            for (k, v) in props.iter() {
                cfg.set(section, k, v);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Config::parse(&text, &base).map_err(|e| match e {
            ConfigError::Load { reason, .. } => ConfigError::Load {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut ini = Ini::new();
        for (s, props) in &self.sections {
            let mut sec = ini.with_section(Some(s.as_str()));
            for (k, v) in props {
                sec.set(k.as_str(), v.as_str());
            }
        }
        let mut buf = Vec::new();
        ini.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ini output is utf-8")
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .and_then(|(_, p)| p.iter().find(|(k, _)| k == key))
            .map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let idx = match self.sections.iter().position(|(s, _)| s == section) {
            Some(i) => i,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        let props = &mut self.sections[idx].1;
        match props.iter_mut().find(|(k, _)| k == key) {
            Some(p) => p.1 = value.to_string(),
            None => props.push((key.to_string(), value.to_string())),
        }
    }

    /// Keys of `section` in file order.
    pub fn section(&self, section: &str) -> &[(String, String)] {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .map_or(&[], |(_, p)| p.as_slice())
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(s, _)| s.as_str())
    }

    /// `section.key=value`; the section is everything before the last dot
    /// of the left-hand side.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadOverride(spec.to_string());
        let (lhs, value) = spec.split_once('=').ok_or_else(bad)?;
        let (section, key) = lhs.trim().rsplit_once('.').ok_or_else(bad)?;
        if section.is_empty() || key.is_empty() {
            return Err(bad());
        }
        self.set(section, key, value.trim());
        Ok(())
    }

    /// Apply `FUTUR__<SECTION>__<KEY>` variables. Matching is
    /// case-insensitive and `.` in section names is spelled `_`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            let Some((sec, key)) = rest.split_once("__") else { continue };
            let (sec, key) = (sec.to_ascii_lowercase(), key.to_ascii_lowercase());
            let existing = self
                .sections
                .iter()
                .map(|(s, _)| s.clone())
                .find(|s| s.replace('.', "_").eq_ignore_ascii_case(&sec))
                .unwrap_or(sec);
            self.set(&existing, &key, &value);
        }
    }

    pub fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.get(section, key).map(|v| self.base_dir.join(v.trim()))
    }

    fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|e: T::Err| ConfigError::Invalid {
                section: section.into(),
                key: key.into(),
                reason: e.to_string(),
            }),
        }
    }

    fn required(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(section, key).ok_or_else(|| ConfigError::Missing {
            section: section.into(),
            key: key.into(),
        })
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn existing(p: PathBuf) -> Result<PathBuf, ConfigError> {
    if p.exists() {
        Ok(p)
    } else {
        Err(ConfigError::Unresolvable(p))
    }
}

/// Where the bug corpus comes from for one source library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusOrigin {
    Dump(PathBuf),
    Live { repo: String },
}

/// Fully resolved campaign settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub output: PathBuf,
    pub registry: Registry,
    pub sources: Vec<LibraryId>,
    pub target: LibraryId,
    pub corpus: BTreeMap<LibraryId, CorpusOrigin>,
    pub labels: Vec<String>,
    pub token_env: Option<String>,
    pub since: Option<String>,
    pub docs: PathBuf,
    pub template: Option<PathBuf>,
    pub token_budget: usize,
    pub per_api_limit: usize,
    pub temperature: f64,
    pub mutations: usize,
    pub mutation_seed: u64,
    pub dataset: DatasetPolicy,
    pub finetune: FineTuneConfig,
    pub pair_backend: BackendDescriptor,
    pub seed_backend: BackendDescriptor,
    pub generate_total: usize,
    pub generate_paired: bool,
    pub target_runner: RunnerSpec,
    pub source_runner: Option<RunnerSpec>,
    pub timeout: Duration,
    pub parallelism: usize,
    pub gpu_available: bool,
    pub oracle: OracleConfig,
    pub overrides: Option<PathBuf>,
    pub array_ctor: String,
    pub source_map: BTreeMap<String, String>,
    pub decimals: u32,
    pub rounding: RoundingMode,
}

fn backend(cfg: &Config, section: &str) -> Result<BackendDescriptor, ConfigError> {
    let kind = cfg.required(section, "kind")?;
    let locator = match kind.trim() {
        "mock" => BackendLocator::MockRulebook {
            path: existing(cfg.path(section, "rulebook").ok_or_else(|| ConfigError::Missing {
                section: section.into(),
                key: "rulebook".into(),
            })?)?,
        },
        "http" => BackendLocator::HttpEndpoint {
            url: cfg.required(section, "url")?.trim().to_string(),
        },
        other => {
            return Err(ConfigError::Invalid {
                section: section.into(),
                key: "kind".into(),
                reason: format!("unknown backend kind {other:?} (mock or http)"),
            })
        }
    };
    Ok(BackendDescriptor {
        locator,
        model_id: cfg.get(section, "model").unwrap_or("").trim().to_string(),
        auth_env: cfg.get(section, "auth_env").map(|s| s.trim().to_string()).filter(|s| !s.is_empty()),
        rate_limit_per_minute: match cfg.get(section, "rate_limit") {
            Some(_) => Some(cfg.parsed(section, "rate_limit", 0usize)?),
            None => None,
        },
    })
}

/// Runner command line; arguments naming files next to the config become
/// absolute so the runner works from any directory.
fn runner(cfg: &Config, line: &str) -> RunnerSpec {
    let mut spec = RunnerSpec::parse(line);
    for tok in &mut spec.command {
        let p = cfg.base_dir.join(&*tok);
        if !Path::new(tok.as_str()).is_absolute() && tok.contains(['/', '.']) && p.is_file() {
            *tok = p.canonicalize().unwrap_or(p).display().to_string();
        }
    }
    spec
}

/// `[library.<id>]` with `display`, `modules` and `aliases`
/// (`alias=import line` entries separated by `;`).
fn custom_library(cfg: &Config, section: &str, id: &str) -> Result<LibraryProfile, ConfigError> {
    let display = cfg.get(section, "display").unwrap_or(id).trim().to_string();
    let modules = list(cfg.required(section, "modules")?);
    let mut aliases = Vec::new();
    for entry in cfg.get(section, "aliases").unwrap_or("").split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (alias, line) = entry.split_once('=').ok_or_else(|| ConfigError::Invalid {
            section: section.into(),
            key: "aliases".into(),
            reason: format!("{entry:?} is not alias=import line"),
        })?;
        aliases.push((alias.trim().to_string(), line.trim().to_string()));
    }
    let m: Vec<&str> = modules.iter().map(String::as_str).collect();
    let a: Vec<(&str, &str)> = aliases.iter().map(|(x, y)| (x.as_str(), y.as_str())).collect();
    Ok(LibraryProfile::new(id, &display, &m, &a))
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        let mut registry = Registry::default();
        for s in cfg.section_names() {
            if let Some(id) = s.strip_prefix("library.") {
                registry.insert(custom_library(cfg, s, id)?);
            }
        }
        let known = |id: &str, key: &str| -> Result<LibraryId, ConfigError> {
            let lid = LibraryId::new(id);
            registry.get(&lid).map(|_| lid.clone()).ok_or_else(|| ConfigError::Invalid {
                section: "campaign".into(),
                key: key.into(),
                reason: format!("unknown library {id:?}; declare it in a [library.{id}] section"),
            })
        };
        let sources = list(cfg.required("campaign", "source_libraries")?)
            .iter()
            .map(|s| known(s, "source_libraries"))
            .collect::<Result<Vec<_>, _>>()?;
        if sources.is_empty() {
            return Err(ConfigError::Missing {
                section: "campaign".into(),
                key: "source_libraries".into(),
            });
        }
        let target = known(cfg.required("campaign", "target_library")?.trim(), "target_library")?;

        let mut corpus = BTreeMap::new();
        for s in &sources {
            if let Some(p) = cfg.path("corpus", &format!("dump.{s}")) {
                corpus.insert(s.clone(), CorpusOrigin::Dump(existing(p)?));
            } else if let Some(repo) = cfg.get("corpus", &format!("repo.{s}")) {
                corpus.insert(s.clone(), CorpusOrigin::Live { repo: repo.trim().into() });
            }
        }

        let mut thresholds = Thresholds::uniform(cfg.parsed("oracle", "threshold", DEFAULT_THRESHOLD)?);
        for (k, _) in cfg.section("oracle") {
            if let Some(dtype) = k.strip_prefix("threshold.") {
                thresholds.per_dtype.insert(dtype.to_string(), cfg.parsed("oracle", k, DEFAULT_THRESHOLD)?);
            }
        }
        if thresholds.default <= 0.0 || thresholds.per_dtype.values().any(|t| *t <= 0.0) {
            return Err(ConfigError::Invalid {
                section: "oracle".into(),
                key: "threshold".into(),
                reason: "thresholds must be positive".into(),
            });
        }

        let ft_default = FineTuneConfig::default();
        let mix = cfg.get("finetune", "mix").unwrap_or("both");
        let finetune = FineTuneConfig {
            base_model_id: cfg.get("finetune", "base_model").unwrap_or(&ft_default.base_model_id).trim().to_string(),
            quantization_bits: cfg.parsed("finetune", "bits", ft_default.quantization_bits)?,
            lora_rank: cfg.parsed("finetune", "lora_rank", ft_default.lora_rank)?,
            learning_rate: cfg.parsed("finetune", "learning_rate", ft_default.learning_rate)?,
            max_steps: cfg.parsed("finetune", "max_steps", ft_default.max_steps)?,
            validation_fraction: cfg.parsed("finetune", "validation_fraction", ft_default.validation_fraction)?,
            validation_interval_steps: cfg.parsed("finetune", "validation_interval", ft_default.validation_interval_steps)?,
            dataset_paths: Vec::new(),
            dataset_mix: DatasetMix::parse(mix).ok_or_else(|| ConfigError::Invalid {
                section: "finetune".into(),
                key: "mix".into(),
                reason: format!("{mix:?} is not generation, conversion or both"),
            })?,
            shuffle_seed: cfg.parsed("dataset", "shuffle_seed", 0)?,
        };

        let timeout_ms: u64 = cfg.parsed("campaign", "timeout_ms", DEFAULT_TIMEOUT.as_millis() as u64)?;
        let rounding = match cfg.get("report", "rounding").map(str::trim) {
            None | Some("half_up") => RoundingMode::HalfUp,
            Some("truncate") => RoundingMode::Truncate,
            Some(other) => {
                return Err(ConfigError::Invalid {
                    section: "report".into(),
                    key: "rounding".into(),
                    reason: format!("{other:?} is not half_up or truncate"),
                })
            }
        };
        let mut source_map = BTreeMap::new();
        for entry in list(cfg.get("backtest", "map").unwrap_or("")) {
            let (t, s) = entry.split_once(':').ok_or_else(|| ConfigError::Invalid {
                section: "backtest".into(),
                key: "map".into(),
                reason: format!("{entry:?} is not target_api:source_api"),
            })?;
            source_map.insert(t.trim().to_string(), s.trim().to_string());
        }

        Ok(Settings {
            output: cfg.path("campaign", "output").unwrap_or_else(|| cfg.base_dir.join("out")),
            sources,
            target,
            corpus,
            labels: cfg.get("corpus", "labels").map(list).unwrap_or_else(|| vec![DEFAULT_LABEL.into()]),
            token_env: cfg.get("corpus", "token_env").map(|s| s.trim().to_string()),
            since: cfg.get("corpus", "since").map(|s| s.trim().to_string()),
            docs: existing(cfg.path("catalog", "docs").ok_or_else(|| ConfigError::Missing {
                section: "catalog".into(),
                key: "docs".into(),
            })?)?,
            template: cfg.path("prompts", "template").map(existing).transpose()?,
            token_budget: cfg.parsed("prompts", "token_budget", DEFAULT_TOKEN_BUDGET)?,
            per_api_limit: cfg.parsed("pairs", "per_api_limit", DEFAULT_PAIRS_PER_API)?,
            temperature: cfg.parsed("pairs", "temperature", DEFAULT_TEMPERATURE)?,
            mutations: cfg.parsed("mutate", "mutations", DEFAULT_MUTATIONS)?,
            mutation_seed: cfg.parsed("mutate", "seed", 0)?,
            dataset: DatasetPolicy {
                include_originals: cfg.parsed("dataset", "include_originals", true)?,
                shuffle_seed: cfg.parsed("dataset", "shuffle_seed", 0)?,
            },
            finetune,
            pair_backend: backend(cfg, "backend.pairs")?,
            seed_backend: backend(cfg, "backend.seeds")?,
            generate_total: cfg.parsed("generate", "total", DEFAULT_GENERATE_TOTAL)?,
            generate_paired: cfg.parsed("generate", "paired", true)?,
            target_runner: runner(cfg, cfg.required("run", "target_runner")?),
            source_runner: cfg.get("run", "source_runner").map(|r| runner(cfg, r)),
            timeout: Duration::from_millis(timeout_ms),
            parallelism: cfg.parsed("campaign", "parallelism", 4usize)?.max(1),
            gpu_available: cfg.parsed("campaign", "gpu_available", true)?,
            oracle: OracleConfig {
                thresholds,
                strict_exception_types: cfg.parsed("oracle", "strict_exception_types", false)?,
            },
            overrides: cfg.path("oracle", "overrides"),
            array_ctor: cfg.get("backtest", "array_ctor").unwrap_or("torch.tensor").trim().to_string(),
            source_map,
            decimals: cfg.parsed("report", "decimals", 1)?,
            rounding,
            registry,
        })
    }

    pub fn profile(&self, id: &LibraryId) -> &LibraryProfile {
        self.registry.get(id).expect("libraries are validated at load")
    }

    pub fn target_profile(&self) -> &LibraryProfile {
        self.profile(&self.target)
    }

    /// The source library used for pairs, paired seeds and backtesting.
    pub fn primary_source(&self) -> &LibraryProfile {
        self.profile(&self.sources[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "[campaign]\nsource_libraries = pytorch\ntarget_library = mlx\n\n[oracle]\nthreshold = 0.05\nthreshold.float16 = 0.1\n";

    #[test]
    fn round_trip_is_identity() {
        let a = Config::parse(TEXT, Path::new("/x")).unwrap();
        let b = Config::parse(&a.to_text(), Path::new("/x")).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.get("oracle", "threshold.float16"), Some("0.1"));
    }

    #[test]
    fn overrides() {
        let mut c = Config::parse(TEXT, Path::new("/x")).unwrap();
        c.apply_override("oracle.threshold=0.5").unwrap();
        c.apply_override("backend.pairs.kind = mock").unwrap();
        assert_eq!(c.get("oracle", "threshold"), Some("0.5"));
        assert_eq!(c.get("backend.pairs", "kind"), Some("mock"));
        assert!(c.apply_override("nodot=1").is_err());
        assert!(c.apply_override("a.b").is_err());

        c.apply_env([
            ("FUTUR__ORACLE__THRESHOLD".to_string(), "0.7".to_string()),
            ("FUTUR__BACKEND_PAIRS__MODEL".to_string(), "m".to_string()),
            ("OTHER__X__Y".to_string(), "z".to_string()),
        ]);
        assert_eq!(c.get("oracle", "threshold"), Some("0.7"));
        assert_eq!(c.get("backend.pairs", "model"), Some("m"));
    }

    #[test]
    fn settings_need_known_libraries_and_backends() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("docs")).unwrap();
        std::fs::write(dir.path().join("rules.txt"), "").unwrap();
        let text = "[campaign]\nsource_libraries = pytorch\ntarget_library = toy\n\
[library.toy]\ndisplay = Toy\nmodules = toylib\naliases = tl=import toylib as tl\n\
[catalog]\ndocs = docs\n[backend.pairs]\nkind = mock\nrulebook = rules.txt\n\
[backend.seeds]\nkind = mock\nrulebook = rules.txt\n[run]\ntarget_runner = python3 run.py\n";
        let cfg = Config::parse(text, dir.path()).unwrap();
        let s = Settings::from_config(&cfg).unwrap();
        assert_eq!(s.target_profile().display_name, "Toy");
        assert_eq!(s.target_profile().expand("tl.eye"), "toylib.eye");
        assert_eq!((s.per_api_limit, s.mutations), (5, 100));
        assert_eq!(s.oracle.thresholds.default, 1e-2);
        assert_eq!(s.timeout, Duration::from_secs(30));
        assert_eq!(s.finetune, FineTuneConfig::default());

        let mut bad = cfg.clone();
        bad.set("campaign", "target_library", "nosuch");
        assert!(matches!(Settings::from_config(&bad), Err(ConfigError::Invalid { .. })));
        let mut bad = cfg.clone();
        bad.set("backend.seeds", "kind", "carrier-pigeon");
        assert!(Settings::from_config(&bad).is_err());
    }
}
