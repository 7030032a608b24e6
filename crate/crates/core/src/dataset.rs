//! Fine-tuning datasets built from (mutated) code pairs, and the job
//! description handed to the external LoRA trainer.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::conversion_problem;
use crate::pairs::{CodePair, MutatedPair};
use crate::prompt::Prompt;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid fine-tuning config: {0}")]
    InvalidConfig(String),
    #[error("dataset file {0} does not exist")]
    DanglingPath(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionRecord {
    pub problem: String,
    pub seed: String,
    pub solution: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetPolicy {
    /// Also emit one record per unmutated parent pair.
    pub include_originals: bool,
    pub shuffle_seed: u64,
}

impl Default for DatasetPolicy {
    fn default() -> Self {
        DatasetPolicy {
            include_originals: true,
            shuffle_seed: 0,
        }
    }
}

struct Item<'a> {
    parent: &'a str,
    source: &'a str,
    target: &'a str,
}

fn items<'a>(pairs: &'a [CodePair], variants: &'a [MutatedPair], policy: &DatasetPolicy) -> Vec<Item<'a>> {
    let mut out = Vec::with_capacity(variants.len() + pairs.len());
    if policy.include_originals {
        out.extend(pairs.iter().map(|p| Item {
            parent: &p.id,
            source: &p.source_code,
            target: &p.target_code,
        }));
    }
    out.extend(variants.iter().map(|v| Item {
        parent: &v.parent,
        source: &v.source_code,
        target: &v.target_code,
    }));
    out
}

/// Expected record count for `n` pairs with `m` variants each.
pub fn expected_records(n: usize, m: usize, policy: &DatasetPolicy) -> usize {
    n * (m + usize::from(policy.include_originals))
}

fn shuffled<T>(mut v: Vec<T>, seed: u64) -> Vec<T> {
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

/// `{prompt, response = T}` per pair item. Items whose parent pair or prompt
/// is unknown are skipped with a warning; the skip count is returned.
pub fn build_generation_dataset(
    pairs: &[CodePair],
    variants: &[MutatedPair],
    prompts: &[Prompt],
    policy: &DatasetPolicy,
) -> (Vec<GenerationRecord>, usize) {
    let prompt_of: HashMap<&str, &str> = prompts.iter().map(|p| (p.id.as_str(), p.rendered.as_str())).collect();
    let pair_prompt: HashMap<&str, &str> = pairs.iter().map(|p| (p.id.as_str(), p.prompt_ref.as_str())).collect();
    let mut skipped = 0;
    let mut records = Vec::new();
    for it in items(pairs, variants, policy) {
        match pair_prompt.get(it.parent).and_then(|r| prompt_of.get(r)) {
            Some(prompt) => records.push(GenerationRecord {
                prompt: prompt.to_string(),
                response: it.target.to_string(),
            }),
            None => {
                log::warn!("{}: no prompt recorded; generation record skipped", it.parent);
                skipped += 1;
            }
        }
    }
    (shuffled(records, policy.shuffle_seed), skipped)
}

/// `{problem, seed = S, solution = T}` per pair item.
pub fn build_conversion_dataset(
    pairs: &[CodePair],
    variants: &[MutatedPair],
    target_display: &str,
    policy: &DatasetPolicy,
) -> Vec<ConversionRecord> {
    let problem = conversion_problem(target_display);
    let records = items(pairs, variants, policy)
        .into_iter()
        .map(|it| ConversionRecord {
            problem: problem.clone(),
            seed: it.source.to_string(),
            solution: it.target.to_string(),
        })
        .collect();
    shuffled(records, policy.shuffle_seed)
}

pub fn write_dataset<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DatasetError> {
    crate::util::write_ndrec(path, records).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_dataset<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    crate::util::read_ndrec(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetMix {
    Generation,
    Conversion,
    Both,
}

impl DatasetMix {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetMix::Generation => "generation",
            DatasetMix::Conversion => "conversion",
            DatasetMix::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "generation" => Some(DatasetMix::Generation),
            "conversion" => Some(DatasetMix::Conversion),
            "both" => Some(DatasetMix::Both),
            _ => None,
        }
    }
}

/// Job description for an external LoRA trainer (`W' = W + AB`, rank `r`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneConfig {
    pub base_model_id: String,
    pub quantization_bits: u32,
    pub lora_rank: u32,
    pub learning_rate: f64,
    pub max_steps: u32,
    pub validation_fraction: f64,
    pub validation_interval_steps: u32,
    pub dataset_paths: Vec<PathBuf>,
    pub dataset_mix: DatasetMix,
    pub shuffle_seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            base_model_id: "codellama/CodeLlama-13b-hf".into(),
            quantization_bits: 4,
            lora_rank: 8,
            learning_rate: 3e-4,
            max_steps: 400,
            validation_fraction: 0.1,
            validation_interval_steps: 20,
            dataset_paths: Vec::new(),
            dataset_mix: DatasetMix::Both,
            shuffle_seed: 0,
        }
    }
}

fn count_lines(path: &Path) -> Result<usize, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).count())
}

impl FineTuneConfig {
    /// Check ranges and that every dataset exists and is large enough to
    /// hold out at least one validation record.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidConfig(m));
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!("validation_fraction {} outside (0, 1)", self.validation_fraction));
        }
        if self.lora_rank == 0 || self.max_steps == 0 || self.validation_interval_steps == 0 {
            return bad("lora_rank, max_steps and validation_interval_steps must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.dataset_paths.is_empty() {
            return bad("no dataset paths".into());
        }
        let mut size = 0;
        for p in &self.dataset_paths {
            if !p.is_file() {
                return Err(DatasetError::DanglingPath(p.clone()));
            }
            size += count_lines(p)?;
        }
        if self.validation_fraction * (size as f64) < 1.0 {
            return bad(format!(
                "validation_fraction {} of {size} records holds out no record",
                self.validation_fraction
            ));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "base_model_id={}", self.base_model_id);
        let _ = writeln!(s, "quantization_bits={}", self.quantization_bits);
        let _ = writeln!(s, "lora_rank={}", self.lora_rank);
        let _ = writeln!(s, "learning_rate={}", self.learning_rate);
        let _ = writeln!(s, "max_steps={}", self.max_steps);
        let _ = writeln!(s, "validation_fraction={}", self.validation_fraction);
        let _ = writeln!(s, "validation_interval_steps={}", self.validation_interval_steps);
        let paths: Vec<String> = self.dataset_paths.iter().map(|p| p.display().to_string()).collect();
        let _ = writeln!(s, "dataset_paths={}", paths.join(","));
        let _ = writeln!(s, "dataset_mix={}", self.dataset_mix.as_str());
        let _ = writeln!(s, "shuffle_seed={}", self.shuffle_seed);
        s
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut c = FineTuneConfig::default();
        let bad = |k: &str, v: &str| DatasetError::InvalidConfig(format!("{k}={v}"));
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DatasetError::InvalidConfig(format!("not key=value: {line}")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "base_model_id" => c.base_model_id = v.to_string(),
                "quantization_bits" => c.quantization_bits = v.parse().map_err(|_| bad(k, v))?,
                "lora_rank" => c.lora_rank = v.parse().map_err(|_| bad(k, v))?,
                "learning_rate" => c.learning_rate = v.parse().map_err(|_| bad(k, v))?,
                "max_steps" => c.max_steps = v.parse().map_err(|_| bad(k, v))?,
                "validation_fraction" => c.validation_fraction = v.parse().map_err(|_| bad(k, v))?,
                "validation_interval_steps" => c.validation_interval_steps = v.parse().map_err(|_| bad(k, v))?,
                "dataset_paths" => {
                    c.dataset_paths = v.split(',').filter(|s| !s.is_empty()).map(PathBuf::from).collect()
                }
                "dataset_mix" => c.dataset_mix = DatasetMix::parse(v).ok_or_else(|| bad(k, v))?,
                "shuffle_seed" => c.shuffle_seed = v.parse().map_err(|_| bad(k, v))?,
                _ => return Err(DatasetError::InvalidConfig(format!("unknown key {k}"))),
            }
        }
        Ok(c)
    }
}

/// Validate and write `finetune.cfg`.
pub fn emit_finetune_config(path: &Path, cfg: &FineTuneConfig) -> Result<(), DatasetError> {
    cfg.validate()?;
    crate::util::write_atomic(path, cfg.to_text().as_bytes()).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}
