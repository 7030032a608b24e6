//! Campaign metrics (success rate, validity rate, API coverage) and the
//! report tables.

mod report;

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::harness::{CrashKind, ExecStatus, ExecutionOutcome};
use crate::oracle::{normalized_distance, Distance, Symptom, Verdict};
use crate::python::terminal_name;
use crate::seeds::SeedCode;

pub use report::{cause_table, emit_report, status_table, symptom_table, ReportFiles, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    #[default]
    HalfUp,
    Truncate,
}

/// An exact `num/den` rate. Rounding happens only when rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Self {
        Rate { num, den }
    }

    /// `None` for an empty denominator.
    pub fn ratio(self) -> Option<Ratio<u64>> {
        (self.den > 0).then(|| Ratio::new(self.num, self.den))
    }

    /// Percentage with `decimals` places, e.g. `10.2`; `-` when undefined.
    pub fn percent(self, decimals: u32, mode: RoundingMode) -> String {
        if self.den == 0 {
            return "-".into();
        }
        let scale = 10u128.pow(decimals);
        let (n, d) = (u128::from(self.num) * 100 * scale, u128::from(self.den));
        let q = match mode {
            RoundingMode::HalfUp => (2 * n + d) / (2 * d),
            RoundingMode::Truncate => n / d,
        };
        if decimals == 0 {
            return q.to_string();
        }
        format!("{}.{:0width$}", q / scale, q % scale, width = decimals as usize)
    }

    /// `x.y% (a/b)`, or `- (a/b)` when undefined.
    pub fn render(self, decimals: u32, mode: RoundingMode) -> String {
        match self.den {
            0 => format!("- ({}/{})", self.num, self.den),
            _ => format!("{}% ({}/{})", self.percent(decimals, mode), self.num, self.den),
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(1, RoundingMode::HalfUp))
    }
}

/// `|(suc ∪ val) ∩ tar| / |tar|`.
pub fn api_coverage(suc: &BTreeSet<String>, val: &BTreeSet<String>, tar: &BTreeSet<String>) -> Rate {
    let covered = tar.iter().filter(|a| suc.contains(*a) || val.contains(*a)).count();
    Rate::new(covered as u64, tar.len() as u64)
}

fn observed(outcome: &ExecutionOutcome, api: &str) -> bool {
    outcome
        .api_calls_observed
        .iter()
        .any(|o| o == api || (!o.contains('.') && o == terminal_name(api)))
}

/// Ran cleanly and reached at least one of the seed's target APIs. The
/// caller passes only seeds that survived deduplication.
pub fn is_valid(seed: &SeedCode, outcome: &ExecutionOutcome) -> bool {
    outcome.status == ExecStatus::Ok && seed.target_apis.iter().any(|a| observed(outcome, a))
}

/// The behavior a historical bug is known for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorSignature {
    /// Native crash; `None` matches any crash kind.
    Crash(Option<CrashKind>),
    Error { type_name: String, words: Vec<String> },
    /// Output contains NaN or Inf.
    NonFinite,
    /// Results differ between CPU and GPU.
    DeviceDivergence,
}

fn error_line() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b([A-Z][A-Za-z]*(?:Error|Exception))\b:?\s*([^\n]*)").expect("valid regex"))
}

/// Lower-cased message words with numbers, paths and addresses removed;
/// the first `n` are kept.
pub fn normalize_message(msg: &str, n: usize) -> Vec<String> {
    msg.split_whitespace()
        .filter(|w| !w.contains('/') && !w.starts_with("0x"))
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphabetic() || *c == '_')
                .collect::<String>()
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .take(n)
        .collect()
}

const MESSAGE_WORDS: usize = 3;

impl BehaviorSignature {
    /// Best-effort signature from an issue title and its reproduction text.
    pub fn from_issue(title: &str, text: &str) -> Option<Self> {
        let all = format!("{title}\n{text}");
        let lower = all.to_lowercase();
        if lower.contains("segmentation fault") || lower.contains("segfault") {
            return Some(BehaviorSignature::Crash(Some(CrashKind::Segfault)));
        }
        if lower.contains("floating point exception") {
            return Some(BehaviorSignature::Crash(Some(CrashKind::Fpe)));
        }
        if lower.contains("core dumped") || lower.contains("abort") || lower.contains("crash") {
            return Some(BehaviorSignature::Crash(None));
        }
        if let Some(c) = error_line().captures(&all) {
            return Some(BehaviorSignature::Error {
                type_name: c[1].to_string(),
                words: normalize_message(&c[2], MESSAGE_WORDS),
            });
        }
        if ["cpu", "gpu"].iter().all(|d| lower.contains(d)) || lower.contains("cuda") {
            return Some(BehaviorSignature::DeviceDivergence);
        }
        if lower.contains("nan") || lower.contains("inf") {
            return Some(BehaviorSignature::NonFinite);
        }
        None
    }

    fn matches(&self, outcomes: &[&ExecutionOutcome], backends: Option<&Verdict>) -> bool {
        match self {
            BehaviorSignature::Crash(kind) => outcomes.iter().any(|o| match &o.status {
                ExecStatus::Crash { kind: k } => kind.is_none_or(|want| want == *k),
                _ => false,
            }),
            BehaviorSignature::Error { type_name, words } => outcomes.iter().any(|o| match &o.status {
                ExecStatus::Exception { type_name: t, message, .. } => {
                    t == type_name && normalize_message(message, words.len()) == *words
                }
                _ => false,
            }),
            BehaviorSignature::NonFinite => outcomes
                .iter()
                .any(|o| o.status == ExecStatus::Ok && o.outputs.iter().flat_map(|c| &c.values).any(|v| !v.is_finite())),
            BehaviorSignature::DeviceDivergence => {
                backends.is_some_and(|v| v.is_bug() && v.symptom == Some(Symptom::CpuGpu))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reproduction {
    Success,
    Failure,
    /// No signature was available; counted as a failure.
    NeedsReview,
}

/// Whether a converted historical bug shows the original behavior on the
/// target library.
pub fn is_successful_reproduction(
    signature: Option<&BehaviorSignature>,
    target_outcomes: &[&ExecutionOutcome],
    backends: Option<&Verdict>,
) -> Reproduction {
    match signature {
        None => Reproduction::NeedsReview,
        Some(s) if s.matches(target_outcomes, backends) => Reproduction::Success,
        Some(_) => Reproduction::Failure,
    }
}

/// Output-value match against a reference capture set, within `t`.
pub fn outputs_match(reference: &ExecutionOutcome, outcome: &ExecutionOutcome, t: f64) -> bool {
    outcome.status == ExecStatus::Ok
        && reference.outputs.len() == outcome.outputs.len()
        && reference
            .outputs
            .iter()
            .zip(&outcome.outputs)
            .all(|(a, b)| matches!(normalized_distance(a, b), Distance::Value(d) if d <= t))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetrics {
    pub library: String,
    pub n_his: u64,
    pub n_suc: u64,
    pub n_all: u64,
    pub n_val: u64,
    pub suc_api: BTreeSet<String>,
    pub val_api: BTreeSet<String>,
    pub tar_api: BTreeSet<String>,
}

impl CampaignMetrics {
    pub fn success_rate(&self) -> Rate {
        Rate::new(self.n_suc, self.n_his)
    }

    pub fn validity_rate(&self) -> Rate {
        Rate::new(self.n_val, self.n_all)
    }

    pub fn api_coverage(&self) -> Rate {
        api_coverage(&self.suc_api, &self.val_api, &self.tar_api)
    }

    /// Record one converted historical bug.
    pub fn add_conversion(&mut self, seed: Option<&SeedCode>, result: Reproduction) {
        self.n_his += 1;
        if let (Some(s), Reproduction::Success) = (seed, result) {
            self.n_suc += 1;
            self.suc_api.extend(s.target_apis.iter().cloned());
        }
    }

    /// Record one generated seed (after deduplication) and its CPU outcome.
    pub fn add_generated(&mut self, seed: &SeedCode, outcome: Option<&ExecutionOutcome>) {
        if outcome.is_some_and(|o| is_valid(seed, o)) {
            self.n_val += 1;
            self.val_api.extend(seed.target_apis.iter().cloned());
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.n_suc > self.n_his {
            return Err(format!("N_Suc {} exceeds N_His {}", self.n_suc, self.n_his));
        }
        if self.n_val > self.n_all {
            return Err(format!("N_Val {} exceeds N_All {}", self.n_val, self.n_all));
        }
        Ok(())
    }
}
