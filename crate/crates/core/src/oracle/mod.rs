//! Differential oracle: CPU/GPU and source/target comparison, bug records,
//! cause classification and bug-prone input patterns.

mod bugs;
mod distance;
mod pattern;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{CrashKind, Device, ExecStatus, ExecutionOutcome, NumericCapture, Role};

pub use bugs::{
    build_bug_records, classify_cause, dedup_bugs, read_bug_ledger, read_overrides, write_bug_ledger, BugRecord,
    BugStatus, Cause, CauseEvidence, Override,
};
pub use distance::{euclidean_distance, finite_norm, normalized_distance, Distance, Mismatch};
pub use pattern::{
    backtest_sources, extract_bug_pattern, instantiate, plan_probes, read_patterns, write_patterns, AbstractArg,
    BacktestReport, BacktestSpec, InputPattern, Probe, SourceApiMap, ValueClass,
};

pub const DEFAULT_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("status cannot move from {from} to {to}")]
    InvalidTransition { from: BugStatus, to: BugStatus },
    #[error("no concrete arguments recoverable for {api}")]
    Unextractable { api: String },
    #[error("pattern for {api} has only concrete values")]
    NotAPattern { api: String },
    #[error("{path}: {reason}")]
    Ledger { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symptom {
    Crash,
    CpuGpu,
    SrcTar,
}

impl Symptom {
    pub fn as_str(self) -> &'static str {
        match self {
            Symptom::Crash => "crash",
            Symptom::CpuGpu => "cpu_gpu",
            Symptom::SrcTar => "src_tar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "crash" => Some(Symptom::Crash),
            "cpu_gpu" => Some(Symptom::CpuGpu),
            "src_tar" => Some(Symptom::SrcTar),
            _ => None,
        }
    }
}

impl fmt::Display for Symptom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Consistent,
    PotentialBug,
    /// A side could not be judged (device unavailable, protocol error,
    /// failed source run).
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub seed_id: String,
    pub kind: VerdictKind,
    pub symptom: Option<Symptom>,
    /// Largest per-output normalized distance; absent for crashes and
    /// structural mismatches.
    pub distance: Option<f64>,
    pub mismatch: Option<Mismatch>,
    pub crash_kind: Option<CrashKind>,
    pub threshold: f64,
    pub details: String,
}

impl Verdict {
    fn new(seed_id: &str, kind: VerdictKind, threshold: f64, details: String) -> Self {
        Verdict {
            seed_id: seed_id.to_string(),
            kind,
            symptom: None,
            distance: None,
            mismatch: None,
            crash_kind: None,
            threshold,
            details,
        }
    }

    pub fn is_bug(&self) -> bool {
        self.kind == VerdictKind::PotentialBug
    }

    /// Crash kind or mismatch class; part of the deduplication key.
    pub fn signature(&self) -> String {
        if let Some(k) = self.crash_kind {
            return k.to_string();
        }
        match self.mismatch {
            Some(m) => m.as_str().to_string(),
            None => "distance".to_string(),
        }
    }
}

/// Threshold on the normalized distance, optionally per output dtype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub default: f64,
    pub per_dtype: BTreeMap<String, f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::uniform(DEFAULT_THRESHOLD)
    }
}

impl Thresholds {
    pub fn uniform(t: f64) -> Self {
        Thresholds {
            default: t,
            per_dtype: BTreeMap::new(),
        }
    }

    pub fn for_dtype(&self, dtype: &str) -> f64 {
        self.per_dtype.get(dtype).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleConfig {
    pub thresholds: Thresholds,
    /// Treat two exceptions of different types as a divergence.
    pub strict_exception_types: bool,
}

impl OracleConfig {
    pub fn with_threshold(t: f64) -> Self {
        OracleConfig {
            thresholds: Thresholds::uniform(t),
            ..Default::default()
        }
    }
}

fn crash_verdict(seed_id: &str, a: &ExecutionOutcome, b: &ExecutionOutcome, t: f64) -> Option<Verdict> {
    let side = [a, b].into_iter().find(|o| o.status.is_crash())?;
    let ExecStatus::Crash { kind } = side.status else { unreachable!() };
    let mut v = Verdict::new(
        seed_id,
        VerdictKind::PotentialBug,
        t,
        format!("{} run on {} crashed: {kind}", side.role, side.device),
    );
    v.symptom = Some(Symptom::Crash);
    v.crash_kind = Some(kind);
    Some(v)
}

fn unusable(o: &ExecutionOutcome) -> Option<String> {
    match &o.status {
        ExecStatus::DeviceUnavailable => Some(format!("{} unavailable", o.device)),
        ExecStatus::ProtocolError { reason } => Some(format!("{} {} protocol error: {reason}", o.role, o.device)),
        _ => None,
    }
}

/// Shared machinery: status classes, then per-output distances.
fn compare_pair(a: &ExecutionOutcome, b: &ExecutionOutcome, symptom: Symptom, cfg: &OracleConfig) -> Verdict {
    let seed = a.seed_id.as_str();
    let t = cfg.thresholds.default;
    let bug = |mismatch: Option<Mismatch>, distance: Option<f64>, details: String| {
        let mut v = Verdict::new(seed, VerdictKind::PotentialBug, t, details);
        v.symptom = Some(symptom);
        v.mismatch = mismatch;
        v.distance = distance;
        v
    };
    match (&a.status, &b.status) {
        (ExecStatus::Ok, ExecStatus::Ok) => {}
        (ExecStatus::Exception { type_name: x, .. }, ExecStatus::Exception { type_name: y, .. }) => {
            if cfg.strict_exception_types && x != y {
                return bug(Some(Mismatch::StatusClass), None, format!("exception types differ: {x} vs {y}"));
            }
            return Verdict::new(seed, VerdictKind::Consistent, t, "both sides raised".into());
        }
        (x, y) => {
            return bug(
                Some(Mismatch::StatusClass),
                None,
                format!("{} {}: {} vs {} {}: {}", a.role, a.device, x.label(), b.role, b.device, y.label()),
            )
        }
    }
    if a.outputs.len() != b.outputs.len() {
        return bug(
            Some(Mismatch::OutputCount),
            None,
            format!("{} outputs vs {}", a.outputs.len(), b.outputs.len()),
        );
    }
    let mut worst: Option<f64> = None;
    for (x, y) in a.outputs.iter().zip(&b.outputs) {
        let t_out = cfg.thresholds.for_dtype(&x.dtype);
        match normalized_distance(x, y) {
            Distance::Structural(m) => {
                return bug(Some(m), None, format!("output {}: {}", x.name, m.as_str()));
            }
            Distance::Value(d) => {
                if d > t_out {
                    let mut v = bug(None, Some(d), format!("output {}: distance {d:.6e} > {t_out:e}", x.name));
                    v.threshold = t_out;
                    return v;
                }
                worst = Some(worst.map_or(d, |w: f64| w.max(d)));
            }
        }
    }
    let mut v = Verdict::new(seed, VerdictKind::Consistent, t, "outputs agree".into());
    v.distance = worst;
    v
}

/// Compare one seed's CPU and GPU runs.
pub fn compare_backends(cpu: &ExecutionOutcome, gpu: &ExecutionOutcome, cfg: &OracleConfig) -> Verdict {
    let t = cfg.thresholds.default;
    if let Some(v) = crash_verdict(&cpu.seed_id, cpu, gpu, t) {
        return v;
    }
    if let Some(why) = unusable(cpu).or_else(|| unusable(gpu)) {
        return Verdict::new(&cpu.seed_id, VerdictKind::Inconclusive, t, why);
    }
    compare_pair(cpu, gpu, Symptom::CpuGpu, cfg)
}

/// Compare a target run against its source-library counterpart. The caller
/// must only ask this for targets that were CPU/GPU-consistent.
pub fn compare_libraries(src: &ExecutionOutcome, tar: &ExecutionOutcome, cfg: &OracleConfig) -> Verdict {
    let t = cfg.thresholds.default;
    if let Some(v) = crash_verdict(&tar.seed_id, tar, tar, t) {
        return v;
    }
    if src.status.is_crash() {
        return Verdict::new(&tar.seed_id, VerdictKind::Inconclusive, t, format!("source run failed: {}", src.status.label()));
    }
    if let Some(why) = unusable(src).or_else(|| unusable(tar)) {
        return Verdict::new(&tar.seed_id, VerdictKind::Inconclusive, t, why);
    }
    compare_pair(src, tar, Symptom::SrcTar, cfg)
}

/// Every verdict reached for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedJudgement {
    pub seed_id: String,
    pub backends: Option<Verdict>,
    pub libraries: Option<Verdict>,
}

impl SeedJudgement {
    pub fn bugs(&self) -> impl Iterator<Item = &Verdict> {
        self.backends.iter().chain(&self.libraries).filter(|v| v.is_bug())
    }
}

fn find<'a>(outcomes: &[&'a ExecutionOutcome], role: Role, device: Device) -> Option<&'a ExecutionOutcome> {
    outcomes.iter().copied().find(|o| o.role == role && o.device == device)
}

/// Judge one seed from its outcomes. Source/target comparison runs on CPU
/// and only once the target's own backends agree (or the GPU was absent and
/// the CPU run completed).
pub fn judge_seed(seed_id: &str, outcomes: &[&ExecutionOutcome], cfg: &OracleConfig) -> SeedJudgement {
    let tc = find(outcomes, Role::Target, Device::Cpu);
    let tg = find(outcomes, Role::Target, Device::Gpu);
    let backends = match (tc, tg) {
        (Some(c), Some(g)) => Some(compare_backends(c, g, cfg)),
        (Some(c), None) => crash_verdict(seed_id, c, c, cfg.thresholds.default),
        _ => None,
    };
    let gate_open = match (&backends, tc) {
        (Some(v), Some(c)) => match v.kind {
            VerdictKind::Consistent => true,
            VerdictKind::Inconclusive => c.status == ExecStatus::Ok && tg.map_or(true, |g| g.status == ExecStatus::DeviceUnavailable),
            VerdictKind::PotentialBug => false,
        },
        (None, Some(c)) => !c.status.is_crash(),
        _ => false,
    };
    let libraries = match (gate_open, find(outcomes, Role::Source, Device::Cpu), tc) {
        (true, Some(s), Some(c)) => Some(compare_libraries(s, c, cfg)),
        (true, None, Some(_)) => {
            log::debug!("{seed_id}: no source outcome, library comparison skipped");
            None
        }
        _ => None,
    };
    SeedJudgement {
        seed_id: seed_id.to_string(),
        backends,
        libraries,
    }
}

/// Judge every seed present in `outcomes`, in seed-id order.
pub fn judge_all(outcomes: &[ExecutionOutcome], cfg: &OracleConfig) -> Vec<SeedJudgement> {
    let mut by_seed: BTreeMap<&str, Vec<&ExecutionOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_seed.entry(o.seed_id.as_str()).or_default().push(o);
    }
    by_seed.into_iter().map(|(id, os)| judge_seed(id, &os, cfg)).collect()
}

/// Captures from one run, by output name (helper for reports and tests).
pub fn outputs_by_name(o: &ExecutionOutcome) -> BTreeMap<&str, &NumericCapture> {
    o.outputs.iter().map(|c| (c.name.as_str(), c)).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::harness::ProcessEnd;

    pub fn outcome(seed: &str, role: Role, device: Device, status: ExecStatus, values: &[f64]) -> ExecutionOutcome {
        let outputs = if status == ExecStatus::Ok {
            vec![NumericCapture::new("out", vec![values.len()], "float32", values.to_vec())]
        } else {
            Vec::new()
        };
        ExecutionOutcome {
            seed_id: seed.into(),
            role,
            device,
            status,
            outputs,
            api_calls_observed: Vec::new(),
            duration_ms: 1,
            runner_exit: ProcessEnd::Exit(0),
        }
    }

    fn ok(device: Device, v: &[f64]) -> ExecutionOutcome {
        outcome("s", Role::Target, device, ExecStatus::Ok, v)
    }

    fn exc(device: Device, ty: &str) -> ExecutionOutcome {
        outcome(
            "s",
            Role::Target,
            device,
            ExecStatus::Exception {
                type_name: ty.into(),
                message: String::new(),
                trace: String::new(),
            },
            &[],
        )
    }

    #[test]
    fn backend_rules() {
        let cfg = OracleConfig::default();
        let same = compare_backends(&ok(Device::Cpu, &[1.0, 2.0]), &ok(Device::Gpu, &[1.0, 2.0]), &cfg);
        assert_eq!(same.kind, VerdictKind::Consistent);

        let far = compare_backends(&ok(Device::Cpu, &[1.0, 2.0]), &ok(Device::Gpu, &[1.5, 2.0]), &cfg);
        assert_eq!((far.kind, far.symptom), (VerdictKind::PotentialBug, Some(Symptom::CpuGpu)));

        let nan = compare_backends(&ok(Device::Cpu, &[1.0, 2.0]), &ok(Device::Gpu, &[f64::NAN, 2.0]), &cfg);
        assert_eq!(nan.mismatch, Some(Mismatch::NanMismatch));

        let crash = outcome("s", Role::Target, Device::Gpu, ExecStatus::Crash { kind: CrashKind::Segfault }, &[]);
        let v = compare_backends(&ok(Device::Cpu, &[1.0]), &crash, &cfg);
        assert_eq!((v.symptom, v.crash_kind), (Some(Symptom::Crash), Some(CrashKind::Segfault)));

        let v = compare_backends(&ok(Device::Cpu, &[1.0]), &exc(Device::Gpu, "ValueError"), &cfg);
        assert_eq!(v.mismatch, Some(Mismatch::StatusClass));

        let v = compare_backends(&exc(Device::Cpu, "ValueError"), &exc(Device::Gpu, "TypeError"), &cfg);
        assert_eq!(v.kind, VerdictKind::Consistent);
        let strict = OracleConfig {
            strict_exception_types: true,
            ..Default::default()
        };
        let v = compare_backends(&exc(Device::Cpu, "ValueError"), &exc(Device::Gpu, "TypeError"), &strict);
        assert_eq!(v.kind, VerdictKind::PotentialBug);

        let mut two = ok(Device::Gpu, &[1.0]);
        two.outputs.push(two.outputs[0].clone());
        let v = compare_backends(&ok(Device::Cpu, &[1.0]), &two, &cfg);
        assert_eq!(v.mismatch, Some(Mismatch::OutputCount));
    }

    #[test]
    fn distance_exactly_at_threshold_is_consistent() {
        // ||a|| = 0, so the normalized distance equals the raw distance
        let a = ok(Device::Cpu, &[0.0]);
        let b = ok(Device::Gpu, &[0.25]);
        assert_eq!(compare_backends(&a, &b, &OracleConfig::with_threshold(0.25)).kind, VerdictKind::Consistent);
        assert_eq!(compare_backends(&a, &b, &OracleConfig::with_threshold(0.24)).kind, VerdictKind::PotentialBug);
    }

    #[test]
    fn per_dtype_threshold() {
        let mut cfg = OracleConfig::with_threshold(1e-6);
        cfg.thresholds.per_dtype.insert("float32".into(), 0.5);
        let v = compare_backends(&ok(Device::Cpu, &[0.0]), &ok(Device::Gpu, &[0.25]), &cfg);
        assert_eq!(v.kind, VerdictKind::Consistent);
    }

    #[test]
    fn library_gate() {
        let cfg = OracleConfig::default();
        let src = outcome("s", Role::Source, Device::Cpu, ExecStatus::Ok, &[9.0]);
        // target backends disagree: no library verdict
        let (c, g) = (ok(Device::Cpu, &[1.0]), ok(Device::Gpu, &[2.0]));
        let j = judge_seed("s", &[&c, &g, &src], &cfg);
        assert!(j.backends.as_ref().unwrap().is_bug());
        assert!(j.libraries.is_none());
        // agree: compared against source
        let g = ok(Device::Gpu, &[1.0]);
        let j = judge_seed("s", &[&c, &g, &src], &cfg);
        assert_eq!(j.libraries.unwrap().symptom, Some(Symptom::SrcTar));
        // gpu missing: cpu comparison still happens
        let g = outcome("s", Role::Target, Device::Gpu, ExecStatus::DeviceUnavailable, &[]);
        let j = judge_seed("s", &[&c, &g, &src], &cfg);
        assert_eq!(j.backends.unwrap().kind, VerdictKind::Inconclusive);
        assert!(j.libraries.unwrap().is_bug());
    }
}
