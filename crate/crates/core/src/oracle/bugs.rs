use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{OracleError, SeedJudgement, Symptom, Verdict};
use crate::harness::{CrashKind, Device, Role};
use crate::python::{self, ArgKey, ArgValue};
use crate::seeds::SeedCode;
use crate::util::write_atomic;

/// Root-cause categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cause {
    /// NaN/Inf inputs mishandled.
    NI,
    /// Missing parameter constraints.
    MPC,
    /// Edge cases (dtype boundaries, empty inputs).
    EC,
    /// Device-backend implementation differences.
    DBI,
    /// Logic deficiency; only ever assigned by hand.
    LD,
    #[serde(rename = "unclassified")]
    Unclassified,
}

impl Cause {
    pub const ALL: [Cause; 6] = [Cause::EC, Cause::NI, Cause::LD, Cause::DBI, Cause::MPC, Cause::Unclassified];

    pub fn as_str(self) -> &'static str {
        match self {
            Cause::NI => "NI",
            Cause::MPC => "MPC",
            Cause::EC => "EC",
            Cause::DBI => "DBI",
            Cause::LD => "LD",
            Cause::Unclassified => "unclassified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Cause::ALL.into_iter().find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugStatus {
    Potential,
    Reported,
    ConfirmedUnknown,
    ConfirmedKnown,
    WontFix,
}

impl BugStatus {
    pub const ALL: [BugStatus; 5] = [
        BugStatus::Potential,
        BugStatus::Reported,
        BugStatus::ConfirmedUnknown,
        BugStatus::ConfirmedKnown,
        BugStatus::WontFix,
    ];

    fn rank(self) -> u8 {
        match self {
            BugStatus::Potential => 0,
            BugStatus::Reported => 1,
            _ => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BugStatus::Potential => "potential",
            BugStatus::Reported => "reported",
            BugStatus::ConfirmedUnknown => "confirmed_unknown",
            BugStatus::ConfirmedKnown => "confirmed_known",
            BugStatus::WontFix => "wont_fix",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        BugStatus::ALL.into_iter().find(|b| b.as_str() == s.trim())
    }

    pub fn is_confirmed(self) -> bool {
        matches!(self, BugStatus::ConfirmedUnknown | BugStatus::ConfirmedKnown)
    }

    /// Statuses only move forward, one step at a time.
    pub fn can_become(self, to: BugStatus) -> bool {
        to.rank() == self.rank() + 1
    }
}

impl fmt::Display for BugStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugRecord {
    pub id: String,
    pub library: String,
    pub seed_id: String,
    pub symptom: Symptom,
    pub cause: Cause,
    pub status: BugStatus,
    /// Outcome keys (`seed/role/device`) backing the finding.
    pub evidence: Vec<String>,
    pub primary_api: String,
    pub signature: String,
    pub crash_kind: Option<CrashKind>,
    pub details: String,
    /// Ids of records folded into this one.
    #[serde(default)]
    pub duplicates: Vec<String>,
}

impl BugRecord {
    pub fn dedup_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}",
            self.library, self.symptom, self.primary_api, self.cause, self.signature
        )
    }

    pub fn advance(&mut self, to: BugStatus) -> Result<(), OracleError> {
        if !self.status.can_become(to) {
            return Err(OracleError::InvalidTransition { from: self.status, to });
        }
        self.status = to;
        Ok(())
    }
}

/// Signals the cause chain looks at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CauseEvidence {
    pub nan_inf_input: bool,
    pub boundary_value: bool,
    /// An argument outside any sensible domain (huge or negative size) that
    /// the API accepted instead of rejecting.
    pub out_of_domain: bool,
    pub backend_divergence: bool,
    pub manual: Option<Cause>,
}

/// Priority chain NI > EC > MPC > DBI; a manual assignment only fills what
/// the chain leaves unclassified.
pub fn classify_cause(e: &CauseEvidence) -> Cause {
    if e.nan_inf_input {
        Cause::NI
    } else if e.boundary_value {
        Cause::EC
    } else if e.out_of_domain {
        Cause::MPC
    } else if e.backend_divergence {
        Cause::DBI
    } else {
        e.manual.unwrap_or(Cause::Unclassified)
    }
}

pub(crate) const INT_BOUNDS: &[(&str, i128, i128)] = &[
    ("int8", i8::MIN as i128, i8::MAX as i128),
    ("uint8", 0, u8::MAX as i128),
    ("int16", i16::MIN as i128, i16::MAX as i128),
    ("uint16", 0, u16::MAX as i128),
    ("int32", i32::MIN as i128, i32::MAX as i128),
    ("uint32", 0, u32::MAX as i128),
    ("int64", i64::MIN as i128, i64::MAX as i128),
    ("uint64", 0, u64::MAX as i128),
];

pub(crate) const FLOAT_BOUNDS: &[(&str, f64)] = &[("float16", 65504.0), ("float32", f32::MAX as f64), ("float64", f64::MAX)];

/// Dtype whose extreme value `v` is. Small bounds (int8/uint8/int16) are
/// ignored: 127 or 255 are ordinary arguments far more often than probes.
pub(crate) fn int_boundary(v: i128) -> Option<&'static str> {
    INT_BOUNDS
        .iter()
        .skip(3)
        .find(|(_, lo, hi)| (v == *hi && v != 0) || (v == *lo && *lo != 0))
        .map(|(name, _, _)| *name)
}

pub(crate) fn float_boundary(v: f64) -> Option<&'static str> {
    FLOAT_BOUNDS.iter().find(|(_, m)| v.abs() == *m).map(|(n, _)| *n)
}

/// Sizes from here up overflow a signed 32-bit index.
pub(crate) const HUGE_INT: i128 = 1 << 31;

const SIZE_KEYWORDS: &[&str] = &[
    "n", "m", "N", "M", "num", "shape", "size", "length", "repeats", "rows", "cols", "num_rows", "num_columns",
];

/// Negative value where a size is expected: positional arguments and
/// size-like keywords (but never `axis`/`dim`, where negatives are legal).
pub(crate) fn expects_dimension(key: &ArgKey) -> bool {
    match key {
        ArgKey::Pos(_) => true,
        ArgKey::Kw(k) => SIZE_KEYWORDS.contains(&k.as_str()),
    }
}

fn special_text() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i)float\(\s*['"][+-]?(nan|inf|infinity)['"]\s*\)|\.(nan|inf|infty|pinf|ninf)\b"#)
            .expect("valid regex")
    })
}

impl CauseEvidence {
    /// Evidence from the seed program's statically known API arguments.
    pub fn from_seed(seed: &SeedCode, symptom: Symptom) -> Self {
        let apis: Vec<&str> = seed.target_apis.iter().map(String::as_str).collect();
        let calls = python::call_arguments(&seed.text, &apis).unwrap_or_default();
        let mut e = CauseEvidence {
            backend_divergence: symptom == Symptom::CpuGpu,
            ..Default::default()
        };
        for (key, value) in calls.iter().flat_map(|c| &c.args) {
            match value {
                ArgValue::Float(f) => {
                    e.nan_inf_input |= !f.is_finite();
                    e.boundary_value |= float_boundary(*f).is_some();
                }
                ArgValue::Int(i) => {
                    e.boundary_value |= int_boundary(*i).is_some();
                    e.out_of_domain |= i.abs() >= HUGE_INT || (*i < 0 && expects_dimension(key));
                }
                ArgValue::Array { shape, elements } => {
                    e.nan_inf_input |= elements.iter().any(|x| !x.is_finite());
                    e.boundary_value |= shape.contains(&0) || elements.iter().any(|x| float_boundary(*x).is_some());
                }
                ArgValue::Unknown(_) => {}
            }
        }
        // values built by means the argument tracker cannot follow
        e.nan_inf_input |= special_text().is_match(&seed.text);
        e
    }
}

fn outcome_ref(seed: &str, role: Role, device: Device) -> String {
    format!("{seed}/{role}/{device}")
}

fn evidence_for(v: &Verdict) -> Vec<String> {
    match v.symptom {
        Some(Symptom::SrcTar) => vec![
            outcome_ref(&v.seed_id, Role::Source, Device::Cpu),
            outcome_ref(&v.seed_id, Role::Target, Device::Cpu),
        ],
        _ => vec![
            outcome_ref(&v.seed_id, Role::Target, Device::Cpu),
            outcome_ref(&v.seed_id, Role::Target, Device::Gpu),
        ],
    }
}

/// Manual decisions layered over automatic records.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub id: String,
    pub cause: Option<Cause>,
    pub status: Option<BugStatus>,
}

/// `id<TAB>cause<TAB>status` lines; `-` leaves a field alone.
pub fn read_overrides(path: &Path) -> io::Result<Vec<Override>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let bad = |n: usize, what: &str| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{n}: {what}", path.display()));
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(bad(n + 1, "expected id, cause, status"));
        }
        let cause = match cols[1].trim() {
            "-" | "" => None,
            c => Some(Cause::parse(c).ok_or_else(|| bad(n + 1, "unknown cause"))?),
        };
        let status = match cols[2].trim() {
            "-" | "" => None,
            s => Some(BugStatus::parse(s).ok_or_else(|| bad(n + 1, "unknown status"))?),
        };
        out.push(Override {
            id: cols[0].trim().to_string(),
            cause,
            status,
        });
    }
    Ok(out)
}

/// One record per potential-bug verdict. Status overrides are applied by
/// walking the transition chain, so an illegal jump is an error.
pub fn build_bug_records(
    library: &str,
    judgements: &[SeedJudgement],
    seeds: &[SeedCode],
    overrides: &[Override],
) -> Result<Vec<BugRecord>, OracleError> {
    let by_id: HashMap<&str, &SeedCode> = seeds.iter().map(|s| (s.id.as_str(), s)).collect();
    let manual: HashMap<&str, &Override> = overrides.iter().map(|o| (o.id.as_str(), o)).collect();
    let mut out = Vec::new();
    for v in judgements.iter().flat_map(|j| j.bugs()) {
        let symptom = v.symptom.expect("bug verdicts carry a symptom");
        let id = format!("{}:{}", v.seed_id, symptom);
        let over = manual.get(id.as_str());
        let seed = by_id.get(v.seed_id.as_str());
        let mut evidence = seed.map(|s| CauseEvidence::from_seed(s, symptom)).unwrap_or(CauseEvidence {
            backend_divergence: symptom == Symptom::CpuGpu,
            ..Default::default()
        });
        evidence.manual = over.and_then(|o| o.cause);
        let mut rec = BugRecord {
            id,
            library: library.to_string(),
            seed_id: v.seed_id.clone(),
            symptom,
            cause: classify_cause(&evidence),
            status: BugStatus::Potential,
            evidence: evidence_for(v),
            primary_api: seed
                .and_then(|s| s.target_apis.first().cloned())
                .unwrap_or_else(|| "unknown".into()),
            signature: v.signature(),
            crash_kind: v.crash_kind,
            details: v.details.clone(),
            duplicates: Vec::new(),
        };
        if let Some(target) = over.and_then(|o| o.status) {
            for step in [BugStatus::Reported, target] {
                if rec.status != target && rec.status.can_become(step) {
                    rec.advance(step)?;
                }
            }
            if rec.status != target {
                return Err(OracleError::InvalidTransition { from: rec.status, to: target });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Collapse records sharing a deduplication key; the first one wins and
/// lists the others.
pub fn dedup_bugs(records: Vec<BugRecord>) -> Vec<BugRecord> {
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut out: Vec<BugRecord> = Vec::new();
    for r in records {
        match index.get(&r.dedup_key()) {
            Some(&i) => {
                let mut dups = r.duplicates.clone();
                out[i].duplicates.push(r.id);
                out[i].duplicates.append(&mut dups);
            }
            None => {
                index.insert(r.dedup_key(), out.len());
                out.push(r);
            }
        }
    }
    out
}

const LEDGER_HEADER: &str = "id\tseed\tsymptom\tcause\tstatus\tdedup_key\tevidence\tduplicates";

/// `bugs/<library>.tsv` next to a full-record `.ndrec` companion.
pub fn write_bug_ledger(dir: &Path, library: &str, records: &[BugRecord]) -> io::Result<()> {
    let mut tsv = String::from(LEDGER_HEADER);
    tsv.push('\n');
    for r in records {
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.id,
            r.seed_id,
            r.symptom,
            r.cause,
            r.status,
            r.dedup_key(),
            r.evidence.join(","),
            r.duplicates.join(",")
        ));
    }
    write_atomic(&dir.join(format!("{library}.tsv")), tsv.as_bytes())?;
    crate::util::write_ndrec(&dir.join(format!("{library}.ndrec")), records)
}

pub fn read_bug_ledger(dir: &Path, library: &str) -> io::Result<Vec<BugRecord>> {
    crate::util::read_ndrec(&dir.join(format!("{library}.ndrec")))
}
