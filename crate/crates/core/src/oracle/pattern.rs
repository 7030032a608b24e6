use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bugs::{expects_dimension, float_boundary, int_boundary, BugRecord, HUGE_INT, INT_BOUNDS, FLOAT_BOUNDS};
use super::{compare_backends, OracleConfig, OracleError, Verdict};
use crate::harness::{run_campaign, CampaignConfig, Device, ExecutionOutcome, HarnessError, Job, JobKey, Role, RunnerSpec};
use crate::library::LibraryProfile;
use crate::pairs::CodePair;
use crate::python::{self, ArgKey, ArgValue};
use crate::seeds::SeedCode;
use crate::util::{read_ndrec, sanitize_component, write_atomic, write_ndrec};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueClass {
    Nan,
    Inf,
    HugeInt,
    NegativeDim,
    Zero,
    Boundary(String),
    Concrete(String),
}

impl ValueClass {
    pub fn is_concrete(&self) -> bool {
        matches!(self, ValueClass::Concrete(_))
    }
}

impl fmt::Display for ValueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueClass::Nan => f.write_str("nan"),
            ValueClass::Inf => f.write_str("inf"),
            ValueClass::HugeInt => f.write_str("huge_int"),
            ValueClass::NegativeDim => f.write_str("negative_dim"),
            ValueClass::Zero => f.write_str("zero"),
            ValueClass::Boundary(d) => write!(f, "boundary({d})"),
            ValueClass::Concrete(v) => write!(f, "concrete({v})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractArg {
    /// `arg<i>` or the keyword name.
    pub role: String,
    /// `scalar` or `array[d0xd1...]`.
    pub shape_class: String,
    pub value_class: ValueClass,
    /// Python rendering of the original value.
    pub literal: String,
    /// Array elements, kept so probes can reuse the surrounding values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPattern {
    pub api: String,
    pub args: Vec<AbstractArg>,
    pub source_bugs: Vec<String>,
    /// Some argument could not be recovered statically.
    pub needs_review: bool,
}

pub(crate) fn py_float(v: f64) -> String {
    if v.is_nan() {
        "float('nan')".into()
    } else if v == f64::INFINITY {
        "float('inf')".into()
    } else if v == f64::NEG_INFINITY {
        "-float('inf')".into()
    } else {
        format!("{v:?}")
    }
}

fn nest(shape: &[usize], items: &[String]) -> String {
    match shape {
        [] => items.first().cloned().unwrap_or_default(),
        [_] => format!("[{}]", items.join(", ")),
        [n, rest @ ..] => {
            let stride: usize = rest.iter().product();
            let parts: Vec<String> = (0..*n)
                .map(|i| nest(rest, &items[(i * stride).min(items.len())..((i + 1) * stride).min(items.len())]))
                .collect();
            format!("[{}]", parts.join(", "))
        }
    }
}

fn abstract_arg(key: &ArgKey, value: &ArgValue) -> AbstractArg {
    let role = key.to_string();
    let scalar = |value_class, literal: String| AbstractArg {
        role: role.clone(),
        shape_class: "scalar".into(),
        value_class,
        literal,
        elements: None,
    };
    match value {
        ArgValue::Float(f) => {
            let class = if f.is_nan() {
                ValueClass::Nan
            } else if f.is_infinite() {
                ValueClass::Inf
            } else if let Some(d) = float_boundary(*f) {
                ValueClass::Boundary(d.into())
            } else if *f == 0.0 {
                ValueClass::Zero
            } else {
                ValueClass::Concrete(py_float(*f))
            };
            scalar(class, py_float(*f))
        }
        ArgValue::Int(i) => {
            let class = if let Some(d) = int_boundary(*i) {
                ValueClass::Boundary(d.into())
            } else if i.abs() >= HUGE_INT {
                ValueClass::HugeInt
            } else if *i < 0 && expects_dimension(key) {
                ValueClass::NegativeDim
            } else if *i == 0 {
                ValueClass::Zero
            } else {
                ValueClass::Concrete(i.to_string())
            };
            scalar(class, i.to_string())
        }
        ArgValue::Array { shape, elements } => {
            let items: Vec<String> = elements.iter().map(|v| py_float(*v)).collect();
            let literal = nest(shape, &items);
            let class = if elements.iter().any(|v| v.is_nan()) {
                ValueClass::Nan
            } else if elements.iter().any(|v| v.is_infinite()) {
                ValueClass::Inf
            } else if let Some(d) = elements.iter().find_map(|v| float_boundary(*v)) {
                ValueClass::Boundary(d.into())
            } else if shape.contains(&0) {
                ValueClass::Zero
            } else {
                ValueClass::Concrete(literal.clone())
            };
            let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
            AbstractArg {
                role: role.clone(),
                shape_class: format!("array[{}]", dims.join("x")),
                value_class: class,
                literal,
                elements: Some(items),
            }
        }
        ArgValue::Unknown(text) => scalar(ValueClass::Concrete(text.clone()), text.clone()),
    }
}

/// Abstract the arguments of the bug's first call to its primary API.
pub fn extract_bug_pattern(bug: &BugRecord, seed: &SeedCode) -> Result<InputPattern, OracleError> {
    let api = bug.primary_api.clone();
    let calls = python::call_arguments(&seed.text, &[api.as_str()]).unwrap_or_default();
    let Some(call) = calls.into_iter().find(|c| !c.args.is_empty()) else {
        return Err(OracleError::Unextractable { api });
    };
    if call.args.iter().all(|(_, v)| matches!(v, ArgValue::Unknown(_))) {
        return Err(OracleError::Unextractable { api });
    }
    let args: Vec<AbstractArg> = call.args.iter().map(|(k, v)| abstract_arg(k, v)).collect();
    if args.iter().all(|a| a.value_class.is_concrete()) {
        return Err(OracleError::NotAPattern { api });
    }
    Ok(InputPattern {
        needs_review: call.args.iter().any(|(_, v)| matches!(v, ArgValue::Unknown(_))),
        api,
        args,
        source_bugs: vec![bug.id.clone()],
    })
}

fn scalar_probes(class: &ValueClass, literal: &str) -> Vec<String> {
    match class {
        ValueClass::Nan => vec![py_float(f64::NAN)],
        ValueClass::Inf => vec![py_float(f64::INFINITY), py_float(f64::NEG_INFINITY)],
        ValueClass::HugeInt => vec![
            (1u128 << 31).to_string(),
            i64::MAX.to_string(),
            10u128.pow(20).to_string(),
        ],
        ValueClass::NegativeDim => vec!["-1".into()],
        ValueClass::Zero => vec!["0".into()],
        ValueClass::Boundary(d) => {
            if let Some((_, lo, hi)) = INT_BOUNDS.iter().find(|(n, _, _)| n == d) {
                vec![lo.to_string(), hi.to_string()]
            } else if let Some((_, m)) = FLOAT_BOUNDS.iter().find(|(n, _)| n == d) {
                vec![py_float(-m), py_float(*m)]
            } else {
                vec![literal.to_string()]
            }
        }
        ValueClass::Concrete(_) => vec![literal.to_string()],
    }
}

fn array_probes(arg: &AbstractArg, wrap: &dyn Fn(&str) -> String) -> Vec<String> {
    let Some(items) = &arg.elements else {
        return vec![wrap(&arg.literal)];
    };
    let shape: Vec<usize> = arg
        .shape_class
        .trim_start_matches("array[")
        .trim_end_matches(']')
        .split('x')
        .filter_map(|d| d.parse().ok())
        .collect();
    let replace = |pred: &dyn Fn(&str) -> bool, with: &str| {
        let v: Vec<String> = items.iter().map(|e| if pred(e) { with.to_string() } else { e.clone() }).collect();
        wrap(&nest(&shape, &v))
    };
    let is_inf = |e: &str| e.ends_with("float('inf')");
    match &arg.value_class {
        ValueClass::Inf => vec![replace(&is_inf, &py_float(f64::INFINITY)), replace(&is_inf, &py_float(f64::NEG_INFINITY))],
        ValueClass::Boundary(d) => match FLOAT_BOUNDS.iter().find(|(n, _)| n == d) {
            Some((_, m)) => {
                let is_b = |e: &str| e.parse::<f64>().is_ok_and(|x| x.abs() == *m);
                vec![replace(&is_b, &py_float(-m)), replace(&is_b, &py_float(*m))]
            }
            None => vec![wrap(&arg.literal)],
        },
        _ => vec![wrap(&arg.literal)],
    }
}

const MAX_PROBES_PER_PATTERN: usize = 64;

/// Concrete argument lists for a pattern, as rendered call arguments. Array
/// arguments are wrapped with `array_ctor`.
pub fn instantiate(pattern: &InputPattern, array_ctor: &str) -> Vec<Vec<String>> {
    let wrap = |lit: &str| format!("{array_ctor}({lit})");
    let mut combos: Vec<Vec<String>> = vec![Vec::new()];
    for arg in &pattern.args {
        let values = if arg.elements.is_some() {
            array_probes(arg, &wrap)
        } else {
            scalar_probes(&arg.value_class, &arg.literal)
        };
        let rendered: Vec<String> = values
            .into_iter()
            .map(|v| if arg.role.starts_with("arg") && arg.role[3..].parse::<usize>().is_ok() { v } else { format!("{}={v}", arg.role) })
            .collect();
        combos = combos
            .into_iter()
            .flat_map(|c| {
                rendered.iter().map(move |r| {
                    let mut c = c.clone();
                    c.push(r.clone());
                    c
                })
            })
            .take(MAX_PROBES_PER_PATTERN)
            .collect();
    }
    combos
}

/// Target API -> source-library counterpart.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceApiMap(pub BTreeMap<String, String>);

impl SourceApiMap {
    /// Infer counterparts from code pairs: the source-side call sharing the
    /// target API's terminal name. Explicit entries win.
    pub fn infer(pairs: &[CodePair], source: &LibraryProfile, explicit: &BTreeMap<String, String>) -> Self {
        let roots: Vec<&str> = source.roots().collect();
        let mut map = BTreeMap::new();
        for p in pairs {
            if map.contains_key(&p.api) {
                continue;
            }
            let term = python::terminal_name(&p.api);
            let hit = python::called_names(&p.source_code).unwrap_or_default().into_iter().find(|c| {
                c.contains('.') && roots.contains(&c.split('.').next().unwrap_or("")) && python::terminal_name(c) == term
            });
            if let Some(c) = hit {
                map.insert(p.api.clone(), c);
            }
        }
        map.extend(explicit.iter().map(|(k, v)| (k.clone(), v.clone())));
        SourceApiMap(map)
    }

    pub fn get(&self, api: &str) -> Option<&str> {
        self.0.get(api).map(String::as_str)
    }
}

pub struct BacktestSpec<'a> {
    pub source: &'a LibraryProfile,
    /// Array constructor in the source library, e.g. `torch.tensor`.
    pub array_ctor: String,
    pub map: &'a SourceApiMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub id: String,
    pub pattern_api: String,
    pub source_api: String,
    pub args: Vec<String>,
    pub text: String,
}

/// Render probe programs; unmapped APIs come back as `(api, reason)`.
pub fn plan_probes(patterns: &[InputPattern], spec: &BacktestSpec) -> (Vec<Probe>, Vec<(String, String)>) {
    let mut probes = Vec::new();
    let mut skipped = Vec::new();
    for (pi, p) in patterns.iter().enumerate() {
        let Some(src_api) = spec.map.get(&p.api) else {
            skipped.push((p.api.clone(), "no source counterpart".to_string()));
            continue;
        };
        let root = src_api.split('.').next().unwrap_or(src_api);
        let import = spec.source.import_for(root).unwrap_or_else(|| spec.source.primary_import());
        let ctor_root = spec.array_ctor.split('.').next().unwrap_or("");
        let mut imports = vec![import];
        if let Some(extra) = spec.source.import_for(ctor_root) {
            if !imports.contains(&extra) {
                imports.push(extra);
            }
        }
        for (k, args) in instantiate(p, &spec.array_ctor).into_iter().enumerate() {
            let text = format!(
                "# CAPTURE: out\n{}\nout = {src_api}({})\n",
                imports.join("\n"),
                args.join(", ")
            );
            probes.push(Probe {
                id: format!("probe-{pi}-{}-{k}", sanitize_component(python::terminal_name(&p.api))),
                pattern_api: p.api.clone(),
                source_api: src_api.to_string(),
                args,
                text,
            });
        }
    }
    (probes, skipped)
}

#[derive(Debug, Default)]
pub struct BacktestReport {
    pub probes: Vec<Probe>,
    pub skipped: Vec<(String, String)>,
    pub outcomes: Vec<ExecutionOutcome>,
    pub verdicts: Vec<Verdict>,
}

/// Run every probe on the source library on both devices and compare the
/// devices, closing the loop from new-library findings back to the source.
pub fn backtest_sources(
    patterns: &[InputPattern],
    spec: &BacktestSpec,
    runner: &RunnerSpec,
    campaign: &CampaignConfig,
    oracle: &OracleConfig,
    root: &Path,
) -> Result<BacktestReport, HarnessError> {
    let (probes, skipped) = plan_probes(patterns, spec);
    let dir = root.join("probes");
    let io_err = |path: PathBuf| move |source| HarnessError::Io { path, source };
    fs::create_dir_all(&dir).map_err(io_err(dir.clone()))?;
    let mut jobs = Vec::new();
    for p in &probes {
        let path = dir.join(format!("{}.py", p.id));
        write_atomic(&path, p.text.as_bytes()).map_err(io_err(path.clone()))?;
        for device in [Device::Cpu, Device::Gpu] {
            jobs.push(Job {
                key: JobKey {
                    seed_id: p.id.clone(),
                    role: Role::Source,
                    device,
                },
                seed_path: path.clone(),
                runner: runner.clone(),
            });
        }
    }
    let ledger = root.join("probe_outcomes.ndrec");
    let report = run_campaign(&jobs, campaign, &ledger, None)?;
    let mut verdicts = Vec::new();
    for p in &probes {
        let get = |d: Device| report.outcomes.iter().find(|o| o.seed_id == p.id && o.device == d);
        if let (Some(c), Some(g)) = (get(Device::Cpu), get(Device::Gpu)) {
            verdicts.push(compare_backends(c, g, oracle));
        }
    }
    Ok(BacktestReport {
        probes,
        skipped,
        outcomes: report.outcomes,
        verdicts,
    })
}

pub fn write_patterns(path: &Path, patterns: &[InputPattern]) -> io::Result<()> {
    write_ndrec(path, patterns)
}

pub fn read_patterns(path: &Path) -> io::Result<Vec<InputPattern>> {
    read_ndrec(path)
}
