//! Seed execution: one runner process per (seed, role, device), wall-clock
//! timeout, and classification of how the process ended.

mod campaign;
mod record;

use std::fmt;
use std::fs;
use std::io;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

pub use campaign::{read_ledger, run_campaign, CampaignConfig, CampaignReport, Job, JobKey};
pub use record::{ErrorInfo, NumericCapture, RecordStatus, ResultRecord};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    Cpu,
    Gpu,
}

impl Device {
    pub fn as_str(self) -> &'static str {
        match self {
            Device::Cpu => "cpu",
            Device::Gpu => "gpu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cpu" => Some(Device::Cpu),
            "gpu" | "cuda" => Some(Device::Gpu),
            _ => None,
        }
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which implementation of a seed ran: the target-library program or its
/// source-library counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Source,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Target => "target",
            Role::Source => "source",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrashKind {
    Abort,
    Segfault,
    Fpe,
    Hang,
    OtherSignal(i32),
    /// Nonzero exit without a signal (the runner died natively but exited).
    Exit(i32),
}

impl fmt::Display for CrashKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CrashKind::Abort => f.write_str("abort"),
            CrashKind::Segfault => f.write_str("segfault"),
            CrashKind::Fpe => f.write_str("fpe"),
            CrashKind::Hang => f.write_str("hang"),
            CrashKind::OtherSignal(n) => write!(f, "other_signal({n})"),
            CrashKind::Exit(c) => write!(f, "exit({c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    Exception {
        #[serde(rename = "type")]
        type_name: String,
        message: String,
        trace: String,
    },
    Crash { kind: CrashKind },
    ProtocolError { reason: String },
    DeviceUnavailable,
}

impl ExecStatus {
    pub fn label(&self) -> String {
        match self {
            ExecStatus::Ok => "ok".into(),
            ExecStatus::Exception { type_name, .. } => format!("exception({type_name})"),
            ExecStatus::Crash { kind } => format!("crash({kind})"),
            ExecStatus::ProtocolError { .. } => "protocol_error".into(),
            ExecStatus::DeviceUnavailable => "device_unavailable".into(),
        }
    }

    pub fn is_crash(&self) -> bool {
        matches!(self, ExecStatus::Crash { .. })
    }
}

/// How the runner process ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessEnd {
    Exit(i32),
    Signal(i32),
    TimedOut,
    NotRun,
}

impl ProcessEnd {
    fn from_status(s: ExitStatus) -> Self {
        match (s.code(), s.signal()) {
            (Some(c), _) => ProcessEnd::Exit(c),
            (None, Some(n)) => ProcessEnd::Signal(n),
            (None, None) => ProcessEnd::Exit(-1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub seed_id: String,
    pub role: Role,
    pub device: Device,
    #[serde(flatten)]
    pub status: ExecStatus,
    #[serde(default)]
    pub outputs: Vec<NumericCapture>,
    #[serde(default)]
    pub api_calls_observed: Vec<String>,
    pub duration_ms: u64,
    pub runner_exit: ProcessEnd,
}

impl ExecutionOutcome {
    pub fn key(&self) -> JobKey {
        JobKey {
            seed_id: self.seed_id.clone(),
            role: self.role,
            device: self.device,
        }
    }
}

/// Map process termination plus the emitted record (if any) to a status.
pub fn classify_outcome(end: ProcessEnd, record: Option<&Result<ResultRecord, String>>) -> ExecStatus {
    let crash = |kind| ExecStatus::Crash { kind };
    match end {
        ProcessEnd::TimedOut => crash(CrashKind::Hang),
        ProcessEnd::Signal(n) if n == libc::SIGSEGV => crash(CrashKind::Segfault),
        ProcessEnd::Signal(n) if n == libc::SIGABRT => crash(CrashKind::Abort),
        ProcessEnd::Signal(n) if n == libc::SIGFPE => crash(CrashKind::Fpe),
        ProcessEnd::Signal(n) => crash(CrashKind::OtherSignal(n)),
        ProcessEnd::Exit(0) => match record {
            None => ExecStatus::ProtocolError {
                reason: "no result record".into(),
            },
            Some(Err(e)) => ExecStatus::ProtocolError { reason: e.clone() },
            Some(Ok(r)) => match (&r.status, &r.error) {
                (RecordStatus::Ok, _) => ExecStatus::Ok,
                (RecordStatus::Exception, e) => {
                    let e = e.clone().unwrap_or(ErrorInfo {
                        type_name: "Exception".into(),
                        message: String::new(),
                        trace: String::new(),
                    });
                    ExecStatus::Exception {
                        type_name: e.type_name,
                        message: e.message,
                        trace: e.trace,
                    }
                }
            },
        },
        ProcessEnd::Exit(c) => crash(CrashKind::Exit(c)),
        ProcessEnd::NotRun => ExecStatus::ProtocolError {
            reason: "runner did not start".into(),
        },
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("runner {0} not found or not executable")]
    RunnerMissing(String),
    #[error("runner command is empty")]
    EmptyRunner,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Runner command line prefix, e.g. `["python3", "runner.py"]`; the harness
/// appends `--seed <path> --device <dev> --emit <path>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerSpec {
    pub command: Vec<String>,
}

impl RunnerSpec {
    pub fn new<S: AsRef<str>>(command: &[S]) -> Self {
        RunnerSpec {
            command: command.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    /// Split a configured command on whitespace.
    pub fn parse(line: &str) -> Self {
        RunnerSpec {
            command: line.split_whitespace().map(str::to_string).collect(),
        }
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        let prog = self.command.first().ok_or(HarnessError::EmptyRunner)?;
        let found = if prog.contains('/') {
            Path::new(prog).is_file()
        } else {
            std::env::var_os("PATH")
                .map(|p| std::env::split_paths(&p).any(|d| d.join(prog).is_file()))
                .unwrap_or(false)
        };
        if found {
            Ok(())
        } else {
            Err(HarnessError::RunnerMissing(prog.clone()))
        }
    }
}

fn kill_group(pid: u32) {
    // SAFETY: plain syscall on a process group we created.
    unsafe {
        libc::killpg(pid as libc::pid_t, libc::SIGKILL);
    }
}

/// Run one seed program in a fresh process group; kill the whole group on
/// timeout. Runner stderr is kept next to the emitted record.
pub fn run_seed(
    seed_id: &str,
    seed_path: &Path,
    role: Role,
    device: Device,
    runner: &RunnerSpec,
    timeout: Duration,
    work_dir: &Path,
) -> Result<ExecutionOutcome, HarnessError> {
    let (prog, args) = runner.command.split_first().ok_or(HarnessError::EmptyRunner)?;
    fs::create_dir_all(work_dir).map_err(|source| HarnessError::Io {
        path: work_dir.to_path_buf(),
        source,
    })?;
    let stem = format!("{}.{role}.{device}", crate::util::sanitize_component(seed_id));
    let emit = work_dir.join(format!("{stem}.json"));
    let stderr_path = work_dir.join(format!("{stem}.stderr"));
    let _ = fs::remove_file(&emit);
    let stderr = fs::File::create(&stderr_path).map_err(|source| HarnessError::Io {
        path: stderr_path.clone(),
        source,
    })?;

    let start = Instant::now();
    let mut child = Command::new(prog)
        .args(args)
        .arg("--seed")
        .arg(seed_path)
        .arg("--device")
        .arg(device.as_str())
        .arg("--emit")
        .arg(&emit)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(stderr)
        .process_group(0)
        .spawn()
        .map_err(|e| match e.kind() {
            io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied => HarnessError::RunnerMissing(prog.clone()),
            _ => HarnessError::Io {
                path: PathBuf::from(prog),
                source: e,
            },
        })?;
    let end = match child.wait_timeout(timeout) {
        Ok(Some(status)) => ProcessEnd::from_status(status),
        Ok(None) => {
            kill_group(child.id());
            let _ = child.wait();
            ProcessEnd::TimedOut
        }
        Err(e) => {
            kill_group(child.id());
            let _ = child.wait();
            log::error!("{seed_id}: waiting on runner failed: {e}");
            ProcessEnd::TimedOut
        }
    };
    let mut duration_ms = start.elapsed().as_millis() as u64;
    if end == ProcessEnd::TimedOut {
        duration_ms = duration_ms.max(timeout.as_millis() as u64);
    }

    let record = match end {
        ProcessEnd::Exit(0) => fs::read_to_string(&emit).ok().map(|t| ResultRecord::parse(&t)),
        _ => None,
    };
    let status = classify_outcome(end, record.as_ref());
    let (outputs, api_calls_observed) = match (&status, record) {
        (ExecStatus::Ok | ExecStatus::Exception { .. }, Some(Ok(r))) => (r.outputs, r.api_calls_observed),
        _ => (Vec::new(), Vec::new()),
    };
    Ok(ExecutionOutcome {
        seed_id: seed_id.to_string(),
        role,
        device,
        status,
        outputs,
        api_calls_observed,
        duration_ms,
        runner_exit: end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok_record() -> Result<ResultRecord, String> {
        ResultRecord::parse(r#"{"status":"ok","outputs":[]}"#)
    }

    #[test]
    fn signal_mapping() {
        let c = |n| classify_outcome(ProcessEnd::Signal(n), None);
        assert_eq!(c(11), ExecStatus::Crash { kind: CrashKind::Segfault });
        assert_eq!(c(6), ExecStatus::Crash { kind: CrashKind::Abort });
        assert_eq!(c(8), ExecStatus::Crash { kind: CrashKind::Fpe });
        assert_eq!(c(9), ExecStatus::Crash { kind: CrashKind::OtherSignal(9) });
        assert_eq!(
            classify_outcome(ProcessEnd::TimedOut, None),
            ExecStatus::Crash { kind: CrashKind::Hang }
        );
    }

    #[test]
    fn exit_zero_mapping() {
        assert_eq!(classify_outcome(ProcessEnd::Exit(0), Some(&ok_record())), ExecStatus::Ok);
        assert!(matches!(
            classify_outcome(ProcessEnd::Exit(0), None),
            ExecStatus::ProtocolError { .. }
        ));
        let exc = ResultRecord::parse(r#"{"status":"exception","error":{"type":"ValueError","message":"m"}}"#);
        assert!(matches!(
            classify_outcome(ProcessEnd::Exit(0), Some(&exc)),
            ExecStatus::Exception { ref type_name, .. } if type_name == "ValueError"
        ));
        assert_eq!(
            classify_outcome(ProcessEnd::Exit(3), Some(&ok_record())),
            ExecStatus::Crash { kind: CrashKind::Exit(3) }
        );
    }

    #[test]
    fn outcome_json_is_flat() {
        let o = ExecutionOutcome {
            seed_id: "s".into(),
            role: Role::Target,
            device: Device::Gpu,
            status: ExecStatus::Crash { kind: CrashKind::OtherSignal(7) },
            outputs: vec![],
            api_calls_observed: vec![],
            duration_ms: 5,
            runner_exit: ProcessEnd::Signal(7),
        };
        let j = serde_json::to_string(&o).unwrap();
        assert!(j.contains(r#""status":"crash""#), "{j}");
        assert_eq!(serde_json::from_str::<ExecutionOutcome>(&j).unwrap(), o);
    }

    fn script(dir: &Path, name: &str, body: &str) -> RunnerSpec {
        let p = dir.join(name);
        fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
        let mut perm = fs::metadata(&p).unwrap().permissions();
        std::os::unix::fs::PermissionsExt::set_mode(&mut perm, 0o755);
        fs::set_permissions(&p, perm).unwrap();
        RunnerSpec::new(&[p.to_str().unwrap()])
    }

    #[test]
    fn runs_a_process_and_reads_its_record() {
        let dir = tempfile::tempdir().unwrap();
        let r = script(
            dir.path(),
            "ok.sh",
            r#"while [ $# -gt 0 ]; do [ "$1" = --emit ] && out=$2; shift; done
printf '{"status":"ok","outputs":[{"name":"y","shape":[2,2],"dtype":"float32","values":[1,0,0,1]}]}' > "$out""#,
        );
        let o = run_seed("s1", Path::new("seed.py"), Role::Target, Device::Cpu, &r, Duration::from_secs(10), dir.path()).unwrap();
        assert_eq!(o.status, ExecStatus::Ok);
        assert_eq!(o.outputs[0].element_count(), 4);
    }

    #[test]
    fn missing_runner_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let r = RunnerSpec::new(&["/nonexistent/runner"]);
        assert!(r.check().is_err());
        assert!(matches!(
            run_seed("s", Path::new("x"), Role::Target, Device::Cpu, &r, Duration::from_secs(1), dir.path()),
            Err(HarnessError::RunnerMissing(_))
        ));
    }
}
