use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{run_seed, Device, ExecStatus, ExecutionOutcome, HarnessError, ProcessEnd, Role, RunnerSpec};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JobKey {
    pub seed_id: String,
    pub role: Role,
    pub device: Device,
}

#[derive(Debug, Clone)]
pub struct Job {
    pub key: JobKey,
    pub seed_path: PathBuf,
    pub runner: RunnerSpec,
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub parallelism: usize,
    pub timeout: Duration,
    pub gpu_available: bool,
    /// Directory for per-run records and stderr captures.
    pub work_dir: PathBuf,
}

#[derive(Debug, Default)]
pub struct CampaignReport {
    /// Ledger contents after the run, previous sessions included.
    pub outcomes: Vec<ExecutionOutcome>,
    pub executed: usize,
    pub skipped_existing: usize,
    pub peak_concurrency: usize,
    /// The stop flag was raised before every job ran.
    pub interrupted: bool,
}

/// Outcomes recorded in a ledger. A trailing partial line (left by a killed
/// writer) is dropped from the file.
pub fn read_ledger(path: &Path) -> io::Result<Vec<ExecutionOutcome>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        log::warn!("{}: dropping partial trailing record", path.display());
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(complete as u64)?;
    }
    let text = String::from_utf8_lossy(&bytes[..complete]);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(o) => out.push(o),
            Err(e) => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(out)
}

/// Execute every job not already in the ledger, at most `parallelism` at a
/// time. Outcomes are appended to the ledger by a single writer as they
/// complete, so an interrupted campaign resumes where it stopped.
pub fn run_campaign(
    jobs: &[Job],
    config: &CampaignConfig,
    ledger: &Path,
    stop: Option<&AtomicBool>,
) -> Result<CampaignReport, HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: ledger.to_path_buf(),
        source,
    };
    if let Some(dir) = ledger.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut outcomes = read_ledger(ledger).map_err(io_err)?;
    let mut done: HashSet<JobKey> = outcomes.iter().map(ExecutionOutcome::key).collect();
    let pending: Vec<&Job> = jobs.iter().filter(|j| !done.contains(&j.key)).collect();
    let mut report = CampaignReport {
        skipped_existing: jobs.len() - pending.len(),
        ..Default::default()
    };
    for j in &pending {
        if !(j.key.device == Device::Gpu && !config.gpu_available) {
            j.runner.check()?;
        }
    }

    let mut file = OpenOptions::new().create(true).append(true).open(ledger).map_err(io_err)?;
    let next = AtomicUsize::new(0);
    let active = AtomicUsize::new(0);
    let peak = AtomicUsize::new(0);
    let workers = config.parallelism.max(1).min(pending.len().max(1));
    let (tx, rx) = mpsc::channel::<Result<ExecutionOutcome, HarnessError>>();

    let mut fatal = None;
    std::thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, active, peak, pending) = (&next, &active, &peak, &pending);
            s.spawn(move || loop {
                if stop.is_some_and(|f| f.load(Ordering::SeqCst)) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = pending.get(i) else { break };
                let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                let result = if job.key.device == Device::Gpu && !config.gpu_available {
                    Ok(ExecutionOutcome {
                        seed_id: job.key.seed_id.clone(),
                        role: job.key.role,
                        device: job.key.device,
                        status: ExecStatus::DeviceUnavailable,
                        outputs: Vec::new(),
                        api_calls_observed: Vec::new(),
                        duration_ms: 0,
                        runner_exit: ProcessEnd::NotRun,
                    })
                } else {
                    run_seed(
                        &job.key.seed_id,
                        &job.seed_path,
                        job.key.role,
                        job.key.device,
                        &job.runner,
                        config.timeout,
                        &config.work_dir,
                    )
                };
                active.fetch_sub(1, Ordering::SeqCst);
                if tx.send(result).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for result in rx {
            match result {
                Ok(o) => {
                    if !done.insert(o.key()) {
                        continue;
                    }
                    let mut line = serde_json::to_string(&o).expect("outcome serializes");
                    line.push('\n');
                    if let Err(e) = file.write_all(line.as_bytes()).and_then(|_| file.flush()) {
                        fatal.get_or_insert(io_err(e));
                        continue;
                    }
                    report.executed += 1;
                    outcomes.push(o);
                }
                Err(e) => {
                    log::error!("{e}");
                    fatal.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = fatal {
        return Err(e);
    }
    report.peak_concurrency = peak.load(Ordering::SeqCst);
    report.interrupted = report.executed + report.skipped_existing < jobs.len();
    report.outcomes = outcomes;
    Ok(report)
}
