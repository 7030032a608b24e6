mod common;

use std::fs;
use std::process::Command;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use futur::metrics::cause_table;
use futur::oracle::{read_bug_ledger, BugStatus, Cause, Symptom};
use futur::pipeline::{PipelineError, Stage, StageStatus};

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stage_before_its_prerequisite_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let o = common::futur(dir.path(), &["pairs"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("`prompts`"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let o = Command::new(env!("CARGO_BIN_EXE_futur")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_futur"))
        .args(["catalog", "--config", "/nonexistent/futur.ini"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = common::futur(tempfile::tempdir().unwrap().path(), &["catalog", "--override", "no-equals-sign"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn second_run_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let first = common::futur(dir.path(), &["all"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert_eq!(stdout(&first).lines().count(), Stage::ALL.len());
    let second = common::futur(dir.path(), &["all"]);
    assert!(second.status.success());
    for line in stdout(&second).lines() {
        assert!(line.ends_with(": up to date"), "{line}");
    }
    // touching one section reruns that stage and everything downstream only
    let third = common::futur(dir.path(), &["all", "--override", "report.decimals=2"]);
    let out = stdout(&third);
    assert!(out.contains("oracle: up to date"), "{out}");
    assert!(!out.contains("report: up to date"), "{out}");
}

#[test]
fn standalone_mine_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_futur"))
        .args(["mine", "--source", "pytorch", "--label", "Nans and Infs", "--dump"])
        .arg(common::fixtures().join("nans_and_infs.ndjson"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "mine: 138 issues, 61 snippets extracted, 43 stored, 18 rejected");
    assert!(dir.path().join("index.tsv").is_file());
}

#[test]
fn toy_campaign_findings() {
    let dir = tempfile::tempdir().unwrap();
    let p = common::toy_pipeline(dir.path(), &[]);
    p.run_all(|_, _| {}).unwrap();
    let bugs = read_bug_ledger(&dir.path().join("bugs"), "toy").unwrap();
    let find = |api: &str, s: Symptom| bugs.iter().find(|b| b.primary_api == api && b.symptom == s).unwrap();
    assert_eq!(find("toylib.add", Symptom::CpuGpu).cause, Cause::DBI);
    assert_eq!(find("toylib.sum", Symptom::CpuGpu).cause, Cause::NI);
    assert_eq!(find("toylib.eye", Symptom::Crash).cause, Cause::MPC);
    assert_eq!(find("toylib.eye", Symptom::SrcTar).signature, "shape");
    assert!(bugs.iter().all(|b| b.status == BugStatus::Potential));

    let t = cause_table(&[("ToyLib", &bugs)]);
    assert_eq!(t.row_text("ToyLib").unwrap(), "ToyLib 4 0 1 0 1 1 1");

    // the NaN pattern mined from the target reproduces on the source library
    let verdicts: Vec<futur::oracle::Verdict> =
        futur::util::read_ndrec(&dir.path().join("backtest/verdicts.ndrec")).unwrap();
    let flagged: Vec<_> = verdicts.iter().filter(|v| v.is_bug()).collect();
    assert_eq!(flagged.len(), 1);
    assert!(flagged[0].seed_id.contains("sum"));

    let summary = common::text(&dir.path().join("report/summary.tsv"));
    assert!(summary.contains("ToyLib\tsuccess_rate\t2\t2\t100.0"), "{summary}");
}

#[test]
fn manual_triage_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let overrides = dir.path().join("triage.tsv");
    fs::write(
        &overrides,
        "gen-toylib.eye-0:src_tar\tLD\treported\ngen-toylib.add-0:cpu_gpu\t-\tconfirmed_unknown\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let p = common::toy_pipeline(&out, &[&format!("oracle.overrides={}", overrides.display())]);
    p.run_all(|_, _| {}).unwrap();
    let bugs = read_bug_ledger(&out.join("bugs"), "toy").unwrap();
    let eye = bugs.iter().find(|b| b.id == "gen-toylib.eye-0:src_tar").unwrap();
    assert_eq!((eye.cause, eye.status), (Cause::LD, BugStatus::Reported));
    let add = bugs.iter().find(|b| b.id == "gen-toylib.add-0:cpu_gpu").unwrap();
    // automatic evidence keeps precedence over a manual cause
    assert_eq!((add.cause, add.status), (Cause::DBI, BugStatus::ConfirmedUnknown));
    let tables = common::text(&out.join("report/tables.md"));
    assert!(tables.contains("| ToyLib | 4 | 1 | 0 | 0 |"), "{tables}");
    assert!(!tables.contains("Other"));
}

#[test]
fn interrupted_run_blocks_downstream_until_resumed() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = common::toy_pipeline(dir.path(), &[]);
    for st in &Stage::ALL[..Stage::ALL.iter().position(|s| *s == Stage::Run).unwrap()] {
        p.run_stage(*st).unwrap();
    }
    p.stop = Some(Arc::new(AtomicBool::new(true)));
    assert!(matches!(p.run_stage(Stage::Run), Err(PipelineError::Failed { stage: Stage::Run, .. })));
    assert!(matches!(
        p.run_stage(Stage::Oracle),
        Err(PipelineError::MissingPrerequisite { needs: Stage::Run, .. })
    ));
    p.stop = None;
    match p.run_stage(Stage::Run).unwrap() {
        StageStatus::Ran(s) => assert!(s.starts_with("15 jobs"), "{s}"),
        StageStatus::UpToDate => panic!("run was stamped while interrupted"),
    }
    assert_eq!(p.run_stage(Stage::Run).unwrap(), StageStatus::UpToDate);
}
