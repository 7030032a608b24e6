#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use futur::pipeline::Pipeline;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn toy_config() -> PathBuf {
    fixtures().join("toy/toy.ini")
}

pub fn runner(name: &str) -> PathBuf {
    fixtures().join("runners").join(name)
}

/// Toy campaign writing under `out`, with extra `section.key=value` overrides.
pub fn toy_pipeline(out: &Path, extra: &[&str]) -> Pipeline {
    let mut o = vec![format!("campaign.output={}", out.display())];
    o.extend(extra.iter().map(|s| s.to_string()));
    Pipeline::load(&toy_config(), &o).expect("toy config loads")
}

/// Run the `futur` binary against the toy campaign.
pub fn futur(out: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_futur"));
    cmd.args(args)
        .arg("--config")
        .arg(toy_config())
        .arg("--override")
        .arg(format!("campaign.output={}", out.display()));
    cmd.output().expect("futur runs")
}

pub fn text(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
