//! Execute one target-library program on CPU and GPU through the runner
//! protocol and compare the two result records.
//!
//!     cargo run --example run_seed

use std::path::Path;
use std::time::Duration;

use futur::harness::{run_seed, Device, Role, RunnerSpec};
use futur::oracle::{compare_backends, OracleConfig};

const SEED: &str = "import toylib as tl\nx = tl.array([1.0, 2.0, 3.0])\nout = tl.add(x, x)\n";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy");
    let runner = RunnerSpec::new(&["python3", toy.join("runner.py").to_str().unwrap()]);
    runner.check()?;

    let work = tempfile::tempdir()?;
    let seed = work.path().join("add.py");
    std::fs::write(&seed, SEED)?;

    let timeout = Duration::from_secs(10);
    let cpu = run_seed("add", &seed, Role::Target, Device::Cpu, &runner, timeout, work.path())?;
    let gpu = run_seed("add", &seed, Role::Target, Device::Gpu, &runner, timeout, work.path())?;
    for o in [&cpu, &gpu] {
        let values: Vec<_> = o.outputs.iter().map(|c| format!("{}={:?}", c.name, c.values)).collect();
        println!("{}: {} in {} ms, {}", o.device, o.status.label(), o.duration_ms, values.join(" "));
    }

    let v = compare_backends(&cpu, &gpu, &OracleConfig::with_threshold(1e-2));
    println!("verdict: {:?} (distance {:?}, threshold {})", v.kind, v.distance, v.threshold);
    Ok(())
}
