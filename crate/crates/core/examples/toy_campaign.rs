//! A full campaign against the toy libraries, every stage in dependency
//! order, ending with the bug tables.
//!
//!     cargo run --example toy_campaign

use std::path::Path;

use futur::pipeline::{Pipeline, StageStatus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy/toy.ini");
    let out = tempfile::tempdir()?;
    let p = Pipeline::load(&config, &[format!("campaign.output={}", out.path().display())])?;
    p.run_all(|stage, status| match status {
        StageStatus::Ran(summary) => println!("{stage}: {summary}"),
        StageStatus::UpToDate => println!("{stage}: up to date"),
    })?;
    println!();
    print!("{}", std::fs::read_to_string(out.path().join("report/tables.md"))?);
    Ok(())
}
