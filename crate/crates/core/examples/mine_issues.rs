//! Mine bug-triggering snippets from an offline issue dump.
//!
//!     cargo run --example mine_issues [dump.ndjson]

use std::path::PathBuf;

use futur::corpus::{self, CorpusStore};
use futur::library::{pytorch, ImportTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dump = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/nans_and_infs.ndjson")
    });
    let issues = corpus::read_dump(&dump)?;
    let out = tempfile::tempdir()?;
    let mut store = CorpusStore::create(out.path(), "py")?;
    let imports = ImportTable::from_profiles([&pytorch()]);
    let r = corpus::mine_issues(&issues, corpus::DEFAULT_KEYWORDS, &imports, &mut store)?;
    println!(
        "{} issues, {} snippets extracted, {} stored, {} rejected",
        r.issues, r.extracted, r.stored, r.rejected
    );
    let index = std::fs::read_to_string(out.path().join("index.tsv"))?;
    for line in index.lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
