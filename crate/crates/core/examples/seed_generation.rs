//! Produce seed programs for the target library two ways: by converting
//! mined source-library bug codes, and by asking the model for fresh
//! snippets per API (each paired with a source-library counterpart).
//!
//!     cargo run --example seed_generation

use std::path::Path;

use futur::backend::{Backend, Rulebook};
use futur::catalog;
use futur::corpus::{self, CorpusStore};
use futur::library::{ImportTable, LibraryId, LibraryProfile};
use futur::seeds::{self, SeedBatch, SeedContext};

fn show(what: &str, batch: &SeedBatch) {
    println!("{what}: {} seeds in {} attempts, failures {:?}", batch.seeds.len(), batch.attempts, batch.failures);
    for s in &batch.seeds {
        println!("--- {} [{}]\n{}", s.id, s.target_apis.join(", "), s.text.trim_end());
        if let Some(src) = &s.paired_source {
            println!("  source counterpart:\n    {}", src.trim_end().replace('\n', "\n    "));
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy");
    let target = LibraryProfile::new("toy", "ToyLib", &["toylib"], &[("tl", "import toylib as tl")]);
    let source = LibraryProfile::new("toytorch", "ToyTorch", &["toytorch"], &[("tt", "import toytorch as tt")]);
    let model = Backend::mock(Rulebook::load(&toy.join("rules.txt"))?);
    let apis = catalog::ingest_api_docs(&toy.join("docs"), &LibraryId::new("toy"))?;
    let ctx = SeedContext::new(&source, &target, &apis);

    let dir = tempfile::tempdir()?;
    let mut store = CorpusStore::create(dir.path(), "py")?;
    let issues = corpus::read_dump(&toy.join("issues.ndjson"))?;
    corpus::mine_issues(&issues, corpus::DEFAULT_KEYWORDS, &ImportTable::from_profiles([&source]), &mut store)?;

    show("converted", &seeds::convert_corpus(store.codes(), &model, &ctx));
    println!();
    show("generated", &seeds::generate_random(&apis, 3, &model, &ctx, true));
    Ok(())
}
