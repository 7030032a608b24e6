//! Ingest a documentation bundle and turn each API into prompts. An example
//! that calls the API several times is split into one prompt per call site.
//!
//!     cargo run --example api_catalog

use std::path::Path;

use futur::catalog::{self, ApiInfo};
use futur::library::LibraryId;
use futur::prompt::{build_prompts, decompose_example, PromptContext, PromptTemplate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy/docs");
    let lib = LibraryId::new("toy");
    let apis = catalog::resolve_references(&catalog::ingest_api_docs(&docs, &lib)?);
    print!("{}", catalog::export_index(&apis));

    let example = "import toylib as tl\na = tl.eye(2)\nb = tl.eye(3)\nc = tl.add(a, a)\n";
    let d = decompose_example(example, "toylib.eye");
    println!("\n{} snippets from a two-call example:", d.snippets.len());
    for s in &d.snippets {
        println!("---\n{s}");
    }

    let mut eye = ApiInfo::new("toylib.eye", &lib, "Identity matrix.");
    eye.examples.push(example.to_string());
    let ctx = PromptContext::new("ToyTorch", "ToyLib");
    let built = build_prompts(&eye, &PromptTemplate::default(), 2048, &ctx);
    println!("\n{} prompts; the first one reads:\n{}", built.prompts.len(), built.prompts[0].rendered);
    Ok(())
}
