//! Collect source/target code pairs from a model, expand them by input
//! mutation, and write the fine-tuning datasets plus the trainer job file.
//! The model here is a canned rulebook, so the run is fully offline.
//!
//!     cargo run --example code_pairs

use std::path::Path;

use futur::backend::{Backend, Rulebook};
use futur::catalog;
use futur::dataset::{self, DatasetPolicy, FineTuneConfig};
use futur::library::{LibraryId, LibraryProfile};
use futur::pairs::{self, PairSettings};
use futur::prompt::{build_prompts, PromptContext, PromptTemplate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy");
    let target = LibraryProfile::new("toy", "ToyLib", &["toylib"], &[("tl", "import toylib as tl")]);
    let source = LibraryProfile::new("toytorch", "ToyTorch", &["toytorch"], &[("tt", "import toytorch as tt")]);
    let model = Backend::mock(Rulebook::load(&toy.join("rules.txt"))?);

    let apis = catalog::ingest_api_docs(&toy.join("docs"), &LibraryId::new("toy"))?;
    let ctx = PromptContext::new(&source.display_name, &target.display_name);
    let (mut collected, mut all_prompts) = (Vec::new(), Vec::new());
    for api in &apis {
        let prompts = build_prompts(api, &PromptTemplate::default(), 2048, &ctx).prompts;
        let g = pairs::generate_pairs(&prompts, &model, &PairSettings::with_limit(1), &source, &target);
        println!("{}: {} pairs, {} failures", api.name, g.pairs.len(), g.failures.len());
        collected.extend(g.pairs);
        all_prompts.extend(prompts);
    }

    let mut variants = Vec::new();
    for (i, p) in collected.iter().enumerate() {
        variants.extend(pairs::mutate_pair(p, 5, pairs::variant_seed(7, i)));
    }
    if let Some(v) = variants.first() {
        println!("\nvariant of {} ({}):\n{}", v.parent, v.edit_summary(), v.target_code);
    }

    let out = tempfile::tempdir()?;
    let policy = DatasetPolicy::default();
    let (gen, _) = dataset::build_generation_dataset(&collected, &variants, &all_prompts, &policy);
    let conv = dataset::build_conversion_dataset(&collected, &variants, &target.display_name, &policy);
    let gen_path = out.path().join("generation.jsonl");
    let conv_path = out.path().join("conversion.jsonl");
    dataset::write_dataset(&gen_path, &gen)?;
    dataset::write_dataset(&conv_path, &conv)?;
    println!("{} generation records, {} conversion records", gen.len(), conv.len());

    let job = FineTuneConfig {
        dataset_paths: vec![gen_path, conv_path],
        ..FineTuneConfig::default()
    };
    job.validate()?;
    print!("\n{}", job.to_text());
    Ok(())
}
