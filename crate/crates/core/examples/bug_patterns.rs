//! Abstract the inputs of each found bug into a pattern and re-instantiate
//! it as probe programs for the source library.
//!
//!     cargo run --example bug_patterns

use std::collections::BTreeMap;
use std::path::Path;

use futur::library::LibraryProfile;
use futur::oracle::{self, BacktestSpec, SourceApiMap};
use futur::pairs;
use futur::pipeline::{Pipeline, Stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy/toy.ini");
    let out = tempfile::tempdir()?;
    let p = Pipeline::load(&config, &[format!("campaign.output={}", out.path().display())])?;
    for st in Stage::ALL.iter().take_while(|s| **s != Stage::Backtest) {
        p.run_stage(*st)?;
    }

    let patterns = oracle::read_patterns(&out.path().join("bugs/patterns.ndrec"))?;
    for pat in &patterns {
        let args: Vec<_> = pat.args.iter().map(|a| format!("{}:{:?}", a.shape_class, a.value_class)).collect();
        println!("{}({}) from {}", pat.api, args.join(", "), pat.source_bugs.join(" "));
    }

    let source = LibraryProfile::new("toytorch", "ToyTorch", &["toytorch"], &[("tt", "import toytorch as tt")]);
    let found = pairs::load_pairs(&out.path().join("pairs"), &futur::library::LibraryId::new("toy"))?;
    let map = SourceApiMap::infer(&found, &source, &BTreeMap::new());
    let spec = BacktestSpec {
        source: &source,
        array_ctor: "tt.tensor".into(),
        map: &map,
    };
    let (probes, skipped) = oracle::plan_probes(&patterns, &spec);
    for probe in &probes {
        println!("\n# {} -> {}\n{}", probe.pattern_api, probe.source_api, probe.text);
    }
    for (api, why) in skipped {
        println!("skipped {api}: {why}");
    }
    Ok(())
}
