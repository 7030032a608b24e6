//! Campaign metrics: exact rates with configurable rounding, API coverage,
//! and the behavior signatures used to judge a bug reproduction.
//!
//!     cargo run --example campaign_metrics

use std::collections::BTreeSet;

use futur::metrics::{api_coverage, BehaviorSignature, Rate, RoundingMode};

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn main() {
    let r = Rate::new(93, 148);
    println!("93/148 truncated: {}", r.render(2, RoundingMode::Truncate));
    println!("93/148 half-up:   {}", r.render(2, RoundingMode::HalfUp));
    println!("0/0:              {}", Rate::new(0, 0).render(1, RoundingMode::HalfUp));

    let tar = set(&["mx.abs", "mx.add", "mx.eye", "mx.sum"]);
    let suc = set(&["mx.abs", "mx.sum"]);
    let val = set(&["mx.eye", "mx.sum"]);
    let cov = api_coverage(&suc, &val, &tar);
    println!("\ncoverage: {}", cov.render(1, RoundingMode::HalfUp));

    let issues = [
        ("eye crashes", "Segmentation fault (core dumped)"),
        ("bad message", "ValueError: Invalid axis 3 for array of 2 dims"),
        ("cpu/gpu mismatch", "sum differs between CPU and GPU"),
        ("log returns nan", "log(-1) gives nan"),
        ("docs typo", "the docstring says int"),
    ];
    println!();
    for (title, text) in issues {
        println!("{title:<18} {:?}", BehaviorSignature::from_issue(title, text));
    }
}
