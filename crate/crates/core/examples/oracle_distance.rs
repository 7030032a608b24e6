//! The differential oracle on hand-made captures: NaN/Inf-aware distance,
//! the normalized threshold test, and the root-cause vote.
//!
//!     cargo run --example oracle_distance

use futur::harness::NumericCapture;
use futur::oracle::{classify_cause, euclidean_distance, normalized_distance, CauseEvidence, Distance};

fn cap(values: &[f64]) -> NumericCapture {
    NumericCapture::new("y", vec![values.len()], "float32", values.to_vec())
}

fn show(d: Distance) -> String {
    match d {
        Distance::Value(v) => format!("{v:.6}"),
        Distance::Structural(m) => format!("{m:?}"),
    }
}

fn main() {
    let cases: [(&str, &[f64], &[f64]); 5] = [
        ("equal", &[1.0, 2.0], &[1.0, 2.0]),
        ("small drift", &[100.0, 200.0], &[100.0, 200.5]),
        ("nan on one side", &[f64::NAN, 1.0], &[0.0, 1.0]),
        ("nan on both", &[f64::NAN, 1.0], &[f64::NAN, 1.0]),
        ("opposite infs", &[f64::INFINITY], &[f64::NEG_INFINITY]),
    ];
    let t = 1e-2;
    println!("{:<16} {:>14} {:>14}  bug at t={t}", "case", "distance", "normalized");
    for (name, a, b) in cases {
        let d = euclidean_distance(&cap(a), &cap(b));
        let n = normalized_distance(&cap(a), &cap(b));
        let bug = n.value().map_or(true, |v| v > t);
        println!("{name:<16} {:>14} {:>14}  {bug}", show(d), show(n));
    }
    let shape = euclidean_distance(&cap(&[1.0]), &cap(&[1.0, 1.0]));
    println!("shape mismatch: {}", show(shape));

    let evidence = CauseEvidence {
        nan_inf_input: false,
        boundary_value: false,
        out_of_domain: true,
        backend_divergence: true,
        manual: None,
    };
    println!("\nhuge size on a diverging backend -> {:?}", classify_cause(&evidence));
}
