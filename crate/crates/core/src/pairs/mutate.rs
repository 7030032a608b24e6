use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CodePair;
use crate::python::{self, NumericLiteral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    S,
    T,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::S => "S",
            Side::T => "T",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub side: Side,
    /// Byte offset of the replaced literal in the parent text.
    pub start: usize,
    pub end: usize,
    pub old: String,
    pub new: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutatedPair {
    pub parent: String,
    pub api: String,
    pub mutation_index: usize,
    pub rng_seed: u64,
    pub edits: Vec<Edit>,
    pub source_code: String,
    pub target_code: String,
    /// The parent had no mutable literals; this is a verbatim copy.
    #[serde(default)]
    pub unmutated: bool,
}

impl MutatedPair {
    pub fn edit_summary(&self) -> String {
        if self.edits.is_empty() {
            return "-".into();
        }
        self.edits
            .iter()
            .map(|e| format!("{}@{}:{}->{}", e.side, e.start, e.old, e.new))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// A mutable input: a literal on one side, or the same literal on both sides
/// at corresponding argument positions.
#[derive(Debug, Clone)]
struct Unit {
    s: Option<NumericLiteral>,
    t: Option<NumericLiteral>,
}

impl Unit {
    fn is_float(&self) -> bool {
        self.s.iter().chain(self.t.iter()).any(|l| l.is_float)
    }
}

fn units(pair: &CodePair) -> Vec<Unit> {
    let s = python::input_literals(&pair.source_code).unwrap_or_default();
    let mut t: Vec<Option<NumericLiteral>> = python::input_literals(&pair.target_code)
        .unwrap_or_default()
        .into_iter()
        .map(Some)
        .collect();
    let mut out = Vec::new();
    for sl in s {
        let partner = t.iter_mut().find(|tl| {
            tl.as_ref().is_some_and(|tl| {
                tl.arg == sl.arg && tl.path == sl.path && tl.value.to_bits() == sl.value.to_bits()
            })
        });
        let tl = partner.and_then(Option::take);
        out.push(Unit { s: Some(sl), t: tl });
    }
    out.extend(t.into_iter().flatten().map(|tl| Unit { s: None, t: Some(tl) }));
    out
}

/// Number of independently mutable inputs in a pair (coupled literals count once).
pub fn mutable_inputs(pair: &CodePair) -> usize {
    units(pair).len()
}

/// Per-variant seed; variant `i` does not depend on how many variants are requested.
pub fn variant_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Replacement text drawn from the mutation mixture: 40% small uniform,
/// 20% 32-bit-range integer, 15% zero / negative zero / one, 15% extreme
/// magnitude, 10% NaN / ±Inf. Integer literals stay integers and never take
/// the NaN / Inf bucket.
pub fn draw_value(rng: &mut impl Rng, is_float: bool) -> String {
    let total = if is_float { 100 } else { 90 };
    let bucket = rng.gen_range(0..total);
    if bucket < 40 {
        if is_float {
            format!("{:?}", rng.gen_range(-10.0f64..=10.0))
        } else {
            rng.gen_range(-10i64..=10).to_string()
        }
    } else if bucket < 60 {
        let v = rng.gen_range(-(1i64 << 31)..=(1i64 << 31));
        if is_float {
            format!("{v}.0")
        } else {
            v.to_string()
        }
    } else if bucket < 75 {
        let choices: &[&str] = if is_float { &["0.0", "-0.0", "1.0"] } else { &["0", "0", "1"] };
        choices.choose(rng).expect("non-empty").to_string()
    } else if bucket < 90 {
        let choices: &[&str] = if is_float {
            &["1e38", "-1e38", "1e-38", "-1e-38", "1e308", "-1e308"]
        } else {
            &[
                "100000000000000000000000000000000000000",
                "-100000000000000000000000000000000000000",
                "9223372036854775807",
                "-9223372036854775808",
            ]
        };
        choices.choose(rng).expect("non-empty").to_string()
    } else {
        ["float('nan')", "float('inf')", "-float('inf')"]
            .choose(rng)
            .expect("non-empty")
            .to_string()
    }
}

fn splice(text: &str, edits: &[&Edit]) -> String {
    let mut sorted: Vec<&&Edit> = edits.iter().collect();
    sorted.sort_by_key(|e| e.start);
    let mut out = String::with_capacity(text.len() + 16);
    let mut at = 0;
    for e in sorted {
        out.push_str(&text[at..e.start]);
        out.push_str(&e.new);
        at = e.end;
    }
    out.push_str(&text[at..]);
    out
}

/// `m` variants of `pair`. Each variant replaces a uniformly random non-empty
/// subset of the mutable inputs; coupled literals receive the same new value
/// on both sides. Deterministic in `(pair, m, seed)`.
pub fn mutate_pair(pair: &CodePair, m: usize, seed: u64) -> Vec<MutatedPair> {
    let units = units(pair);
    (0..m)
        .map(|i| {
            let vseed = variant_seed(seed, i);
            let mut variant = MutatedPair {
                parent: pair.id.clone(),
                api: pair.api.clone(),
                mutation_index: i,
                rng_seed: vseed,
                edits: Vec::new(),
                source_code: pair.source_code.clone(),
                target_code: pair.target_code.clone(),
                unmutated: units.is_empty(),
            };
            if units.is_empty() {
                return variant;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(vseed);
            // Each unit in with probability 1/2, redrawn when empty: uniform
            // over non-empty subsets.
            let chosen: Vec<&Unit> = loop {
                let c: Vec<&Unit> = units.iter().filter(|_| rng.gen_bool(0.5)).collect();
                if !c.is_empty() {
                    break c;
                }
            };
            for u in chosen {
                let new = draw_value(&mut rng, u.is_float());
                for (side, lit) in [(Side::S, &u.s), (Side::T, &u.t)] {
                    if let Some(l) = lit {
                        variant.edits.push(Edit {
                            side,
                            start: l.span.start,
                            end: l.span.end,
                            old: l.text.clone(),
                            new: new.clone(),
                        });
                    }
                }
            }
            variant.edits.sort_by_key(|e| (e.side == Side::T, e.start));
            let s_edits: Vec<&Edit> = variant.edits.iter().filter(|e| e.side == Side::S).collect();
            let t_edits: Vec<&Edit> = variant.edits.iter().filter(|e| e.side == Side::T).collect();
            variant.source_code = splice(&pair.source_code, &s_edits);
            variant.target_code = splice(&pair.target_code, &t_edits);
            variant
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::LibraryId;

    fn pair(s: &str, t: &str) -> CodePair {
        CodePair {
            id: "mlx/mlx.core.eye/0".into(),
            api: "mlx.core.eye".into(),
            library: LibraryId::new("mlx"),
            source_code: s.into(),
            target_code: t.into(),
            prompt_ref: "mlx/mlx.core.eye/0".into(),
            pair_index: 0,
        }
    }

    #[test]
    fn count_and_determinism() {
        let p = pair("import torch\ntorch.eye(3, 4)\n", "import mlx.core as mx\nmx.eye(3, 4)\n");
        let a = mutate_pair(&p, 100, 7);
        assert_eq!(a.len(), 100);
        assert_eq!(a, mutate_pair(&p, 100, 7));
        assert_ne!(a, mutate_pair(&p, 100, 8));
        assert!(a.iter().all(|v| !v.edits.is_empty() && !v.unmutated));
    }

    #[test]
    fn shared_literals_move_together() {
        let p = pair("import torch\ntorch.eye(3, 4)\n", "import mlx.core as mx\nmx.eye(3, 4)\n");
        assert_eq!(mutable_inputs(&p), 2);
        for v in mutate_pair(&p, 50, 1) {
            let s: Vec<_> = v.edits.iter().filter(|e| e.side == Side::S).map(|e| (&e.old, &e.new)).collect();
            let t: Vec<_> = v.edits.iter().filter(|e| e.side == Side::T).map(|e| (&e.old, &e.new)).collect();
            assert_eq!(s, t);
        }
    }

    #[test]
    fn unshared_literals_are_independent_units() {
        let p = pair("import torch\ntorch.eye(3)\n", "import mlx.core as mx\nmx.eye(5)\n");
        assert_eq!(mutable_inputs(&p), 2);
    }

    #[test]
    fn no_literals_gives_flagged_copies() {
        let p = pair("import torch\ntorch.eye(n)\n", "import mlx.core as mx\nmx.eye(n)\n");
        let v = mutate_pair(&p, 4, 0);
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|x| x.unmutated && x.source_code == p.source_code && x.edits.is_empty()));
    }

    #[test]
    fn variants_still_parse() {
        let p = pair(
            "import torch\nx = torch.tensor([1.5, -2.0, 3.0])\ny = torch.sum(x, dim=0)\n",
            "import mlx.core as mx\nx = mx.array([1.5, -2.0, 3.0])\ny = mx.sum(x, axis=0)\n",
        );
        for v in mutate_pair(&p, 200, 3) {
            assert!(python::is_parseable(&v.source_code), "{}", v.source_code);
            assert!(python::is_parseable(&v.target_code), "{}", v.target_code);
        }
    }

    #[test]
    fn int_literals_never_become_nan() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            let v = draw_value(&mut rng, false);
            assert!(!v.contains("float") && !v.contains('.') && !v.contains('e'), "{v}");
        }
    }
}
