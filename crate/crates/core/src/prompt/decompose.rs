use std::collections::BTreeSet;

use regex::Regex;

use crate::python::{self, terminal_name};

/// Call-site occurrences of the API's terminal name: a whole identifier
/// immediately followed by an argument list.
pub fn count_api_occurrences(example: &str, api_name: &str) -> usize {
    let name = terminal_name(api_name);
    if name.is_empty() {
        return 0;
    }
    let re = Regex::new(&format!(r"\b{}\s*\(", regex::escape(name))).expect("escaped pattern");
    re.find_iter(example)
        .filter(|m| {
            // `\b` treats `.` as a boundary but not `_`; reject a preceding
            // identifier character that regex word boundaries miss.
            example[..m.start()]
                .chars()
                .next_back()
                .map_or(true, |c| !(c.is_alphanumeric() || c == '_'))
        })
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub snippets: Vec<String>,
    /// The example could not be split and is returned whole.
    pub undecomposed: bool,
}

impl Decomposition {
    fn whole(example: &str, undecomposed: bool) -> Self {
        Decomposition {
            snippets: vec![example.to_string()],
            undecomposed,
        }
    }
}

/// Split an example that uses the API `k` times into `k` standalone
/// snippets. Each snippet holds one call-site statement preceded by the
/// top-level statements it transitively depends on (statement-granular
/// backward slice). Falls back to the whole example, flagged, when the
/// example does not parse or a slice cannot isolate a single call site.
pub fn decompose_example(example: &str, api_name: &str) -> Decomposition {
    let k = count_api_occurrences(example, api_name);
    if k <= 1 {
        return Decomposition::whole(example, false);
    }
    let facts = match python::top_level_facts(example, terminal_name(api_name)) {
        Ok(f) => f,
        Err(e) => {
            log::debug!("{api_name}: example does not parse ({e}); kept whole");
            return Decomposition::whole(example, true);
        }
    };
    if facts.iter().any(|f| f.api_calls > 1) {
        return Decomposition::whole(example, true);
    }
    let call_stmts: Vec<usize> = (0..facts.len()).filter(|&i| facts[i].api_calls == 1).collect();
    if call_stmts.len() != k {
        return Decomposition::whole(example, true);
    }

    let mut snippets = Vec::with_capacity(k);
    for &site in &call_stmts {
        let mut needed: BTreeSet<&str> = facts[site].uses.iter().map(String::as_str).collect();
        let mut keep = vec![site];
        for j in (0..site).rev() {
            if facts[j].defs.iter().any(|d| needed.contains(d.as_str())) {
                if facts[j].api_calls > 0 {
                    return Decomposition::whole(example, true);
                }
                keep.push(j);
                needed.extend(facts[j].uses.iter().map(String::as_str));
            }
        }
        keep.sort_unstable();
        let mut text = keep
            .iter()
            .map(|&i| &example[facts[i].span.clone()])
            .collect::<Vec<_>>()
            .join("\n");
        text.push('\n');
        if !python::is_parseable(&text) || count_api_occurrences(&text, api_name) != 1 {
            return Decomposition::whole(example, true);
        }
        snippets.push(text);
    }
    Decomposition {
        snippets,
        undecomposed: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_call_sites() {
        assert_eq!(count_api_occurrences("mx.eye(3)", "eye"), 1);
        assert_eq!(count_api_occurrences("a = mx.eye(3)\nb = mx.eye(2, 4)\n", "mlx.core.eye"), 2);
        assert_eq!(count_api_occurrences("eyeball(3)", "eye"), 0);
        assert_eq!(count_api_occurrences("my_eye(3)\nx = eye\n", "eye"), 0);
        assert_eq!(count_api_occurrences("eye (3)", "eye"), 1);
    }

    #[test]
    fn single_use_is_identity() {
        let ex = "import mlx.core as mx\nx = mx.eye(3)\n";
        assert_eq!(decompose_example(ex, "mlx.core.eye"), Decomposition::whole(ex, false));
    }

    #[test]
    fn independent_producers_are_split() {
        let ex = "a = make()\nf(a)\nb = make2()\nf(b)\n";
        let d = decompose_example(ex, "f");
        assert!(!d.undecomposed);
        assert_eq!(d.snippets, vec!["a = make()\nf(a)\n", "b = make2()\nf(b)\n"]);
    }

    #[test]
    fn shared_producer_is_duplicated() {
        let ex = "import mlx.core as mx\nx = mx.array([1.0, 2.0])\ny = mx.sum(x)\nz = mx.sum(x, axis=0)\n";
        let d = decompose_example(ex, "mlx.core.sum");
        assert_eq!(
            d.snippets,
            vec![
                "import mlx.core as mx\nx = mx.array([1.0, 2.0])\ny = mx.sum(x)\n",
                "import mlx.core as mx\nx = mx.array([1.0, 2.0])\nz = mx.sum(x, axis=0)\n",
            ]
        );
    }

    #[test]
    fn transitive_dependencies_follow() {
        let ex = "import m\nn = 3\nshape = (n, n)\nunused = 7\nm.f(shape)\nm.f(n)\n";
        let d = decompose_example(ex, "f");
        assert_eq!(d.snippets[0], "import m\nn = 3\nshape = (n, n)\nm.f(shape)\n");
        assert_eq!(d.snippets[1], "import m\nn = 3\nm.f(n)\n");
    }

    #[test]
    fn unparseable_falls_back() {
        let ex = "f(1)\nf(2\n";
        let d = decompose_example(ex, "f");
        assert!(d.undecomposed);
        assert_eq!(d.snippets, vec![ex]);
    }

    #[test]
    fn two_calls_in_one_statement_fall_back() {
        let d = decompose_example("print(f(1), f(2))\n", "f");
        assert!(d.undecomposed);
    }
}
