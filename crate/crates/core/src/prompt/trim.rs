/// Token count estimate for a piece of text.
pub type Estimator = fn(&str) -> usize;

/// Four characters per token, rounded up.
pub fn chars_div_4(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Changelog,
    SeeAlso,
    Notes,
    Other,
    Description,
    Example,
    Returns,
    Params,
    Summary,
}

fn header_kind(line: &str) -> Option<Kind> {
    let t = line.trim().trim_end_matches(':').trim().to_ascii_lowercase();
    let t = t.trim_start_matches("..").trim();
    Some(match t {
        "args" | "arguments" | "parameters" | "params" | "keyword args" | "keyword arguments" => Kind::Params,
        "returns" | "return" | "yields" | "return type" => Kind::Returns,
        "example" | "examples" => Kind::Example,
        "note" | "notes" | "warning" | "warnings" => Kind::Notes,
        "see also" => Kind::SeeAlso,
        "changelog" | "changes" | "version history" => Kind::Changelog,
        _ if t.starts_with("versionchanged")
            || t.starts_with("versionadded")
            || t.starts_with("changed in version")
            || t.starts_with("added in version") =>
        {
            Kind::Changelog
        }
        _ => return None,
    })
}

fn is_underline(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 3 && t.chars().all(|c| c == '-' || c == '=')
}

struct Section {
    kind: Kind,
    lines: Vec<String>,
}

fn sections(doc: &str) -> Vec<Section> {
    let mut out: Vec<Section> = Vec::new();
    let mut summary_done = false;
    for line in doc.lines() {
        if !summary_done {
            if line.trim().is_empty() {
                continue;
            }
            out.push(Section {
                kind: Kind::Summary,
                lines: vec![line.to_string()],
            });
            summary_done = true;
            continue;
        }
        if is_underline(line) {
            if let Some(s) = out.last_mut() {
                s.lines.push(line.to_string());
            }
            continue;
        }
        if let Some(kind) = header_kind(line) {
            out.push(Section {
                kind,
                lines: vec![line.to_string()],
            });
            continue;
        }
        match out.last_mut() {
            Some(s) if s.kind != Kind::Summary => s.lines.push(line.to_string()),
            _ => out.push(Section {
                kind: Kind::Description,
                lines: vec![line.to_string()],
            }),
        }
    }
    out
}

fn render(secs: &[Section]) -> String {
    let lines: Vec<&str> = secs.iter().flat_map(|s| s.lines.iter().map(String::as_str)).collect();
    lines.join("\n").trim_end().to_string()
}

/// Shrink `doc` to fit `budget` tokens. Sections are dropped in the order
/// changelog, see-also, notes, unrecognised, free description; the example
/// section is cut to its first reference line before going; returns and
/// parameters go last. The summary line is truncated as a last resort.
pub fn trim_doc(doc: &str, budget: usize, estimate: Estimator) -> String {
    if estimate(doc) <= budget {
        return doc.to_string();
    }
    let mut secs = sections(doc);
    for kind in [
        Kind::Changelog,
        Kind::SeeAlso,
        Kind::Notes,
        Kind::Other,
        Kind::Description,
        Kind::Example,
        Kind::Returns,
        Kind::Params,
    ] {
        if kind == Kind::Example {
            for s in secs.iter_mut().filter(|s| s.kind == Kind::Example) {
                // header line plus the first non-empty body line
                let first = s.lines.iter().skip(1).find(|l| !l.trim().is_empty() && !is_underline(l)).cloned();
                s.lines.truncate(1);
                s.lines.extend(first);
            }
            if estimate(&render(&secs)) <= budget {
                return render(&secs);
            }
        }
        secs.retain(|s| s.kind != kind);
        let text = render(&secs);
        if estimate(&text) <= budget {
            return text;
        }
    }
    let summary = render(&secs);
    let first_line = summary.lines().next().unwrap_or("");
    let mut chars: Vec<char> = first_line.chars().take(budget.saturating_mul(4)).collect();
    while !chars.is_empty() && estimate(&chars.iter().collect::<String>()) > budget {
        chars.pop();
    }
    chars.into_iter().collect()
}
