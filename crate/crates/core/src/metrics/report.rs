use std::io;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{CampaignMetrics, RoundingMode};
use crate::oracle::{BugRecord, BugStatus, Cause, Symptom};
use crate::util::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(title: &str, header: &[&str]) -> Self {
        Table {
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Cells of one row joined by single spaces, e.g. `MLX 35 32 0 3`.
    pub fn row_text(&self, label: &str) -> Option<String> {
        self.rows.iter().find(|r| r[0] == label).map(|r| r.join(" "))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {}\n\n| {} |\n|", self.title, self.header.join(" | "));
        for (i, _) in self.header.iter().enumerate() {
            out.push_str(if i == 0 { "---|" } else { "---:|" });
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("| {} |\n", r.join(" | ")));
        }
        out
    }
}

type Library<'a> = (&'a str, &'a [BugRecord]);

/// Appends per-library count rows plus a `Total` row of column sums.
fn counted(mut t: Table, libs: &[Library], columns: &[&dyn Fn(&BugRecord) -> bool]) -> Table {
    let mut totals = vec![0usize; columns.len()];
    for (name, bugs) in libs {
        let counts: Vec<usize> = columns.iter().map(|f| bugs.iter().filter(|b| f(b)).count()).collect();
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
        let mut row = vec![name.to_string()];
        row.extend(counts.iter().map(usize::to_string));
        t.rows.push(row);
    }
    let mut row = vec!["Total".to_string()];
    row.extend(totals.iter().map(usize::to_string));
    t.rows.push(row);
    t
}

/// Total / confirmed-unknown / confirmed-known / won't-fix per library.
pub fn status_table(libs: &[Library]) -> Table {
    let t = Table::new("Bugs by status", &["Library", "Total", "Confirmed (unknown)", "Confirmed (known)", "Won't fix"]);
    let is = |s: BugStatus| move |b: &BugRecord| b.status == s;
    counted(
        t,
        libs,
        &[
            &|_| true,
            &is(BugStatus::ConfirmedUnknown),
            &is(BugStatus::ConfirmedKnown),
            &is(BugStatus::WontFix),
        ],
    )
}

/// Total and EC/NI/LD/DBI/MPC per library; an `Other` column appears only
/// when some bug is unclassified.
pub fn cause_table(libs: &[Library]) -> Table {
    let any_other = libs.iter().flat_map(|(_, b)| b.iter()).any(|b| b.cause == Cause::Unclassified);
    let mut header = vec!["Library", "Total", "EC", "NI", "LD", "DBI", "MPC"];
    if any_other {
        header.push("Other");
    }
    let is = |c: Cause| move |b: &BugRecord| b.cause == c;
    let (ec, ni, ld, dbi, mpc, other) = (
        is(Cause::EC),
        is(Cause::NI),
        is(Cause::LD),
        is(Cause::DBI),
        is(Cause::MPC),
        is(Cause::Unclassified),
    );
    let mut cols: Vec<&dyn Fn(&BugRecord) -> bool> = vec![&|_| true, &ec, &ni, &ld, &dbi, &mpc];
    if any_other {
        cols.push(&other);
    }
    counted(Table::new("Bugs by cause", &header), libs, &cols)
}

pub fn symptom_table(libs: &[Library]) -> Table {
    let is = |s: Symptom| move |b: &BugRecord| b.symptom == s;
    let (crash, cg, st) = (is(Symptom::Crash), is(Symptom::CpuGpu), is(Symptom::SrcTar));
    counted(
        Table::new("Bugs by symptom", &["Library", "Crash", "CPU/GPU", "Src/Tar"]),
        libs,
        &[&crash, &cg, &st],
    )
}

fn metrics_table(metrics: &[CampaignMetrics], decimals: u32, mode: RoundingMode) -> Table {
    let mut t = Table::new("Campaign metrics", &["Library", "Success rate", "Validity rate", "API coverage"]);
    for m in metrics {
        t.rows.push(vec![
            m.library.clone(),
            m.success_rate().render(decimals, mode),
            m.validity_rate().render(decimals, mode),
            m.api_coverage().render(decimals, mode),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub tables: PathBuf,
    pub summary: PathBuf,
    pub metrics: PathBuf,
}

/// Write `tables.md`, `summary.tsv` and `metrics.ndrec` under `dir`.
pub fn emit_report(
    dir: &Path,
    metrics: &[CampaignMetrics],
    bugs: &[(String, Vec<BugRecord>)],
    decimals: u32,
    mode: RoundingMode,
) -> io::Result<ReportFiles> {
    let libs: Vec<Library> = bugs.iter().map(|(n, b)| (n.as_str(), b.as_slice())).collect();
    let tables = [
        metrics_table(metrics, decimals, mode),
        status_table(&libs),
        cause_table(&libs),
        symptom_table(&libs),
    ];
    let md = tables.iter().map(Table::to_markdown).collect::<Vec<_>>().join("\n");
    let files = ReportFiles {
        tables: dir.join("tables.md"),
        summary: dir.join("summary.tsv"),
        metrics: dir.join("metrics.ndrec"),
    };
    write_atomic(&files.tables, format!("# Campaign report\n\n{md}").as_bytes())?;

    let mut tsv = String::from("library\tmetric\tnumerator\tdenominator\tpercent\n");
    let mut nd = String::new();
    for m in metrics {
        for (name, r) in [
            ("success_rate", m.success_rate()),
            ("validity_rate", m.validity_rate()),
            ("api_coverage", m.api_coverage()),
        ] {
            tsv.push_str(&format!("{}\t{name}\t{}\t{}\t{}\n", m.library, r.num, r.den, r.percent(decimals, mode)));
        }
        let line = json!({
            "library": m.library,
            "n_his": m.n_his, "n_suc": m.n_suc, "n_all": m.n_all, "n_val": m.n_val,
            "suc_api": m.suc_api, "val_api": m.val_api, "tar_api": m.tar_api,
            "success_rate": m.success_rate().render(decimals, mode),
            "validity_rate": m.validity_rate().render(decimals, mode),
            "api_coverage": m.api_coverage().render(decimals, mode),
        });
        nd.push_str(&line.to_string());
        nd.push('\n');
    }
    for (lib, recs) in bugs {
        for s in [Symptom::Crash, Symptom::CpuGpu, Symptom::SrcTar] {
            let n = recs.iter().filter(|b| b.symptom == s).count();
            tsv.push_str(&format!("{lib}\tbugs.{s}\t{n}\t\t\n"));
        }
        for c in Cause::ALL {
            let n = recs.iter().filter(|b| b.cause == c).count();
            tsv.push_str(&format!("{lib}\tcause.{c}\t{n}\t\t\n"));
        }
        nd.push_str(&json!({"library": lib, "bugs": recs.len(), "records": recs}).to_string());
        nd.push('\n');
    }
    write_atomic(&files.summary, tsv.as_bytes())?;
    write_atomic(&files.metrics, nd.as_bytes())?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: usize, symptom: Symptom, cause: Cause, status: BugStatus) -> BugRecord {
        BugRecord {
            id: format!("b{i}"),
            library: "x".into(),
            seed_id: format!("s{i}"),
            symptom,
            cause,
            status,
            evidence: vec![],
            primary_api: "a".into(),
            signature: "distance".into(),
            crash_kind: None,
            details: String::new(),
            duplicates: vec![],
        }
    }

    fn many(n: usize, status: BugStatus) -> Vec<BugRecord> {
        (0..n).map(|i| rec(i, Symptom::Crash, Cause::NI, status)).collect()
    }

    #[test]
    fn status_rows_and_totals() {
        let mut mlx = many(32, BugStatus::ConfirmedUnknown);
        mlx.extend(many(3, BugStatus::WontFix));
        let mut ms = many(22, BugStatus::ConfirmedUnknown);
        ms.extend(many(6, BugStatus::ConfirmedKnown));
        ms.extend(many(2, BugStatus::WontFix));
        let of = many(83, BugStatus::ConfirmedUnknown);
        let t = status_table(&[("MLX", &mlx), ("MindSpore", &ms), ("OneFlow", &of)]);
        assert_eq!(t.row_text("MLX").unwrap(), "MLX 35 32 0 3");
        assert_eq!(t.row_text("MindSpore").unwrap(), "MindSpore 30 22 6 2");
        assert_eq!(t.row_text("Total").unwrap(), "Total 148 137 6 5");
    }

    #[test]
    fn empty_campaign() {
        let t = cause_table(&[("MLX", &[])]);
        assert_eq!(t.row_text("Total").unwrap(), "Total 0 0 0 0 0 0");
        assert_eq!(symptom_table(&[]).row_text("Total").unwrap(), "Total 0 0 0");
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(dir.path(), &[], &[], 1, RoundingMode::HalfUp).unwrap();
        assert!(std::fs::read_to_string(files.tables).unwrap().contains("| Total | 0 | 0 | 0 | 0 |"));
    }

    #[test]
    fn other_column_only_when_needed() {
        let b = vec![rec(0, Symptom::SrcTar, Cause::Unclassified, BugStatus::Potential)];
        let t = cause_table(&[("toy", &b)]);
        assert_eq!(t.header.last().unwrap(), "Other");
        assert_eq!(t.row_text("toy").unwrap(), "toy 1 0 0 0 0 0 1");
    }
}
