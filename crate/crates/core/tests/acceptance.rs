//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always print.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use futur::backend::{conversion_problem, CodeModel, Rulebook};
use futur::corpus::{self, CorpusStore, FetchMode};
use futur::dataset::{ConversionRecord, FineTuneConfig, GenerationRecord};
use futur::harness::{
    run_campaign, run_seed, CampaignConfig, CrashKind, Device, ExecStatus, Job, JobKey, NumericCapture, Role,
    RunnerSpec,
};
use futur::library::{ImportTable, LibraryId, LibraryProfile, Registry};
use futur::metrics::{api_coverage, Rate, RoundingMode};
use futur::oracle::{euclidean_distance, Cause, Distance, Mismatch, SeedJudgement, Symptom, VerdictKind};
use futur::pairs::{self, mutate_pair, CodePair, PairSettings};
use futur::pipeline::Stage;
use futur::prompt::{count_api_occurrences, decompose_example};
use futur::python;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 -------------------------------------------------------------------------

fn metrics_fixtures() -> Check {
    let cases: [(u64, u64, u32, RoundingMode, &str); 5] = [
        (156, 1530, 1, RoundingMode::HalfUp, "10.2"),
        (9, 43, 1, RoundingMode::HalfUp, "20.9"),
        (2894, 3000, 1, RoundingMode::HalfUp, "96.5"),
        (443, 452, 1, RoundingMode::HalfUp, "98.0"),
        (93, 148, 2, RoundingMode::Truncate, "62.83"),
    ];
    for (n, d, dec, mode, want) in cases {
        let r = Rate::new(n, d);
        ensure(r.ratio() == Some(Ratio::new(n, d)), || format!("{n}/{d}: ratio not exact"))?;
        let got = r.percent(dec, mode);
        ensure(got == want, || format!("{n}/{d} rendered {got}, expected {want}"))?;
    }
    Ok("5 published rates reproduced".into())
}

// 2 -------------------------------------------------------------------------

fn coverage_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for u in 0..1000 {
        let n = rng.gen_range(0..=20);
        let tar: Vec<String> = (0..n).map(|i| format!("lib.api{i}")).collect();
        // successes and valid generations may mention APIs outside the catalog
        let pick = |rng: &mut ChaCha8Rng| -> Vec<String> {
            (0..rng.gen_range(0..25)).map(|_| format!("lib.api{}", rng.gen_range(0..25))).collect()
        };
        let suc = pick(&mut rng);
        let val = pick(&mut rng);
        // enumerate the universe of every mentioned name with plain scans
        let mut universe: Vec<&String> = Vec::new();
        for x in tar.iter().chain(&suc).chain(&val) {
            if !universe.contains(&x) {
                universe.push(x);
            }
        }
        let best = universe
            .iter()
            .filter(|x| tar.contains(x) && (suc.contains(x) || val.contains(x)))
            .count();
        let set = |v: &[String]| v.iter().cloned().collect::<BTreeSet<_>>();
        let got = api_coverage(&set(&suc), &set(&val), &set(&tar));
        ensure(got == Rate::new(best as u64, n as u64), || format!("universe {u}: {got:?} vs {best}/{n}"))?;
    }
    Ok("1000 universes agree".into())
}

// 3 -------------------------------------------------------------------------

fn brute_distance(a: &[f64], b: &[f64], sa: &[usize], sb: &[usize]) -> Result<f64, Mismatch> {
    if sa != sb {
        return Err(Mismatch::Shape);
    }
    let mut acc = 0.0f64;
    for i in 0..a.len() {
        let (x, y) = (a[i], b[i]);
        if x.is_nan() && y.is_nan() {
            continue;
        }
        if x.is_nan() || y.is_nan() {
            return Err(Mismatch::NanMismatch);
        }
        if x.is_infinite() || y.is_infinite() {
            if x == y {
                continue;
            }
            return Err(Mismatch::InfMismatch);
        }
        acc += (x - y) * (x - y);
    }
    Ok(acc.sqrt())
}

fn cap(shape: &[usize], values: &[f64]) -> NumericCapture {
    NumericCapture::new("y", shape.to_vec(), "float64", values.to_vec())
}

fn distance_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let special = [f64::NAN, f64::INFINITY, f64::NEG_INFINITY];
    for case in 0..10_000 {
        let len = rng.gen_range(0..=64usize);
        let shape = vec![len];
        let other_shape = if rng.gen_bool(0.05) { vec![1, len] } else { shape.clone() };
        let mut a: Vec<f64> = (0..len).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let mut b: Vec<f64> = a.iter().map(|x| x + rng.gen_range(-1.0..1.0)).collect();
        if len > 0 && rng.gen_bool(0.3) {
            let i = rng.gen_range(0..len);
            let s = special[rng.gen_range(0..3)];
            a[i] = s;
            b[i] = if rng.gen_bool(0.6) { s } else { special[rng.gen_range(0..3)] };
        }
        let got = euclidean_distance(&cap(&shape, &a), &cap(&other_shape, &b));
        let want = brute_distance(&a, &b, &shape, &other_shape);
        let ok = match (got, want) {
            (Distance::Value(g), Ok(w)) => (g - w).abs() <= 1e-12 * w.max(1.0),
            (Distance::Structural(g), Err(w)) => g == w,
            _ => false,
        };
        ensure(ok, || format!("case {case}: {got:?} vs {want:?}"))?;
    }

    let (nan, inf) = (f64::NAN, f64::INFINITY);
    let table: [(&[f64], &[f64], Result<f64, Mismatch>); 12] = [
        (&[nan], &[nan], Ok(0.0)),
        (&[nan], &[1.0], Err(Mismatch::NanMismatch)),
        (&[1.0], &[nan], Err(Mismatch::NanMismatch)),
        (&[inf], &[inf], Ok(0.0)),
        (&[-inf], &[-inf], Ok(0.0)),
        (&[inf], &[-inf], Err(Mismatch::InfMismatch)),
        (&[inf], &[1e308], Err(Mismatch::InfMismatch)),
        (&[nan], &[inf], Err(Mismatch::NanMismatch)),
        (&[nan, 1.0], &[nan, 4.0], Ok(3.0)),
        (&[inf, 0.0], &[inf, 4.0], Ok(4.0)),
        (&[], &[], Ok(0.0)),
        (&[1.0, 2.0], &[1.0, 2.0], Ok(0.0)),
    ];
    for (i, (a, b, want)) in table.iter().enumerate() {
        let got = euclidean_distance(&cap(&[a.len()], a), &cap(&[b.len()], b));
        let ok = match (got, want) {
            (Distance::Value(g), Ok(w)) => g == *w,
            (Distance::Structural(g), Err(w)) => g == *w,
            _ => false,
        };
        ensure(ok, || format!("table row {i}: {got:?}, expected {want:?}"))?;
    }
    ensure(
        euclidean_distance(&cap(&[2], &[1.0, 2.0]), &cap(&[2, 1], &[1.0, 2.0])) == Distance::Structural(Mismatch::Shape),
        || "shape rule".into(),
    )?;
    Ok("10000 random pairs and 12 structural cases".into())
}

// 4 -------------------------------------------------------------------------

fn decomposition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let apis = ["mlx.core.sum", "mlx.core.exp", "mlx.core.eye"];
    for e in 0..200 {
        let k = rng.gen_range(1..=5usize);
        let api = apis[e % apis.len()];
        let call = api.replace("mlx.core.", "mx.");
        let mut lines = vec!["import mlx.core as mx".to_string(), "base = mx.array([1.0, 2.0, 3.0])".to_string()];
        let mut sites = Vec::new();
        for i in 0..k {
            if rng.gen_bool(0.5) {
                lines.push(format!("a{i} = base * {}", i + 1));
            } else {
                lines.push(format!("a{i} = mx.array([{}.0, float('nan')])", i));
            }
            let site = format!("r{i} = {call}(a{i})");
            lines.push(site.clone());
            sites.push(site);
            if rng.gen_bool(0.3) {
                lines.push(format!("print(r{i})"));
            }
        }
        let example = lines.join("\n") + "\n";
        let d = decompose_example(&example, api);
        ensure(d.snippets.len() == k, || format!("example {e}: {} snippets for k={k}\n{example}", d.snippets.len()))?;
        for s in &d.snippets {
            ensure(count_api_occurrences(s, api) == 1, || format!("example {e}: snippet uses the API more than once:\n{s}"))?;
            ensure(python::is_parseable(s), || format!("example {e}: snippet does not parse:\n{s}"))?;
        }
        for site in &sites {
            ensure(d.snippets.iter().any(|s| s.lines().any(|l| l.trim() == site)), || {
                format!("example {e}: call site `{site}` lost")
            })?;
        }
    }
    Ok("200 examples split into exactly k snippets".into())
}

// 5 -------------------------------------------------------------------------

fn random_pair(rng: &mut ChaCha8Rng, i: usize) -> CodePair {
    let a: f64 = rng.gen_range(-10.0..10.0);
    let n: i64 = rng.gen_range(1..9);
    CodePair {
        id: format!("mlx/mlx.core.add/{i}"),
        api: "mlx.core.add".into(),
        library: LibraryId::new("mlx"),
        source_code: format!("import torch\nx = torch.full(({n}, 2), {a:.3})\ny = torch.add(x, {n})\n"),
        target_code: format!("import mlx.core as mx\nx = mx.full(({n}, 2), {a:.3})\ny = mx.add(x, {n})\n"),
        prompt_ref: "p".into(),
        pair_index: i,
    }
}

fn splice(parent: &str, edits: &[&pairs::Edit]) -> String {
    let mut out = parent.to_string();
    let mut sorted: Vec<&&pairs::Edit> = edits.iter().collect();
    sorted.sort_by_key(|e| std::cmp::Reverse(e.start));
    for e in sorted {
        out.replace_range(e.start..e.end, &e.new);
    }
    out
}

fn mutation_accounting() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..50 {
        let p = random_pair(&mut rng, i);
        let m = rng.gen_range(1..150);
        let seed = rng.gen();
        let v = mutate_pair(&p, m, seed);
        ensure(v.len() == m, || format!("pair {i}: {} variants for m={m}", v.len()))?;
        ensure(v == mutate_pair(&p, m, seed), || format!("pair {i}: not deterministic"))?;
        for mp in &v {
            let s: Vec<_> = mp.edits.iter().filter(|e| e.side == pairs::Side::S).collect();
            let t: Vec<_> = mp.edits.iter().filter(|e| e.side == pairs::Side::T).collect();
            ensure(splice(&p.source_code, &s) == mp.source_code, || format!("pair {i}: source splice differs"))?;
            ensure(splice(&p.target_code, &t) == mp.target_code, || format!("pair {i}: target splice differs"))?;
        }
    }

    // five pairs for one API from the mock model, one hundred variants each
    let (torch, mlx) = (builtin("pytorch"), builtin("mlx"));
    let completion = "```source\nimport torch\ny = torch.add(torch.ones(3), 2.5)\n```\n```target\nimport mlx.core as mx\ny = mx.add(mx.ones(3), 2.5)\n```\n";
    let model = MockModel(Rulebook::new().with_rule("mlx.core.add", completion));
    let api = futur::catalog::ApiInfo::new("mlx.core.add", &LibraryId::new("mlx"), "add(a, b): element-wise sum");
    let ctx = futur::prompt::PromptContext::new("PyTorch", "MLX");
    let prompts = futur::prompt::build_prompts(&api, &Default::default(), 2048, &ctx).prompts;
    let gen = pairs::generate_pairs(&prompts, &model, &PairSettings::with_limit(pairs::DEFAULT_PAIRS_PER_API), &torch, &mlx);
    let total: usize = gen
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| mutate_pair(p, pairs::DEFAULT_MUTATIONS, pairs::variant_seed(0, i)).len())
        .sum();
    ensure(gen.pairs.len() == 5 && total == 500, || format!("{} pairs, {total} variants", gen.pairs.len()))?;
    Ok("|m| exact, deterministic, splice-equal; 5x100 = 500".into())
}

struct MockModel(Rulebook);

impl CodeModel for MockModel {
    fn complete(&self, req: &futur::backend::CompletionRequest) -> Result<String, futur::backend::BackendError> {
        self.0.lookup(&req.prompt).map(str::to_string)
    }
    fn model_id(&self) -> &str {
        "mock"
    }
}

fn builtin(id: &str) -> LibraryProfile {
    Registry::default().get(&LibraryId::new(id)).expect("builtin").clone()
}

// 6 -------------------------------------------------------------------------

fn sh(name: &str) -> RunnerSpec {
    RunnerSpec::new(&[common::runner(name).to_str().unwrap()])
}

fn bomb_jobs(dir: &Path) -> Vec<Job> {
    let kinds = ["abort", "segfault", "fpe", "exit", "ok", "exception", "ok", "abort", "hang", "segfault"];
    let mut jobs = Vec::new();
    for i in 0..20 {
        let seed = dir.join(format!("bomb{i:02}.py"));
        fs::write(&seed, format!("{}\n", kinds[i % kinds.len()])).unwrap();
        for device in [Device::Cpu, Device::Gpu] {
            jobs.push(Job {
                key: JobKey {
                    seed_id: format!("bomb{i:02}"),
                    role: Role::Target,
                    device,
                },
                seed_path: seed.clone(),
                runner: sh("bomb.sh"),
            });
        }
    }
    jobs
}

fn bomb_config(dir: &Path) -> CampaignConfig {
    CampaignConfig {
        parallelism: 4,
        timeout: Duration::from_secs(1),
        gpu_available: true,
        work_dir: dir.join("work"),
    }
}

/// Child half of the kill-and-resume check: run the bomb campaign until killed.
fn bomb_child(dir: &Path) {
    let jobs = bomb_jobs(dir);
    let _ = run_campaign(&jobs, &bomb_config(dir), &dir.join("ledger.ndrec"), None);
}

fn harness_triage() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let expect: [(&str, fn(&ExecStatus) -> bool); 7] = [
        ("abort.sh", |s| *s == ExecStatus::Crash { kind: CrashKind::Abort }),
        ("segfault.sh", |s| *s == ExecStatus::Crash { kind: CrashKind::Segfault }),
        ("fpe.sh", |s| *s == ExecStatus::Crash { kind: CrashKind::Fpe }),
        ("clean.sh", |s| *s == ExecStatus::Ok),
        ("exception.sh", |s| matches!(s, ExecStatus::Exception { type_name, .. } if type_name == "ValueError")),
        ("hang.sh", |s| *s == ExecStatus::Crash { kind: CrashKind::Hang }),
        ("empty.sh", |s| matches!(s, ExecStatus::ProtocolError { .. })),
    ];
    let seed = dir.path().join("seed.py");
    fs::write(&seed, "pass\n").unwrap();
    let mut right = 0;
    for (name, ok) in expect {
        let o = run_seed(name, &seed, Role::Target, Device::Cpu, &sh(name), Duration::from_secs(2), dir.path())
            .map_err(|e| e.to_string())?;
        ensure(ok(&o.status), || format!("{name} classified as {}", o.status.label()))?;
        right += 1;
    }

    // crash bomb: start in a child process, kill it mid-campaign, resume here
    let bomb = dir.path().join("bomb");
    fs::create_dir_all(&bomb).unwrap();
    let ledger = bomb.join("ledger.ndrec");
    let mut child = Command::new(std::env::current_exe().unwrap())
        .env("FUTUR_BOMB_CHILD", &bomb)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(60);
    let lines = || fs::read_to_string(&ledger).map(|t| t.lines().count()).unwrap_or(0);
    while lines() < 8 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(20));
    }
    let _ = child.kill();
    let _ = child.wait();
    let before = lines();
    ensure((1..40).contains(&before), || format!("kill landed after {before} of 40 jobs"))?;

    let jobs = bomb_jobs(&bomb);
    let stop = AtomicBool::new(false);
    let rep = run_campaign(&jobs, &bomb_config(&bomb), &ledger, Some(&stop)).map_err(|e| e.to_string())?;
    ensure(!stop.load(Ordering::SeqCst) && !rep.interrupted, || "resume interrupted".into())?;
    let recorded = futur::harness::read_ledger(&ledger).map_err(|e| e.to_string())?;
    let mut seen: HashMap<JobKey, usize> = HashMap::new();
    for o in &recorded {
        *seen.entry(o.key()).or_default() += 1;
    }
    ensure(seen.len() == 40 && seen.values().all(|&c| c == 1), || {
        format!("{} distinct jobs, {} records", seen.len(), recorded.len())
    })?;
    let crashes = recorded.iter().filter(|o| o.status.is_crash()).count();
    Ok(format!(
        "{right}/7 runners classified; 40 jobs exactly once after a kill at {before} ({crashes} crashes)"
    ))
}

// 7 -------------------------------------------------------------------------

fn dataset_round_trip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = common::toy_pipeline(dir.path(), &[]);
    for st in [Stage::Catalog, Stage::Prompts, Stage::Pairs, Stage::Mutate, Stage::Dataset, Stage::FinetuneConfig] {
        p.run_stage(st).map_err(|e| e.to_string())?;
    }
    let data = dir.path().join("dataset");
    let gen_text = common::text(&data.join("generation.ndrec"));
    let conv_text = common::text(&data.join("conversion.ndrec"));
    let (gen, conv) = futur::pipeline::read_datasets(dir.path())?;
    let reser = |lines: Vec<String>| lines.into_iter().map(|l| l + "\n").collect::<String>();
    ensure(
        reser(gen.iter().map(|r: &GenerationRecord| serde_json::to_string(r).unwrap()).collect()) == gen_text,
        || "generation dataset does not re-serialize byte-exactly".into(),
    )?;
    ensure(
        reser(conv.iter().map(|r: &ConversionRecord| serde_json::to_string(r).unwrap()).collect()) == conv_text,
        || "conversion dataset does not re-serialize byte-exactly".into(),
    )?;
    ensure(gen.len() == conv.len() && !gen.is_empty(), || format!("{} vs {} records", gen.len(), conv.len()))?;
    let sentence = "Convert this code to code that uses the target library (ToyLib)";
    ensure(conversion_problem("ToyLib") == sentence, || "problem sentence".into())?;
    ensure(conv.iter().all(|r| r.problem == sentence), || "a conversion record has another problem".into())?;
    let cfg = FineTuneConfig::parse(&common::text(&dir.path().join("finetune/config.txt"))).map_err(|e| e.to_string())?;
    ensure(
        cfg.learning_rate == 3e-4
            && cfg.max_steps == 400
            && cfg.quantization_bits == 4
            && cfg.validation_fraction == 0.1
            && cfg.validation_interval_steps == 20,
        || format!("finetune config {cfg:?}"),
    )?;
    Ok(format!("{} + {} records round-trip; trainer defaults echoed", gen.len(), conv.len()))
}

// 8 -------------------------------------------------------------------------

fn judgements(out: &Path) -> Result<Vec<SeedJudgement>, String> {
    futur::util::read_ndrec(&out.join("oracle/judgements.ndrec")).map_err(|e| e.to_string())
}

fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path();
    let run = common::futur(out, &["all"]);
    ensure(run.status.success(), || format!("futur all: {}", String::from_utf8_lossy(&run.stderr)))?;
    let tables = common::text(&out.join("report/tables.md"));
    for h in ["Campaign metrics", "Bugs by status", "Bugs by cause", "Bugs by symptom"] {
        ensure(tables.contains(h), || format!("report lacks `{h}`"))?;
    }
    let add = |js: &[SeedJudgement]| js.iter().find(|j| j.seed_id == "gen-toylib.add-0").and_then(|j| j.backends.clone());
    let v = add(&judgements(out)?).ok_or("no judgement for the divergent add seed")?;
    let d = v.distance.ok_or("no distance")?;
    ensure(v.kind == VerdictKind::PotentialBug && v.symptom == Some(Symptom::CpuGpu) && d > 1e-2, || {
        format!("add at T=0.01: {v:?}")
    })?;
    let bugs = futur::oracle::read_bug_ledger(&out.join("bugs"), "toy").map_err(|e| e.to_string())?;
    let nan = bugs
        .iter()
        .find(|b| b.primary_api == "toylib.sum" && b.symptom == Symptom::CpuGpu)
        .ok_or("NaN sum fixture not flagged")?;
    ensure(nan.cause == Cause::NI, || format!("NaN fixture classified {}", nan.cause.as_str()))?;

    // same campaign, threshold raised above the observed distance
    let raised = format!("oracle.threshold={}", d * 2.0);
    let rerun = common::futur(out, &["all", "--override", &raised]);
    ensure(rerun.status.success(), || format!("rerun: {}", String::from_utf8_lossy(&rerun.stderr)))?;
    let stdout = String::from_utf8_lossy(&rerun.stdout);
    ensure(stdout.contains("run: up to date"), || format!("execution was repeated:\n{stdout}"))?;
    let v2 = add(&judgements(out)?).ok_or("judgement vanished")?;
    ensure(v2.kind == VerdictKind::Consistent, || format!("add at T={}: {v2:?}", d * 2.0))?;
    Ok(format!("report written; add flagged at d={d:.4} > 0.01, consistent at T={:.4}; NaN sum is NI", d * 2.0))
}

// 9 -------------------------------------------------------------------------

fn mining_fixture() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = LibraryId::new("pytorch");
    let dump = common::fixtures().join("nans_and_infs.ndjson");
    let fetched = corpus::fetch_issues(&src, "Nans and Infs", &FetchMode::OfflineDump(dump), None).map_err(|e| e.to_string())?;
    let mut store = CorpusStore::create(dir.path(), "py").map_err(|e| e.to_string())?;
    let imports = ImportTable::from_profiles([&builtin("pytorch")]);
    let r = corpus::mine_issues(&fetched.issues, corpus::DEFAULT_KEYWORDS, &imports, &mut store).map_err(|e| e.to_string())?;
    ensure(r.issues == 138 && r.stored == 43, || format!("{r:?}"))?;
    ensure(r.stored + r.rejected == r.extracted, || format!("{r:?}"))?;
    let codes = CorpusStore::load(dir.path()).map_err(|e| e.to_string())?;
    ensure(codes.len() == 43, || format!("{} codes reloaded", codes.len()))?;
    for c in &codes {
        let on_disk = common::text(&dir.path().join(&c.storage_path));
        ensure(python::is_parseable(&on_disk), || format!("{} does not re-parse", c.id))?;
    }
    Ok(format!("{} issues, {} extracted, 43 stored, {} rejected", r.issues, r.extracted, r.rejected))
}

fn main() {
    if let Some(dir) = std::env::var_os("FUTUR_BOMB_CHILD") {
        bomb_child(Path::new(&dir));
        return;
    }
    // libtest flags (e.g. --nocapture) are accepted and ignored; `--list`
    // must print nothing so test discovery does not run the suite
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(u32, &str, Duration, fn() -> Check); 9] = [
        (1, "metrics fixtures", Duration::from_secs(1), metrics_fixtures),
        (2, "API-coverage oracle", Duration::from_secs(5), coverage_oracle),
        (3, "Euclidean-distance oracle", Duration::from_secs(5), distance_oracle),
        (4, "example decomposition", Duration::from_secs(10), decomposition),
        (5, "mutation accounting", Duration::from_secs(10), mutation_accounting),
        (6, "harness triage", Duration::from_secs(120), harness_triage),
        (7, "dataset round-trip", Duration::from_secs(5), dataset_round_trip),
        (8, "end-to-end dry run", Duration::from_secs(60), end_to_end),
        (9, "corpus mining fixture", Duration::from_secs(10), mining_fixture),
    ];
    let mut failed = 0;
    for (n, name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if took <= budget => (true, d),
            Ok(d) => (false, format!("{d}; took {took:.2?}, budget {budget:?}")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {n} [{}] {name}: {detail} ({:.2}s)",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
